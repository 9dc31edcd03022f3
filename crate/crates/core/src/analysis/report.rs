//! Aligned plain-text tables. JSON output is the serde form of the report
//! structs.

use super::{CorrelationReport, CrossTab, MetricsReport, ValidationTag, ValidationTally};

/// Left-aligns the first column, right-aligns the rest.
fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Segmentation results, one row per model. A farm recall column is added
/// when any row has one.
pub fn metrics_table(rows: &[(&str, &MetricsReport)]) -> String {
    let farm = rows.iter().any(|(_, r)| r.farm_recall.is_some());
    let mut header = vec!["Model", "IoU (%)", "Mean Acc (%)", "Pix Recall (%)", "Pix Precision (%)"];
    if farm {
        header.push("Recall (%)");
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            let mut v = vec![
                name.to_string(),
                format!("{:.2}", r.iou),
                format!("{:.2}", r.mean_acc),
                format!("{:.2}", r.pix_recall),
                format!("{:.2}", r.pix_precision),
            ];
            if farm {
                v.push(r.farm_recall.map_or_else(|| "-".to_string(), |f| format!("{f:.1}")));
            }
            v
        })
        .collect();
    render(&header, &body)
}

/// Capacity against predicted area per period, followed by r and R².
pub fn correlation_table(labels: &[String], capacity: &[f64], area: &[f64], report: &CorrelationReport<f64>) -> String {
    let body: Vec<Vec<String>> = labels
        .iter()
        .zip(capacity.iter().zip(area))
        .map(|(l, (c, a))| vec![l.clone(), format!("{c}"), format!("{a:.0}")])
        .collect();
    let mut out = render(&["Time", "Capacity", "Predicted Area (m2)"], &body);
    out.push_str(&format!("Pearson r = {:.3}, R2 = {:.2}%\n", report.r, report.r_squared));
    out
}

impl CrossTab {
    /// `"{class} {percent:.2}%"` for every class with covered cells.
    pub fn row_lines(&self) -> Vec<String> {
        self.rows.iter().filter(|r| r.cells > 0).map(|r| format!("{} {:.2}%", r.name, r.percent)).collect()
    }
}

pub fn crosstab_table(tab: &CrossTab) -> String {
    let body: Vec<Vec<String>> =
        tab.rows.iter().filter(|r| r.cells > 0).map(|r| vec![r.name.clone(), format!("{:.2}%", r.percent)]).collect();
    render(&["Previous Landcover Class", "Landcover Percentage (%)"], &body)
}

pub fn validation_table(t: &ValidationTally) -> String {
    let name = |tag| match tag {
        ValidationTag::Valid => "Valid Farms",
        ValidationTag::Rooftop => "Roof Top Solar",
        ValidationTag::Invalid => "Invalid Farms",
    };
    let mut body: Vec<Vec<String>> = ValidationTag::ALL
        .iter()
        .map(|&tag| vec![name(tag).to_string(), t.count(tag).to_string(), format!("{:.2}%", t.pct(tag))])
        .collect();
    let total_pct = if t.total == 0 { 0.0 } else { 100.0 };
    body.push(vec!["Total".into(), t.total.to_string(), format!("{total_pct:.2}%")]);
    body.push(vec!["Correct (valid + rooftop)".into(), (t.valid + t.rooftop).to_string(), format!("{:.2}%", t.correct_pct)]);
    render(&["Category", "# of Records", "Perc. Contribution"], &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{validation_tally, ConfusionCounts, CrossTabRow, MeanAccuracy};

    #[test]
    fn metrics_columns() {
        let mut r = MetricsReport::from_counts(ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 }, MeanAccuracy::Balanced);
        let t = metrics_table(&[("Model", &r)]);
        assert!(t.lines().next().unwrap().ends_with("Pix Precision (%)"));
        assert!(t.contains("33.33"));
        r.farm_recall = Some(94.44);
        assert!(metrics_table(&[("Model + HNM", &r)]).contains("94.4"));
    }

    #[test]
    fn crosstab_rows() {
        let tab = CrossTab {
            rows: vec![
                CrossTabRow { code: 1, name: "Kharif Only".into(), cells: 3, percent: 75.0 },
                CrossTabRow { code: 2, name: "Scrubland".into(), cells: 1, percent: 25.0 },
                CrossTabRow { code: 3, name: "Built Up".into(), cells: 0, percent: 0.0 },
            ],
            total_cells: 4,
        };
        assert_eq!(tab.row_lines(), vec!["Kharif Only 75.00%", "Scrubland 25.00%"]);
        let s = crosstab_table(&tab);
        assert!(!s.contains("Built Up"));
        assert_eq!(s.lines().count(), 4);
    }

    #[test]
    fn validation_rows() {
        let mut tags = vec![ValidationTag::Valid; 3];
        tags.push(ValidationTag::Invalid);
        let s = validation_table(&validation_tally(tags));
        assert!(s.contains("75.00%") && s.contains("25.00%") && s.contains("100.00%"));
    }
}
