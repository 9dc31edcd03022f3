use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use heliomap::analysis::{
    correlation_table, crosstab_table, farm_recall, landcover_crosstab, metrics_table, pearson, ConfusionCounts,
    MetricsReport, YearFilter,
};
use heliomap::crs;
use heliomap::raster::{read_stack, CategoricalRaster, Grid, RasterFormat};
use heliomap::vector::{Coord, FeatureCollection, Polygon};
use heliomap::CorrelationReport;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{load_geojson, load_mask, raster_files, read_json, write_json, write_text};
use crate::error::{io_err, CliError, CliResult};
use crate::{Context, CorrelateArgs, CrosstabArgs, MetricsArgs};

/// Pixel counts over one mask pair, or over every reference mask in a
/// directory and its namesake prediction.
fn confusion(pred: &Path, gt: &Path) -> CliResult<(ConfusionCounts, usize)> {
    if !gt.is_dir() {
        return Ok((ConfusionCounts::from_masks(&load_mask(pred)?, &load_mask(gt)?)?, 1));
    }
    let gts = raster_files(gt)?;
    let preds = raster_files(pred)?;
    let mut total = ConfusionCounts::default();
    for (id, g) in &gts {
        let p = preds.get(id).ok_or_else(|| CliError::invalid(format!("no prediction for reference mask {id:?}")))?;
        let c = ConfusionCounts::from_masks(&load_mask(p)?, &load_mask(g)?).map_err(|e| CliError::invalid(format!("{id}: {e}")))?;
        total.merge(&c);
    }
    Ok((total, gts.len()))
}

fn polygons(fc: &FeatureCollection) -> Vec<Polygon> {
    fc.features.iter().flat_map(|f| f.geometry.polygons().iter().cloned()).collect()
}

fn project(polys: &[Polygon], epsg: i32) -> CliResult<Vec<Polygon>> {
    Ok(polys
        .iter()
        .map(|p| {
            p.try_map_coords(|c: Coord| {
                let (x, y) = crs::from_lonlat(epsg, c[0], c[1])?;
                Ok([x, y])
            })
        })
        .collect::<heliomap::Result<_>>()?)
}

/// Writes `metrics.json` and `metrics.txt`.
pub fn metrics(ctx: &mut Context, a: MetricsArgs) -> CliResult<()> {
    let stage = ctx.cfg.metrics;
    let mut run = ctx.start("metrics")?;
    let jp = run.output(ctx.out.join("metrics.json"))?;
    let tp = run.output(ctx.out.join("metrics.txt"))?;
    run.parameters(&json!({
        "pred": a.pred, "gt": a.gt, "pred_polygons": a.pred_polygons, "gt_polygons": a.gt_polygons, "metrics": stage,
    }))?;
    run.input(&a.pred)?;
    run.input(&a.gt)?;
    let (counts, pairs) = run.timed("pixels", || confusion(&a.pred, &a.gt))?;
    let mut report = MetricsReport::from_counts(counts, stage.mean_acc);
    if let (Some(pp), Some(gp)) = (&a.pred_polygons, &a.gt_polygons) {
        run.input(pp)?;
        run.input(gp)?;
        let gt = polygons(&load_geojson(gp)?);
        let first = gt.first().ok_or_else(|| CliError::invalid(format!("{} has no polygons", gp.display())))?;
        // Overlap areas are compared in metres, in the zone of the first reference farm.
        let epsg = crs::utm_epsg_for(first.exterior[0][0], first.exterior[0][1]);
        let pred = project(&polygons(&load_geojson(pp)?), epsg)?;
        report.farm_recall = Some(farm_recall(&pred, &project(&gt, epsg)?, stage.min_overlap)?);
    }
    log::info!("IoU {:.2}% over {pairs} mask pairs", report.iou);
    write_json(&jp, &json!({ "name": a.name, "pairs": pairs, "report": report }))?;
    write_text(&tp, &metrics_table(&[(a.name.as_str(), &report)]))?;
    run.finish()?;
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct CapacityRow {
    period: String,
    capacity: f64,
    area: f64,
}

/// Writes `correlation.json` and `correlation.txt`.
pub fn correlate(ctx: &mut Context, a: CorrelateArgs) -> CliResult<()> {
    let mut run = ctx.start("correlate")?;
    let jp = run.output(ctx.out.join("correlation.json"))?;
    let tp = run.output(ctx.out.join("correlation.txt"))?;
    run.parameters(&json!({ "table": a.table }))?;
    run.input(&a.table)?;
    let file = std::fs::File::open(&a.table).map_err(|e| io_err(&a.table, e))?;
    let rows = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file)
        .deserialize()
        .collect::<Result<Vec<CapacityRow>, _>>()
        .map_err(|e| CliError::invalid(format!("{}: {e}", a.table.display())))?;
    let capacity: Vec<f64> = rows.iter().map(|r| r.capacity).collect();
    let area: Vec<f64> = rows.iter().map(|r| r.area).collect();
    let report: CorrelationReport = pearson(&capacity, &area)?;
    let labels: Vec<String> = rows.iter().map(|r| r.period.clone()).collect();
    write_json(&jp, &json!({ "report": report, "rows": rows }))?;
    write_text(&tp, &correlation_table(&labels, &capacity, &area, &report))?;
    run.finish()?;
    Ok(())
}

fn load_landcover(raster: &Path, legend: &Path) -> CliResult<CategoricalRaster> {
    let legend: BTreeMap<u16, String> = read_json(legend)?;
    let stack = read_stack(raster, RasterFormat::from_path(raster)?)?;
    let values: Grid<f64> = stack.band_grid(0)?;
    let codes = values
        .data()
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&v) {
                Ok(v as u16)
            } else {
                Err(CliError::invalid(format!("{}: land cover code {v} is not a u16", raster.display())))
            }
        })
        .collect::<CliResult<Vec<u16>>>()?;
    Ok(CategoricalRaster::new(Grid::from_vec(values.width(), values.height(), codes)?, legend, stack.transform)?)
}

/// Writes `crosstab.json` and `crosstab.txt`.
pub fn crosstab(ctx: &mut Context, a: CrosstabArgs) -> CliResult<()> {
    let mut run = ctx.start("crosstab")?;
    let jp = run.output(ctx.out.join("crosstab.json"))?;
    let tp = run.output(ctx.out.join("crosstab.txt"))?;
    run.parameters(&json!({
        "farms": a.farms, "landcover": a.landcover, "legend": a.legend, "years": a.years, "from": a.from, "to": a.to,
    }))?;
    run.input(&a.farms)?;
    let farms = load_geojson(&a.farms)?;
    run.input(&a.landcover)?;
    run.input(&a.legend)?;
    let lc = run.timed("load", || load_landcover(&a.landcover, &a.legend))?;
    let filter = if a.years.is_some() || a.from.is_some() || a.to.is_some() {
        let years: HashMap<u64, i32> = match &a.years {
            Some(p) => {
                run.input(p)?;
                read_json(p)?
            }
            None => HashMap::new(),
        };
        Some(YearFilter { from: a.from, to: a.to, years })
    } else {
        None
    };
    let tab = run.timed("tabulate", || landcover_crosstab(&farms, &lc, filter.as_ref()))?;
    write_json(&jp, &tab)?;
    write_text(&tp, &crosstab_table(&tab))?;
    run.finish()?;
    Ok(())
}
