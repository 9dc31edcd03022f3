use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::crs;
use crate::raster::CategoricalRaster;
use crate::vector::{rasterize, FeatureCollection, Polygon};
use crate::{Error, Result};

/// Restricts the cross-tab to farms built within `[from, to]`.
///
/// Years come from `years` keyed by fid, falling back to a numeric
/// `year_built` property. Farms without a year are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct YearFilter {
    pub from: Option<i32>,
    pub to: Option<i32>,
    #[serde(default)]
    pub years: HashMap<u64, i32>,
}

impl YearFilter {
    fn year_of(&self, props: &serde_json::Map<String, Value>) -> Option<i32> {
        props
            .get("fid")
            .and_then(Value::as_u64)
            .and_then(|fid| self.years.get(&fid).copied())
            .or_else(|| props.get("year_built").and_then(Value::as_i64).map(|y| y as i32))
    }

    fn keeps(&self, props: &serde_json::Map<String, Value>) -> bool {
        match self.year_of(props) {
            Some(y) => self.from.is_none_or(|f| y >= f) && self.to.is_none_or(|t| y <= t),
            None => false,
        }
    }
}

/// Share of farm-covered cells per land-cover class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    /// One row per legend class in legend order: (code, name, cells, percent).
    pub rows: Vec<CrossTabRow>,
    pub total_cells: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTabRow {
    pub code: u16,
    pub name: String,
    pub cells: u64,
    pub percent: f64,
}

impl CrossTab {
    pub fn percent_of(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.percent)
    }

    /// Classes with at least one covered cell, as name → percent.
    pub fn present(&self) -> BTreeMap<String, f64> {
        self.rows.iter().filter(|r| r.cells > 0).map(|r| (r.name.clone(), r.percent)).collect()
    }
}

/// Tallies land-cover cells whose centre lies inside any farm polygon.
///
/// Farm geometries are WGS84 and are projected to the raster's CRS. A cell
/// covered by several farms counts once.
pub fn landcover_crosstab(farms: &FeatureCollection, lc: &CategoricalRaster, year_filter: Option<&YearFilter>) -> Result<CrossTab> {
    let t = lc.transform();
    let mut polys: Vec<Polygon> = Vec::new();
    for f in &farms.features {
        if year_filter.is_some_and(|yf| !yf.keeps(&f.properties)) {
            continue;
        }
        for p in f.geometry.polygons() {
            polys.push(if t.crs_code == 4326 {
                p.clone()
            } else {
                p.try_map_coords(|c| {
                    let (x, y) = crs::from_lonlat(t.crs_code, c[0], c[1])?;
                    Ok([x, y])
                })?
            });
        }
    }
    let grid = lc.grid();
    let covered = rasterize(&polys, t, grid.width(), grid.height());
    let mut cells: BTreeMap<u16, u64> = lc.legend().keys().map(|&k| (k, 0)).collect();
    for (&code, &on) in grid.data().iter().zip(covered.data()) {
        if on == 1 {
            *cells.get_mut(&code).expect("codes validated against legend") += 1;
        }
    }
    let total: u64 = cells.values().sum();
    if total == 0 {
        return Err(Error::EmptyCrossTab);
    }
    let rows = lc
        .legend()
        .iter()
        .map(|(&code, name)| CrossTabRow {
            code,
            name: name.clone(),
            cells: cells[&code],
            percent: 100.0 * cells[&code] as f64 / total as f64,
        })
        .collect();
    Ok(CrossTab { rows, total_cells: total })
}
