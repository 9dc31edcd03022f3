use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use heliomap::crs;
use heliomap::raster::{LabelMask, RasterPatch};
use heliomap::tcm::{change_result, detect_change, kl_series, ChangeResult, SceneSeries, TcmConfig};
use heliomap::vector::{rasterize, FeatureCollection, Polygon};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{load_geojson, load_patch, read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::runlog::Run;
use crate::{Context, TcmArgs};

/// Scene time series per farm. Scene paths are relative to the manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    farms: Vec<FarmScenes>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FarmScenes {
    fid: u64,
    scenes: Vec<Scene>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Scene {
    date: NaiveDate,
    path: PathBuf,
}

#[derive(Debug, Serialize)]
struct FarmSeries {
    fid: u64,
    dates: Vec<NaiveDate>,
    kl: Vec<f64>,
    median: f64,
    change: Option<ChangeResult>,
}

fn footprint_polygons(farms: &FeatureCollection, fid: u64) -> CliResult<Vec<Polygon>> {
    let polys: Vec<Polygon> = farms
        .features
        .iter()
        .filter(|f| f.properties.get("fid").and_then(|v| v.as_u64()) == Some(fid))
        .flat_map(|f| f.geometry.polygons().iter().cloned())
        .collect();
    if polys.is_empty() {
        return Err(CliError::invalid(format!("no farm polygon with fid {fid}")));
    }
    Ok(polys)
}

/// Rasterizes WGS84 polygons onto the scene grid.
fn footprint(polys: &[Polygon], scene: &RasterPatch<f64>) -> CliResult<LabelMask> {
    let t = *scene.transform();
    let projected = if t.crs_code == 4326 {
        polys.to_vec()
    } else {
        polys
            .iter()
            .map(|p| {
                p.try_map_coords(|c| {
                    let (x, y) = crs::from_lonlat(t.crs_code, c[0], c[1])?;
                    Ok([x, y])
                })
            })
            .collect::<heliomap::Result<_>>()?
    };
    Ok(LabelMask::new(rasterize(&projected, &t, scene.width(), scene.height()), t)?)
}

fn date_farm(run: &mut Run, base: &Path, farm: &FarmScenes, farms: &FeatureCollection, cfg: &TcmConfig) -> CliResult<FarmSeries> {
    let mut scenes = Vec::with_capacity(farm.scenes.len());
    for s in &farm.scenes {
        let path = base.join(&s.path);
        run.input(&path)?;
        scenes.push((s.date, load_patch::<f64>(&path)?));
    }
    scenes.sort_by_key(|(d, _)| *d);
    let series = SceneSeries::new(scenes).map_err(|e| CliError::invalid(format!("fid {}: {e}", farm.fid)))?;
    let fp = footprint(&footprint_polygons(farms, farm.fid)?, &series.scenes()[0])?;
    if fp.count_positive() == 0 {
        return Err(CliError::invalid(format!("farm {} does not cover any scene pixel", farm.fid)));
    }
    let kl = run.timed("kl", || kl_series(&series, &fp, cfg))?;
    let index = detect_change(&kl, cfg.dip_tolerance)?;
    Ok(FarmSeries {
        fid: farm.fid,
        dates: series.dates().to_vec(),
        kl: kl.values,
        median: kl.median,
        change: change_result(index, series.dates()),
    })
}

/// Writes `tcm.json` (divergence series per farm) and `years.json`
/// (construction year by fid, for farms where one was detected).
pub fn run(ctx: &mut Context, a: TcmArgs) -> CliResult<()> {
    let farms_path = ctx.out_or(&a.farms, "farms.geojson");
    let cfg = ctx.cfg.tcm;
    let mut run = ctx.start("tcm")?;
    let tp = run.output(ctx.out.join("tcm.json"))?;
    let yp = run.output(ctx.out.join("years.json"))?;
    run.parameters(&json!({ "manifest": a.manifest, "farms": farms_path, "tcm": cfg }))?;
    run.input(&a.manifest)?;
    run.input(&farms_path)?;
    let manifest: Manifest = read_json(&a.manifest)?;
    let farms = load_geojson(&farms_path)?;
    let base = a.manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut results = Vec::new();
    let mut years = BTreeMap::new();
    for farm in &manifest.farms {
        let r = date_farm(&mut run, &base, farm, &farms, &cfg)?;
        match &r.change {
            Some(c) => {
                log::info!("fid {}: built {}", r.fid, c.date);
                years.insert(r.fid, c.year);
            }
            None => log::info!("fid {}: no change detected", r.fid),
        }
        results.push(r);
    }
    write_json(&tp, &json!({ "farms": results }))?;
    write_json(&yp, &years)?;
    run.finish()?;
    Ok(())
}
