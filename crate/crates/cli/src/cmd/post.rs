use std::collections::{BTreeMap, HashMap};

use heliomap::analysis::ValidationTag;
use heliomap::postvec::{
    export_farms, filter_mask, group_farms, polygonize, polygons_from_geojson, polygons_to_geojson, split_by_tags,
};
use heliomap::raster::write_mask;
use heliomap::vector::{write_geojson, FeatureCollection};
use heliomap::Patch;
use serde::Serialize;
use serde_json::json;

use crate::data::{load_geojson, load_mask, load_patch, lookup, raster_files, read_json, write_json};
use crate::error::{CliError, CliResult};
use crate::{Context, FarmsArgs, PostArgs};

#[derive(Serialize)]
struct PostRecord {
    id: String,
    predicted: usize,
    kept: usize,
    polygons: usize,
}

/// Applies the index and road filters to every predicted mask, then traces
/// the survivors. Polygon ids are `<patch id>/<component>`.
pub fn post(ctx: &mut Context, a: PostArgs) -> CliResult<()> {
    let pred = ctx.out_or(&a.pred, "pred");
    let patches = ctx.path(&a.patches, &ctx.cfg.paths.patches, "patches")?;
    let roads = a.roads.clone().or_else(|| ctx.cfg.paths.roads.clone());
    let filter = ctx.cfg.filter;
    let mut run = ctx.start("post")?;
    let out_dir = run.output_dir(ctx.out.join("filtered"))?;
    let poly_path = run.output(ctx.out.join("polygons.geojson"))?;
    let sp = run.output(ctx.out.join("post_summary.json"))?;
    run.parameters(&json!({ "pred": pred, "patches": patches, "roads": roads, "filter": filter }))?;
    run.input(&pred)?;
    run.input(&patches)?;
    let roads = match &roads {
        Some(p) => {
            run.input(p)?;
            load_geojson(p)?
        }
        None => FeatureCollection::default(),
    };
    let masks = raster_files(&pred)?;
    let pf = raster_files(&patches)?;
    let mut polys = Vec::new();
    let mut records = Vec::new();
    for (id, path) in &masks {
        let mask = load_mask(path)?;
        let patch: Patch = load_patch(lookup(&pf, id, "patch")?)?;
        let kept = run.timed("filter", || filter_mask(&mask, &patch, &roads, &filter))?;
        write_mask(&kept, &out_dir.join(format!("{id}.rgrid")))?;
        let mut found = run.timed("polygonize", || polygonize(&kept))?;
        for p in &mut found {
            p.id = format!("{id}/{}", p.id);
        }
        records.push(PostRecord {
            id: id.clone(),
            predicted: mask.count_positive(),
            kept: kept.count_positive(),
            polygons: found.len(),
        });
        polys.extend(found);
    }
    log::info!("{} polygons from {} masks", polys.len(), masks.len());
    write_geojson(&polygons_to_geojson(&polys)?, &poly_path)?;
    write_json(&sp, &json!({ "patches": records }))?;
    run.finish()?;
    Ok(())
}

/// Groups polygons into farms and writes `farms.geojson`. Polygons tagged
/// invalid are dropped and rooftops go to `rooftop.geojson`.
pub fn farms(ctx: &mut Context, a: FarmsArgs) -> CliResult<()> {
    if let Some(d) = a.distance {
        ctx.cfg.farms.distance_m = d;
    }
    let polygons = ctx.out_or(&a.polygons, "polygons.geojson");
    let states = a.states.clone().or_else(|| ctx.cfg.paths.states.clone());
    let distance = ctx.cfg.farms.distance_m;
    let mut run = ctx.start("farms")?;
    let path = run.output(ctx.out.join("farms.geojson"))?;
    let rp = run.output(ctx.out.join("rooftop.geojson"))?;
    run.parameters(&json!({ "polygons": polygons, "states": states, "tags": a.tags, "distance_m": distance }))?;
    run.input(&polygons)?;
    let polys = polygons_from_geojson(&load_geojson(&polygons)?)?;
    let states = match &states {
        Some(p) => {
            run.input(p)?;
            load_geojson(p)?
        }
        None => FeatureCollection::default(),
    };
    let tags: HashMap<String, ValidationTag> = match &a.tags {
        Some(p) => {
            run.input(p)?;
            let raw: BTreeMap<String, String> = read_json(p)?;
            raw.into_iter()
                .map(|(k, v)| v.parse().map(|t| (k, t)).map_err(|e: heliomap::Error| CliError::invalid(format!("{}: {e}", p.display()))))
                .collect::<CliResult<_>>()?
        }
        None => HashMap::new(),
    };
    let total = polys.len();
    let (kept, rooftop) = split_by_tags(polys, &tags);
    let groups = run.timed("group", || group_farms(&kept, distance))?;
    log::info!("{} farms from {} of {total} polygons; {} rooftops", groups.len(), kept.len(), rooftop.len());
    run.timed("export", || export_farms(&groups, &states, &path))?;
    write_geojson(&polygons_to_geojson(&rooftop)?, &rp)?;
    run.finish()?;
    Ok(())
}
