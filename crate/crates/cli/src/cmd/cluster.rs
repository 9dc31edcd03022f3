use heliomap::raster::BAND_COUNT;
use heliomap::weaklabel::{fit_clusters, sample_pixels};
use heliomap::Patch;
use serde_json::json;

use crate::data::{load_patch, raster_files, write_json};
use crate::error::CliResult;
use crate::{ClusterArgs, Context};

/// Writes `clusters.json` (the model a labeling workspace expects) and
/// `cluster_trace.json`.
pub fn run(ctx: &mut Context, a: ClusterArgs) -> CliResult<()> {
    if let Some(k) = a.k {
        ctx.cfg.cluster.k = k;
    }
    let dir = ctx.path(&a.patches, &ctx.cfg.paths.patches, "patches")?;
    let stage = ctx.cfg.cluster;
    let mut run = ctx.start("cluster")?;
    let model_path = run.output(ctx.out.join("clusters.json"))?;
    let trace_path = run.output(ctx.out.join("cluster_trace.json"))?;
    run.parameters(&json!({ "patches": dir, "cluster": stage }))?;
    run.input(&dir)?;
    let files = raster_files(&dir)?;
    let patches = run.timed("load", || files.values().map(|p| load_patch::<f32>(p)).collect::<CliResult<Vec<Patch>>>())?;
    let refs: Vec<&Patch> = patches.iter().collect();
    let samples = run.timed("sample", || sample_pixels(&refs, stage.samples_per_patch, stage.seed));
    log::info!("fitting k={} on {} pixels from {} patches", stage.k, samples.len() / BAND_COUNT, patches.len());
    let (model, trace) = run.timed("fit", || fit_clusters(&samples, BAND_COUNT, &stage.params()))?;
    write_json(&model_path, &model)?;
    write_json(
        &trace_path,
        &json!({
            "inertia": trace.inertia,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "patches": files.keys().collect::<Vec<_>>(),
            "samples": samples.len() / BAND_COUNT,
        }),
    )?;
    run.finish()?;
    Ok(())
}
