use heliomap::weaklabel::assemble_dataset;
use serde_json::json;

use crate::data::{raster_files, write_json};
use crate::error::{CliError, CliResult};
use crate::{Context, DatasetArgs};

/// Splits mask ids into `split.json`.
pub fn run(ctx: &mut Context, a: DatasetArgs) -> CliResult<()> {
    let masks = ctx.path(&a.masks, &ctx.cfg.paths.masks, "masks")?;
    let patches = a.patches.clone().or_else(|| ctx.cfg.paths.patches.clone());
    let stage = ctx.cfg.dataset;
    let mut run = ctx.start("dataset")?;
    let path = run.output(ctx.out.join("split.json"))?;
    run.parameters(&json!({ "masks": masks, "patches": patches, "dataset": stage }))?;
    run.input(&masks)?;
    let ids: Vec<String> = raster_files(&masks)?.into_keys().collect();
    if let Some(p) = &patches {
        run.input(p)?;
        let have = raster_files(p)?;
        if let Some(id) = ids.iter().find(|id| !have.contains_key(*id)) {
            return Err(CliError::invalid(format!("mask {id:?} has no patch in {}", p.display())));
        }
    }
    let split = assemble_dataset(&ids, stage.ratios, stage.seed)?;
    log::info!("split {} ids into {}/{}/{}", ids.len(), split.train.len(), split.val.len(), split.test.len());
    write_json(&path, &split)?;
    run.finish()?;
    Ok(())
}
