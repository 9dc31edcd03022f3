use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use heliomap::raster::{write_band, write_mask, write_raster, RasterFormat};
use heliomap::segmodel::{
    hard_negative_pairs, load_checkpoint, mine_hard_negatives, predict, save_checkpoint, train as fit, HnmScene,
    PixelModel, Scaler, TrainConfig, TrainReport, TrainingPair,
};
use heliomap::weaklabel::DatasetSplit;
use heliomap::SegModel;
use serde::Serialize;
use serde_json::json;

use crate::data::{file_safe, load_mask, load_patch, lookup, raster_files, read_json, write_json};
use crate::error::{io_err, CliResult};
use crate::runlog::Run;
use crate::{Context, HnmArgs, InferArgs, TrainArgs};

fn load_pairs(
    run: &mut Run,
    ids: &[String],
    patches: &BTreeMap<String, PathBuf>,
    masks: &BTreeMap<String, PathBuf>,
) -> CliResult<Vec<TrainingPair<f64>>> {
    run.timed("load", || {
        ids.iter()
            .map(|id| {
                let patch = load_patch::<f64>(lookup(patches, id, "patch")?)?;
                let mask = load_mask(lookup(masks, id, "mask")?)?;
                Ok(TrainingPair::new(id.clone(), patch, mask)?)
            })
            .collect()
    })
}

/// Fits the input scaler on the first run only, so retraining keeps the
/// feature space the weights were learned in.
fn fit_scaler(model: &mut SegModel, rows: &[Vec<f64>]) {
    if model.scaler.is_none() {
        let dim = model.feature_config().len();
        model.scaler = Some(Scaler::fit(rows.iter().map(Vec::as_slice), dim));
    }
}

struct TrainInputs {
    train: Vec<TrainingPair<f64>>,
    val: Vec<TrainingPair<f64>>,
}

fn train_inputs(
    run: &mut Run,
    patches: &Path,
    masks: &Path,
    split: &Path,
) -> CliResult<TrainInputs> {
    for p in [patches, masks, split] {
        run.input(p)?;
    }
    let split: DatasetSplit = read_json(split)?;
    let pf = raster_files(patches)?;
    let mf = raster_files(masks)?;
    Ok(TrainInputs { train: load_pairs(run, &split.train, &pf, &mf)?, val: load_pairs(run, &split.val, &pf, &mf)? })
}

/// Writes `model.segm` and `train_report.json`.
pub fn train(ctx: &mut Context, a: TrainArgs) -> CliResult<()> {
    if let Some(e) = a.epochs {
        ctx.cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        ctx.cfg.train.lr = lr;
    }
    let patches = ctx.path(&a.patches, &ctx.cfg.paths.patches, "patches")?;
    let masks = ctx.path(&a.masks, &ctx.cfg.paths.masks, "masks")?;
    let split = ctx.out_or(&a.split, "split.json");
    let (tcfg, features, threshold) = (ctx.cfg.train, ctx.cfg.features, ctx.cfg.infer.threshold);
    let mut run = ctx.start("train")?;
    let path = run.output(ctx.out.join("model.segm"))?;
    let rp = run.output(ctx.out.join("train_report.json"))?;
    run.parameters(&json!({
        "patches": patches, "masks": masks, "split": split, "init": a.init,
        "train": tcfg, "features": features, "threshold": threshold,
    }))?;
    let data = train_inputs(&mut run, &patches, &masks, &split)?;
    let mut init = match &a.init {
        Some(p) => {
            run.input(p)?;
            let m: SegModel = load_checkpoint(p)?;
            if m.features != features {
                log::warn!("{} uses its own feature settings, not [features]", p.display());
            }
            m
        }
        None => SegModel::init(features, tcfg.seed),
    };
    if let Some(t) = threshold {
        init = init.with_threshold(t)?;
    }
    log::info!("training on {} pairs, validating on {}", data.train.len(), data.val.len());
    let (model, report) = run.timed("train", || fit(&init, &data.train, &data.val, &tcfg, fit_scaler))?;
    log::info!("best epoch {} with val loss {:.6}", report.best_epoch, report.best_val_loss);
    save_checkpoint(&model, &path)?;
    write_json(&rp, &report)?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct InferRecord {
    id: String,
    pixels: usize,
    positive: usize,
}

/// Writes `prob/<id>.rgrid` probabilities and `pred/<id>.rgrid` masks.
pub fn infer(ctx: &mut Context, a: InferArgs) -> CliResult<()> {
    if a.threshold.is_some() {
        ctx.cfg.infer.threshold = a.threshold;
    }
    let model_path = ctx.out_or(&a.model, "model.segm");
    let patches = ctx.path(&a.patches, &ctx.cfg.paths.patches, "patches")?;
    let threshold = ctx.cfg.infer.threshold;
    let mut run = ctx.start("infer")?;
    let prob_dir = run.output_dir(ctx.out.join("prob"))?;
    let pred_dir = run.output_dir(ctx.out.join("pred"))?;
    let sp = run.output(ctx.out.join("infer_summary.json"))?;
    run.input(&model_path)?;
    run.input(&patches)?;
    let mut model: SegModel = load_checkpoint(&model_path)?;
    if let Some(t) = threshold {
        model = model.with_threshold(t)?;
    }
    run.parameters(&json!({ "model": model_path, "patches": patches, "threshold": model.threshold }))?;
    let files = raster_files(&patches)?;
    let mut records = Vec::new();
    for (id, path) in &files {
        let patch = run.timed("load", || load_patch::<f64>(path))?;
        let (prob, mask) = run.timed("predict", || predict(&model, &patch));
        run.timed("write", || -> CliResult<()> {
            write_band(&prob.map(|p| p as f32), *patch.transform(), &prob_dir.join(format!("{id}.rgrid")))?;
            write_mask(&mask, &pred_dir.join(format!("{id}.rgrid")))?;
            Ok(())
        })?;
        records.push(InferRecord { id: id.clone(), pixels: mask.width() * mask.height(), positive: mask.count_positive() });
    }
    write_json(&sp, &json!({ "threshold": model.threshold, "patches": records }))?;
    run.finish()?;
    Ok(())
}

#[derive(Serialize)]
struct RoundRecord {
    round: usize,
    mined: Vec<String>,
    positives: Vec<usize>,
    train_added: usize,
    val_added: usize,
    report: Option<TrainReport>,
}

/// Mines false-positive windows from solar-free scenes, adds them as
/// all-negative pairs and retrains, for each round. Writes
/// `hnm_model.segm`, `hnm_report.json` and the mined windows under
/// `hard_negatives/`.
pub fn hnm(ctx: &mut Context, a: HnmArgs) -> CliResult<()> {
    if let Some(r) = a.rounds {
        ctx.cfg.hnm.rounds = r;
    }
    let model_path = ctx.out_or(&a.model, "model.segm");
    let patches = ctx.path(&a.patches, &ctx.cfg.paths.patches, "patches")?;
    let masks = ctx.path(&a.masks, &ctx.cfg.paths.masks, "masks")?;
    let negatives = ctx.path(&a.negatives, &ctx.cfg.paths.negatives, "negatives")?;
    let split = ctx.out_or(&a.split, "split.json");
    let (stage, base) = (ctx.cfg.hnm, ctx.cfg.train);
    let mut run = ctx.start("hnm")?;
    let mined_dir = run.output_dir(ctx.out.join("hard_negatives"))?;
    let path = run.output(ctx.out.join("hnm_model.segm"))?;
    let rp = run.output(ctx.out.join("hnm_report.json"))?;
    run.parameters(&json!({
        "model": model_path, "patches": patches, "masks": masks, "negatives": negatives, "split": split,
        "hnm": stage, "train": base,
    }))?;
    run.input(&model_path)?;
    run.input(&negatives)?;
    let TrainInputs { train: mut train_set, val: mut val_set } = train_inputs(&mut run, &patches, &masks, &split)?;
    let mut model: SegModel = load_checkpoint(&model_path)?;
    let scenes = run.timed("load", || {
        raster_files(&negatives)?
            .iter()
            .map(|(id, p)| Ok(HnmScene { id: id.clone(), patch: load_patch::<f64>(p)?, solar_free: true }))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let (neg_patches, neg_masks) = (mined_dir.join("patches"), mined_dir.join("masks"));
    for d in [&neg_patches, &neg_masks] {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    let mut rounds = Vec::new();
    for round in 1..=stage.rounds {
        let mined = run.timed("mine", || mine_hard_negatives(&model, &scenes, &stage.mining()))?;
        log::info!("round {round}: {} hard negative windows", mined.len());
        for h in &mined {
            let name = format!("r{round}_{}.rgrid", file_safe(&h.id()));
            write_raster(&h.patch, &neg_patches.join(&name), RasterFormat::Rgrid)?;
            write_mask(&h.mask, &neg_masks.join(&name))?;
        }
        let (extra_train, extra_val) = hard_negative_pairs(&mined, stage.holdout_every);
        let mut rec = RoundRecord {
            round,
            mined: mined.iter().map(|h| h.id()).collect(),
            positives: mined.iter().map(|h| h.positives).collect(),
            train_added: extra_train.len(),
            val_added: extra_val.len(),
            report: None,
        };
        if mined.is_empty() {
            rounds.push(rec);
            break;
        }
        train_set.extend(extra_train);
        val_set.extend(extra_val);
        let cfg = TrainConfig {
            epochs: stage.epochs.unwrap_or(base.epochs),
            seed: base.seed.wrapping_add(round as u64),
            ..base
        };
        let (next, report) = run.timed("train", || fit(&model, &train_set, &val_set, &cfg, fit_scaler))?;
        model = next;
        rec.report = Some(report);
        rounds.push(rec);
    }
    save_checkpoint(&model, &path)?;
    write_json(&rp, &json!({ "rounds": rounds }))?;
    run.finish()?;
    Ok(())
}
