//! The `heliomap` command line: one subcommand per pipeline stage.
//!
//! Every stage except `serve` writes into the output directory (`--out`,
//! `[paths] out`, or `./out`) and leaves a `<command>.run.json` log there.
//! Exit status is 0 on success, 1 for invalid configuration, arguments or
//! data, and 2 for filesystem or network failures.

mod cmd;
pub mod config;
mod data;
pub mod error;
pub mod runlog;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "heliomap", version, about = "Map solar farms from Sentinel-2 patches with weak supervision")]
pub struct Cli {
    /// TOML configuration with one section per stage.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every stage; overrides the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the spectral cluster model.
    Cluster(ClusterArgs),
    /// Serve the labeling and validation API over a workspace.
    Serve(ServeArgs),
    /// Split mask ids into train, validation and test sets.
    Dataset(DatasetArgs),
    /// Train the segmentation model.
    Train(TrainArgs),
    /// Predict probability rasters and masks.
    Infer(InferArgs),
    /// Mine false positives on solar-free scenes and retrain.
    Hnm(HnmArgs),
    /// Filter predicted masks and trace them into polygons.
    Post(PostArgs),
    /// Group polygons into farms and export them.
    Farms(FarmsArgs),
    /// Date farm construction from scene time series.
    Tcm(TcmArgs),
    /// Score predicted masks against reference masks.
    Metrics(MetricsArgs),
    /// Correlate installed capacity with predicted area.
    Correlate(CorrelateArgs),
    /// Tabulate the land cover under farms.
    Crosstab(CrosstabArgs),
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Directory of reflectance patches.
    #[arg(long)]
    pub patches: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory with clusters.json and patches/.
    #[arg(long)]
    pub workspace: PathBuf,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Directory of weak-label masks; their ids are split.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// When given, every mask must have a patch with the same id.
    #[arg(long)]
    pub patches: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub patches: Option<PathBuf>,
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Split file from `dataset`; defaults to `<out>/split.json`.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Checkpoint to continue from.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Checkpoint; defaults to `<out>/model.segm`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub patches: Option<PathBuf>,
    /// Probability cutoff for a positive pixel.
    #[arg(long, value_name = "P")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HnmArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub patches: Option<PathBuf>,
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Directory of scenes known to contain no solar farms.
    #[arg(long)]
    pub negatives: Option<PathBuf>,
    /// Mining rounds, each followed by retraining.
    #[arg(long, value_name = "N")]
    pub rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PostArgs {
    /// Predicted masks; defaults to `<out>/pred`.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub patches: Option<PathBuf>,
    /// Road network as WGS84 GeoJSON lines.
    #[arg(long)]
    pub roads: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FarmsArgs {
    /// Polygons from `post`; defaults to `<out>/polygons.geojson`.
    #[arg(long)]
    pub polygons: Option<PathBuf>,
    /// State boundaries with a `name` property.
    #[arg(long)]
    pub states: Option<PathBuf>,
    /// JSON object mapping polygon ids to valid, rooftop or invalid.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// Grouping distance in metres.
    #[arg(long, value_name = "M")]
    pub distance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TcmArgs {
    /// JSON listing dated scenes per fid.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Farms from `farms`; defaults to `<out>/farms.geojson`.
    #[arg(long)]
    pub farms: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Predicted mask file or directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Reference mask file or directory.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, requires = "gt_polygons")]
    pub pred_polygons: Option<PathBuf>,
    #[arg(long, requires = "pred_polygons")]
    pub gt_polygons: Option<PathBuf>,
    /// Row label in the text table.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// CSV with columns `period,capacity,area`.
    #[arg(long)]
    pub table: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrosstabArgs {
    #[arg(long)]
    pub farms: PathBuf,
    /// Single-band categorical raster.
    #[arg(long)]
    pub landcover: PathBuf,
    /// JSON object mapping class codes to names.
    #[arg(long)]
    pub legend: PathBuf,
    /// Construction years by fid, as written by `tcm`.
    #[arg(long)]
    pub years: Option<PathBuf>,
    #[arg(long)]
    pub from: Option<i32>,
    #[arg(long)]
    pub to: Option<i32>,
}

/// Resolved configuration and global flags.
pub struct Context {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    pub args: Vec<String>,
}

impl Context {
    /// Flag value, else the configured path, else a validation error.
    pub fn path(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
        flag.clone()
            .or_else(|| configured.clone())
            .ok_or_else(|| CliError::invalid(format!("no {what}: pass --{what} or set it under [paths]")))
    }

    /// Validates the configuration after flag overrides and opens the run
    /// log for `command`.
    pub fn start(&self, command: &str) -> CliResult<runlog::Run> {
        self.cfg.validate()?;
        runlog::Run::start(command, self.args.clone(), &self.out)
    }

    /// Flag value, else `<out>/<default>`.
    pub fn out_or(&self, flag: &Option<PathBuf>, default: &str) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.out.join(default))
    }
}

fn context(cli: &Cli, args: Vec<String>) -> CliResult<Context> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_seed(cli.seed);
    let out = cli.out.clone().or_else(|| cfg.paths.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Context { cfg, out, args })
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let args = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match context(&cli, args).and_then(|ctx| dispatch(cli.command, ctx)) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, mut ctx: Context) -> CliResult<()> {
    match command {
        Command::Cluster(a) => cmd::cluster::run(&mut ctx, a),
        Command::Serve(a) => cmd::serve::run(&mut ctx, a),
        Command::Dataset(a) => cmd::dataset::run(&mut ctx, a),
        Command::Train(a) => cmd::train::train(&mut ctx, a),
        Command::Infer(a) => cmd::train::infer(&mut ctx, a),
        Command::Hnm(a) => cmd::train::hnm(&mut ctx, a),
        Command::Post(a) => cmd::post::post(&mut ctx, a),
        Command::Farms(a) => cmd::post::farms(&mut ctx, a),
        Command::Tcm(a) => cmd::tcm::run(&mut ctx, a),
        Command::Metrics(a) => cmd::analysis::metrics(&mut ctx, a),
        Command::Correlate(a) => cmd::analysis::correlate(&mut ctx, a),
        Command::Crosstab(a) => cmd::analysis::crosstab(&mut ctx, a),
    }
}
