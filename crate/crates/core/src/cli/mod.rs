//! Command-line front end. Every run resolves its flags into a [`Resolved`]
//! command, executes it, and records a [`RunManifest`] that `rerun` can
//! replay.

mod commands;
mod manifest;

pub use commands::{
    execute, method_id, parse_dist, run_benchmark, BenchSettings, BenchmarkConfig,
    BenchmarkOutcome, BoundConfig, LabConfig, MlpSettings, Outcome, PredictConfig, Resolved,
    StatsConfig, StatsTest, TrainConfig,
};
pub use manifest::{file_digest, RunManifest, MANIFEST_FILE};

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::data::LabelColumn;
use crate::ensemble::FusionRule;
use crate::error::{Error, Result};
use crate::evaluation::Metric;
use crate::losses::LossKind;
use crate::sampling::{SamplerKind, SetSize};

#[derive(Debug, Parser)]
#[command(name = "rss-mlp", version, about = "Ranked-set-sampling bagged MLPs and variance lab")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, default_value_t = 1, env = "RSS_MLP_WORKERS")]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SRS-MLP vs RSS-MLP over repeated 7:3 splits; writes a results ledger.
    Benchmark(BenchmarkArgs),
    /// Train one ensemble and save it to a directory.
    Train(TrainArgs),
    /// Predict labels with a saved ensemble.
    Predict(PredictArgs),
    /// Closed-form, exact and Monte Carlo variance gaps.
    VarianceLab(LabArgs),
    /// Evaluate the excess-risk bound.
    Bound(BoundArgs),
    /// Significance tests over a results ledger.
    Stats(StatsArgs),
    /// Re-execute the run recorded in a manifest.
    Rerun(RerunArgs),
}

fn parse_set_size(s: &str) -> std::result::Result<SetSize, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SetSize::Auto);
    }
    s.parse::<usize>()
        .map(SetSize::Fixed)
        .map_err(|_| format!("expected 'auto' or a positive integer, got {s:?}"))
}

/// `auto` or a cycle count.
#[derive(Debug, Clone, Copy)]
pub struct Cycles(pub Option<usize>);

fn parse_cycles(s: &str) -> std::result::Result<Cycles, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Cycles(None));
    }
    s.parse::<usize>()
        .map(|m| Cycles(Some(m)))
        .map_err(|_| format!("expected 'auto' or a positive integer, got {s:?}"))
}

/// `none` or a maximum gradient norm.
#[derive(Debug, Clone, Copy)]
pub struct ClipNorm(pub Option<f64>);

fn parse_clip(s: &str) -> std::result::Result<ClipNorm, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(ClipNorm(None));
    }
    s.parse::<f64>()
        .map(|c| ClipNorm(Some(c)))
        .map_err(|_| format!("expected 'none' or a number, got {s:?}"))
}

#[derive(Debug, Clone, Args)]
pub struct MlpArgs {
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,128", env = "RSS_MLP_HIDDEN")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, env = "RSS_MLP_BATCH_NORM")]
    pub batch_norm: bool,
    #[arg(long, default_value_t = 0.0, env = "RSS_MLP_DROPOUT")]
    pub dropout: f64,
    /// Max gradient norm, or `none`.
    #[arg(long, default_value = "none", value_parser = parse_clip, env = "RSS_MLP_GRAD_CLIP")]
    pub grad_clip: ClipNorm,
    #[arg(long, default_value_t = 0.01, env = "RSS_MLP_LR")]
    pub lr: f64,
    #[arg(long, default_value_t = 50, env = "RSS_MLP_EPOCHS")]
    pub epochs: usize,
    #[arg(long, default_value_t = 32, env = "RSS_MLP_BATCH_SIZE")]
    pub batch_size: usize,
}

impl MlpArgs {
    fn settings(&self) -> MlpSettings {
        MlpSettings {
            hidden_dims: self.hidden.clone(),
            batch_norm: self.batch_norm,
            dropout: self.dropout,
            grad_clip: self.grad_clip.0,
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// Number of base classifiers.
    #[arg(long = "T", default_value_t = 31, env = "RSS_MLP_T")]
    pub t: usize,
    #[arg(long, default_value = "exp", env = "RSS_MLP_LOSS")]
    pub loss: LossKind,
    #[arg(long, default_value = "vote", env = "RSS_MLP_FUSION")]
    pub fusion: FusionRule,
    /// Set size, `auto` for ⌊√N⌋.
    #[arg(long = "K", default_value = "auto", value_parser = parse_set_size, env = "RSS_MLP_K")]
    pub k: SetSize,
    /// Cycles per base sample, `auto` for ⌊N/K⌋.
    #[arg(long = "m", default_value = "auto", value_parser = parse_cycles, env = "RSS_MLP_M")]
    pub m: Cycles,
    #[command(flatten)]
    pub mlp: MlpArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Labelled CSV files; repeat the flag for several datasets.
    #[arg(long, required = true, env = "RSS_MLP_DATA", value_delimiter = ',')]
    pub data: Vec<PathBuf>,
    /// Label column: `last` or a 0-based index.
    #[arg(long, default_value = "last", env = "RSS_MLP_LABEL_COLUMN")]
    pub label_column: LabelColumn,
    #[arg(long, default_value_t = 30, env = "RSS_MLP_REPEATS")]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.7, env = "RSS_MLP_TRAIN_RATIO")]
    pub train_ratio: f64,
    #[arg(long, required = true, env = "RSS_MLP_SEED")]
    pub seed: u64,
    /// Output directory for ledger.csv, report.json and the run manifest.
    #[arg(long, default_value = "benchmark_out", env = "RSS_MLP_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, env = "RSS_MLP_DATA")]
    pub data: PathBuf,
    #[arg(long, default_value = "last", env = "RSS_MLP_LABEL_COLUMN")]
    pub label_column: LabelColumn,
    #[arg(long, default_value = "rss", env = "RSS_MLP_SAMPLER")]
    pub sampler: SamplerArg,
    #[arg(long, default_value_t = 0, env = "RSS_MLP_SEED")]
    pub seed: u64,
    /// Model directory.
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SamplerArg {
    Srs,
    Rss,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Srs => SamplerKind::Srs,
            SamplerArg::Rss => SamplerKind::Rss,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long, env = "RSS_MLP_MODEL")]
    pub model: PathBuf,
    /// Feature CSV, optionally with one label column.
    #[arg(long, env = "RSS_MLP_DATA")]
    pub data: PathBuf,
    #[arg(long, default_value = "last", env = "RSS_MLP_LABEL_COLUMN")]
    pub label_column: LabelColumn,
    /// Label file to write; labels go into the JSON report otherwise.
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LabArgs {
    /// `bernoulli:<p>` or `table:<file.json>`.
    #[arg(long, env = "RSS_MLP_DIST")]
    pub dist: String,
    #[arg(long, default_value = "exp", env = "RSS_MLP_LOSS")]
    pub loss: LossKind,
    #[arg(long = "K", env = "RSS_MLP_K")]
    pub k: usize,
    #[arg(long = "m", env = "RSS_MLP_M")]
    pub m: usize,
    #[arg(long, default_value_t = 100_000, env = "RSS_MLP_TRIALS")]
    pub trials: usize,
    #[arg(long, default_value_t = 0, env = "RSS_MLP_SEED")]
    pub seed: u64,
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long = "M", env = "RSS_MLP_BOUND_M")]
    pub sup_norm: f64,
    #[arg(long = "n", env = "RSS_MLP_BOUND_N")]
    pub n: u64,
    #[arg(long, default_value_t = 0.05, env = "RSS_MLP_DELTA")]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0, env = "RSS_MLP_VARIANCE")]
    pub variance: f64,
    #[arg(long, default_value_t = 0.0, env = "RSS_MLP_APPROX")]
    pub approx: f64,
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(subcommand)]
    pub test: StatsCommand,
}

#[derive(Debug, Clone, Subcommand)]
pub enum StatsCommand {
    Friedman(StatsCommon),
    Nemenyi(StatsCommon),
    /// One-sided paired t-test of `--a` better than `--b`, per dataset.
    Ttest(TtestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StatsCommon {
    /// Results ledger CSV.
    #[arg(long, env = "RSS_MLP_INPUT")]
    pub input: PathBuf,
    #[arg(long, default_value = "accuracy", env = "RSS_MLP_METRIC")]
    pub metric: Metric,
    #[arg(long, default_value_t = 0.05, env = "RSS_MLP_ALPHA")]
    pub alpha: f64,
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TtestArgs {
    #[command(flatten)]
    pub common: StatsCommon,
    #[arg(long, default_value = "RSS-MLP", env = "RSS_MLP_METHOD_A")]
    pub a: String,
    #[arg(long, default_value = "SRS-MLP", env = "RSS_MLP_METHOD_B")]
    pub b: String,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    #[arg(long, env = "RSS_MLP_MANIFEST")]
    pub manifest: PathBuf,
    /// Redirect outputs (directory or file, matching the original command).
    #[arg(long, env = "RSS_MLP_OUT")]
    pub out: Option<PathBuf>,
}

impl Command {
    /// Flags to a resolved command. `rerun` has no resolved form of its own.
    pub fn resolve(&self) -> Result<Option<Resolved>> {
        Ok(Some(match self {
            Command::Benchmark(a) => Resolved::Benchmark(BenchmarkConfig {
                data: a.data.clone(),
                label_column: a.label_column,
                out: a.out.clone(),
                settings: BenchSettings {
                    n_models: a.ensemble.t,
                    repeats: a.repeats,
                    train_ratio: a.train_ratio,
                    loss: a.ensemble.loss,
                    fusion: a.ensemble.fusion,
                    set_size: a.ensemble.k,
                    cycles: a.ensemble.m.0,
                    mlp: a.ensemble.mlp.settings(),
                    seed: a.seed,
                },
            }),
            Command::Train(a) => Resolved::Train(TrainConfig {
                data: a.data.clone(),
                label_column: a.label_column,
                out: a.out.clone(),
                sampler: a.sampler.into(),
                n_models: a.ensemble.t,
                loss: a.ensemble.loss,
                fusion: a.ensemble.fusion,
                set_size: a.ensemble.k,
                cycles: a.ensemble.m.0,
                mlp: a.ensemble.mlp.settings(),
                seed: a.seed,
            }),
            Command::Predict(a) => Resolved::Predict(PredictConfig {
                model: a.model.clone(),
                data: a.data.clone(),
                label_column: a.label_column,
                out: a.out.clone(),
            }),
            Command::VarianceLab(a) => Resolved::VarianceLab(LabConfig {
                dist: a.dist.clone(),
                loss: a.loss,
                k: a.k,
                m: a.m,
                trials: a.trials,
                seed: a.seed,
                out: a.out.clone(),
            }),
            Command::Bound(a) => Resolved::Bound(BoundConfig {
                sup_norm: a.sup_norm,
                n: a.n,
                delta: a.delta,
                variance: a.variance,
                approx_error: a.approx,
                out: a.out.clone(),
            }),
            Command::Stats(s) => {
                let (test, common, a, b) = match &s.test {
                    StatsCommand::Friedman(c) => (StatsTest::Friedman, c, None, None),
                    StatsCommand::Nemenyi(c) => (StatsTest::Nemenyi, c, None, None),
                    StatsCommand::Ttest(t) => (StatsTest::Ttest, &t.common, Some(&t.a), Some(&t.b)),
                };
                Resolved::Stats(StatsConfig {
                    test,
                    input: common.input.clone(),
                    metric: common.metric,
                    alpha: common.alpha,
                    method_a: a.cloned().unwrap_or_else(|| method_id(SamplerKind::Rss)),
                    method_b: b.cloned().unwrap_or_else(|| method_id(SamplerKind::Srs)),
                    out: common.out.clone(),
                })
            }
            Command::Rerun(_) => return Ok(None),
        }))
    }
}

/// Execute `cmd`, write its manifest, and return the report and manifest.
pub fn run_resolved(cmd: &Resolved, workers: usize) -> Result<(Outcome, RunManifest)> {
    let inputs = cmd.inputs();
    let input_digests = manifest::digests(&inputs)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let outcome = execute(cmd, workers)?;
    let mut m = RunManifest {
        command: cmd.name().to_string(),
        config: cmd.clone(),
        seed: cmd.seed(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digests,
        outputs: outcome.outputs.clone(),
        workers,
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
    };
    if let Some(path) = cmd.manifest_path() {
        m.outputs.push(path.clone());
        m.save(&path)?;
    }
    Ok((outcome, m))
}

/// Replay a manifest, optionally with another worker count or output target.
pub fn rerun(manifest: &std::path::Path, workers: usize, out: Option<PathBuf>) -> Result<(Outcome, RunManifest)> {
    let recorded = RunManifest::load(manifest)?;
    recorded.verify_inputs()?;
    let mut cmd = recorded.config.clone();
    if let Some(o) = out {
        cmd.redirect(o);
    }
    run_resolved(&cmd, workers)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let (outcome, _) = match &cli.command {
        Command::Rerun(r) => rerun(&r.manifest, cli.workers, r.out.clone())?,
        other => {
            let cmd = other.resolve()?.ok_or_else(|| Error::invalid("nothing to run"))?;
            run_resolved(&cmd, cli.workers)?
        }
    };
    Ok(outcome)
}

/// Parse `args`, run, print the JSON report to stdout. Returns the process
/// exit code; failures print one `error[CODE]: message` line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let text = e.to_string();
            let head = text.split("\n\nUsage:").next().unwrap_or(&text);
            let head = head.split("\n\nFor more information").next().unwrap_or(head);
            let line = head.split_whitespace().collect::<Vec<_>>().join(" ");
            let line = line.strip_prefix("error: ").unwrap_or(&line);
            eprintln!("error[E_USAGE]: {line}");
            return 2;
        }
    };
    match run(&cli) {
        Ok(outcome) => match serde_json::to_string_pretty(&outcome.report) {
            Ok(s) => {
                println!("{s}");
                0
            }
            Err(e) => {
                eprintln!("error[E_IO]: {e}");
                1
            }
        },
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            1
        }
    }
}
