use std::fs;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{
    load_csv, load_csv_with_encoder, load_features_csv, make_splits, standardize, train_size,
    Dataset, LabelColumn, LabelEncoder, Standardizer,
};
use crate::ensemble::{train_ensemble_with_workers, EnsembleConfig, EnsembleModel, FusionRule};
use crate::error::{Error, Result};
use crate::evaluation::{
    accuracy, cd_diagram, f_critical, friedman_tau_f, load_ledger, macro_f1, paired_comparisons,
    rank_table, save_ledger, Metric, MetricRecord,
};
use crate::losses::LossKind;
use crate::mlp::MlpConfig;
use crate::numerics::rng::purpose;
use crate::numerics::{isqrt, Matrix, RngStream};
use crate::sampling::{SamplerConfig, SamplerKind, SetSize};
use crate::variance_lab::{bound_value, gap_report, FiniteMarginDistribution};

/// Fully resolved arguments of one command; this is what a manifest stores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Resolved {
    Benchmark(BenchmarkConfig),
    Train(TrainConfig),
    Predict(PredictConfig),
    VarianceLab(LabConfig),
    Bound(BoundConfig),
    Stats(StatsConfig),
}

impl Resolved {
    pub fn name(&self) -> &'static str {
        match self {
            Resolved::Benchmark(_) => "benchmark",
            Resolved::Train(_) => "train",
            Resolved::Predict(_) => "predict",
            Resolved::VarianceLab(_) => "variance-lab",
            Resolved::Bound(_) => "bound",
            Resolved::Stats(_) => "stats",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Resolved::Benchmark(c) => Some(c.settings.seed),
            Resolved::Train(c) => Some(c.seed),
            Resolved::VarianceLab(c) => Some(c.seed),
            _ => None,
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Resolved::Benchmark(c) => c.data.clone(),
            Resolved::Train(c) => vec![c.data.clone()],
            Resolved::Predict(c) => {
                vec![c.data.clone(), c.model.join("manifest.json")]
            }
            Resolved::VarianceLab(c) => match c.dist.strip_prefix("table:") {
                Some(p) => vec![PathBuf::from(p)],
                None => Vec::new(),
            },
            Resolved::Bound(_) => Vec::new(),
            Resolved::Stats(c) => vec![c.input.clone()],
        }
    }

    /// Where the run manifest goes: inside output directories, next to
    /// output files, or nowhere for stdout-only runs.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        use super::manifest::MANIFEST_FILE;
        match self {
            Resolved::Benchmark(c) => Some(c.out.join(MANIFEST_FILE)),
            Resolved::Train(c) => Some(c.out.join(MANIFEST_FILE)),
            Resolved::Predict(c) => c.out.as_deref().map(sidecar),
            Resolved::VarianceLab(c) => c.out.as_deref().map(sidecar),
            Resolved::Bound(c) => c.out.as_deref().map(sidecar),
            Resolved::Stats(c) => c.out.as_deref().map(sidecar),
        }
    }

    /// Point every output at `out` (a directory or file path as appropriate).
    pub fn redirect(&mut self, out: PathBuf) {
        match self {
            Resolved::Benchmark(c) => c.out = out,
            Resolved::Train(c) => c.out = out,
            Resolved::Predict(c) => c.out = Some(out),
            Resolved::VarianceLab(c) => c.out = Some(out),
            Resolved::Bound(c) => c.out = Some(out),
            Resolved::Stats(c) => c.out = Some(out),
        }
    }
}

fn sidecar(p: &Path) -> PathBuf {
    p.with_extension("manifest.json")
}

/// What a command produced: the JSON report printed to stdout and the files
/// it wrote.
pub struct Outcome {
    pub report: Value,
    pub outputs: Vec<PathBuf>,
}

pub fn execute(cmd: &Resolved, workers: usize) -> Result<Outcome> {
    match cmd {
        Resolved::Benchmark(c) => cmd_benchmark(c, workers),
        Resolved::Train(c) => cmd_train(c, workers),
        Resolved::Predict(c) => cmd_predict(c),
        Resolved::VarianceLab(c) => cmd_variance_lab(c),
        Resolved::Bound(c) => cmd_bound(c),
        Resolved::Stats(c) => cmd_stats(c),
    }
}

fn write_report(out: Option<&Path>, report: &Value) -> Result<Vec<PathBuf>> {
    match out {
        Some(p) => {
            fs::write(p, serde_json::to_string_pretty(report)? + "\n")?;
            Ok(vec![p.to_path_buf()])
        }
        None => Ok(Vec::new()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSettings {
    pub hidden_dims: Vec<usize>,
    pub batch_norm: bool,
    pub dropout: f64,
    pub grad_clip: Option<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpSettings {
    fn default() -> Self {
        let c = MlpConfig::new(1, 1);
        MlpSettings {
            hidden_dims: c.hidden_dims,
            batch_norm: c.batch_norm,
            dropout: c.dropout,
            grad_clip: c.grad_clip,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
            batch_size: c.batch_size,
        }
    }
}

impl MlpSettings {
    /// Dimensions and seed are filled in by the ensemble trainer.
    pub fn to_config(&self) -> MlpConfig {
        MlpConfig {
            hidden_dims: self.hidden_dims.clone(),
            batch_norm: self.batch_norm,
            dropout: self.dropout,
            grad_clip: self.grad_clip,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..MlpConfig::new(1, 1)
        }
    }
}

/// Everything about a benchmark except where data comes from and goes to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    #[serde(rename = "T")]
    pub n_models: usize,
    pub repeats: usize,
    pub train_ratio: f64,
    pub loss: LossKind,
    pub fusion: FusionRule,
    #[serde(rename = "K")]
    pub set_size: SetSize,
    pub cycles: Option<usize>,
    pub mlp: MlpSettings,
    pub seed: u64,
}

impl BenchSettings {
    pub fn new(seed: u64) -> Self {
        BenchSettings {
            n_models: 31,
            repeats: 30,
            train_ratio: 0.7,
            loss: LossKind::Exp,
            fusion: FusionRule::Vote,
            set_size: SetSize::Auto,
            cycles: None,
            mlp: MlpSettings::default(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub data: Vec<PathBuf>,
    pub label_column: LabelColumn,
    pub out: PathBuf,
    #[serde(flatten)]
    pub settings: BenchSettings,
}

pub fn method_id(kind: SamplerKind) -> String {
    format!("{kind}-MLP")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    pub records: Vec<MetricRecord>,
    /// Resolved `K` per dataset after any downgrade.
    pub set_sizes: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

/// SRS and RSS ensembles on the same splits and per-repeat seeds. Records
/// are ordered by (dataset, repeat, SRS before RSS) whatever `workers` is.
pub fn run_benchmark(
    settings: &BenchSettings,
    datasets: &[(String, Dataset)],
    workers: usize,
) -> Result<BenchmarkOutcome> {
    if settings.repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let mut warnings = Vec::new();
    let mut set_sizes = Vec::new();
    let mut plans = Vec::new();
    for (name, ds) in datasets {
        let n_train = train_size(ds.len(), settings.train_ratio);
        let set_size = match settings.set_size {
            SetSize::Fixed(k) if k * k > n_train => {
                let k2 = isqrt(n_train).max(1);
                let msg = format!("{name}: K = {k} infeasible for |train| = {n_train}, using K = {k2}");
                log::warn!("{msg}");
                warnings.push(msg);
                SetSize::Fixed(k2)
            }
            s => s,
        };
        let resolved_k = match set_size {
            SetSize::Auto => isqrt(n_train).max(1),
            SetSize::Fixed(k) => k,
        };
        set_sizes.push((name.clone(), resolved_k));
        let splits = make_splits(ds.len(), settings.train_ratio, settings.repeats, settings.seed)?;
        plans.push((set_size, splits));
    }

    let seed_root = RngStream::new(settings.seed, purpose::TRAINING);
    let repeat_seeds: Vec<u64> = (0..settings.repeats)
        .map(|r| seed_root.derive(r as u64).next_u64())
        .collect();

    let tasks: Vec<(usize, usize, SamplerKind)> = (0..datasets.len())
        .flat_map(|d| {
            (0..settings.repeats)
                .flat_map(move |r| [SamplerKind::Srs, SamplerKind::Rss].map(|k| (d, r, k)))
        })
        .collect();

    let run_task = |&(d, r, kind): &(usize, usize, SamplerKind)| -> Result<MetricRecord> {
        let (name, ds) = &datasets[d];
        let (set_size, splits) = &plans[d];
        let split = &splits[r];
        let (train, test, _) = standardize(&ds.subset(&split.train), &ds.subset(&split.test))?;
        let seed = repeat_seeds[r];
        let sampler = SamplerConfig {
            kind,
            set_size: *set_size,
            cycles: settings.cycles,
            seed,
        };
        let config = EnsembleConfig {
            n_models: settings.n_models,
            sampler,
            mlp: settings.mlp.to_config(),
            loss: settings.loss,
            fusion: settings.fusion,
            seed,
        };
        let model = train_ensemble_with_workers(&config, &train, 1)?;
        let pred = model.fuse_predict(test.features())?;
        let acc = accuracy(&pred.labels, test.labels())?;
        let f1 = macro_f1(&pred.labels, test.labels(), test.n_classes())?;
        log::info!("{name} repeat {r} {kind}: accuracy {acc:.4}");
        MetricRecord::new(name, &method_id(kind), r, acc, f1)
    };

    let results: Vec<Result<MetricRecord>> = if workers <= 1 {
        tasks.iter().map(run_task).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| tasks.par_iter().map(run_task).collect())
    };
    Ok(BenchmarkOutcome {
        records: results.into_iter().collect::<Result<_>>()?,
        set_sizes,
        warnings,
    })
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_benchmark(c: &BenchmarkConfig, workers: usize) -> Result<Outcome> {
    if c.data.is_empty() {
        return Err(Error::invalid("benchmark needs at least one --data file"));
    }
    let datasets = c
        .data
        .iter()
        .map(|p| Ok((dataset_name(p), load_csv(p, c.label_column)?)))
        .collect::<Result<Vec<_>>>()?;
    let outcome = run_benchmark(&c.settings, &datasets, workers)?;
    fs::create_dir_all(&c.out)?;
    let ledger = c.out.join("ledger.csv");
    save_ledger(&outcome.records, &ledger)?;
    let comparisons = paired_comparisons(
        &outcome.records,
        Metric::Accuracy,
        &method_id(SamplerKind::Rss),
        &method_id(SamplerKind::Srs),
        0.05,
    );
    let report = json!({
        "ledger": ledger,
        "rows": outcome.records.len(),
        "K": outcome.set_sizes,
        "warnings": outcome.warnings,
        "rss_vs_srs_accuracy": comparisons.ok(),
    });
    let report_path = c.out.join("report.json");
    let mut outputs = vec![ledger];
    outputs.extend(write_report(Some(&report_path), &report)?);
    Ok(Outcome { report, outputs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub data: PathBuf,
    pub label_column: LabelColumn,
    pub out: PathBuf,
    pub sampler: SamplerKind,
    #[serde(rename = "T")]
    pub n_models: usize,
    pub loss: LossKind,
    pub fusion: FusionRule,
    #[serde(rename = "K")]
    pub set_size: SetSize,
    pub cycles: Option<usize>,
    pub mlp: MlpSettings,
    pub seed: u64,
}

fn standardize_all(ds: &Dataset) -> Result<(Dataset, Standardizer)> {
    let st = Standardizer::fit(ds.features());
    let mut out = Dataset::new(st.transform(ds.features())?, ds.labels().to_vec(), ds.n_classes())?;
    if let Some(names) = ds.feature_names() {
        out = out.with_feature_names(names.to_vec());
    }
    if let Some(names) = ds.class_names() {
        out = out.with_class_names(names.to_vec());
    }
    Ok((out, st))
}

fn cmd_train(c: &TrainConfig, workers: usize) -> Result<Outcome> {
    let (ds, st) = standardize_all(&load_csv(&c.data, c.label_column)?)?;
    let config = EnsembleConfig {
        n_models: c.n_models,
        sampler: SamplerConfig {
            kind: c.sampler,
            set_size: c.set_size,
            cycles: c.cycles,
            seed: c.seed,
        },
        mlp: c.mlp.to_config(),
        loss: c.loss,
        fusion: c.fusion,
        seed: c.seed,
    };
    let mut model = train_ensemble_with_workers(&config, &ds, workers)?;
    model.set_standardizer(st);
    model.save(&c.out)?;
    let pred = model.fuse_predict(ds.features())?;
    let report = json!({
        "model": c.out,
        "T": model.models().len(),
        "sampler": c.sampler,
        "train_accuracy": accuracy(&pred.labels, ds.labels())?,
        "plans_digest": model.provenance().plans_digest,
    });
    Ok(Outcome {
        report,
        outputs: vec![c.out.clone()],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub data: PathBuf,
    pub label_column: LabelColumn,
    pub out: Option<PathBuf>,
}

fn cmd_predict(c: &PredictConfig) -> Result<Outcome> {
    let model = EnsembleModel::load(&c.model)?;
    let d = model.input_dim();
    let raw = load_features_csv(&c.data);
    // A file with exactly one extra column is read as labelled data.
    let (features, truth): (Matrix, Option<Vec<usize>>) = match raw {
        Ok(x) if x.cols() == d => (x, None),
        _ => {
            let classes = model
                .provenance()
                .class_names
                .clone()
                .unwrap_or_else(|| (0..model.n_classes()).map(|i| i.to_string()).collect());
            let enc = LabelEncoder::from_classes(classes);
            let (ds, _) = load_csv_with_encoder(&c.data, c.label_column, Some(&enc))?;
            if ds.dim() != d {
                return Err(Error::dims("predict input columns", d, ds.dim()));
            }
            let labels = ds.labels().to_vec();
            (ds.features().clone(), Some(labels))
        }
    };
    let features = match &model.provenance().standardizer {
        Some(st) => st.transform(&features)?,
        None => features,
    };
    let pred = model.fuse_predict(&features)?;
    let names = model.provenance().class_names.clone();
    let label_of = |i: usize| match &names {
        Some(n) => n[i].clone(),
        None => i.to_string(),
    };
    let mut outputs = Vec::new();
    let mut text = String::from("label\n");
    for &l in &pred.labels {
        text.push_str(&label_of(l));
        text.push('\n');
    }
    if let Some(p) = &c.out {
        fs::write(p, &text)?;
        outputs.push(p.clone());
    }
    let acc = match &truth {
        Some(t) => Some(accuracy(&pred.labels, t)?),
        None => None,
    };
    let mut report = json!({
        "rows": pred.labels.len(),
        "accuracy": acc,
    });
    if c.out.is_none() {
        report["labels"] = json!(pred.labels.iter().map(|&l| label_of(l)).collect::<Vec<_>>());
    }
    Ok(Outcome { report, outputs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    /// `bernoulli:<p>` or `table:<file.json>`.
    pub dist: String,
    pub loss: LossKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn parse_dist(text: &str) -> Result<FiniteMarginDistribution> {
    if let Some(p) = text.strip_prefix("bernoulli:") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::invalid(format!("bad bernoulli parameter {p:?}")))?;
        FiniteMarginDistribution::bernoulli(p)
    } else if let Some(path) = text.strip_prefix("table:") {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    } else {
        Err(Error::invalid(format!("--dist {text:?}: expected bernoulli:<p> or table:<file.json>")))
    }
}

fn cmd_variance_lab(c: &LabConfig) -> Result<Outcome> {
    let dist = parse_dist(&c.dist)?;
    let report = serde_json::to_value(gap_report(c.loss, &dist, c.k, c.m, c.trials, c.seed)?)?;
    let outputs = write_report(c.out.as_deref(), &report)?;
    Ok(Outcome { report, outputs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    #[serde(rename = "M")]
    pub sup_norm: f64,
    pub n: u64,
    pub delta: f64,
    pub variance: f64,
    pub approx_error: f64,
    pub out: Option<PathBuf>,
}

fn cmd_bound(c: &BoundConfig) -> Result<Outcome> {
    let r = bound_value(c.sup_norm, c.n, c.delta, c.variance, c.approx_error)?;
    let report = serde_json::to_value(r)?;
    let outputs = write_report(c.out.as_deref(), &report)?;
    Ok(Outcome { report, outputs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsTest {
    Friedman,
    Nemenyi,
    Ttest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub test: StatsTest,
    pub input: PathBuf,
    pub metric: Metric,
    pub alpha: f64,
    pub method_a: String,
    pub method_b: String,
    pub out: Option<PathBuf>,
}

fn cmd_stats(c: &StatsConfig) -> Result<Outcome> {
    let records = load_ledger(&c.input)?;
    let report = match c.test {
        StatsTest::Friedman => {
            let table = rank_table(&records, c.metric)?;
            let f = friedman_tau_f(&table)?;
            let critical = f_critical(f.df1, f.df2, c.alpha)?;
            let reject = f.tau_f_infinite || f.tau_f.is_some_and(|t| t > critical);
            json!({
                "friedman": f,
                "alpha": c.alpha,
                "critical": critical,
                "reject": reject,
            })
        }
        StatsTest::Nemenyi => {
            let table = rank_table(&records, c.metric)?;
            json!({ "alpha": c.alpha, "points": cd_diagram(&table, c.alpha)? })
        }
        StatsTest::Ttest => {
            let cmp = paired_comparisons(&records, c.metric, &c.method_a, &c.method_b, c.alpha)?;
            serde_json::to_value(cmp)?
        }
    };
    let outputs = write_report(c.out.as_deref(), &report)?;
    Ok(Outcome { report, outputs })
}
