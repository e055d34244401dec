//! Accuracy and macro-F1, paired and rank-based significance tests, and the
//! results ledger that links them to benchmark runs.

mod metrics;
mod significance;

pub use metrics::{accuracy, macro_f1};
pub use significance::{
    f_critical, friedman_tau_f, nemenyi_cd, nemenyi_q, paired_t_one_sided, t_critical,
    FriedmanReport, RankTable, TTestReport,
};

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub method: String,
    pub repeat: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl MetricRecord {
    pub fn new(dataset: &str, method: &str, repeat: usize, accuracy: f64, macro_f1: f64) -> Result<Self> {
        for (name, v) in [("accuracy", accuracy), ("macro_f1", macro_f1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(MetricRecord {
            dataset: dataset.to_string(),
            method: method.to_string(),
            repeat,
            accuracy,
            macro_f1,
        })
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::MacroF1 => self.macro_f1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "macro_f1" | "f1" => Ok(Metric::MacroF1),
            _ => Err(Error::invalid(format!("unknown metric {s:?} (expected accuracy or macro_f1)"))),
        }
    }
}

pub fn write_ledger<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger<R: Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let r: MetricRecord = row?;
        out.push(MetricRecord::new(&r.dataset, &r.method, r.repeat, r.accuracy, r.macro_f1)?);
    }
    Ok(out)
}

pub fn save_ledger(records: &[MetricRecord], path: impl AsRef<Path>) -> Result<()> {
    write_ledger(records, std::fs::File::create(path)?)
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    read_ledger(std::fs::File::open(path)?)
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in items {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Mean of `metric` over repeats per (dataset, method); datasets and methods
/// keep their order of first appearance. Every pair must be present.
pub fn rank_table(records: &[MetricRecord], metric: Metric) -> Result<RankTable> {
    let datasets = first_seen(records.iter().map(|r| r.dataset.as_str()));
    let methods = first_seen(records.iter().map(|r| r.method.as_str()));
    let mut values = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let mut row = Vec::with_capacity(methods.len());
        for m in &methods {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| &r.dataset == d && &r.method == m)
                .map(|r| r.metric(metric))
                .collect();
            if xs.is_empty() {
                return Err(Error::invalid(format!("ledger has no rows for method {m:?} on dataset {d:?}")));
            }
            row.push(xs.iter().sum::<f64>() / xs.len() as f64);
        }
        values.push(row);
    }
    RankTable::new(datasets, methods, values, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub dataset: String,
    pub method_a: String,
    pub method_b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: TTestReport,
}

/// Paired one-sided test of `a > b` on each dataset, pairing rows by repeat id.
pub fn paired_comparisons(
    records: &[MetricRecord],
    metric: Metric,
    method_a: &str,
    method_b: &str,
    alpha: f64,
) -> Result<Vec<PairedComparison>> {
    let datasets = first_seen(records.iter().map(|r| r.dataset.as_str()));
    let mut out = Vec::new();
    for d in datasets {
        let pick = |m: &str| -> Vec<(usize, f64)> {
            let mut v: Vec<(usize, f64)> = records
                .iter()
                .filter(|r| r.dataset == d && r.method == m)
                .map(|r| (r.repeat, r.metric(metric)))
                .collect();
            v.sort_by_key(|p| p.0);
            v
        };
        let (a, b) = (pick(method_a), pick(method_b));
        if a.is_empty() || b.is_empty() {
            return Err(Error::invalid(format!(
                "dataset {d:?} lacks rows for {method_a:?} or {method_b:?}"
            )));
        }
        if a.iter().map(|p| p.0).ne(b.iter().map(|p| p.0)) {
            return Err(Error::invalid(format!("dataset {d:?}: repeat ids of the two methods do not pair up")));
        }
        let xa: Vec<f64> = a.iter().map(|p| p.1).collect();
        let xb: Vec<f64> = b.iter().map(|p| p.1).collect();
        let test = paired_t_one_sided(&xa, &xb, alpha)?;
        out.push(PairedComparison {
            mean_a: xa.iter().sum::<f64>() / xa.len() as f64,
            mean_b: xb.iter().sum::<f64>() / xb.len() as f64,
            dataset: d,
            method_a: method_a.to_string(),
            method_b: method_b.to_string(),
            test,
        });
    }
    Ok(out)
}

/// One point of a critical-difference diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdPoint {
    pub method: String,
    pub mean_rank: f64,
    pub cd: f64,
}

pub fn cd_diagram(table: &RankTable, alpha: f64) -> Result<Vec<CdPoint>> {
    let cd = nemenyi_cd(table.n_methods(), table.n_datasets(), alpha)?;
    Ok(table
        .methods
        .iter()
        .zip(table.mean_ranks()?)
        .map(|(m, r)| CdPoint {
            method: m.clone(),
            mean_rank: r,
            cd,
        })
        .collect())
}
