use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::numerics::average_ranks;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// `+∞`/`−∞`/`0` when the differences have zero spread.
    pub t: f64,
    pub df: usize,
    pub critical: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub degenerate: bool,
}

/// One-sided paired t-test of `H₁: mean(a − b) > 0`.
pub fn paired_t_one_sided(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestReport> {
    if a.len() != b.len() {
        return Err(Error::dims("paired_t_one_sided", a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs n >= 2"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired_t_one_sided"));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = n - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - alpha);
    // Differences equal up to rounding of the inputs count as constant.
    let scale = diffs.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let degenerate = sd <= 1e-12 * scale || sd == 0.0;
    let (t, p_value, significant) = if degenerate {
        if mean > 0.0 {
            (f64::INFINITY, 0.0, true)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0, false)
        } else {
            (0.0, 0.5, false)
        }
    } else {
        let t = mean / (sd / nf.sqrt());
        (t, dist.sf(t), t > critical)
    };
    Ok(TTestReport {
        n,
        mean_diff: mean,
        sd_diff: sd,
        t,
        df,
        critical,
        p_value,
        alpha,
        significant,
        degenerate,
    })
}

/// Mean metric per (dataset, method), ranked within each dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    /// `values[i][j]` is method `j` on dataset `i`.
    pub values: Vec<Vec<f64>>,
    pub higher_is_better: bool,
}

impl RankTable {
    pub fn new(
        datasets: Vec<String>,
        methods: Vec<String>,
        values: Vec<Vec<f64>>,
        higher_is_better: bool,
    ) -> Result<Self> {
        if values.len() != datasets.len() {
            return Err(Error::dims("RankTable rows", datasets.len(), values.len()));
        }
        if let Some(row) = values.iter().find(|r| r.len() != methods.len()) {
            return Err(Error::dims("RankTable columns", methods.len(), row.len()));
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::NanInput("RankTable"));
        }
        Ok(RankTable {
            datasets,
            methods,
            values,
            higher_is_better,
        })
    }

    /// Build directly from per-dataset rank rows (rank 1 = best).
    pub fn from_ranks(ranks: Vec<Vec<f64>>) -> Result<Self> {
        let k = ranks.first().map_or(0, Vec::len);
        let datasets = (0..ranks.len()).map(|i| format!("d{i}")).collect();
        let methods = (0..k).map(|j| format!("m{j}")).collect();
        RankTable::new(datasets, methods, ranks, false)
    }

    pub fn n_datasets(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    /// Average ranks on ties; rank 1 is the best method on that dataset.
    pub fn ranks(&self) -> Result<Vec<Vec<f64>>> {
        self.values
            .iter()
            .map(|row| {
                let keyed: Vec<f64> = if self.higher_is_better {
                    row.iter().map(|v| -v).collect()
                } else {
                    row.clone()
                };
                Ok(average_ranks(&keyed)?.into_vec())
            })
            .collect()
    }

    pub fn mean_ranks(&self) -> Result<Vec<f64>> {
        let ranks = self.ranks()?;
        let n = ranks.len() as f64;
        Ok((0..self.n_methods())
            .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub n_datasets: usize,
    pub n_methods: usize,
    pub methods: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub chi2: f64,
    /// Iman–Davenport statistic; `None` when its denominator is not positive.
    pub tau_f: Option<f64>,
    pub tau_f_infinite: bool,
    pub df1: usize,
    pub df2: usize,
}

pub fn friedman_tau_f(table: &RankTable) -> Result<FriedmanReport> {
    let (n, k) = (table.n_datasets(), table.n_methods());
    if n < 2 || k < 2 {
        return Err(Error::invalid(format!("Friedman test needs n >= 2 and k >= 2 (got n = {n}, k = {k})")));
    }
    let mean_ranks = table.mean_ranks()?;
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    // Exact ties give a tiny negative residue.
    let chi2 = if chi2.abs() < 1e-12 { 0.0 } else { chi2 };
    let denom = nf * (kf - 1.0) - chi2;
    let (tau_f, tau_f_infinite) = if denom > 0.0 {
        (Some((nf - 1.0) * chi2 / denom), false)
    } else {
        (None, true)
    };
    Ok(FriedmanReport {
        n_datasets: n,
        n_methods: k,
        methods: table.methods.clone(),
        mean_ranks,
        chi2,
        tau_f,
        tau_f_infinite,
        df1: k - 1,
        df2: (k - 1) * (n - 1),
    })
}

/// Upper-`alpha` quantile of `F(df1, df2)`.
pub fn f_critical(df1: usize, df2: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Upper-`alpha` quantile of Student-t with `df` degrees of freedom.
pub fn t_critical(df: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Studentized range quantiles divided by √2, for k = 2..=10.
const Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::invalid(format!("Nemenyi table covers 2 <= k <= 10, got k = {k}")));
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::invalid(format!("Nemenyi table covers alpha in {{0.05, 0.10}}, got {alpha}")));
    };
    Ok(table[k - 2])
}

/// Critical difference `q_α(k)·√(k(k+1)/(6n))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("Nemenyi CD needs n >= 1"));
    }
    let q = nemenyi_q(k, alpha)?;
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}
