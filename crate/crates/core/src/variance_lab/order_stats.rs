use serde::{Deserialize, Serialize};

use super::FiniteMarginDistribution;
use crate::error::{Error, Result};
use crate::losses::{loss_value, LossKind};

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability mass of the `r`-th smallest of `k` i.i.d. draws (1-based `r`)
/// over the support of `dist`.
pub fn order_stat_pmf(dist: &FiniteMarginDistribution, k: usize, r: usize) -> Result<Vec<f64>> {
    if k == 0 || r == 0 || r > k {
        return Err(Error::invalid(format!("order statistic r = {r} of K = {k}")));
    }
    let coeffs: Vec<f64> = (0..=k).map(|j| binomial(k, j)).collect();
    let at_most = |f: f64| -> f64 {
        (r..=k)
            .map(|j| coeffs[j] * f.powi(j as i32) * (1.0 - f).powi((k - j) as i32))
            .sum()
    };
    let mut prev = 0.0;
    Ok(dist
        .cdf()
        .iter()
        .map(|&f| {
            let g = at_most(f);
            let p = (g - prev).max(0.0);
            prev = g;
            p
        })
        .collect())
}

/// `E[g(z₍r₎)]` for `r = 1..=k`.
pub fn exact_order_stat_expectations(
    dist: &FiniteMarginDistribution,
    k: usize,
    g: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("K must be >= 1"));
    }
    (1..=k)
        .map(|r| {
            let pmf = order_stat_pmf(dist, k, r)?;
            Ok(dist.support().iter().zip(&pmf).map(|(&z, &p)| p * g(z)).sum())
        })
        .collect()
}

/// `E[z₍r₎]` for `r = 1..=k`.
pub fn exact_order_stat_means(dist: &FiniteMarginDistribution, k: usize) -> Result<Vec<f64>> {
    exact_order_stat_expectations(dist, k, |z| z)
}

/// Exact mean and variance of `R̂_φ` from `K·m` draws, under SRS and under
/// RSS with set size `K` and `m` cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean_srs: f64,
    pub mean_rss: f64,
    pub var_srs: f64,
    pub var_rss: f64,
}

pub fn exact_estimator_moments(
    loss: LossKind,
    dist: &FiniteMarginDistribution,
    k: usize,
    m: usize,
) -> Result<ExactMoments> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let phi = |z: f64| loss_value(loss, z);
    let e1 = dist.expect(phi);
    let e2 = dist.expect(|z| phi(z) * phi(z));
    let first = exact_order_stat_expectations(dist, k, phi)?;
    let second = exact_order_stat_expectations(dist, k, |z| phi(z) * phi(z))?;
    let (kf, mf) = (k as f64, m as f64);
    let within: f64 = first.iter().zip(&second).map(|(mu, s)| s - mu * mu).sum();
    Ok(ExactMoments {
        mean_srs: e1,
        mean_rss: first.iter().sum::<f64>() / kf,
        var_srs: (e2 - e1 * e1) / (kf * mf),
        var_rss: within / (kf * kf * mf),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormGap {
    pub coefficient: f64,
    pub mean_margin: f64,
    pub order_stat_means: Vec<f64>,
    /// `V_RSS − V_SRS`
    pub gap: f64,
}

/// Squared odd-part slope of `φ` on `{−1, +1}`.
pub fn gap_coefficient(loss: LossKind) -> f64 {
    match loss {
        LossKind::Exp => {
            let e = std::f64::consts::E;
            ((e - 1.0 / e) / 2.0).powi(2)
        }
        LossKind::Log => 0.25,
    }
}

pub fn closed_form_gap(
    loss: LossKind,
    k: usize,
    m: usize,
    dist: &FiniteMarginDistribution,
) -> Result<ClosedFormGap> {
    if let Some((&z, _)) = dist
        .support()
        .iter()
        .zip(dist.probs())
        .find(|(&z, &p)| p > 0.0 && z != 1.0 && z != -1.0)
    {
        return Err(Error::FormulaDomain(z));
    }
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let means = exact_order_stat_means(dist, k)?;
    let mean = dist.mean();
    let (kf, mf) = (k as f64, m as f64);
    let spread = mean * mean - means.iter().map(|v| v * v).sum::<f64>() / kf;
    let coefficient = gap_coefficient(loss);
    Ok(ClosedFormGap {
        coefficient,
        mean_margin: mean,
        order_stat_means: means,
        gap: coefficient * spread / (kf * mf),
    })
}
