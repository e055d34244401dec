use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiniteMarginDistribution;
use crate::error::{Error, Result};
use crate::losses::{loss_value, LossKind};
use crate::numerics::{pairwise_sum, RngStream};
use crate::sampling::SamplerKind;

const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub kind: SamplerKind,
    pub loss: LossKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub mean: f64,
    /// Unbiased sample variance of `R̂_φ` across trials.
    pub variance: f64,
    pub mean_se: f64,
    /// Jackknife standard error of `variance`.
    pub variance_se: f64,
}

/// Sample variance and its leave-one-out jackknife standard error, in O(n).
pub fn jackknife_variance(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 3 {
        return Err(Error::invalid("jackknife variance needs at least 3 values"));
    }
    let nf = n as f64;
    let mean = pairwise_sum(values) / nf;
    let dev: Vec<f64> = values.iter().map(|x| x - mean).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
    let ss = pairwise_sum(&sq);
    let variance = ss / (nf - 1.0);
    // Dropping x_i leaves Σ_{j≠i}(x_j − mean_{−i})² = ss − d_i²·n/(n−1).
    let loo: Vec<f64> = dev
        .iter()
        .map(|d| (ss - d * d * nf / (nf - 1.0)) / (nf - 2.0))
        .collect();
    let loo_mean = pairwise_sum(&loo) / nf;
    let spread: Vec<f64> = loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)).collect();
    let se = ((nf - 1.0) / nf * pairwise_sum(&spread)).sqrt();
    Ok((variance, se))
}

fn one_trial(
    kind: SamplerKind,
    loss: LossKind,
    dist: &FiniteMarginDistribution,
    k: usize,
    m: usize,
    rng: &mut RngStream,
    group: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    match kind {
        SamplerKind::Srs => {
            for _ in 0..k * m {
                total += loss_value(loss, dist.sample(rng));
            }
        }
        SamplerKind::Rss => {
            for _ in 0..m {
                for r in 0..k {
                    for g in group.iter_mut() {
                        *g = dist.sample(rng);
                    }
                    let (_, z, _) = group.select_nth_unstable_by(r, f64::total_cmp);
                    total += loss_value(loss, *z);
                }
            }
        }
    }
    total / (k * m) as f64
}

/// Monte Carlo moments of `R̂_φ`. Trials run in fixed chunks, each on its own
/// stream derived from `rng`, so the report does not depend on thread count.
pub fn mc_moments(
    kind: SamplerKind,
    loss: LossKind,
    dist: &FiniteMarginDistribution,
    k: usize,
    m: usize,
    trials: usize,
    rng: &RngStream,
) -> Result<MomentReport> {
    if k == 0 || m == 0 {
        return Err(Error::invalid("K and m must be >= 1"));
    }
    if trials < 3 {
        return Err(Error::invalid("need at least 3 trials"));
    }
    let n_chunks = trials.div_ceil(CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut stream = rng.derive(c as u64);
            let len = CHUNK.min(trials - c * CHUNK);
            let mut group = vec![0.0; k];
            (0..len)
                .map(|_| one_trial(kind, loss, dist, k, m, &mut stream, &mut group))
                .collect()
        })
        .collect();
    let values: Vec<f64> = chunks.concat();
    let mean = pairwise_sum(&values) / trials as f64;
    let (variance, variance_se) = jackknife_variance(&values)?;
    Ok(MomentReport {
        kind,
        loss,
        k,
        m,
        trials,
        mean,
        variance,
        mean_se: (variance / trials as f64).sqrt(),
        variance_se,
    })
}
