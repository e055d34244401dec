//! Per-classifier training index sets: bootstrap (SRS) or ranked set
//! sampling (RSS) driven by a Spearman-weighted linear score.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::rng::purpose;
use crate::numerics::{dot, isqrt, spearman, RngStream};

/// `s(x) = Σ_j w_j x_j` with `w_j` the Spearman correlation of feature `j`
/// with the integer-coded label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunction {
    weights: Vec<f64>,
}

impl ScoreFunction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("ScoreFunction::new"));
        }
        Ok(ScoreFunction { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    pub fn score_all(&self, data: &Dataset) -> Vec<f64> {
        (0..data.len()).map(|i| self.score(data.features().row(i))).collect()
    }
}

pub fn fit_score_function(train: &Dataset) -> Result<ScoreFunction> {
    if train.len() < 2 {
        return Err(Error::invalid("score function needs at least two rows"));
    }
    let labels: Vec<f64> = train.labels().iter().map(|&y| y as f64).collect();
    let weights = (0..train.dim())
        .map(|j| match spearman(&train.features().column(j), &labels) {
            Ok(w) => Ok(w),
            Err(Error::UndefinedCorrelation(_)) => Ok(0.0),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreFunction::new(weights)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Srs,
    Rss,
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerKind::Srs => "SRS",
            SamplerKind::Rss => "RSS",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SetSize {
    /// `K = ⌊√N⌋`
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub set_size: SetSize,
    /// Number of cycles `m`; `None` means `⌊N/K⌋`.
    pub cycles: Option<usize>,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        SamplerConfig {
            kind,
            set_size: SetSize::Auto,
            cycles: None,
            seed,
        }
    }

    /// Resolve `(K, m)` for a population of `n` and check feasibility.
    pub fn resolve(&self, n: usize) -> Result<(usize, usize)> {
        if n == 0 {
            return Err(Error::invalid("empty population"));
        }
        let k = match self.set_size {
            SetSize::Auto => isqrt(n).max(1),
            SetSize::Fixed(0) => return Err(Error::invalid("set size K must be >= 1")),
            SetSize::Fixed(k) => k,
        };
        let m = match self.cycles {
            Some(0) => return Err(Error::invalid("cycle count m must be >= 1")),
            Some(m) => m,
            None => (n / k).max(1),
        };
        if self.kind == SamplerKind::Rss && k * k > n {
            return Err(Error::InfeasibleCycle {
                pool: n,
                needed: k * k,
            });
        }
        Ok((k, m))
    }
}

/// Where a selected unit came from inside its RSS cycle. All 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankAnnotation {
    pub cycle: usize,
    pub rank: usize,
    pub group: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub kind: SamplerKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub classifier_id: usize,
    pub indices: Vec<usize>,
    pub ranks: Option<Vec<RankAnnotation>>,
}

impl SamplingPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<SamplingPlan> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Bootstrap: `size` uniform draws with replacement from `0..n`.
pub fn srs_sample(n: usize, size: usize, rng: &mut RngStream) -> Vec<usize> {
    assert!(n >= 1, "srs_sample needs a nonempty population");
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

/// One RSS cycle. Returns `(index, rank)` pairs for `rank = 1..=K`.
pub fn rss_cycle(
    pool: &[usize],
    k: usize,
    score: &ScoreFunction,
    data: &Dataset,
    rng: &mut RngStream,
) -> Result<Vec<(usize, usize)>> {
    rss_cycle_by(pool, k, |i| score.score(data.features().row(i)), rng)
}

fn rss_cycle_by(
    pool: &[usize],
    k: usize,
    score_of: impl Fn(usize) -> f64,
    rng: &mut RngStream,
) -> Result<Vec<(usize, usize)>> {
    if k == 0 {
        return Err(Error::invalid("set size K must be >= 1"));
    }
    let needed = k * k;
    if pool.len() < needed {
        return Err(Error::InfeasibleCycle {
            pool: pool.len(),
            needed,
        });
    }
    // A uniform K^2-subset in random order; consecutive chunks of K are
    // therefore a uniform random partition into groups.
    let picked: Vec<(usize, f64)> = index::sample(rng, pool.len(), needed)
        .into_iter()
        .map(|p| {
            let i = pool[p];
            (i, score_of(i))
        })
        .collect();
    let groups: Vec<Vec<(usize, f64)>> = picked.chunks(k).map(<[_]>::to_vec).collect();
    Ok(select_ranked(groups))
}

/// Sort each group by (score, index) ascending and keep the r-th smallest of
/// group r.
fn select_ranked(groups: Vec<Vec<(usize, f64)>>) -> Vec<(usize, usize)> {
    groups
        .into_iter()
        .enumerate()
        .map(|(g, mut members)| {
            members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            (members[g].0, g + 1)
        })
        .collect()
}

/// The sampling plan for base classifier `classifier_id`.
pub fn build_plan(
    config: &SamplerConfig,
    data: &Dataset,
    score: &ScoreFunction,
    classifier_id: usize,
) -> Result<SamplingPlan> {
    let n = data.len();
    let (k, m) = config.resolve(n)?;
    let mut rng = RngStream::new(config.seed, purpose::SAMPLING).derive(classifier_id as u64);
    let (indices, ranks) = match config.kind {
        SamplerKind::Srs => (srs_sample(n, k * m, &mut rng), None),
        SamplerKind::Rss => {
            let scores = score.score_all(data);
            let pool: Vec<usize> = (0..n).collect();
            let mut indices = Vec::with_capacity(k * m);
            let mut ranks = Vec::with_capacity(k * m);
            for cycle in 1..=m {
                for (i, r) in rss_cycle_by(&pool, k, |i| scores[i], &mut rng)? {
                    indices.push(i);
                    ranks.push(RankAnnotation {
                        cycle,
                        rank: r,
                        group: r,
                    });
                }
            }
            (indices, Some(ranks))
        }
    };
    Ok(SamplingPlan {
        kind: config.kind,
        k,
        m,
        seed: config.seed,
        classifier_id,
        indices,
        ranks,
    })
}
