use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// A finite law over margin values `z = y·f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct FiniteMarginDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for FiniteMarginDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        FiniteMarginDistribution::new(raw.support, raw.probs)
    }
}

impl FiniteMarginDistribution {
    /// Sorts the support and merges repeated values.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::dims("FiniteMarginDistribution", support.len(), probs.len()));
        }
        if support.iter().chain(&probs).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("FiniteMarginDistribution"));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("negative probability"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let mut pairs: Vec<(f64, f64)> = support.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (z, p) in pairs {
            if support.last() == Some(&z) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(z);
                probs.push(p);
            }
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Ok(FiniteMarginDistribution { support, probs, cdf })
    }

    /// `P(z = +1) = p`, `P(z = −1) = 1 − p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("bernoulli p = {p} outside [0, 1]")));
        }
        FiniteMarginDistribution::new(vec![-1.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().zip(&self.probs).map(|(&z, &p)| p * g(z)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|z| z)
    }

    /// Every support point with positive mass is ±1.
    pub fn is_sign_valued(&self) -> bool {
        self.support
            .iter()
            .zip(&self.probs)
            .all(|(&z, &p)| p == 0.0 || z == 1.0 || z == -1.0)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.support.len() - 1);
        self.support[i]
    }
}
