//! Expectation and variance of the empirical convex risk under SRS and RSS.
//!
//! Two independent routes are provided for every quantity:
//!
//! * exact enumeration over a finite margin distribution, using the
//!   order-statistic law `P(Z₍r₎ ≤ t) = Σ_{j≥r} C(K,j) F(t)ʲ (1−F(t))^{K−j}`;
//! * Monte Carlo, drawing whole estimator samples and measuring the spread
//!   of `R̂_φ` across trials with jackknife error bars.
//!
//! For margins restricted to `{−1, +1}` there is also the closed form
//!
//! ```text
//! V_RSS − V_SRS = c_φ · (1/(K·m)) · [ (E z)² − (1/K) Σ_r (E z₍r₎)² ]
//! ```
//!
//! with `c_φ = ((e − e⁻¹)/2)²` for the exponential loss and `1/4` for the
//! logistic loss. On `{−1, +1}` both losses are exactly affine in the margin,
//! so the closed form is exact there rather than a truncated expansion.
//!
//! Margins are stored as `z = y·f(x)` and ranking inside a cycle is by `z`
//! itself. The bracket above is invariant under `z ↦ −z` (order statistics
//! reverse and pair up), so the same expression holds for the negated
//! convention.

mod bound;
mod distribution;
mod monte_carlo;
mod order_stats;

pub use bound::{bound_value, BoundReport};
pub use distribution::FiniteMarginDistribution;
pub use monte_carlo::{jackknife_variance, mc_moments, MomentReport};
pub use order_stats::{
    closed_form_gap, exact_estimator_moments, exact_order_stat_expectations,
    exact_order_stat_means, order_stat_pmf, ClosedFormGap, ExactMoments,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::LossKind;
use crate::numerics::rng::purpose;
use crate::numerics::RngStream;
use crate::sampling::SamplerKind;

/// Closed form vs exact enumeration vs Monte Carlo for one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub loss: LossKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_margin: f64,
    /// `E[z₍r₎]` for `r = 1..=K`.
    pub order_stat_means: Vec<f64>,
    /// `None` when the support is not `{−1, +1}`.
    pub closed_form_gap: Option<f64>,
    pub exact_gap: f64,
    pub mc_gap: f64,
    pub mc_gap_se: f64,
    /// `(mc_gap − reference) / mc_gap_se`, reference = closed form when
    /// available, otherwise the exact gap.
    pub z_score: f64,
    pub exact: ExactMoments,
    pub srs: MomentReport,
    pub rss: MomentReport,
}

pub fn gap_report(
    loss: LossKind,
    dist: &FiniteMarginDistribution,
    k: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<GapReport> {
    let exact = exact_estimator_moments(loss, dist, k, m)?;
    let closed = if dist.is_sign_valued() {
        Some(closed_form_gap(loss, k, m, dist)?.gap)
    } else {
        None
    };
    let root = RngStream::new(seed, purpose::LAB);
    let srs = mc_moments(SamplerKind::Srs, loss, dist, k, m, trials, &root.derive(0))?;
    let rss = mc_moments(SamplerKind::Rss, loss, dist, k, m, trials, &root.derive(1))?;
    let mc_gap = rss.variance - srs.variance;
    let mc_gap_se = (rss.variance_se.powi(2) + srs.variance_se.powi(2)).sqrt();
    let reference = closed.unwrap_or(exact.var_rss - exact.var_srs);
    let z_score = if mc_gap_se > 0.0 {
        (mc_gap - reference) / mc_gap_se
    } else if (mc_gap - reference).abs() < 1e-15 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GapReport {
        loss,
        k,
        m,
        trials,
        seed,
        mean_margin: dist.mean(),
        order_stat_means: exact_order_stat_means(dist, k)?,
        closed_form_gap: closed,
        exact_gap: exact.var_rss - exact.var_srs,
        mc_gap,
        mc_gap_se,
        z_score,
        exact,
        srs,
        rss,
    })
}
