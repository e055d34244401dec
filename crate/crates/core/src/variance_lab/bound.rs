use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::psi_inverse_exp;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theta: f64,
    pub bound: f64,
    pub clamped: bool,
}

/// Excess zero-one risk bound for the exponential loss:
/// `ψ⁻¹(2√(2M² ln(1/δ)/N) + 2√V + approx)`, where `M = L·max‖f‖`.
///
/// The supremum over the hypothesis class is not evaluated; `M` and `V` are
/// whatever the caller supplies.
pub fn bound_value(
    sup_norm: f64,
    n: u64,
    delta: f64,
    variance: f64,
    approx_error: f64,
) -> Result<BoundReport> {
    if !(sup_norm > 0.0 && sup_norm.is_finite()) {
        return Err(Error::invalid(format!("M = {sup_norm} must be positive")));
    }
    if n == 0 {
        return Err(Error::invalid("N must be >= 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta = {delta} outside (0, 1)")));
    }
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!("variance = {variance} must be >= 0")));
    }
    if !(approx_error >= 0.0 && approx_error.is_finite()) {
        return Err(Error::invalid(format!("approximation error = {approx_error} must be >= 0")));
    }
    let concentration = 2.0 * (2.0 * sup_norm * sup_norm * (1.0 / delta).ln() / n as f64).sqrt();
    let theta = concentration + 2.0 * variance.sqrt() + approx_error;
    let psi = psi_inverse_exp(theta)?;
    Ok(BoundReport {
        theta,
        bound: psi.value,
        clamped: psi.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let r = bound_value(1.0, 100, 0.05, 0.01, 0.0).unwrap();
        // 2·√(2·ln 20/100) + 0.2 = 0.689549…; √(1 − 0.310451²) = 0.950589…
        assert!((r.theta - 0.689_549).abs() < 1e-6, "{}", r.theta);
        assert!((r.bound - 0.950_59).abs() < 1e-5, "{}", r.bound);
        assert!(!r.clamped);
    }

    #[test]
    fn vanishes_with_data() {
        let r = bound_value(1.0, 1_000_000_000_000, 0.05, 0.0, 0.0).unwrap();
        assert!(r.theta < 1e-5);
        assert!(r.bound < 0.01);
    }

    #[test]
    fn clamps_above_one() {
        let r = bound_value(5.0, 10, 0.01, 0.5, 0.0).unwrap();
        assert!(r.clamped);
        assert_eq!(r.bound, 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(bound_value(0.0, 10, 0.05, 0.0, 0.0).is_err());
        assert!(bound_value(1.0, 0, 0.05, 0.0, 0.0).is_err());
        assert!(bound_value(1.0, 10, 1.0, 0.0, 0.0).is_err());
        assert!(bound_value(1.0, 10, 0.05, -1.0, 0.0).is_err());
        assert!(bound_value(1.0, 10, 0.05, 0.0, -0.1).is_err());
    }
}
