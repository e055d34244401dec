//! Convex margin losses and their multiclass one-vs-rest risk.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `e^{-α}`
    Exp,
    /// `ln(1 + e^{-α})`
    Log,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::Exp, LossKind::Log];
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Exp => "exp",
            LossKind::Log => "log",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "ExpL" => Ok(LossKind::Exp),
            "log" | "LogL" => Ok(LossKind::Log),
            other => Err(Error::invalid(format!("unknown loss {other:?} (expected exp|log)"))),
        }
    }
}

pub fn loss_value(kind: LossKind, margin: f64) -> f64 {
    match kind {
        LossKind::Exp => (-margin).exp(),
        LossKind::Log => {
            if margin <= -30.0 {
                -margin + margin.exp().ln_1p()
            } else {
                (-margin).exp().ln_1p()
            }
        }
    }
}

/// dφ/dα
pub fn loss_grad(kind: LossKind, margin: f64) -> f64 {
    match kind {
        LossKind::Exp => -(-margin).exp(),
        LossKind::Log => {
            if margin >= 0.0 {
                let e = (-margin).exp();
                -e / (1.0 + e)
            } else {
                -1.0 / (1.0 + margin.exp())
            }
        }
    }
}

/// Sign targets for class `label` out of `n_classes`: +1 at the label, −1 elsewhere.
pub fn margin_target(label: usize, n_classes: usize) -> Vec<f64> {
    (0..n_classes)
        .map(|c| if c == label { 1.0 } else { -1.0 })
        .collect()
}

/// Mean per-entry loss `(1/(B·C)) Σ_i Σ_c φ(t_ic · o_ic)` and its gradient
/// with respect to the outputs.
pub fn batch_risk(kind: LossKind, outputs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = outputs.shape();
    if b == 0 {
        return Err(Error::invalid("batch_risk on an empty batch"));
    }
    if labels.len() != b {
        return Err(Error::dims("batch_risk", b, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::invalid(format!("label {bad} >= output width {c}")));
    }
    let norm = 1.0 / (b * c) as f64;
    let mut risk = 0.0;
    let mut grad = Matrix::zeros(b, c);
    for (i, &y) in labels.iter().enumerate() {
        let row = outputs.row(i);
        let g = grad.row_mut(i);
        for j in 0..c {
            let t = if j == y { 1.0 } else { -1.0 };
            let margin = t * row[j];
            risk += loss_value(kind, margin);
            g[j] = t * loss_grad(kind, margin) * norm;
        }
    }
    Ok((risk * norm, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiInverse {
    pub value: f64,
    /// Input exceeded 1 and was clamped.
    pub clamped: bool,
}

/// Excess-risk transform for the exponential loss: `√(1 − (1 − θ)²)`.
pub fn psi_inverse_exp(theta: f64) -> Result<PsiInverse> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::invalid(format!("psi inverse needs theta >= 0, got {theta}")));
    }
    let clamped = theta > 1.0;
    let t = theta.min(1.0);
    let value = (1.0 - (1.0 - t) * (1.0 - t)).sqrt();
    Ok(PsiInverse { value, clamped })
}
