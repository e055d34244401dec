use crate::error::{Error, Result};

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dims("metrics", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::invalid("metrics need at least one prediction"));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over all `n_classes` classes. A class with
/// `P + R = 0` (including one absent from both sides) contributes 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<f64> {
    check_lengths(pred, truth)?;
    if n_classes == 0 {
        return Err(Error::invalid("n_classes must be >= 1"));
    }
    if let Some(&c) = pred.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(Error::invalid(format!("class id {c} >= n_classes = {n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        predicted[p] += 1;
        actual[t] += 1;
        if p == t {
            tp[p] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let precision = if predicted[c] > 0 { tp[c] as f64 / predicted[c] as f64 } else { 0.0 };
            let recall = if actual[c] > 0 { tp[c] as f64 / actual[c] as f64 } else { 0.0 };
            if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}
