use crate::error::{Error, Result};

/// Ranks in `[1, n]`, ties sharing the mean of the positions they span.
#[derive(Clone, Debug, PartialEq)]
pub struct RankVector(Vec<f64>);

impl RankVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn average_ranks(values: &[f64]) -> Result<RankVector> {
    if values.is_empty() {
        return Err(Error::invalid("average_ranks on empty input"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NanInput("average_ranks"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) hold ranks start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    Ok(RankVector(ranks))
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims("pearson", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant sequence"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dims("spearman", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::invalid("spearman needs at least two pairs"));
    }
    let rx = average_ranks(x)?;
    let ry = average_ranks(y)?;
    pearson(rx.as_slice(), ry.as_slice())
}
