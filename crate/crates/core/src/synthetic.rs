//! Seeded synthetic classification sets for desk-scale benchmarks.

use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

const SYNTH: u64 = 0x5359_4e54;

/// Two unit-covariance Gaussian classes with means `±(a, …, a)` and
/// `a = 2/√d`, half of the rows in each class.
pub fn twonorm(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(Error::invalid("twonorm needs n >= 2 and d >= 1"));
    }
    let a = 2.0 / (d as f64).sqrt();
    let mut rng = RngStream::new(seed, SYNTH);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let mu = if y == 0 { a } else { -a };
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mu + z);
        }
        labels.push(y);
    }
    Dataset::new(Matrix::from_vec(n, d, data)?, labels, 2)
}

/// `c` isotropic Gaussian blobs in `d` dimensions. Centres are drawn from
/// `N(0, spread²)` per coordinate; rows cycle through the classes.
pub fn blobs(n: usize, d: usize, c: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if n < c || d == 0 || c < 2 {
        return Err(Error::invalid("blobs needs n >= c >= 2 and d >= 1"));
    }
    let mut rng = RngStream::new(seed, SYNTH).derive(1);
    let centres: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spread * z
                })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % c;
        for &mu in &centres[y] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(mu + z);
        }
        labels.push(y);
    }
    Dataset::new(Matrix::from_vec(n, d, data)?, labels, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_balance() {
        let t = twonorm(200, 20, 1).unwrap();
        assert_eq!(t.features().shape(), (200, 20));
        assert_eq!(t.labels().iter().filter(|&&y| y == 1).count(), 100);
        let b = blobs(90, 4, 3, 1.5, 2).unwrap();
        assert_eq!(b.n_classes(), 3);
        assert_eq!(b.labels().iter().filter(|&&y| y == 2).count(), 30);
    }

    #[test]
    fn twonorm_class_means() {
        let t = twonorm(4000, 5, 3).unwrap();
        let a = 2.0 / 5f64.sqrt();
        let x = t.features();
        let mean0: f64 = (0..4000).step_by(2).map(|i| x.get(i, 0)).sum::<f64>() / 2000.0;
        assert!((mean0 - a).abs() < 4.0 / 2000f64.sqrt());
    }

    #[test]
    fn seeded() {
        assert_eq!(blobs(30, 3, 3, 1.0, 9).unwrap().features(), blobs(30, 3, 3, 1.0, 9).unwrap().features());
    }
}
