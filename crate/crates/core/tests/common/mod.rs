#![allow(dead_code)]

use rand::Rng;
use rss_mlp::mlp::MlpModel;
use rss_mlp::{LossKind, Matrix, MlpConfig, RngStream};

/// Largest `|analytic − numeric| / max(|analytic| + |numeric|, 1e-6)` over all
/// parameters, with numeric gradients from central differences of step `h`.
/// The floor keeps parameters whose gradient is identically zero (a bias
/// feeding batch-norm) from dividing rounding noise by zero.
pub fn max_gradient_error(batch_norm: bool, loss: LossKind, seed: u64, h: f64) -> f64 {
    let mut cfg = MlpConfig::new(3, 2);
    cfg.hidden_dims = vec![4, 3];
    cfg.batch_norm = batch_norm;
    let mut rng = RngStream::new(seed, 77);
    let mut model = MlpModel::init(&cfg, &mut rng).unwrap();
    // Perturb batch-norm scale and shift away from the (1, 0) init so their
    // gradients are exercised in a generic position.
    let mut params = model.flat_params();
    for p in params.iter_mut() {
        *p += rng.random_range(-0.2..0.2);
    }
    model.set_flat_params(&params).unwrap();
    let data: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = Matrix::from_vec(5, 3, data).unwrap();
    let labels = vec![0, 1, 1, 0, 1];

    let (_, grads) = model.loss_and_gradients(&x, &labels, loss).unwrap();
    let analytic = grads.flatten();
    assert_eq!(analytic.len(), params.len());

    let risk_at = |p: &[f64]| -> f64 {
        let mut m = model.clone();
        m.set_flat_params(p).unwrap();
        m.loss_and_gradients(&x, &labels, loss).unwrap().0
    };
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut plus = params.clone();
        let mut minus = params.clone();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (risk_at(&plus) - risk_at(&minus)) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}
