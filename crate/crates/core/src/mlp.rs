//! Fully connected network: `[linear → batch-norm → ReLU → dropout]*` followed
//! by a bare linear output layer, trained by mini-batch gradient descent on
//! [`batch_risk`](crate::losses::batch_risk).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{batch_risk, LossKind};
use crate::numerics::{gemm_nn, gemm_nt, gemm_tn, Matrix, RngStream};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub batch_norm: bool,
    pub dropout: f64,
    pub grad_clip: Option<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl MlpConfig {
    /// Defaults: hidden `[256, 128]`, batch-norm on, no dropout or clipping,
    /// lr 0.01, 50 epochs, batch 32.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_dims: vec![256, 128],
            output_dim,
            batch_norm: true,
            dropout: 0.0,
            grad_clip: None,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::invalid(format!("clip norm {c} must be > 0")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub run_mean: Vec<f64>,
    pub run_var: Vec<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            run_mean: vec![0.0; width],
            run_var: vec![1.0; width],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `in × out`
    pub w: Matrix,
    pub b: Vec<f64>,
    pub bn: Option<BatchNorm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    config: MlpConfig,
    layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, Default)]
pub struct TrainTrace {
    /// Size-weighted mean mini-batch risk, one entry per epoch.
    pub epoch_risks: Vec<f64>,
    /// Largest global gradient norm actually applied in each epoch.
    pub max_applied_grad_norm: Vec<f64>,
}

impl TrainTrace {
    pub fn final_risk(&self) -> Option<f64> {
        self.epoch_risks.last().copied()
    }
}

struct HiddenCache {
    /// Post-affine (BN) pre-ReLU values.
    pre_act: Matrix,
    xhat: Option<Matrix>,
    inv_std: Option<Vec<f64>>,
    dropout_mask: Option<Vec<f64>>,
}

/// Activations kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input to each linear layer.
    inputs: Vec<Matrix>,
    hidden: Vec<HiddenCache>,
}

impl ForwardCache {
    /// Pre-ReLU activations of hidden block `l` (after batch-norm when enabled).
    pub fn pre_activation(&self, l: usize) -> &Matrix {
        &self.hidden[l].pre_act
    }

    /// Batch-normalized values `x̂` of hidden block `l`, if batch-norm ran in train mode.
    pub fn normalized(&self, l: usize) -> Option<&Matrix> {
        self.hidden[l].xhat.as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for g in &self.layers {
            s += g.w.sum_squares();
            s += g.b.iter().map(|v| v * v).sum::<f64>();
            for v in [&g.gamma, &g.beta].into_iter().flatten() {
                s += v.iter().map(|x| x * x).sum::<f64>();
            }
        }
        s.sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.layers {
            g.w.scale(k);
            g.b.iter_mut().for_each(|v| *v *= k);
            for v in [&mut g.gamma, &mut g.beta].into_iter().flatten() {
                v.iter_mut().for_each(|x| *x *= k);
            }
        }
    }

    /// Same ordering as [`MlpModel::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend_from_slice(g.w.as_slice());
            out.extend_from_slice(&g.b);
            for v in [&g.gamma, &g.beta].into_iter().flatten() {
                out.extend_from_slice(v);
            }
        }
        out
    }
}

fn relu_inplace(m: &mut Matrix) -> Matrix {
    let pre = m.clone();
    m.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    pre
}

fn add_bias(m: &mut Matrix, b: &[f64]) {
    for r in 0..m.rows() {
        for (v, bb) in m.row_mut(r).iter_mut().zip(b) {
            *v += bb;
        }
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity batch-norm.
    pub fn init(config: &MlpConfig, rng: &mut RngStream) -> Result<MlpModel> {
        config.validate()?;
        let dims = config.dims();
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (fan_in, fan_out) = (dims[l], dims[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
                Layer {
                    w: Matrix::from_raw(fan_in, fan_out, data),
                    b: vec![0.0; fan_out],
                    bn: (config.batch_norm && l + 1 < n_layers).then(|| BatchNorm::new(fan_out)),
                }
            })
            .collect();
        Ok(MlpModel {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::dims("mlp forward", self.config.input_dim, x.cols()));
        }
        Ok(())
    }

    /// Forward pass without touching running statistics. In train mode the
    /// per-layer batch `(mean, var)` are returned for the caller to fold in.
    #[allow(clippy::type_complexity)]
    fn forward_pure(
        &self,
        x: &Matrix,
        mode: Mode,
        mut dropout_rng: Option<&mut RngStream>,
    ) -> Result<(Matrix, ForwardCache, Vec<Option<(Vec<f64>, Vec<f64>)>>)> {
        self.check_width(x)?;
        let b = x.rows();
        if b == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if mode == Mode::Train && self.config.batch_norm && b < 2 {
            return Err(Error::invalid("batch-norm in train mode needs at least 2 rows"));
        }
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut hidden = Vec::with_capacity(n_hidden);
        let mut stats = Vec::with_capacity(n_hidden);
        let mut a = x.clone();

        for layer in &self.layers[..n_hidden] {
            let mut z = gemm_nn(&a, &layer.w);
            add_bias(&mut z, &layer.b);
            let width = z.cols();
            let (xhat, inv_std, batch_stats) = match (&layer.bn, mode) {
                (Some(bn), Mode::Train) => {
                    let bf = b as f64;
                    let mean: Vec<f64> = z.column_sums().into_iter().map(|s| s / bf).collect();
                    let mut var = vec![0.0; width];
                    for r in 0..b {
                        for ((v, zz), m) in var.iter_mut().zip(z.row(r)).zip(&mean) {
                            *v += (zz - m) * (zz - m);
                        }
                    }
                    var.iter_mut().for_each(|v| *v /= bf);
                    let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                    let mut xh = z;
                    for r in 0..b {
                        for ((v, m), s) in xh.row_mut(r).iter_mut().zip(&mean).zip(&inv) {
                            *v = (*v - m) * s;
                        }
                    }
                    let mut y = xh.clone();
                    for r in 0..b {
                        for ((v, g), be) in y.row_mut(r).iter_mut().zip(&bn.gamma).zip(&bn.beta) {
                            *v = *v * g + be;
                        }
                    }
                    z = y;
                    (Some(xh), Some(inv), Some((mean, var)))
                }
                (Some(bn), Mode::Eval) => {
                    for r in 0..b {
                        let row = z.row_mut(r);
                        for j in 0..width {
                            let xh = (row[j] - bn.run_mean[j]) / (bn.run_var[j] + BN_EPS).sqrt();
                            row[j] = xh * bn.gamma[j] + bn.beta[j];
                        }
                    }
                    (None, None, None)
                }
                (None, _) => (None, None, None),
            };
            let pre_act = relu_inplace(&mut z);
            let dropout_mask = match (mode, dropout_rng.as_deref_mut()) {
                (Mode::Train, Some(rng)) if self.config.dropout > 0.0 => {
                    let p = self.config.dropout;
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..b * width)
                        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                        .collect();
                    for (v, m) in z.as_mut_slice().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            inputs.push(a);
            hidden.push(HiddenCache {
                pre_act,
                xhat,
                inv_std,
                dropout_mask,
            });
            stats.push(batch_stats);
            a = z;
        }

        let last = &self.layers[n_hidden];
        let mut out = gemm_nn(&a, &last.w);
        add_bias(&mut out, &last.b);
        inputs.push(a);
        Ok((out, ForwardCache { inputs, hidden }, stats))
    }

    /// Forward pass. Train mode uses batch statistics, folds them into the
    /// running estimates with momentum [`BN_MOMENTUM`], and applies dropout
    /// when `rng` is given.
    pub fn forward(
        &mut self,
        x: &Matrix,
        mode: Mode,
        rng: Option<&mut RngStream>,
    ) -> Result<(Matrix, ForwardCache)> {
        let (out, cache, stats) = self.forward_pure(x, mode, rng)?;
        for (layer, st) in self.layers.iter_mut().zip(stats) {
            if let (Some(bn), Some((mean, var))) = (layer.bn.as_mut(), st) {
                for j in 0..mean.len() {
                    bn.run_mean[j] = BN_MOMENTUM * bn.run_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
                    bn.run_var[j] = BN_MOMENTUM * bn.run_var[j] + (1.0 - BN_MOMENTUM) * var[j];
                }
            }
        }
        Ok((out, cache))
    }

    /// Backpropagate `grad_out` (∂risk/∂outputs) through a train-mode cache.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Gradients {
        let n_hidden = self.layers.len() - 1;
        let mut grads: Vec<LayerGrad> = Vec::with_capacity(self.layers.len());

        let last = &self.layers[n_hidden];
        let a = &cache.inputs[n_hidden];
        grads.push(LayerGrad {
            w: gemm_tn(a, grad_out),
            b: grad_out.column_sums(),
            gamma: None,
            beta: None,
        });
        let mut da = gemm_nt(grad_out, &last.w);

        for l in (0..n_hidden).rev() {
            let layer = &self.layers[l];
            let hc = &cache.hidden[l];
            if let Some(mask) = &hc.dropout_mask {
                for (v, m) in da.as_mut_slice().iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            for (v, pre) in da.as_mut_slice().iter_mut().zip(hc.pre_act.as_slice()) {
                if *pre <= 0.0 {
                    *v = 0.0;
                }
            }
            let mut dz = da;
            let (dgamma, dbeta) = match (&layer.bn, &hc.xhat, &hc.inv_std) {
                (Some(bn), Some(xhat), Some(inv)) => {
                    let (b, width) = dz.shape();
                    let bf = b as f64;
                    let mut dgamma = vec![0.0; width];
                    let dbeta = dz.column_sums();
                    for r in 0..b {
                        for ((g, dy), xh) in dgamma.iter_mut().zip(dz.row(r)).zip(xhat.row(r)) {
                            *g += dy * xh;
                        }
                    }
                    // dx̂ = dy·γ; Σdx̂ = γ·Σdy; Σdx̂·x̂ = γ·dγ
                    for r in 0..b {
                        let row = dz.row_mut(r);
                        let xr = xhat.row(r);
                        for j in 0..width {
                            let g = bn.gamma[j];
                            row[j] = inv[j] / bf
                                * (bf * row[j] * g - g * dbeta[j] - xr[j] * g * dgamma[j]);
                        }
                    }
                    (Some(dgamma), Some(dbeta))
                }
                _ => (None, None),
            };
            let a = &cache.inputs[l];
            let next_da = (l > 0).then(|| gemm_nt(&dz, &layer.w));
            grads.push(LayerGrad {
                w: gemm_tn(a, &dz),
                b: dz.column_sums(),
                gamma: dgamma,
                beta: dbeta,
            });
            match next_da {
                Some(d) => da = d,
                None => break,
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Train-mode risk and parameter gradients on one batch, with no dropout
    /// and no update of running statistics.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        labels: &[usize],
        kind: LossKind,
    ) -> Result<(f64, Gradients)> {
        let (out, cache, _) = self.forward_pure(x, Mode::Train, None)?;
        let (risk, grad_out) = batch_risk(kind, &out, labels)?;
        Ok((risk, self.backward(&cache, &grad_out)))
    }

    /// Gradient descent step `θ ← θ − lr·g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, d) in layer.w.as_mut_slice().iter_mut().zip(g.w.as_slice()) {
                *w -= lr * d;
            }
            for (b, d) in layer.b.iter_mut().zip(&g.b) {
                *b -= lr * d;
            }
            if let (Some(bn), Some(dg), Some(db)) = (layer.bn.as_mut(), &g.gamma, &g.beta) {
                for (p, d) in bn.gamma.iter_mut().zip(dg) {
                    *p -= lr * d;
                }
                for (p, d) in bn.beta.iter_mut().zip(db) {
                    *p -= lr * d;
                }
            }
        }
    }

    /// All trainable parameters: per layer `w`, `b`, then `γ`, `β` if present.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.w.as_slice());
            out.extend_from_slice(&l.b);
            if let Some(bn) = &l.bn {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.flat_params().len();
        if params.len() != expected {
            return Err(Error::dims("set_flat_params", expected, params.len()));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.w.as_mut_slice().iter_mut().for_each(|v| *v = it.next().unwrap());
            l.b.iter_mut().for_each(|v| *v = it.next().unwrap());
            if let Some(bn) = &mut l.bn {
                bn.gamma.iter_mut().for_each(|v| *v = it.next().unwrap());
                bn.beta.iter_mut().for_each(|v| *v = it.next().unwrap());
            }
        }
        Ok(())
    }

    /// Eval-mode outputs, `B × C`.
    pub fn predict_scores(&self, features: &Matrix) -> Result<Matrix> {
        let (out, _, _) = self.forward_pure(features, Mode::Eval, None)?;
        Ok(out)
    }

    pub fn predict_labels(&self, features: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_scores(features)?))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.w.clone(),
                    b: l.b.clone(),
                    gamma: l.bn.as_ref().map(|bn| bn.gamma.clone()),
                    beta: l.bn.as_ref().map(|bn| bn.beta.clone()),
                    run_mean: l.bn.as_ref().map(|bn| bn.run_mean.clone()),
                    run_var: l.bn.as_ref().map(|bn| bn.run_var.clone()),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<MlpModel> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Version(file.version));
        }
        file.config.validate()?;
        let dims = file.config.dims();
        if file.layers.len() != dims.len() - 1 {
            return Err(Error::dims("model layers", dims.len() - 1, file.layers.len()));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.into_iter().enumerate() {
            if lf.w.shape() != (dims[l], dims[l + 1]) || lf.b.len() != dims[l + 1] {
                return Err(Error::dims(
                    "model layer shape",
                    format!("{}x{}", dims[l], dims[l + 1]),
                    format!("{}x{}", lf.w.rows(), lf.w.cols()),
                ));
            }
            if !lf.w.is_finite() {
                return Err(Error::NonFinite("model weights"));
            }
            let bn = match (lf.gamma, lf.beta, lf.run_mean, lf.run_var) {
                (Some(gamma), Some(beta), Some(run_mean), Some(run_var)) => {
                    let w = dims[l + 1];
                    if [gamma.len(), beta.len(), run_mean.len(), run_var.len()] != [w; 4] {
                        return Err(Error::dims("batch-norm width", w, gamma.len()));
                    }
                    if run_var.iter().any(|&v| !(v > 0.0)) {
                        return Err(Error::invalid("running variance must be positive"));
                    }
                    Some(BatchNorm {
                        gamma,
                        beta,
                        run_mean,
                        run_var,
                    })
                }
                (None, None, None, None) => None,
                _ => return Err(Error::invalid("partial batch-norm parameters")),
            };
            layers.push(Layer { w: lf.w, b: lf.b, bn });
        }
        Ok(MlpModel {
            config: file.config,
            layers,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: MlpConfig,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Matrix,
    b: Vec<f64>,
    gamma: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    run_mean: Option<Vec<f64>>,
    run_var: Option<Vec<f64>>,
}

/// Row-wise argmax; ties go to the lowest column.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Mini-batch index chunks for one epoch. Under batch-norm a trailing batch of
/// one row is merged into the batch before it.
fn epoch_batches(order: &[usize], batch_size: usize, batch_norm: bool) -> Vec<&[usize]> {
    let mut batches: Vec<&[usize]> = order.chunks(batch_size).collect();
    if batch_norm && batches.len() > 1 && batches.last().map(|b| b.len()) == Some(1) {
        batches.pop();
        let start = order.len() - 1 - batches.last().unwrap().len();
        *batches.last_mut().unwrap() = &order[start..];
    }
    batches
}

/// Initialize from `rng` and run `config.epochs` epochs of shuffled
/// mini-batch gradient descent.
pub fn train(
    config: &MlpConfig,
    features: &Matrix,
    labels: &[usize],
    kind: LossKind,
    rng: &mut RngStream,
) -> Result<(MlpModel, TrainTrace)> {
    config.validate()?;
    if features.cols() != config.input_dim {
        return Err(Error::dims("train features", config.input_dim, features.cols()));
    }
    if labels.len() != features.rows() {
        return Err(Error::dims("train labels", features.rows(), labels.len()));
    }
    if features.rows() < 2 {
        return Err(Error::invalid("training needs at least 2 rows"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= config.output_dim) {
        return Err(Error::invalid(format!("label {bad} >= output dim {}", config.output_dim)));
    }
    let mut model = MlpModel::init(config, rng)?;
    let mut trace = TrainTrace::default();
    let mut order: Vec<usize> = (0..features.rows()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let mut risk_sum = 0.0;
        let mut max_norm: f64 = 0.0;
        for (bi, idx) in epoch_batches(&order, config.batch_size, config.batch_norm)
            .into_iter()
            .enumerate()
        {
            let x = features.select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let (out, cache) = model.forward(&x, Mode::Train, Some(rng))?;
            let (risk, grad_out) = batch_risk(kind, &out, &y)?;
            if !risk.is_finite() {
                return Err(Error::Diverged { epoch, batch: bi });
            }
            let mut grads = model.backward(&cache, &grad_out);
            let mut norm = grads.norm();
            if !norm.is_finite() {
                return Err(Error::Diverged { epoch, batch: bi });
            }
            if let Some(max) = config.grad_clip {
                if norm > max {
                    grads.scale(max / norm);
                    norm = grads.norm();
                }
            }
            max_norm = max_norm.max(norm);
            model.apply_gradients(&grads, config.learning_rate);
            risk_sum += risk * idx.len() as f64;
        }
        trace.epoch_risks.push(risk_sum / features.rows() as f64);
        trace.max_applied_grad_norm.push(max_norm);
    }
    Ok((model, trace))
}
