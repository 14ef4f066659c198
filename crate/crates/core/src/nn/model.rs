use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, swish, swish_derivative};
use crate::error::{Error, Result};
use crate::matrix::{matmul_nn, matmul_nt, matmul_tn, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Swish,
}

/// Shape and regularization hyperparameters that fix the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_hidden: usize,
    pub dropout_p: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl Architecture {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: 128,
            n_hidden: 2,
            dropout_p: 0.2,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        }
    }

    pub fn with_hidden(mut self, hidden_dim: usize, n_hidden: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self.n_hidden = n_hidden;
        self
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if self.n_hidden > 0 && self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(Error::Config("bn_epsilon must be positive".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) {
            return Err(Error::Config("bn_momentum must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    /// `out_dim × in_dim`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and bias.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in layer.weights.as_mut_slice() {
            *w = rng.random_range(-bound..bound);
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-bound..bound);
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        let mut z = matmul_nt(x, &self.weights);
        for row in z.as_mut_slice().chunks_exact_mut(self.bias.len().max(1)) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormState {
    pub fn new(dim: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum,
            epsilon,
        }
    }

    /// Per-feature `(scale, shift)` of the eval-mode affine map.
    fn eval_affine(&self) -> (Vec<f64>, Vec<f64>) {
        let scale: Vec<f64> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(g, v)| g / (v + self.epsilon).sqrt())
            .collect();
        let shift = self
            .beta
            .iter()
            .zip(&self.running_mean)
            .zip(&scale)
            .map(|((b, m), s)| b - m * s)
            .collect();
        (scale, shift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock {
    pub linear: LinearLayer,
    pub norm: BatchNormState,
    pub activation: Activation,
}

/// `input → [Linear → BatchNorm → Swish → Dropout] × n_hidden → Linear(1)`.
///
/// The scalar output is a logit; the attribution target is its sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    arch: Architecture,
    pub(crate) hidden: Vec<HiddenBlock>,
    pub(crate) output: LinearLayer,
    mode: Mode,
}

/// Activations kept from a training-mode forward pass.
pub(crate) struct TrainCache {
    input: Matrix,
    layers: Vec<LayerCache>,
    last: Matrix,
    logits: Vec<f64>,
}

struct LayerCache {
    normalized: Matrix,
    pre_act: Matrix,
    inv_std: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Gradients laid out like [`MlpClassifier::params_mut`].
pub(crate) type Grads = Vec<Vec<f64>>;

impl MlpClassifier {
    pub fn new<R: Rng>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut hidden = Vec::with_capacity(arch.n_hidden);
        let mut in_dim = arch.input_dim;
        for _ in 0..arch.n_hidden {
            hidden.push(HiddenBlock {
                linear: LinearLayer::init(in_dim, arch.hidden_dim, rng),
                norm: BatchNormState::new(arch.hidden_dim, arch.bn_momentum, arch.bn_epsilon),
                activation: Activation::Swish,
            });
            in_dim = arch.hidden_dim;
        }
        let output = LinearLayer::init(in_dim, 1, rng);
        Ok(Self {
            arch,
            hidden,
            output,
            mode: Mode::Train,
        })
    }

    /// A model with every weight and bias set to zero (BN at identity).
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let mut in_dim = arch.input_dim;
        let hidden = (0..arch.n_hidden)
            .map(|_| {
                let block = HiddenBlock {
                    linear: LinearLayer::zeros(in_dim, arch.hidden_dim),
                    norm: BatchNormState::new(arch.hidden_dim, arch.bn_momentum, arch.bn_epsilon),
                    activation: Activation::Swish,
                };
                in_dim = arch.hidden_dim;
                block
            })
            .collect();
        Ok(Self {
            arch,
            hidden,
            output: LinearLayer::zeros(in_dim, 1),
            mode: Mode::Eval,
        })
    }

    /// Logistic regression `sigmoid(w·x + b)`: a network with no hidden blocks.
    pub fn logistic(weights: &[f64], bias: f64) -> Self {
        let arch = Architecture::new(weights.len()).with_hidden(0, 0);
        Self {
            arch,
            hidden: Vec::new(),
            output: LinearLayer {
                weights: Matrix::row_vector(weights),
                bias: vec![bias],
            },
            mode: Mode::Eval,
        }
    }

    pub(crate) fn from_parts(
        arch: Architecture,
        hidden: Vec<HiddenBlock>,
        output: LinearLayer,
    ) -> Self {
        Self {
            arch,
            hidden,
            output,
            mode: Mode::Eval,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn set_dropout(&mut self, p: f64) {
        self.arch.dropout_p = p;
    }

    pub fn eval(mut self) -> Self {
        self.mode = Mode::Eval;
        self
    }

    pub fn hidden_blocks(&self) -> &[HiddenBlock] {
        &self.hidden
    }

    pub fn hidden_blocks_mut(&mut self) -> &mut [HiddenBlock] {
        &mut self.hidden
    }

    pub fn output_layer(&self) -> &LinearLayer {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut LinearLayer {
        &mut self.output
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.arch.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.arch.input_dim
            )));
        }
        Ok(())
    }

    /// One logit per row.
    ///
    /// In `Eval` mode batch normalization uses running statistics and the
    /// result for a row does not depend on the rest of the batch. In `Train`
    /// mode the current batch statistics are used (running statistics are
    /// left untouched and dropout is not applied).
    pub fn forward(&self, batch: &Matrix) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let mut act = batch.clone();
        for block in &self.hidden {
            let mut z = block.linear.apply(&act);
            match self.mode {
                Mode::Eval => {
                    let (scale, shift) = block.norm.eval_affine();
                    for row in z.as_mut_slice().chunks_exact_mut(scale.len()) {
                        for ((v, s), t) in row.iter_mut().zip(&scale).zip(&shift) {
                            *v = swish(*v * s + t);
                        }
                    }
                }
                Mode::Train => {
                    let (normalized, _) = batch_normalize(&z, block.norm.epsilon);
                    z = normalized;
                    for row in z.as_mut_slice().chunks_exact_mut(block.norm.gamma.len()) {
                        for ((v, g), b) in row.iter_mut().zip(&block.norm.gamma).zip(&block.norm.beta)
                        {
                            *v = swish(*v * g + b);
                        }
                    }
                }
            }
            act = z;
        }
        Ok(self.output.apply(&act).into_vec())
    }

    /// Signal probabilities `sigmoid(logit)` per row.
    pub fn predict_proba(&self, batch: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(batch)?.into_iter().map(sigmoid).collect())
    }

    /// ∂f/∂x for `f = sigmoid(logit)`, at a single point.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, grads) = self.input_gradient_batch(&Matrix::row_vector(x))?;
        Ok(grads.into_vec())
    }

    /// Probabilities and input gradients for every row of `points`, by
    /// reverse-mode differentiation through the frozen network.
    pub fn input_gradient_batch(&self, points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        if self.mode != Mode::Eval {
            return Err(Error::Mode(
                "input gradients are only defined for the frozen (eval) network".into(),
            ));
        }
        self.check_batch(points)?;

        // forward, keeping pre-activations
        let mut pre_acts = Vec::with_capacity(self.hidden.len());
        let mut scales = Vec::with_capacity(self.hidden.len());
        let mut act = points.clone();
        for block in &self.hidden {
            let mut z = block.linear.apply(&act);
            let (scale, shift) = block.norm.eval_affine();
            for row in z.as_mut_slice().chunks_exact_mut(scale.len()) {
                for ((v, s), t) in row.iter_mut().zip(&scale).zip(&shift) {
                    *v = *v * s + t;
                }
            }
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = swish(*v));
            pre_acts.push(z);
            scales.push(scale);
            act = a;
        }
        let probs: Vec<f64> = self.output.apply(&act).into_vec().into_iter().map(sigmoid).collect();

        // backward
        let w_out = self.output.weights.row(0);
        let mut upstream = Matrix::zeros(points.rows(), w_out.len());
        for (r, p) in probs.iter().enumerate() {
            let dlogit = p * (1.0 - p);
            for (g, w) in upstream.row_mut(r).iter_mut().zip(w_out) {
                *g = dlogit * w;
            }
        }
        for ((block, pre), scale) in self.hidden.iter().zip(&pre_acts).zip(&scales).rev() {
            for (g, y) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *g *= swish_derivative(*y);
            }
            for row in upstream.as_mut_slice().chunks_exact_mut(scale.len()) {
                for (g, s) in row.iter_mut().zip(scale) {
                    *g *= s;
                }
            }
            upstream = matmul_nn(&upstream, &block.linear.weights);
        }
        Ok((probs, upstream))
    }

    /// Training-mode forward pass: batch statistics, running-stat update and
    /// inverted dropout drawn from `rng`.
    pub(crate) fn forward_train<R: Rng>(&mut self, batch: &Matrix, rng: &mut R) -> TrainCache {
        let p = self.arch.dropout_p;
        let keep_scale = 1.0 / (1.0 - p);
        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut act = batch.clone();
        for block in &mut self.hidden {
            let z = block.linear.apply(&act);
            let (normalized, stats) = batch_normalize(&z, block.norm.epsilon);
            let n = z.rows() as f64;
            let m = block.norm.momentum;
            for j in 0..stats.mean.len() {
                let unbiased = if z.rows() > 1 {
                    stats.var[j] * n / (n - 1.0)
                } else {
                    stats.var[j]
                };
                block.norm.running_mean[j] = (1.0 - m) * block.norm.running_mean[j] + m * stats.mean[j];
                block.norm.running_var[j] = (1.0 - m) * block.norm.running_var[j] + m * unbiased;
            }
            let mut pre_act = normalized.clone();
            for row in pre_act.as_mut_slice().chunks_exact_mut(block.norm.gamma.len()) {
                for ((v, g), b) in row.iter_mut().zip(&block.norm.gamma).zip(&block.norm.beta) {
                    *v = *v * g + b;
                }
            }
            let mut a = pre_act.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = swish(*v));
            let mask = if p > 0.0 {
                let mask: Vec<f64> = (0..a.as_slice().len())
                    .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep_scale })
                    .collect();
                a.as_mut_slice().iter_mut().zip(&mask).for_each(|(v, k)| *v *= k);
                Some(mask)
            } else {
                None
            };
            layers.push(LayerCache {
                normalized,
                pre_act,
                inv_std: stats.inv_std,
                mask,
            });
            act = a;
        }
        let logits = self.output.apply(&act).into_vec();
        TrainCache {
            input: batch.clone(),
            layers,
            last: act,
            logits,
        }
    }

    /// Parameter gradients given d(loss)/d(logit) per row.
    pub(crate) fn backward(&self, cache: &TrainCache, dlogits: &[f64]) -> Grads {
        let n_params = 4 * self.hidden.len() + 2;
        let mut grads: Grads = vec![Vec::new(); n_params];

        let dl = Matrix::from_vec(dlogits.len(), 1, dlogits.to_vec()).expect("one logit per row");
        grads[n_params - 2] = matmul_tn(&dl, &cache.last).into_vec();
        grads[n_params - 1] = vec![dlogits.iter().sum()];
        let mut upstream = matmul_nn(&dl, &self.output.weights);

        for (li, (block, lc)) in self.hidden.iter().zip(&cache.layers).enumerate().rev() {
            let h = block.norm.gamma.len();
            let rows = upstream.rows();
            if let Some(mask) = &lc.mask {
                upstream.as_mut_slice().iter_mut().zip(mask).for_each(|(g, k)| *g *= k);
            }
            for (g, y) in upstream.as_mut_slice().iter_mut().zip(lc.pre_act.as_slice()) {
                *g *= swish_derivative(*y);
            }
            // upstream now holds dL/d(bn output)
            let mut dgamma = vec![0.0; h];
            let mut dbeta = vec![0.0; h];
            for r in 0..rows {
                let dy = upstream.row(r);
                let xh = lc.normalized.row(r);
                for j in 0..h {
                    dgamma[j] += dy[j] * xh[j];
                    dbeta[j] += dy[j];
                }
            }
            // dL/dz = inv_std/n * (n*dxh - sum(dxh) - xh * sum(dxh*xh)), dxh = dy*gamma
            let nf = rows as f64;
            let mut sum_dxh = vec![0.0; h];
            let mut sum_dxh_xh = vec![0.0; h];
            for r in 0..rows {
                let dy = upstream.row(r);
                let xh = lc.normalized.row(r);
                for j in 0..h {
                    let dxh = dy[j] * block.norm.gamma[j];
                    sum_dxh[j] += dxh;
                    sum_dxh_xh[j] += dxh * xh[j];
                }
            }
            let mut dz = Matrix::zeros(rows, h);
            for r in 0..rows {
                let dy = upstream.row(r);
                let xh = lc.normalized.row(r);
                let out = dz.row_mut(r);
                for j in 0..h {
                    let dxh = dy[j] * block.norm.gamma[j];
                    out[j] = lc.inv_std[j] / nf * (nf * dxh - sum_dxh[j] - xh[j] * sum_dxh_xh[j]);
                }
            }
            let prev;
            let input = if li == 0 {
                &cache.input
            } else {
                prev = cache.layers[li - 1].activation_out();
                &prev
            };
            grads[4 * li] = matmul_tn(&dz, input).into_vec();
            grads[4 * li + 1] = column_sums(&dz);
            grads[4 * li + 2] = dgamma;
            grads[4 * li + 3] = dbeta;
            if li > 0 {
                upstream = matmul_nn(&dz, &block.linear.weights);
            }
        }
        grads
    }

    /// Trainable parameter slices in declaration order:
    /// per hidden block `W, b, gamma, beta`, then output `W, b`.
    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.hidden.len() + 2);
        for block in &mut self.hidden {
            out.push(block.linear.weights.as_mut_slice());
            out.push(&mut block.linear.bias);
            out.push(&mut block.norm.gamma);
            out.push(&mut block.norm.beta);
        }
        out.push(self.output.weights.as_mut_slice());
        out.push(&mut self.output.bias);
        out
    }

    /// Which entries of [`Self::params_mut`] are linear weight matrices.
    pub(crate) fn decay_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(4 * self.hidden.len() + 2);
        for _ in &self.hidden {
            mask.extend([true, false, false, false]);
        }
        mask.extend([true, false]);
        mask
    }

    /// Sum of squared linear weights.
    pub fn weight_norm_sq(&self) -> f64 {
        self.hidden
            .iter()
            .map(|b| b.linear.weights.frobenius_sq())
            .sum::<f64>()
            + self.output.weights.frobenius_sq()
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.iter().all(|b| {
            b.linear.weights.is_finite()
                && b.linear.bias.iter().all(|v| v.is_finite())
                && b.norm.gamma.iter().chain(&b.norm.beta).all(|v| v.is_finite())
                && b.norm.running_mean.iter().chain(&b.norm.running_var).all(|v| v.is_finite())
        }) && self.output.weights.is_finite()
            && self.output.bias.iter().all(|v| v.is_finite())
    }
}

impl TrainCache {
    pub(crate) fn logits(&self) -> &[f64] {
        &self.logits
    }
}

impl LayerCache {
    fn activation_out(&self) -> Matrix {
        let mut a = self.pre_act.clone();
        a.as_mut_slice().iter_mut().for_each(|v| *v = swish(*v));
        if let Some(mask) = &self.mask {
            a.as_mut_slice().iter_mut().zip(mask).for_each(|(v, k)| *v *= k);
        }
        a
    }
}

struct BatchStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Column-wise `(z - mean) / sqrt(var + eps)` with biased variance.
fn batch_normalize(z: &Matrix, eps: f64) -> (Matrix, BatchStats) {
    let n = z.rows() as f64;
    let mean: Vec<f64> = column_sums(z).into_iter().map(|s| s / n).collect();
    let mut var = vec![0.0; z.cols()];
    for row in z.row_iter() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut out = z.clone();
    for row in out.as_mut_slice().chunks_exact_mut(mean.len().max(1)) {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&inv_std) {
            *v = (*v - m) * s;
        }
    }
    (out, BatchStats { mean, var, inv_std })
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (a, b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    s
}
