//! Model families, losses, and their analytic gradients.
//!
//! Three small analytic families are provided: multi-output linear
//! regression (squared error against one-hot targets), multinomial
//! logistic regression (softmax cross-entropy), and a tanh multi-layer
//! perceptron with a linear output layer (either loss). All families
//! expose per-class scores, so argmax prediction and softmax confidence
//! are defined uniformly.
//!
//! Parameters are flattened layer-major, weights before biases, and
//! row-major within each weight matrix, so serialized parameter vectors
//! are portable across implementations. Losses are batch means, which
//! keeps step sizes batch-size-invariant.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, CoreError, Result};
use crate::vector::ParameterVector;

/// The per-sample loss applied to a model's output scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossKind {
    /// Half squared error against the one-hot target: `½‖z − e_y‖²`.
    MeanSquaredError,
    /// Softmax cross-entropy with max-subtraction for stability.
    CrossEntropy,
}

/// Supported model families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelFamily {
    /// Affine map to one score per class.
    LinearRegression,
    /// Affine map followed by softmax cross-entropy.
    LogisticRegression,
    /// Fully-connected layers with tanh hidden activations and a linear
    /// output layer. `widths[0]` is the input dimension, the last entry
    /// the class count.
    Mlp { widths: Vec<usize> },
}

/// A batch of labeled samples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    feature_dim: usize,
}

impl LabeledBatch {
    /// Builds a batch from row-major inputs and class labels. The number
    /// of rows must match the number of labels and be non-zero.
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if labels.is_empty() {
            return Err(invalid("batch must be non-empty"));
        }
        if inputs.len() != labels.len() * feature_dim {
            return Err(CoreError::DimensionMismatch {
                expected: labels.len() * feature_dim,
                got: inputs.len(),
            });
        }
        if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NumericalFailure {
                context: "batch construction",
                coordinate: Some(i),
            });
        }
        Ok(Self {
            inputs,
            labels,
            feature_dim,
        })
    }

    /// Single-sample batch.
    pub fn single(x: Vec<f64>, y: usize) -> Result<Self> {
        let d = x.len();
        Self::new(x, vec![y], d)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// A model family plus loss, exposing value and gradient evaluation on
/// labeled batches.
///
/// Values are pure functions of `(theta, batch)`; instances carry no
/// mutable state and may be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiableProblem {
    family: ModelFamily,
    loss: LossKind,
    class_count: usize,
    feature_dim: usize,
}

impl DifferentiableProblem {
    /// Multi-output linear regression against one-hot targets.
    pub fn linear_regression(feature_dim: usize, class_count: usize) -> Result<Self> {
        if feature_dim == 0 || class_count == 0 {
            return Err(invalid("feature_dim and class_count must be positive"));
        }
        Ok(Self {
            family: ModelFamily::LinearRegression,
            loss: LossKind::MeanSquaredError,
            class_count,
            feature_dim,
        })
    }

    /// Multinomial logistic regression.
    pub fn logistic_regression(feature_dim: usize, class_count: usize) -> Result<Self> {
        if feature_dim == 0 || class_count == 0 {
            return Err(invalid("feature_dim and class_count must be positive"));
        }
        Ok(Self {
            family: ModelFamily::LogisticRegression,
            loss: LossKind::CrossEntropy,
            class_count,
            feature_dim,
        })
    }

    /// Tanh MLP; `widths` runs from the input dimension to the class
    /// count and needs at least one layer (two entries).
    pub fn mlp(widths: Vec<usize>, loss: LossKind) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("mlp needs at least input and output widths"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(invalid("mlp widths must be positive"));
        }
        let feature_dim = widths[0];
        let class_count = *widths.last().unwrap();
        Ok(Self {
            family: ModelFamily::Mlp { widths },
            loss,
            class_count,
            feature_dim,
        })
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Total number of parameters implied by the family.
    pub fn param_dim(&self) -> usize {
        match &self.family {
            ModelFamily::LinearRegression | ModelFamily::LogisticRegression => {
                self.class_count * (self.feature_dim + 1)
            }
            ModelFamily::Mlp { widths } => widths
                .windows(2)
                .map(|w| w[1] * w[0] + w[1])
                .sum(),
        }
    }

    fn check_args(&self, theta: &ParameterVector, batch: &LabeledBatch) -> Result<()> {
        if theta.dim() != self.param_dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.param_dim(),
                got: theta.dim(),
            });
        }
        if batch.feature_dim() != self.feature_dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.feature_dim,
                got: batch.feature_dim(),
            });
        }
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= self.class_count) {
            return Err(invalid(alloc::format!(
                "label {bad} out of range for {} classes",
                self.class_count
            )));
        }
        Ok(())
    }

    /// Per-class scores for one input row.
    pub fn outputs(&self, theta: &ParameterVector, x: &[f64]) -> Result<Vec<f64>> {
        if theta.dim() != self.param_dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.param_dim(),
                got: theta.dim(),
            });
        }
        if x.len() != self.feature_dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(match &self.family {
            ModelFamily::LinearRegression | ModelFamily::LogisticRegression => {
                affine_forward(theta.as_slice(), x, self.class_count, self.feature_dim)
            }
            ModelFamily::Mlp { widths } => mlp_forward(theta.as_slice(), x, widths).pop().unwrap(),
        })
    }

    /// Mean loss over the batch. Deterministic for fixed inputs.
    pub fn eval_loss(&self, theta: &ParameterVector, batch: &LabeledBatch) -> Result<f64> {
        self.check_args(theta, batch)?;
        let mut total = 0.0;
        for i in 0..batch.size() {
            let z = match &self.family {
                ModelFamily::LinearRegression | ModelFamily::LogisticRegression => {
                    affine_forward(theta.as_slice(), batch.row(i), self.class_count, self.feature_dim)
                }
                ModelFamily::Mlp { widths } => {
                    mlp_forward(theta.as_slice(), batch.row(i), widths).pop().unwrap()
                }
            };
            total += loss_value(self.loss, &z, batch.label(i));
        }
        Ok(total / batch.size() as f64)
    }

    /// Analytic gradient of [`Self::eval_loss`] with respect to `theta`.
    pub fn grad(&self, theta: &ParameterVector, batch: &LabeledBatch) -> Result<ParameterVector> {
        self.check_args(theta, batch)?;
        let mut g = vec![0.0; self.param_dim()];
        let scale = 1.0 / batch.size() as f64;
        for i in 0..batch.size() {
            match &self.family {
                ModelFamily::LinearRegression | ModelFamily::LogisticRegression => {
                    self.affine_backward(theta.as_slice(), batch.row(i), batch.label(i), scale, &mut g)
                }
                ModelFamily::Mlp { widths } => {
                    self.mlp_backward(theta.as_slice(), batch.row(i), batch.label(i), widths, scale, &mut g)
                }
            }
        }
        Ok(ParameterVector::from_raw(g))
    }

    /// Loss of a single sample; convenience for per-sample diagnostics.
    pub fn sample_loss(&self, theta: &ParameterVector, x: &[f64], y: usize) -> Result<f64> {
        let batch = LabeledBatch::new(x.to_vec(), vec![y], x.len())?;
        self.eval_loss(theta, &batch)
    }

    /// Argmax predictions; ties resolve to the lowest class index.
    pub fn predict(&self, theta: &ParameterVector, batch: &LabeledBatch) -> Result<Vec<usize>> {
        self.check_args(theta, batch)?;
        let mut out = Vec::with_capacity(batch.size());
        for i in 0..batch.size() {
            let z = self.outputs(theta, batch.row(i))?;
            out.push(argmax_lowest(&z));
        }
        Ok(out)
    }

    /// Per-sample maximum softmax probability under `theta`.
    pub fn confidences(&self, theta: &ParameterVector, batch: &LabeledBatch) -> Result<Vec<f64>> {
        self.check_args(theta, batch)?;
        let mut out = Vec::with_capacity(batch.size());
        for i in 0..batch.size() {
            let z = self.outputs(theta, batch.row(i))?;
            let p = softmax(&z);
            out.push(p.iter().fold(f64::MIN, |m, &v| m.max(v)));
        }
        Ok(out)
    }

    /// Deterministic initialization: weights drawn `N(0, 1/fan_in)`,
    /// biases zero. Identical seeds give identical vectors.
    pub fn init_theta(&self, seed: u64) -> ParameterVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.param_dim()];
        let layers: Vec<(usize, usize)> = match &self.family {
            ModelFamily::LinearRegression | ModelFamily::LogisticRegression => {
                vec![(self.class_count, self.feature_dim)]
            }
            ModelFamily::Mlp { widths } => {
                widths.windows(2).map(|w| (w[1], w[0])).collect()
            }
        };
        let mut offset = 0;
        for (rows, cols) in layers {
            let scale = 1.0 / (cols as f64).sqrt();
            for w in values.iter_mut().skip(offset).take(rows * cols) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * scale;
            }
            offset += rows * cols + rows; // biases stay zero
        }
        ParameterVector::from_raw(values)
    }

    fn affine_backward(&self, theta: &[f64], x: &[f64], y: usize, scale: f64, g: &mut [f64]) {
        let c = self.class_count;
        let d = self.feature_dim;
        let z = affine_forward(theta, x, c, d);
        let dz = loss_output_grad(self.loss, &z, y);
        for (cls, &dzc) in dz.iter().enumerate() {
            let row = &mut g[cls * d..(cls + 1) * d];
            for (gj, &xj) in row.iter_mut().zip(x) {
                *gj += scale * dzc * xj;
            }
            g[c * d + cls] += scale * dzc;
        }
    }

    fn mlp_backward(
        &self,
        theta: &[f64],
        x: &[f64],
        y: usize,
        widths: &[usize],
        scale: f64,
        g: &mut [f64],
    ) {
        let acts = mlp_forward(theta, x, widths);
        let layers = widths.len() - 1;
        let mut delta = loss_output_grad(self.loss, acts.last().unwrap(), y);

        // Walk layers backwards, reusing the forward activations.
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in widths.windows(2) {
            offsets.push(off);
            off += w[1] * w[0] + w[1];
        }
        for l in (0..layers).rev() {
            let rows = widths[l + 1];
            let cols = widths[l];
            let base = offsets[l];
            let input = if l == 0 { x } else { &acts[l - 1] };
            for r in 0..rows {
                let dr = scale * delta[r];
                let wrow = &mut g[base + r * cols..base + (r + 1) * cols];
                for (gj, &aj) in wrow.iter_mut().zip(input) {
                    *gj += dr * aj;
                }
                g[base + rows * cols + r] += dr;
            }
            if l > 0 {
                let mut prev = vec![0.0; cols];
                for (j, p) in prev.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (r, &dr) in delta.iter().enumerate() {
                        s += theta[base + r * cols + j] * dr;
                    }
                    // tanh'(z) expressed through the activation value
                    *p = s * (1.0 - input[j] * input[j]);
                }
                delta = prev;
            }
        }
    }
}

fn affine_forward(theta: &[f64], x: &[f64], class_count: usize, feature_dim: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(class_count);
    for c in 0..class_count {
        let row = &theta[c * feature_dim..(c + 1) * feature_dim];
        let mut s = theta[class_count * feature_dim + c];
        for (w, v) in row.iter().zip(x) {
            s += w * v;
        }
        z.push(s);
    }
    z
}

/// Returns the activations of every layer after the input, the last
/// entry being the linear output scores.
fn mlp_forward(theta: &[f64], x: &[f64], widths: &[usize]) -> Vec<Vec<f64>> {
    let layers = widths.len() - 1;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers);
    let mut off = 0;
    for (l, w) in widths.windows(2).enumerate() {
        let (cols, rows) = (w[0], w[1]);
        let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
        let mut z = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut s = theta[off + rows * cols + r];
            for (wj, vj) in theta[off + r * cols..off + (r + 1) * cols].iter().zip(input) {
                s += wj * vj;
            }
            z.push(if l < layers - 1 { s.tanh() } else { s });
        }
        acts.push(z);
        off += rows * cols + rows;
    }
    acts
}

fn loss_value(kind: LossKind, z: &[f64], y: usize) -> f64 {
    match kind {
        LossKind::MeanSquaredError => {
            let mut s = 0.0;
            for (c, &zc) in z.iter().enumerate() {
                let t = if c == y { 1.0 } else { 0.0 };
                s += (zc - t) * (zc - t);
            }
            0.5 * s
        }
        LossKind::CrossEntropy => {
            let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() + m;
            lse - z[y]
        }
    }
}

fn loss_output_grad(kind: LossKind, z: &[f64], y: usize) -> Vec<f64> {
    match kind {
        LossKind::MeanSquaredError => z
            .iter()
            .enumerate()
            .map(|(c, &zc)| zc - if c == y { 1.0 } else { 0.0 })
            .collect(),
        LossKind::CrossEntropy => {
            let mut p = softmax(z);
            p[y] -= 1.0;
            p
        }
    }
}

/// Softmax with max-subtraction; safe for large score magnitudes.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax_lowest(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}
