//! Differentiable objectives with stochastic-gradient oracles.
//!
//! Three kinds: a noisy quadratic whose gradient noise follows an exact,
//! controllable variance law; binary logistic regression on synthetic
//! cluster data; and a one-hidden-layer tanh network with hand-derived
//! gradients as the smallest nonconvex case. Loss evaluation and the full
//! gradient are deterministic; only [`Objective::stochastic_gradient`]
//! consumes randomness.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, STREAM_DATA};
use crate::{Error, Result};

/// Dense parameter vector. Construction rejects NaN/Inf entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model vector entry"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Wraps raw values without the finiteness check. Internal use only, for
    /// vectors produced by arithmetic whose inputs were already validated.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Synthetic gradient-noise parameters for the noisy quadratic. The
/// per-draw noise has second moment `m * |grad|^2 + c`, scaled down by the
/// mini-batch size. JSON keys are `M` and `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientNoise {
    /// Coefficient on the squared gradient norm.
    #[serde(rename = "M")]
    pub m: f64,
    /// Constant noise floor.
    #[serde(rename = "C")]
    pub c: f64,
}

impl Default for GradientNoise {
    fn default() -> Self {
        Self::NONE
    }
}

impl GradientNoise {
    pub const NONE: GradientNoise = GradientNoise { m: 0.0, c: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(Error::invalid("noise.M", "must be a nonnegative finite scalar"));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("noise.C", "must be a nonnegative finite scalar"));
        }
        Ok(())
    }
}

/// Labeled points for the dataset-backed objectives. Labels are +-1 for
/// logistic regression and real targets for the regression network.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::invalid(
                "dataset",
                "features and labels must be nonempty and of equal length",
            ));
        }
        let dim = features[0].len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::invalid("dataset", "inconsistent feature dimensions"));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }
}

/// Shape of the one-hidden-layer network: `hidden` tanh units over `input`
/// features, scalar linear output. Parameters are packed as
/// `[W1 row-major, b1, w2, b2]`, so the total count is
/// `hidden * (input + 2) + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpShape {
    pub input: usize,
    pub hidden: usize,
}

pub const MLP_INPUT_DIM: usize = 2;
pub const MLP_MAX_HIDDEN: usize = 32;

impl MlpShape {
    /// Recovers the shape from a flat parameter count, with the input
    /// dimension fixed at [`MLP_INPUT_DIM`].
    pub fn from_param_count(dim: usize) -> Result<Self> {
        let per_unit = MLP_INPUT_DIM + 2;
        if dim < per_unit + 1 || !(dim - 1).is_multiple_of(per_unit) {
            return Err(Error::invalid(
                "dimension",
                format!(
                    "tiny_mlp dimension must be hidden*{}+1 for some hidden in 1..={}",
                    per_unit, MLP_MAX_HIDDEN
                ),
            ));
        }
        let hidden = (dim - 1) / per_unit;
        if hidden > MLP_MAX_HIDDEN {
            return Err(Error::invalid(
                "dimension",
                format!("tiny_mlp hidden units {} exceed the cap of {}", hidden, MLP_MAX_HIDDEN),
            ));
        }
        Ok(Self {
            input: MLP_INPUT_DIM,
            hidden,
        })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * (self.input + 2) + 1
    }
}

/// A differentiable objective together with its stochastic-gradient oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `F(x) = 0.5 * |x|^2` plus synthetic Gaussian gradient noise.
    NoisyQuadratic { dim: usize, noise: GradientNoise },
    /// Mean logistic loss over labeled points, labels in {-1, +1}.
    Logistic { data: Dataset },
    /// Mean squared-error loss of the tanh network over a regression set.
    TinyMlp { shape: MlpShape, data: Dataset },
}

impl Objective {
    pub fn noisy_quadratic(dim: usize, noise: GradientNoise) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        noise.validate()?;
        Ok(Objective::NoisyQuadratic { dim, noise })
    }

    pub fn logistic(data: Dataset) -> Result<Self> {
        if !data.labels.iter().all(|&y| y == 1.0 || y == -1.0) {
            return Err(Error::invalid("dataset", "logistic labels must be +-1"));
        }
        Ok(Objective::Logistic { data })
    }

    pub fn tiny_mlp(dim: usize, data: Dataset) -> Result<Self> {
        let shape = MlpShape::from_param_count(dim)?;
        if data.feature_dim() != shape.input {
            return Err(Error::invalid(
                "dataset",
                format!("tiny_mlp expects {}-dimensional features", shape.input),
            ));
        }
        Ok(Objective::TinyMlp { shape, data })
    }

    /// Number of model parameters.
    pub fn dimension(&self) -> usize {
        match self {
            Objective::NoisyQuadratic { dim, .. } => *dim,
            Objective::Logistic { data } => data.feature_dim(),
            Objective::TinyMlp { shape, .. } => shape.param_count(),
        }
    }

    /// Known lower bound on the loss. All three kinds use nonnegative
    /// losses, so zero is valid everywhere (and tight for the quadratic).
    pub fn loss_lower_bound(&self) -> f64 {
        0.0
    }

    /// Dataset size, when there is one.
    pub fn n_points(&self) -> Option<usize> {
        match self {
            Objective::NoisyQuadratic { .. } => None,
            Objective::Logistic { data } | Objective::TinyMlp { data, .. } => Some(data.len()),
        }
    }

    fn check_dim(&self, x: &ModelVector) -> Result<()> {
        if x.dim() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// Deterministic full-batch loss.
    pub fn loss(&self, x: &ModelVector) -> Result<f64> {
        self.check_dim(x)?;
        let v = x.as_slice();
        Ok(match self {
            Objective::NoisyQuadratic { .. } => 0.5 * x.norm_sq(),
            Objective::Logistic { data } => {
                let mut total = 0.0;
                for (a, &y) in data.features.iter().zip(&data.labels) {
                    total += logistic_loss(v, a, y);
                }
                total / data.len() as f64
            }
            Objective::TinyMlp { shape, data } => {
                let mut total = 0.0;
                for (a, &y) in data.features.iter().zip(&data.labels) {
                    let out = mlp_forward(shape, v, a).output;
                    let e = out - y;
                    total += 0.5 * e * e;
                }
                total / data.len() as f64
            }
        })
    }

    /// Exact analytic gradient of [`Objective::loss`].
    pub fn full_gradient(&self, x: &ModelVector) -> Result<ModelVector> {
        self.check_dim(x)?;
        let v = x.as_slice();
        let d = self.dimension();
        Ok(match self {
            Objective::NoisyQuadratic { .. } => x.clone(),
            Objective::Logistic { data } => {
                let mut g = vec![0.0; d];
                for (a, &y) in data.features.iter().zip(&data.labels) {
                    logistic_grad_into(v, a, y, 1.0 / data.len() as f64, &mut g);
                }
                ModelVector::from_raw(g)
            }
            Objective::TinyMlp { shape, data } => {
                let mut g = vec![0.0; d];
                for (a, &y) in data.features.iter().zip(&data.labels) {
                    mlp_grad_into(shape, v, a, y, 1.0 / data.len() as f64, &mut g);
                }
                ModelVector::from_raw(g)
            }
        })
    }

    /// Unbiased stochastic gradient.
    ///
    /// For the noisy quadratic this is the exact gradient plus isotropic
    /// Gaussian noise with per-coordinate variance
    /// `(m * |grad|^2 + c) / (dim * batch_size)`, so the second moment of the
    /// noise is exactly `(m * |grad|^2 + c) / batch_size`. Dataset kinds
    /// average per-sample gradients over a uniform without-replacement
    /// mini-batch.
    pub fn stochastic_gradient(
        &self,
        x: &ModelVector,
        batch_size: u32,
        rng: &mut ChaCha12Rng,
    ) -> Result<ModelVector> {
        self.check_dim(x)?;
        if batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        let d = self.dimension();
        match self {
            Objective::NoisyQuadratic { noise, .. } => {
                let grad_sq = x.norm_sq();
                let per_coord = (noise.m * grad_sq + noise.c) / (d as f64 * batch_size as f64);
                let sigma = per_coord.sqrt();
                let mut g = Vec::with_capacity(d);
                for &xi in x.as_slice() {
                    let z: f64 = StandardNormal.sample(rng);
                    g.push(xi + sigma * z);
                }
                Ok(ModelVector::from_raw(g))
            }
            Objective::Logistic { data } | Objective::TinyMlp { data, .. } => {
                let n = data.len();
                if batch_size as usize > n {
                    return Err(Error::invalid(
                        "batch_size",
                        format!("exceeds dataset size {}", n),
                    ));
                }
                let idx = rand::seq::index::sample(rng, n, batch_size as usize);
                let w = 1.0 / batch_size as f64;
                let mut g = vec![0.0; d];
                let v = x.as_slice();
                for i in idx {
                    let (a, y) = (&data.features[i], data.labels[i]);
                    match self {
                        Objective::Logistic { .. } => logistic_grad_into(v, a, y, w, &mut g),
                        Objective::TinyMlp { shape, .. } => mlp_grad_into(shape, v, a, y, w, &mut g),
                        Objective::NoisyQuadratic { .. } => unreachable!(),
                    }
                }
                Ok(ModelVector::from_raw(g))
            }
        }
    }
}

/// `ln(1 + exp(-y <x, a>))`, evaluated stably.
fn logistic_loss(x: &[f64], a: &[f64], y: f64) -> f64 {
    let t = -y * dot(x, a);
    // ln(1 + e^t) = max(t, 0) + ln(1 + e^{-|t|})
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn logistic_grad_into(x: &[f64], a: &[f64], y: f64, weight: f64, out: &mut [f64]) {
    let t = y * dot(x, a);
    // sigma(-t) = 1 / (1 + e^t), computed stably for large |t|
    let s = if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    };
    let coeff = -y * s * weight;
    for (o, &ai) in out.iter_mut().zip(a) {
        *o += coeff * ai;
    }
}

fn dot(x: &[f64], a: &[f64]) -> f64 {
    x.iter().zip(a).map(|(xi, ai)| xi * ai).sum()
}

struct MlpForward {
    hidden: Vec<f64>,
    output: f64,
}

/// Parameter layout: W1 (hidden x input, row-major), b1, w2, b2.
fn mlp_forward(shape: &MlpShape, params: &[f64], a: &[f64]) -> MlpForward {
    let (h, p) = (shape.hidden, shape.input);
    let (w1, rest) = params.split_at(h * p);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let mut hidden = Vec::with_capacity(h);
    let mut output = b2[0];
    for j in 0..h {
        let z = dot(&w1[j * p..(j + 1) * p], a) + b1[j];
        let u = z.tanh();
        output += w2[j] * u;
        hidden.push(u);
    }
    MlpForward { hidden, output }
}

/// Hand-derived backprop for the squared-error loss `0.5 * (out - y)^2`.
fn mlp_grad_into(shape: &MlpShape, params: &[f64], a: &[f64], y: f64, weight: f64, out: &mut [f64]) {
    let (h, p) = (shape.hidden, shape.input);
    let fwd = mlp_forward(shape, params, a);
    let e = (fwd.output - y) * weight;
    let w2 = &params[h * p + h..h * p + 2 * h];
    let (g_w1, g_rest) = out.split_at_mut(h * p);
    let (g_b1, g_rest) = g_rest.split_at_mut(h);
    let (g_w2, g_b2) = g_rest.split_at_mut(h);
    g_b2[0] += e;
    for j in 0..h {
        let u = fwd.hidden[j];
        g_w2[j] += e * u;
        let dz = e * w2[j] * (1.0 - u * u);
        g_b1[j] += dz;
        for (g, &ai) in g_w1[j * p..(j + 1) * p].iter_mut().zip(a) {
            *g += dz * ai;
        }
    }
}

/// Two Gaussian clusters at +-mu with labels +-1, alternating by index.
pub fn logistic_clusters(dim: usize, n_points: usize, seed: u64) -> Result<Dataset> {
    if dim == 0 || n_points < 2 {
        return Err(Error::invalid("n_points", "need dim >= 1 and n_points >= 2"));
    }
    let mut rng = substream(seed, STREAM_DATA, 0, 0);
    let mu = 1.5 / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut a = Vec::with_capacity(dim);
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            a.push(y * mu + z);
        }
        features.push(a);
        labels.push(y);
    }
    Dataset::new(features, labels)
}

/// Smooth scalar regression targets on Gaussian inputs, for the tanh net.
pub fn mlp_regression(n_points: usize, seed: u64) -> Result<Dataset> {
    if n_points < 2 {
        return Err(Error::invalid("n_points", "need n_points >= 2"));
    }
    let mut rng = substream(seed, STREAM_DATA, 1, 0);
    let mut features = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let mut a = Vec::with_capacity(MLP_INPUT_DIM);
        for _ in 0..MLP_INPUT_DIM {
            let z: f64 = StandardNormal.sample(&mut rng);
            a.push(z);
        }
        let target: f64 = a
            .iter()
            .enumerate()
            .map(|(j, &v)| v / (j + 1) as f64)
            .sum::<f64>()
            .sin();
        features.push(a);
        labels.push(target);
    }
    Dataset::new(features, labels)
}
