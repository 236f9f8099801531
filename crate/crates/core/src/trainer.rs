//! DP-SGD for small models: Poisson batches with per-group rates,
//! per-sample gradients, clipping and Gaussian noise.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::ProbVector;
use crate::error::{invalid, Error, Result};
use crate::schedule::GroupLedger;

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SoftmaxRegression,
    Mlp1h,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

fn default_dropout() -> f64 {
    DEFAULT_DROPOUT
}

impl ModelSpec {
    pub fn softmax() -> Self {
        Self { kind: ModelKind::SoftmaxRegression, hidden: 0, dropout: 0.0 }
    }

    pub fn mlp(hidden: usize, dropout: f64) -> Self {
        Self { kind: ModelKind::Mlp1h, hidden, dropout }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::softmax()
    }
}

/// Parameters live in one flat vector. Softmax regression stores `W (C x d)`
/// then `b (C)`; the MLP stores `W1 (H x d)`, `b1 (H)`, `W2 (C x H)`, `b2 (C)`,
/// all row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    kind: ModelKind,
    inputs: usize,
    classes: usize,
    hidden: usize,
    dropout: f64,
    params: Vec<f64>,
}

impl Model {
    /// Softmax regression starts at zero; the MLP draws scaled Gaussian
    /// first-layer and output weights from `rng`.
    pub fn new<R: Rng + ?Sized>(spec: &ModelSpec, inputs: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if inputs == 0 || classes < 2 {
            return Err(invalid("model needs inputs >= 1 and classes >= 2"));
        }
        match spec.kind {
            ModelKind::SoftmaxRegression => Ok(Self {
                kind: spec.kind,
                inputs,
                classes,
                hidden: 0,
                dropout: 0.0,
                params: vec![0.0; classes * (inputs + 1)],
            }),
            ModelKind::Mlp1h => {
                if spec.hidden == 0 {
                    return Err(invalid("hidden width must be >= 1"));
                }
                if !(0.0..1.0).contains(&spec.dropout) {
                    return Err(invalid("dropout rate must lie in [0, 1)"));
                }
                let h = spec.hidden;
                let mut params = vec![0.0; h * (inputs + 1) + classes * (h + 1)];
                let s1 = (1.0 / inputs as f64).sqrt();
                let s2 = (1.0 / h as f64).sqrt();
                for w in &mut params[..h * inputs] {
                    *w = s1 * rng.sample::<f64, _>(StandardNormal);
                }
                let w2 = h * (inputs + 1);
                for w in &mut params[w2..w2 + classes * h] {
                    *w = s2 * rng.sample::<f64, _>(StandardNormal);
                }
                Ok(Self { kind: spec.kind, inputs, classes, hidden: h, dropout: spec.dropout, params })
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs {
            return Err(invalid(format!("input has {} features, model expects {}", x.len(), self.inputs)));
        }
        Ok(())
    }

    /// Hidden activations after the optional dropout mask, and output
    /// probabilities.
    fn forward(&self, x: &[f64], mask: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let (d, c, h) = (self.inputs, self.classes, self.hidden);
        let logits = match self.kind {
            ModelKind::SoftmaxRegression => {
                let (w, b) = self.params.split_at(c * d);
                (0..c).map(|k| b[k] + dot(&w[k * d..(k + 1) * d], x)).collect::<Vec<_>>()
            }
            ModelKind::Mlp1h => {
                let (w1, rest) = self.params.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let mut hid: Vec<f64> = (0..h).map(|j| (b1[j] + dot(&w1[j * d..(j + 1) * d], x)).tanh()).collect();
                if let Some(m) = mask {
                    hid.iter_mut().zip(m).for_each(|(v, m)| *v *= m);
                }
                let logits = (0..c).map(|k| b2[k] + dot(&w2[k * h..(k + 1) * h], &hid)).collect();
                return (hid, softmax(logits));
            }
        };
        (Vec::new(), softmax(logits))
    }

    /// Class probabilities without dropout.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, p) = self.forward(x, None);
        finite(&p, "activations")?;
        Ok(p)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(argmax(&p))
    }

    /// Cross-entropy at one example, with an optional dropout mask.
    pub fn loss(&self, x: &[f64], y: usize, mask: Option<&[f64]>) -> Result<f64> {
        self.check_input(x)?;
        let (_, p) = self.forward(x, mask);
        Ok(-p[y].max(f64::MIN_POSITIVE).ln())
    }

    /// Draws an inverted-dropout mask for the hidden layer: each unit kept
    /// with probability `1 - r` and scaled by `1 / (1 - r)`.
    pub fn dropout_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        if self.kind != ModelKind::Mlp1h || self.dropout == 0.0 {
            return None;
        }
        let keep = 1.0 - self.dropout;
        Some(
            (0..self.hidden)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
        )
    }

    /// Exact cross-entropy gradient at one example, dropout disabled.
    pub fn per_sample_gradient(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        self.per_sample_gradient_masked(x, y, None)
    }

    pub fn per_sample_gradient_masked(&self, x: &[f64], y: usize, mask: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if y >= self.classes {
            return Err(invalid(format!("label {y} out of range for {} classes", self.classes)));
        }
        if let Some(m) = mask {
            if m.len() != self.hidden {
                return Err(invalid("dropout mask width differs from hidden width"));
            }
        }
        let (d, c, h) = (self.inputs, self.classes, self.hidden);
        let (hid, p) = self.forward(x, mask);
        finite(&p, "activations")?;
        let mut dz = p;
        dz[y] -= 1.0;
        let mut g = vec![0.0; self.params.len()];
        match self.kind {
            ModelKind::SoftmaxRegression => {
                let (gw, gb) = g.split_at_mut(c * d);
                for k in 0..c {
                    axpy(dz[k], x, &mut gw[k * d..(k + 1) * d]);
                    gb[k] = dz[k];
                }
            }
            ModelKind::Mlp1h => {
                let w2 = &self.params[h * (d + 1)..h * (d + 1) + c * h];
                let (gw1, rest) = g.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gw2, gb2) = rest.split_at_mut(c * h);
                let mut dh = vec![0.0; h];
                for k in 0..c {
                    axpy(dz[k], &hid, &mut gw2[k * h..(k + 1) * h]);
                    gb2[k] = dz[k];
                    axpy(dz[k], &w2[k * h..(k + 1) * h], &mut dh);
                }
                for j in 0..h {
                    let m = mask.map_or(1.0, |m| m[j]);
                    if m == 0.0 {
                        continue;
                    }
                    // hid already carries the mask, so tanh = hid / m
                    let t = hid[j] / m;
                    let da = dh[j] * m * (1.0 - t * t);
                    axpy(da, x, &mut gw1[j * d..(j + 1) * d]);
                    gb1[j] = da;
                }
            }
        }
        finite(&g, "gradient")?;
        Ok(g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn softmax(mut z: Vec<f64>) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in &mut z {
        *v = (*v - max).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
    z
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Scales `g` to norm at most `clip`; returns the original norm.
pub fn clip_gradient(g: &mut [f64], clip: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > clip {
        let s = clip / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
    norm
}

/// Training examples in row-major order with a group id per example.
#[derive(Debug, Clone, Copy)]
pub struct Examples<'a> {
    pub features: &'a [f64],
    pub dims: usize,
    pub labels: &'a [usize],
    pub groups: &'a [u32],
}

impl<'a> Examples<'a> {
    pub fn new(features: &'a [f64], dims: usize, labels: &'a [usize], groups: &'a [u32]) -> Result<Self> {
        if dims == 0 || features.len() != dims * labels.len() || groups.len() != labels.len() {
            return Err(invalid("features, labels and groups disagree in length"));
        }
        Ok(Self { features, dims, labels, groups })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn group_sizes(&self, groups: usize) -> Vec<usize> {
        let mut sizes = vec![0; groups];
        for &g in self.groups {
            if let Some(s) = sizes.get_mut(g as usize) {
                *s += 1;
            }
        }
        sizes
    }
}

/// Includes each example independently with its group's rate. Groups past
/// the end of `rates` are never sampled.
pub fn poisson_sample<R: Rng + ?Sized>(groups: &[u32], rates: &[f64], rng: &mut R) -> Vec<usize> {
    groups
        .iter()
        .enumerate()
        .filter_map(|(i, &g)| {
            let q = rates.get(g as usize).copied().unwrap_or(0.0);
            if q >= 1.0 || (q > 0.0 && rng.random::<f64>() < q) {
                Some(i)
            } else {
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPhaseSpec {
    pub steps: u64,
    pub sigma: f64,
    pub clip: f64,
    /// Expected batch size; the update divides by this, not the realized size.
    pub expected_batch: f64,
    /// Sampling rate per group id.
    pub rates: Vec<f64>,
    pub learning_rate: f64,
}

impl TrainPhaseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("noise multiplier must be finite and >= 0"));
        }
        if !(self.clip > 0.0) || !(self.expected_batch > 0.0) || !(self.learning_rate > 0.0) {
            return Err(invalid("clip norm, expected batch and learning rate must be > 0"));
        }
        if self.rates.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(invalid("sampling rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// One noisy clipped gradient step on `batch`:
/// `theta -= lr * (sum_i clip(g_i) + N(0, (C sigma)^2 I)) / b`.
pub fn dp_sgd_step<R: Rng + ?Sized>(
    model: &mut Model,
    data: &Examples<'_>,
    batch: &[usize],
    spec: &TrainPhaseSpec,
    rng: &mut R,
) -> Result<()> {
    let mut sum = vec![0.0; model.num_params()];
    for &i in batch {
        let mask = model.dropout_mask(rng);
        let mut g = model.per_sample_gradient_masked(data.row(i), data.labels[i], mask.as_deref())?;
        clip_gradient(&mut g, spec.clip);
        debug_assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= spec.clip * (1.0 + 1e-12));
        axpy(1.0, &g, &mut sum);
    }
    let noise_std = spec.clip * spec.sigma;
    if noise_std > 0.0 {
        for s in &mut sum {
            *s += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let scale = spec.learning_rate / spec.expected_batch;
    let update: Vec<f64> = sum.iter().map(|s| scale * s).collect();
    finite(&update, "update")?;
    axpy(-1.0, &update, model.params_mut());
    Ok(())
}

/// Runs `spec.steps` Poisson-sampled DP-SGD steps. Empty batches still
/// draw noise and count as steps.
pub fn train_steps<R: Rng + ?Sized>(
    model: &mut Model,
    data: &Examples<'_>,
    spec: &TrainPhaseSpec,
    rng: &mut R,
) -> Result<()> {
    spec.validate()?;
    for _ in 0..spec.steps {
        let batch = poisson_sample(data.groups, &spec.rates, rng);
        dp_sgd_step(model, data, &batch, spec, rng)?;
    }
    Ok(())
}

/// Trains one segment of phase `phase` and records one ledger event per
/// group with a positive rate.
pub fn train_phase<R: Rng + ?Sized>(
    model: &mut Model,
    data: &Examples<'_>,
    spec: &TrainPhaseSpec,
    phase: usize,
    ledger: &mut GroupLedger,
    rng: &mut R,
) -> Result<()> {
    spec.validate()?;
    if spec.steps == 0 {
        return Ok(());
    }
    for (g, &q) in spec.rates.iter().enumerate() {
        if q > 0.0 {
            ledger.record_train(phase, g as u32, spec.sigma, q, spec.steps)?;
        }
    }
    train_steps(model, data, spec, rng)
}

/// `passes` forward passes with independent dropout masks.
pub fn mc_dropout_passes<R: Rng + ?Sized>(
    model: &Model,
    x: &[f64],
    passes: usize,
    rng: &mut R,
) -> Result<Vec<ProbVector>> {
    if model.kind != ModelKind::Mlp1h {
        return Err(Error::NotStochastic);
    }
    if passes < 2 {
        return Err(invalid("need at least two stochastic passes"));
    }
    model.check_input(x)?;
    (0..passes)
        .map(|_| {
            let mask = model.dropout_mask(rng);
            let (_, p) = model.forward(x, mask.as_deref());
            finite(&p, "activations")?;
            ProbVector::multiclass(p)
        })
        .collect()
}

/// Fraction of examples whose predicted class matches the label.
pub fn accuracy(model: &Model, features: &[f64], labels: &[usize]) -> Result<f64> {
    let d = model.inputs;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        if model.predict(&features[i * d..(i + 1) * d])? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}
