//! Linear softmax classifier over hashed features.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabelSpace};
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureVector};
use crate::trainer::TrainConfig;

/// `logits = W x + b`, one row of `W` per effective class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Row-major, `effective_classes × feature_dim`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) feature_dim: usize,
    pub(crate) label_space: LabelSpace,
    pub(crate) ngram_orders: Vec<u8>,
}

impl LinearModel {
    /// Zero weights and bias: every logit is 0 for every input.
    pub fn init(label_space: &LabelSpace, config: &TrainConfig) -> Self {
        let k = label_space.effective_classes();
        Self {
            weights: vec![0.0; k * config.feature_dim],
            bias: vec![0.0; k],
            feature_dim: config.feature_dim,
            label_space: label_space.clone(),
            ngram_orders: config.ngram_orders.clone(),
        }
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.feature_dim + feature]
    }

    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        (0..self.num_outputs())
            .map(|k| {
                let row = &self.weights[k * self.feature_dim..(k + 1) * self.feature_dim];
                self.bias[k] + x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        let cfg = TrainConfig {
            feature_dim: self.feature_dim,
            ngram_orders: self.ngram_orders.clone(),
            ..TrainConfig::default()
        };
        featurize(text, &cfg)
    }

    /// Predicted real class. The fake logit, when present, is ignored.
    pub fn predict(&self, x: &FeatureVector) -> usize {
        let logits = self.logits(x);
        argmax(&logits[..self.label_space.num_classes()])
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-log softmax(z)[y]` computed as `logsumexp(z) - z_y`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Fraction of samples whose predicted real class equals the label.
pub fn evaluate(model: &LinearModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Empty("cannot evaluate on an empty dataset".into()));
    }
    if dataset.label_space().num_classes() != model.label_space.num_classes() {
        return Err(Error::invalid(format!(
            "model has {} real classes, dataset has {}",
            model.label_space.num_classes(),
            dataset.label_space().num_classes()
        )));
    }
    let correct = dataset
        .iter()
        .filter(|s| model.predict(&model.featurize(&s.text)) == s.label)
        .count();
    Ok(correct as f64 / dataset.len() as f64)
}

/// Dense gradient of the regularized batch objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Objective used by training:
/// `scale · (mean_i CE(W x_i + b, y_i) + ½ · weight_decay · ‖W‖²)`.
/// The bias is not decayed.
pub fn loss_and_gradient(
    model: &LinearModel,
    batch: &[(FeatureVector, usize)],
    weight_decay: f64,
    scale: f64,
) -> (f64, Gradient) {
    let k = model.num_outputs();
    let d = model.feature_dim;
    let n = batch.len() as f64;
    let mut grad_w: Vec<f64> = model.weights.iter().map(|w| scale * weight_decay * w).collect();
    let mut grad_b = vec![0.0; k];
    let mut loss = 0.0;
    for (x, y) in batch {
        let z = model.logits(x);
        loss += cross_entropy(&z, *y);
        let p = softmax(&z);
        for c in 0..k {
            let err = p[c] - f64::from(u8::from(c == *y));
            grad_b[c] += scale * err / n;
            for (j, v) in x.iter() {
                grad_w[c * d + j] += scale * err * v / n;
            }
        }
    }
    let reg = 0.5 * weight_decay * model.weights.iter().map(|w| w * w).sum::<f64>();
    (scale * (loss / n + reg), Gradient { weights: grad_w, bias: grad_b })
}

/// Settings for [`gradient_check`].
#[derive(Debug, Clone)]
pub struct GradientCheck {
    /// Central-difference step.
    pub step: f64,
    /// Lower bound on the number of parameters probed.
    pub num_params: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for GradientCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            num_params: 50,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

/// Compares the analytic gradient against central finite differences and
/// returns the largest relative error `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// Probed parameters are every bias plus weights drawn at random from the
/// columns that are active in the batch; inactive columns only carry the
/// decay term. At least `num_params` parameters are probed when the model
/// has that many.
pub fn gradient_check(model: &LinearModel, batch: &[(FeatureVector, usize)], check: &GradientCheck) -> f64 {
    assert!(!batch.is_empty(), "gradient check needs a non-empty batch");
    let (_, analytic) = loss_and_gradient(model, batch, check.weight_decay, 1.0);
    let k = model.num_outputs();
    let d = model.feature_dim;

    let mut active: Vec<usize> = batch.iter().flat_map(|(x, _)| x.indices().iter().copied()).collect();
    active.sort_unstable();
    active.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let active_params: Vec<usize> = (0..k).flat_map(|c| active.iter().map(move |&j| c * d + j)).collect();
    let want = check.num_params.saturating_sub(k);
    let mut weight_params: Vec<usize> = if active_params.len() <= want {
        active_params
    } else {
        sample_indices(&mut rng, active_params.len(), want)
            .into_iter()
            .map(|i| active_params[i])
            .collect()
    };
    // top up with arbitrary columns when the batch touches too few features
    while weight_params.len() < want && weight_params.len() < k * d {
        let p = rand::Rng::gen_range(&mut rng, 0..k * d);
        if !weight_params.contains(&p) {
            weight_params.push(p);
        }
    }

    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
    let mut probe = model.clone();
    let h = check.step;
    let mut worst: f64 = 0.0;
    for &p in &weight_params {
        let orig = probe.weights[p];
        probe.weights[p] = orig + h;
        let plus = loss_and_gradient(&probe, batch, check.weight_decay, 1.0).0;
        probe.weights[p] = orig - h;
        let minus = loss_and_gradient(&probe, batch, check.weight_decay, 1.0).0;
        probe.weights[p] = orig;
        worst = worst.max(rel(analytic.weights[p], (plus - minus) / (2.0 * h)));
    }
    for c in 0..k {
        let orig = probe.bias[c];
        probe.bias[c] = orig + h;
        let plus = loss_and_gradient(&probe, batch, check.weight_decay, 1.0).0;
        probe.bias[c] = orig - h;
        let minus = loss_and_gradient(&probe, batch, check.weight_decay, 1.0).0;
        probe.bias[c] = orig;
        worst = worst.max(rel(analytic.bias[c], (plus - minus) / (2.0 * h)));
    }
    worst
}
