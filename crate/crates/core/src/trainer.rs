//! Mini-batch SGD with L2 weight decay for [`LinearModel`], recording
//! epoch-end logits for every training sample.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::dynamics::DynamicsTable;
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureVector};
use crate::model::{cross_entropy, softmax, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Word n-gram orders, each 1 or 2.
    pub ngram_orders: Vec<u8>,
    /// Hashed feature space size, a power of two.
    pub feature_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.1,
            weight_decay: 1e-4,
            batch_size: 32,
            seed: 0,
            ngram_orders: vec![1, 2],
            feature_dim: 1 << 18,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive and finite"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative and finite"));
        }
        if self.learning_rate * self.weight_decay >= 1.0 {
            return Err(Error::invalid("learning_rate * weight_decay must be below 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|&n| n != 1 && n != 2) {
            return Err(Error::invalid("ngram_orders must be a non-empty subset of {1, 2}"));
        }
        if !self.feature_dim.is_power_of_two() {
            return Err(Error::invalid("feature_dim must be a power of two"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Output of [`train_with_history`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub dynamics: DynamicsTable,
    /// Regularized training objective measured at the end of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains from zero weights and returns the model with its dynamics table.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(LinearModel, DynamicsTable)> {
    let out = train_with_history(dataset, config)?;
    Ok((out.model, out.dynamics))
}

// Weights are held as `scale · v` so weight decay costs O(1) per step.
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn renormalize(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|w| *w *= s);
        self.scale = 1.0;
    }
}

pub fn train_with_history(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set has no samples".into()));
    }
    let label_space = dataset.label_space();
    let k = label_space.effective_classes();
    for s in dataset {
        if s.label >= k {
            return Err(Error::LabelOutOfRange {
                id: s.id.clone(),
                label: s.label,
                num_classes: k,
            });
        }
    }

    let d = config.feature_dim;
    let xs: Vec<FeatureVector> = dataset.iter().map(|s| featurize(&s.text, config)).collect();
    let ys: Vec<usize> = dataset.iter().map(|s| s.label).collect();
    let n = xs.len();

    let mut model = LinearModel::init(label_space, config);
    let mut w = ScaledWeights {
        v: vec![0.0; k * d],
        scale: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut dynamics = DynamicsTable::new(k);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let lr = config.learning_rate;
    let decay = 1.0 - lr * config.weight_decay;
    let mut errs = vec![0.0; k];
    let mut batch_errs: Vec<f64> = Vec::with_capacity(config.batch_size * k);

    let logits_of = |w: &ScaledWeights, bias: &[f64], x: &FeatureVector| -> Vec<f64> {
        (0..k)
            .map(|c| {
                let row = &w.v[c * d..(c + 1) * d];
                bias[c] + w.scale * x.iter().map(|(j, v)| row[j] * v).sum::<f64>()
            })
            .collect()
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let m = batch.len() as f64;
            batch_errs.clear();
            for &i in batch {
                let p = softmax(&logits_of(&w, &model.bias, &xs[i]));
                for c in 0..k {
                    errs[c] = p[c] - f64::from(u8::from(c == ys[i]));
                }
                batch_errs.extend_from_slice(&errs);
            }
            w.scale *= decay;
            if w.scale < 1e-6 {
                w.renormalize();
            }
            let step = lr / (m * w.scale);
            for (bi, &i) in batch.iter().enumerate() {
                let e = &batch_errs[bi * k..(bi + 1) * k];
                for c in 0..k {
                    if e[c] == 0.0 {
                        continue;
                    }
                    let row = &mut w.v[c * d..(c + 1) * d];
                    for (j, v) in xs[i].iter() {
                        row[j] -= step * e[c] * v;
                    }
                }
            }
            for c in 0..k {
                let g: f64 = (0..batch.len()).map(|bi| batch_errs[bi * k + c]).sum();
                model.bias[c] -= lr * g / m;
            }
        }

        let epoch_logits: Vec<Vec<f64>> = xs.iter().map(|x| logits_of(&w, &model.bias, x)).collect();
        let ce: f64 = epoch_logits.iter().zip(&ys).map(|(z, &y)| cross_entropy(z, y)).sum();
        let norm_sq = w.scale * w.scale * w.v.iter().map(|v| v * v).sum::<f64>();
        let loss = ce / n as f64 + 0.5 * config.weight_decay * norm_sq;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        for (s, z) in dataset.iter().zip(epoch_logits) {
            dynamics.record(&s.id, epoch, z)?;
        }
        log::debug!("epoch {epoch}: loss {loss}");
        epoch_losses.push(loss);
    }

    model.weights = w.v.iter().map(|v| v * w.scale).collect();
    Ok(TrainOutcome {
        model,
        dynamics,
        epoch_losses,
    })
}
