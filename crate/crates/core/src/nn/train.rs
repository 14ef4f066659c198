use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Grads, MlpClassifier, Mode};
use super::sigmoid;
use crate::data::EventDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            dropout_p: 0.2,
            batch_size: 256,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train.learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config("train.dropout_p must lie in [0, 1)".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("train.batch_size must be >= 2".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("train.max_epochs must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("train.patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.val_accuracy
            ));
        }
        s
    }
}

/// Mean binary cross-entropy on logits.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> f64 {
    let n = logits.len().max(1) as f64;
    logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
        .sum::<f64>()
        / n
}

/// Fraction of rows where `p >= threshold` agrees with the label.
pub fn accuracy(probs: &[f64], labels: &[u8], threshold: f64) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= threshold) == (y == 1))
        .count();
    hits as f64 / probs.len() as f64
}

/// Adam with decoupled weight decay on the linear weight matrices.
pub(crate) struct AdamW {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Grads,
    v: Grads,
    decay: Vec<bool>,
}

impl AdamW {
    pub(crate) fn new(model: &mut MlpClassifier, lr: f64, weight_decay: f64) -> Self {
        let decay = model.decay_mask();
        let shapes: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            decay,
        }
    }

    pub(crate) fn update(&mut self, model: &mut MlpClassifier, grads: &Grads) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let shrink = 1.0 - self.lr * self.weight_decay;
        for (g_idx, params) in model.params_mut().into_iter().enumerate() {
            let decays = self.decay[g_idx];
            let (m, v) = (&mut self.m[g_idx], &mut self.v[g_idx]);
            for (i, p) in params.iter_mut().enumerate() {
                if decays {
                    *p *= shrink;
                }
                let g = grads[g_idx][i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                *p -= self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            }
        }
    }
}

/// Mini-batch training with early stopping on validation loss.
///
/// Returns the parameters from the epoch with the lowest validation loss, in
/// eval mode. Inputs must already be standardized with the same parameters.
pub fn train(
    mut model: MlpClassifier,
    train_set: &EventDataset,
    val_set: &EventDataset,
    cfg: &TrainConfig,
) -> Result<(MlpClassifier, TrainingLog)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    for ds in [train_set, val_set] {
        if ds.n_features() != model.input_dim() {
            return Err(Error::Shape(format!(
                "dataset has {} features, model expects {}",
                ds.n_features(),
                model.input_dim()
            )));
        }
    }
    model.set_dropout(cfg.dropout_p);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(&mut model, cfg.learning_rate, cfg.weight_decay);
    let train_y: Vec<f64> = train_set.labels.iter().map(|&l| f64::from(l)).collect();
    let val_y: Vec<f64> = val_set.labels.iter().map(|&l| f64::from(l)).collect();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainingLog {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best = None;
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        model.set_mode(Mode::Train);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // batch statistics are undefined for a single row
            if chunk.len() < 2 {
                continue;
            }
            let x = train_set.features.select_rows(chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| train_y[i]).collect();
            let cache = model.forward_train(&x, &mut rng);
            let n = chunk.len() as f64;
            loss_sum += bce_with_logits(cache.logits(), &y) * n;
            seen += chunk.len();
            let dl: Vec<f64> = cache
                .logits()
                .iter()
                .zip(&y)
                .map(|(&z, &t)| (sigmoid(z) - t) / n)
                .collect();
            let grads = model.backward(&cache, &dl);
            opt.update(&mut model, &grads);
        }
        let train_loss = loss_sum / seen.max(1) as f64;
        if !train_loss.is_finite() || !model.is_finite() {
            return Err(Error::Divergence { epoch });
        }

        model.set_mode(Mode::Eval);
        let val_logits = model.forward(&val_set.features)?;
        let val_loss = bce_with_logits(&val_logits, &val_y);
        if !val_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let probs: Vec<f64> = val_logits.iter().map(|&z| sigmoid(z)).collect();
        let val_accuracy = accuracy(&probs, &val_set.labels, 0.5);
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_accuracy:.4}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best = Some(model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let best = best.unwrap_or(model).eval();
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;

    #[test]
    fn bce_matches_direct_formula() {
        let z = [0.3, -2.0, 5.0];
        let y = [1.0, 0.0, 0.0];
        let direct: f64 = z
            .iter()
            .zip(&y)
            .map(|(&z, &y): (&f64, &f64)| {
                let p = 1.0 / (1.0 + (-z).exp());
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 3.0;
        assert!((bce_with_logits(&z, &y) - direct).abs() < 1e-12);
    }

    #[test]
    fn decay_alone_never_grows_weight_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = MlpClassifier::new(Architecture::new(4).with_hidden(8, 2), &mut rng).unwrap();
        let mut opt = AdamW::new(&mut model, 1e-2, 0.5);
        let zero: Grads = model.params_mut().iter().map(|p| vec![0.0; p.len()]).collect();
        let start = model.weight_norm_sq();
        let mut prev = start;
        for _ in 0..50 {
            opt.update(&mut model, &zero);
            let now = model.weight_norm_sq();
            assert!(now <= prev);
            prev = now;
        }
        assert!(prev < start);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            dropout_p: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn accuracy_counts_threshold_inclusive() {
        assert_eq!(accuracy(&[0.5, 0.49, 0.9, 0.1], &[1, 0, 0, 0], 0.5), 0.75);
    }
}
