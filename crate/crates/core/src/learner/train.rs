//! Mini-batch training with early stopping.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::dense::Dense3;
use super::model::{Architecture, Padding, Provenance, RhsModel, Standardizer};
use crate::error::{input, Error, Result};
use crate::features::FeatureSpec;
use crate::field::MacroGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub hidden: [usize; 2],
    /// Standardize inputs and targets with training-split statistics.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 500,
            validation_fraction: 0.1,
            patience: 50,
            hidden: [32, 32],
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return input("batch size and epoch budget must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return input(format!("validation fraction {} is outside (0, 1)", self.validation_fraction));
        }
        if !(self.learning_rate > 0.0) {
            return input("learning rate must be positive");
        }
        Ok(())
    }
}

/// Regression rows: raw inputs (row-major) and `dU/dt` targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub width: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(width: usize) -> Self {
        TrainingSet { width, inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn push_rows(&mut self, inputs: &[f64], targets: &[f64]) -> Result<()> {
        if inputs.len() != targets.len() * self.width {
            return input(format!("{} inputs for {} targets of width {}", inputs.len(), targets.len(), self.width));
        }
        self.inputs.extend_from_slice(inputs);
        self.targets.extend_from_slice(targets);
        Ok(())
    }
}

/// Model layout chosen before training.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub features: Option<FeatureSpec>,
    pub padding: Padding,
    pub grid: MacroGrid,
}

/// Per-epoch mean squared errors in raw target units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    pub best_epoch: usize,
}

impl LossHistory {
    /// Best validation loss seen up to each epoch.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.validation
            .iter()
            .scan(f64::INFINITY, |b, &v| {
                *b = b.min(v);
                Some(*b)
            })
            .collect()
    }
}

fn gather(set: &TrainingSet, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let w = set.width;
    let mut x = Vec::with_capacity(idx.len() * w);
    let mut y = Vec::with_capacity(idx.len());
    for &r in idx {
        x.extend_from_slice(&set.inputs[r * w..(r + 1) * w]);
        y.push(set.targets[r]);
    }
    (x, y)
}

fn mean_loss(net: &Dense3, x: &[f64], y: &[f64]) -> Result<f64> {
    let pred = net.forward_rows(x)?;
    Ok(pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64)
}

/// Trains a fresh network and returns the best-validation checkpoint.
pub fn train(
    spec: &ModelSpec,
    set: &TrainingSet,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
    provenance: Provenance,
) -> Result<(RhsModel, LossHistory)> {
    cfg.validate()?;
    let rows = set.rows();
    if rows < 2 {
        return input("training needs at least two rows");
    }
    if let Some(r) = set.targets.iter().position(|v| !v.is_finite()) {
        return input(format!("non-finite target in row {r}"));
    }
    let w = set.width;
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(rng);
    let n_val = ((rows as f64 * cfg.validation_fraction).round() as usize).clamp(1, rows - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let (mut xt, mut yt) = gather(set, &train_idx);
    let (mut xv, mut yv) = gather(set, val_idx);

    let (input_norm, target_norm) = if cfg.standardize {
        let inorm = match spec.architecture {
            Architecture::Mlp => Standardizer::fit(&xt, w),
            Architecture::Stencil => Standardizer::fit_scalar(&xt, w),
        };
        (inorm, Standardizer::fit(&yt, 1))
    } else {
        (Standardizer::identity(w), Standardizer::identity(1))
    };
    input_norm.apply(&mut xt);
    input_norm.apply(&mut xv);
    target_norm.apply(&mut yt);
    target_norm.apply(&mut yv);
    // local row indices into the standardized training block
    for (k, r) in train_idx.iter_mut().enumerate() {
        *r = k;
    }
    let to_raw = target_norm.std[0] * target_norm.std[0];

    let mut net = Dense3::glorot([w, cfg.hidden[0], cfg.hidden[1], 1], rng)?;
    let mut adam = AdamState::new(AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() }, net.len());
    let mut grad = vec![0.0; net.len()];
    let mut best = (f64::INFINITY, net.clone(), 0);
    let mut history = LossHistory::default();
    let mut bx = Vec::with_capacity(cfg.batch_size * w);
    let mut by = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(rng);
        let mut sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            bx.clear();
            by.clear();
            for &r in batch {
                bx.extend_from_slice(&xt[r * w..(r + 1) * w]);
                by.push(yt[r]);
            }
            let loss = net.loss_and_grad(&bx, &by, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Training { epoch, reason: "loss is not finite".into() });
            }
            sum += loss * batch.len() as f64;
            adam.update(&mut net.theta, &grad);
        }
        let val = mean_loss(&net, &xv, &yv)?;
        if !val.is_finite() {
            return Err(Error::Training { epoch, reason: "validation loss is not finite".into() });
        }
        history.train.push(sum / train_idx.len() as f64 * to_raw);
        history.validation.push(val * to_raw);
        if val < best.0 {
            best = (val, net.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    history.best_epoch = best.2;
    let model = RhsModel {
        architecture: spec.architecture,
        net: best.1,
        input_norm,
        target_norm,
        features: spec.features.clone(),
        padding: spec.padding,
        grid: spec.grid,
        provenance,
    };
    Ok((model, history))
}
