use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureVector, FeaturizerConfig};
use super::label::ComplexityLabel;
use super::model::{ClassifierModel, TrainingMeta};
use super::ClassifierError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fraction of pairs held out to pick the best epoch; 0 trains on all
    /// pairs and keeps the last epoch.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 3e-5,
            seed: 0,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    /// Training loss after each epoch (index 0 is after epoch 1).
    pub loss_trace: Vec<f64>,
    /// Holdout accuracy after each epoch; empty without a holdout.
    pub holdout_accuracy: Vec<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
}

fn accuracy(model: &ClassifierModel, set: &[(FeatureVector, ComplexityLabel)]) -> f64 {
    let hits = set
        .iter()
        .filter(|(fv, y)| model.predict_features(fv).map(|p| p.label == *y).unwrap_or(false))
        .count();
    hits as f64 / set.len() as f64
}

/// Full-batch gradient descent on mean cross-entropy from zero initial
/// parameters.
pub fn train(
    pairs: &[(String, ComplexityLabel)],
    featurizer: &FeaturizerConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, ClassifierError> {
    if pairs.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(ClassifierError::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(ClassifierError::InvalidConfig(format!(
            "holdout fraction must be in [0, 1), got {}",
            config.holdout_fraction
        )));
    }

    let featurized: Vec<(FeatureVector, ComplexityLabel)> = pairs
        .iter()
        .map(|(q, y)| (featurize(q, featurizer), *y))
        .collect();
    let holdout_size = if pairs.len() >= 2 {
        ((pairs.len() as f64 * config.holdout_fraction).floor() as usize).min(pairs.len() - 1)
    } else {
        0
    };
    let (train_set, holdout) = if holdout_size > 0 {
        let mut order: Vec<usize> = (0..featurized.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let (held, kept) = order.split_at(holdout_size);
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        let mut held = held.to_vec();
        held.sort_unstable();
        (
            kept.iter().map(|&i| featurized[i].clone()).collect::<Vec<_>>(),
            held.iter().map(|&i| featurized[i].clone()).collect::<Vec<_>>(),
        )
    } else {
        (featurized, Vec::new())
    };

    let mut model = ClassifierModel::zeros(featurizer.clone())?;
    let (mut loss, mut grad) = model.loss_and_gradient(&train_set)?;
    let mut loss_trace = Vec::with_capacity(config.epochs as usize);
    let mut holdout_accuracy = Vec::new();
    let mut best: Option<(f64, u64, ClassifierModel, f64)> = None;

    for epoch in 1..=config.epochs {
        model.apply_gradient(&grad, config.learning_rate);
        (loss, grad) = model.loss_and_gradient(&train_set)?;
        if !loss.is_finite() || !model.is_finite() {
            return Err(ClassifierError::NonFiniteLoss {
                epoch,
                learning_rate: config.learning_rate,
                loss,
            });
        }
        loss_trace.push(loss);
        if !holdout.is_empty() {
            let acc = accuracy(&model, &holdout);
            holdout_accuracy.push(acc);
            if best.as_ref().is_none_or(|(best_acc, ..)| acc > *best_acc) {
                best = Some((acc, epoch, model.clone(), loss));
            }
        }
    }

    let (mut model, selected_epoch, final_loss) = match best {
        Some((_, epoch, m, l)) => (m, epoch, l),
        None => (model, config.epochs, loss),
    };
    model.meta = TrainingMeta {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        seed: config.seed,
        holdout_fraction: config.holdout_fraction,
        selected_epoch,
        final_train_loss: final_loss,
    };
    Ok(TrainOutcome {
        model,
        loss_trace,
        holdout_accuracy,
        train_size: train_set.len(),
        holdout_size: holdout.len(),
    })
}
