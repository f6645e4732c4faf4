use std::collections::HashMap;

use anyhow::{anyhow, Context};
use arag_core::classifier::{train, ClassifierError, ComplexityLabel, FeaturizerConfig, TrainConfig};
use arag_core::labeler::read_training_set;

use super::{create_out_dir, queries, require_file};
use crate::config::RunConfig;
use crate::{Failure, FailureExt, Status};

/// Trains on `training_set` (questions come from `queries`) and writes the
/// model to `classifier` (default `<out>/classifier.bin`).
pub fn run(config: &RunConfig) -> Result<Status, Failure> {
    let set_path = config.training_set_path();
    require_file("training_set", &set_path)?;
    let queries = queries(config)?;
    let (header, labels) = read_training_set(&set_path)
        .with_context(|| format!("cannot read training set {}", set_path.display()))
        .usage()?;
    if labels.is_empty() {
        return Err(Failure::Usage(anyhow!("training set {} has no labeled queries", set_path.display())));
    }
    let questions: HashMap<&str, &str> = queries
        .iter()
        .map(|q| (q.query_id.as_str(), q.question.as_str()))
        .collect();
    let pairs: Vec<(String, ComplexityLabel)> = labels
        .iter()
        .map(|l| {
            questions
                .get(l.query_id.as_str())
                .map(|q| (q.to_string(), l.label))
                .ok_or_else(|| Failure::Usage(anyhow!("training set refers to unknown query {:?}", l.query_id)))
        })
        .collect::<Result<_, _>>()?;

    let featurizer = FeaturizerConfig {
        dim: config.feature_dim,
        ngram_orders: config.ngram_orders.clone(),
    };
    featurizer.validate().map_err(anyhow::Error::msg).usage()?;
    let train_config = TrainConfig {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        seed: config.seed,
        holdout_fraction: config.holdout_fraction,
    };
    let outcome = train(&pairs, &featurizer, &train_config).map_err(|e| match e {
        ClassifierError::InvalidConfig(_) => Failure::Usage(e.into()),
        other => Failure::Runtime(other.into()),
    })?;

    let target = config.classifier_path();
    if config.classifier.is_none() {
        create_out_dir(config)?;
    }
    outcome
        .model
        .save(&target)
        .with_context(|| format!("cannot write classifier {}", target.display()))
        .runtime()?;

    let correct = pairs
        .iter()
        .filter(|(q, y)| outcome.model.predict(q).label == *y)
        .count();
    println!("labels_from\t{} ({}, gated by {})", set_path.display(), header.mode, header.gating_metric);
    println!("train_size\t{}", outcome.train_size);
    println!("holdout_size\t{}", outcome.holdout_size);
    println!("selected_epoch\t{}", outcome.model.meta.selected_epoch);
    println!("final_train_loss\t{:.6}", outcome.model.meta.final_train_loss);
    println!("train_accuracy\t{:.4}", correct as f64 / pairs.len() as f64);
    if let Some(acc) = outcome
        .holdout_accuracy
        .get((outcome.model.meta.selected_epoch as usize).saturating_sub(1))
    {
        println!("holdout_accuracy\t{acc:.4}");
    }
    println!("model\t{}", target.display());
    Ok(Status::Complete)
}
