//! Query-complexity classifier: softmax regression over hashed n-grams,
//! trained by gradient descent on cross-entropy.

mod features;
mod label;
mod model;
mod train;

pub use features::{feature_index, feature_keys, featurize, length_bucket, FeatureVector, FeaturizerConfig};
pub use label::ComplexityLabel;
pub use model::{
    argmax_label, softmax, ClassifierModel, Gradient, Prediction, TrainingMeta, MODEL_MAGIC,
    NUM_CLASSES,
};
pub use train::{train, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
    #[error("feature vector (dim {feature_dim}) does not match the model's featurizer (dim {model_dim})")]
    FeatureMismatch { model_dim: u32, feature_dim: u32 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became non-finite ({loss}) at epoch {epoch}; learning rate {learning_rate} is probably too high")]
    NonFiniteLoss {
        epoch: u64,
        learning_rate: f64,
        loss: f64,
    },
    #[error("unsupported classifier model version {0:?}")]
    VersionMismatch(String),
    #[error("corrupt classifier model: {0}")]
    CorruptModel(String),
    #[error("classifier model I/O: {0}")]
    Io(#[source] std::io::Error),
}
