use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureVector, FeaturizerConfig};
use super::label::ComplexityLabel;
use super::ClassifierError;

pub const NUM_CLASSES: usize = 3;

pub const MODEL_MAGIC: &[u8; 8] = b"ARAGCLS1";
const MODEL_MAGIC_FAMILY: &[u8; 7] = b"ARAGCLS";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: u64,
    pub learning_rate: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
    /// Epoch whose parameters were kept (equals `epochs` without a holdout).
    pub selected_epoch: u64,
    pub final_train_loss: f64,
}

/// Multinomial logistic regression over hashed features.
///
/// Weights are stored row-major by feature index: the three class weights for
/// feature `i` live at `weights[3 * i..3 * i + 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    featurizer: FeaturizerConfig,
    weights: Vec<f64>,
    bias: [f64; NUM_CLASSES],
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: ComplexityLabel,
    pub probabilities: [f64; NUM_CLASSES],
}

/// Sparse gradient: only feature rows present in the batch are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradient {
    pub weights: BTreeMap<u32, [f64; NUM_CLASSES]>,
    pub bias: [f64; NUM_CLASSES],
}

pub fn softmax(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|z| (z - max).exp());
    let sum: f64 = exps.iter().sum();
    exps.map(|e| e / sum)
}

fn log_sum_exp(logits: [f64; NUM_CLASSES]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Index of the largest probability; exact ties go to the cheaper label.
pub fn argmax_label(probabilities: &[f64; NUM_CLASSES]) -> ComplexityLabel {
    let mut best = 0;
    for i in 1..NUM_CLASSES {
        if probabilities[i] > probabilities[best] {
            best = i;
        }
    }
    ComplexityLabel::from_index(best).expect("three classes")
}

impl ClassifierModel {
    /// All-zero parameters: uniform predictions.
    pub fn zeros(featurizer: FeaturizerConfig) -> Result<Self, ClassifierError> {
        featurizer.validate().map_err(ClassifierError::InvalidConfig)?;
        Ok(Self {
            weights: vec![0.0; featurizer.dim as usize * NUM_CLASSES],
            featurizer,
            bias: [0.0; NUM_CLASSES],
            meta: TrainingMeta::default(),
        })
    }

    pub fn featurizer(&self) -> &FeaturizerConfig {
        &self.featurizer
    }

    pub fn dim(&self) -> u32 {
        self.featurizer.dim
    }

    pub fn bias(&self) -> [f64; NUM_CLASSES] {
        self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64; NUM_CLASSES] {
        &mut self.bias
    }

    pub fn weight_row(&self, feature: u32) -> [f64; NUM_CLASSES] {
        let at = feature as usize * NUM_CLASSES;
        [self.weights[at], self.weights[at + 1], self.weights[at + 2]]
    }

    pub fn weight_mut(&mut self, feature: u32, class: usize) -> &mut f64 {
        &mut self.weights[feature as usize * NUM_CLASSES + class]
    }

    pub fn check_features(&self, fv: &FeatureVector) -> Result<(), ClassifierError> {
        if fv.dim != self.featurizer.dim || fv.config_fingerprint != self.featurizer.fingerprint() {
            return Err(ClassifierError::FeatureMismatch {
                model_dim: self.featurizer.dim,
                feature_dim: fv.dim,
            });
        }
        Ok(())
    }

    fn logits_unchecked(&self, fv: &FeatureVector) -> [f64; NUM_CLASSES] {
        let mut z = self.bias;
        for &(i, x) in &fv.entries {
            let row = self.weight_row(i);
            for c in 0..NUM_CLASSES {
                z[c] += row[c] * x;
            }
        }
        z
    }

    pub fn logits(&self, fv: &FeatureVector) -> Result<[f64; NUM_CLASSES], ClassifierError> {
        self.check_features(fv)?;
        Ok(self.logits_unchecked(fv))
    }

    pub fn predict_features(&self, fv: &FeatureVector) -> Result<Prediction, ClassifierError> {
        let probabilities = softmax(self.logits(fv)?);
        Ok(Prediction {
            label: argmax_label(&probabilities),
            probabilities,
        })
    }

    /// Featurizes with the model's own configuration, so it cannot mismatch.
    pub fn predict(&self, question: &str) -> Prediction {
        self.predict_features(&featurize(question, &self.featurizer))
            .expect("features built from the model's own config")
    }

    /// Mean cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_gradient(
        &self,
        batch: &[(FeatureVector, ComplexityLabel)],
    ) -> Result<(f64, Gradient), ClassifierError> {
        if batch.is_empty() {
            return Err(ClassifierError::EmptyBatch);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = Gradient::default();
        for (fv, label) in batch {
            self.check_features(fv)?;
            let z = self.logits_unchecked(fv);
            let y = label.index();
            loss += log_sum_exp(z) - z[y];
            let mut delta = softmax(z);
            delta[y] -= 1.0;
            for (g, d) in grad.bias.iter_mut().zip(delta) {
                *g += d * scale;
            }
            for &(i, x) in &fv.entries {
                let row = grad.weights.entry(i).or_insert([0.0; NUM_CLASSES]);
                for c in 0..NUM_CLASSES {
                    row[c] += delta[c] * x * scale;
                }
            }
        }
        Ok((loss * scale, grad))
    }

    pub fn apply_gradient(&mut self, grad: &Gradient, learning_rate: f64) {
        for (&i, row) in &grad.weights {
            for (c, g) in row.iter().enumerate() {
                *self.weight_mut(i, c) -= learning_rate * g;
            }
        }
        for c in 0..NUM_CLASSES {
            self.bias[c] -= learning_rate * grad.bias[c];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|w| w.is_finite())
    }

    /// Binary model file; see `docs/formats.md` for the layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&self.featurizer.dim.to_le_bytes());
        out.push(self.featurizer.ngram_orders.len() as u8);
        out.extend_from_slice(&self.featurizer.ngram_orders);
        let m = &self.meta;
        out.extend_from_slice(&m.epochs.to_le_bytes());
        out.extend_from_slice(&m.learning_rate.to_le_bytes());
        out.extend_from_slice(&m.seed.to_le_bytes());
        out.extend_from_slice(&m.holdout_fraction.to_le_bytes());
        out.extend_from_slice(&m.selected_epoch.to_le_bytes());
        out.extend_from_slice(&m.final_train_loss.to_le_bytes());
        for b in self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        let rows: Vec<u32> = (0..self.featurizer.dim)
            .filter(|&i| self.weight_row(i).iter().any(|&w| w != 0.0))
            .collect();
        out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
        for i in rows {
            out.extend_from_slice(&i.to_le_bytes());
            for w in self.weight_row(i) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        if bytes.len() < MODEL_MAGIC.len() || &bytes[..MODEL_MAGIC_FAMILY.len()] != MODEL_MAGIC_FAMILY {
            return Err(ClassifierError::CorruptModel("bad magic bytes".into()));
        }
        if &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
            return Err(ClassifierError::VersionMismatch(
                String::from_utf8_lossy(&bytes[..MODEL_MAGIC.len()]).into_owned(),
            ));
        }
        let mut r = Reader {
            bytes,
            pos: MODEL_MAGIC.len(),
        };
        let dim = r.u32()?;
        let n_orders = r.take(1)?[0] as usize;
        let ngram_orders = r.take(n_orders)?.to_vec();
        let meta = TrainingMeta {
            epochs: r.u64()?,
            learning_rate: r.f64()?,
            seed: r.u64()?,
            holdout_fraction: r.f64()?,
            selected_epoch: r.u64()?,
            final_train_loss: r.f64()?,
        };
        let bias = [r.f64()?, r.f64()?, r.f64()?];
        let mut model = Self::zeros(FeaturizerConfig { dim, ngram_orders })
            .map_err(|e| ClassifierError::CorruptModel(e.to_string()))?;
        model.bias = bias;
        model.meta = meta;

        let rows = r.u64()?;
        if rows > u64::from(dim) {
            return Err(ClassifierError::CorruptModel("more weight rows than features".into()));
        }
        let mut last: Option<u32> = None;
        for _ in 0..rows {
            let i = r.u32()?;
            if i >= dim || last.is_some_and(|l| l >= i) {
                return Err(ClassifierError::CorruptModel(
                    "weight rows out of order or range".into(),
                ));
            }
            last = Some(i);
            for c in 0..NUM_CLASSES {
                *model.weight_mut(i, c) = r.f64()?;
            }
        }
        if r.pos != bytes.len() {
            return Err(ClassifierError::CorruptModel("trailing bytes".into()));
        }
        if !model.is_finite() {
            return Err(ClassifierError::CorruptModel("non-finite parameters".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_bytes()).map_err(ClassifierError::Io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::from_bytes(&std::fs::read(path).map_err(ClassifierError::Io)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        let out = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| ClassifierError::CorruptModel("truncated model file".into()))?;
        self.pos += n;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ClassifierError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
