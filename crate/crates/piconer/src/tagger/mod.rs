//! The built-in probabilistic token classifier: a linear model over hashed
//! sparse window features with softmax scoring, cross-entropy losses, and
//! deterministic mini-batch SGD. A pluggable scorer contract lets external
//! models replace it behind the same interface.

mod features;
mod scorer;

pub use features::{featurize, FeatureConfig, Template};
pub use scorer::{validate_rows, ReplayScorer, ScoreRequest, ScoreResponse, TokenScorer};

use base64::Engine;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::schema::{LabelSchema, TagId};

/// Per-token probability distributions over the tag set. Every row sums to 1
/// within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: Vec<Vec<f64>>,
}

impl ProbMatrix {
    pub fn new(rows: Vec<Vec<f64>>, tag_count: usize) -> Result<Self> {
        validate_rows(&rows, tag_count)?;
        Ok(ProbMatrix { rows })
    }

    /// For rows already produced by a softmax.
    pub(crate) fn from_softmax(rows: Vec<Vec<f64>>) -> Self {
        ProbMatrix { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-token argmax decoding; ties break to the lowest tag index.
pub fn decode(probs: &ProbMatrix) -> Vec<TagId> {
    probs
        .rows()
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Mean cross-entropy of the gold tags over all tokens of the batch.
pub fn supervised_loss(probs: &[ProbMatrix], gold: &[Vec<TagId>]) -> Result<f64> {
    if probs.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} probability matrices but {} gold sequences",
            probs.len(),
            gold.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, tags) in probs.iter().zip(gold) {
        if p.len() != tags.len() {
            return Err(Error::Data("probability/gold length mismatch".into()));
        }
        for (row, &tag) in p.rows().iter().zip(tags) {
            total -= row[tag].ln();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("supervised loss over zero tokens".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 20,
            batch_size: 32,
            l2: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Linear token classifier: a dense `C x D` weight matrix over hashed
/// features, scored with a softmax per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenClassifierModel {
    weights: Vec<f64>,
    schema: LabelSchema,
    features: FeatureConfig,
}

impl TokenClassifierModel {
    pub fn zeros(schema: LabelSchema, features: FeatureConfig) -> Result<Self> {
        features.validate()?;
        let weights = vec![0.0; schema.tag_count() * features.hash_dim];
        Ok(TokenClassifierModel {
            weights,
            schema,
            features,
        })
    }

    /// Builds a model from an explicit weight matrix (row-major `C x D`).
    pub fn with_weights(
        schema: LabelSchema,
        features: FeatureConfig,
        weights: Vec<f64>,
    ) -> Result<Self> {
        features.validate()?;
        let expected = schema.tag_count() * features.hash_dim;
        if weights.len() != expected {
            return Err(Error::Model(format!(
                "{} weights for a {} x {} matrix",
                weights.len(),
                schema.tag_count(),
                features.hash_dim
            )));
        }
        Ok(TokenClassifierModel {
            weights,
            schema,
            features,
        })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn class_count(&self) -> usize {
        self.schema.tag_count()
    }

    fn dim(&self) -> usize {
        self.features.hash_dim
    }

    fn token_logits(&self, features: &[usize]) -> Vec<f64> {
        let d = self.dim();
        (0..self.class_count())
            .map(|c| features.iter().map(|&f| self.weights[c * d + f]).sum())
            .collect()
    }

    /// Softmax scoring of one sentence (Eq. 1 path), numerically stable under
    /// max-subtraction.
    pub fn forward(&self, texts: &[&str]) -> Result<ProbMatrix> {
        let feats = featurize(texts, &self.features);
        self.forward_features(&feats)
    }

    pub(crate) fn forward_features(&self, feats: &[Vec<usize>]) -> Result<ProbMatrix> {
        let rows = feats
            .iter()
            .map(|f| {
                let logits = self.token_logits(f);
                if logits.iter().any(|z| !z.is_finite()) {
                    return Err(Error::Model("non-finite logits".into()));
                }
                Ok(softmax(&logits))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProbMatrix::from_softmax(rows))
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// One training sentence with per-token targets. `supervised` examples feed
/// the supervised loss term; the rest feed the pseudo-label term scaled by
/// alpha. Unmasked tokens stay in context but contribute no loss.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub features: Vec<Vec<usize>>,
    pub targets: Vec<TagId>,
    pub mask: Vec<bool>,
    pub supervised: bool,
}

impl TrainExample {
    pub fn from_labeled(texts: &[&str], tags: Vec<TagId>, config: &FeatureConfig) -> Self {
        let features = featurize(texts, config);
        let mask = vec![true; tags.len()];
        TrainExample {
            features,
            targets: tags,
            mask,
            supervised: true,
        }
    }
}

/// Full dense gradient of the mean supervised cross-entropy over `batch`,
/// plus the L2 term `2 * l2 * W`. Shape matches the weight matrix.
pub fn gradient(
    model: &TokenClassifierModel,
    batch: &[(&[&str], &[TagId])],
    l2: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Data("gradient over an empty batch".into()));
    }
    let d = model.dim();
    let mut grad = vec![0.0; model.weights.len()];
    let n_tokens: usize = batch.iter().map(|(_, tags)| tags.len()).sum();
    let scale = 1.0 / n_tokens as f64;
    for (texts, tags) in batch {
        let feats = featurize(texts, &model.features);
        for (f, &tag) in feats.iter().zip(*tags) {
            let probs = softmax(&model.token_logits(f));
            for (c, &p) in probs.iter().enumerate() {
                let coef = scale * (p - if c == tag { 1.0 } else { 0.0 });
                for &idx in f {
                    grad[c * d + idx] += coef;
                }
            }
        }
    }
    if l2 > 0.0 {
        for (g, w) in grad.iter_mut().zip(&model.weights) {
            *g += 2.0 * l2 * w;
        }
    }
    Ok(grad)
}

/// Mini-batch SGD over labeled and pseudo-labeled examples. Per batch the
/// objective is mean supervised CE plus `alpha` times mean CE over masked
/// pseudo tokens; L2 is applied as exact multiplicative decay.
pub fn fit_examples(
    init: TokenClassifierModel,
    examples: &[TrainExample],
    alpha: f64,
    config: &TrainConfig,
) -> Result<TokenClassifierModel> {
    config.validate()?;
    let mut model = init;
    if config.epochs == 0 || examples.is_empty() {
        return Ok(model);
    }
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let decay = 1.0 - 2.0 * config.learning_rate * config.l2;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut n_sup = 0usize;
            let mut n_unsup = 0usize;
            for &i in chunk {
                let ex = &examples[i];
                let masked = ex.mask.iter().filter(|&&m| m).count();
                if ex.supervised {
                    n_sup += masked;
                } else {
                    n_unsup += masked;
                }
            }
            if config.l2 > 0.0 {
                for w in &mut model.weights {
                    *w *= decay;
                }
            }
            for &i in chunk {
                let ex = &examples[i];
                let scale = if ex.supervised {
                    if n_sup == 0 {
                        continue;
                    }
                    1.0 / n_sup as f64
                } else {
                    if n_unsup == 0 {
                        continue;
                    }
                    alpha / n_unsup as f64
                };
                if scale == 0.0 {
                    continue;
                }
                for ((f, &target), &selected) in
                    ex.features.iter().zip(&ex.targets).zip(&ex.mask)
                {
                    if !selected {
                        continue;
                    }
                    let probs = softmax(&model.token_logits(f));
                    for (c, &p) in probs.iter().enumerate() {
                        let coef = config.learning_rate
                            * scale
                            * (p - if c == target { 1.0 } else { 0.0 });
                        for &idx in f {
                            model.weights[c * d + idx] -= coef;
                        }
                    }
                }
            }
        }
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Model("training diverged to non-finite weights".into()));
    }
    Ok(model)
}

/// Supervised fit on a fully labeled dataset. `epochs = 0` returns `init`
/// (or a zero model) unchanged; deterministic per seed.
pub fn fit(
    data: &Dataset,
    features: &FeatureConfig,
    config: &TrainConfig,
    init: Option<TokenClassifierModel>,
) -> Result<TokenClassifierModel> {
    if data.is_empty() || !data.all_labeled() {
        return Err(Error::Data("fit requires a non-empty, fully labeled dataset".into()));
    }
    let init = match init {
        Some(m) => {
            if m.schema() != &data.schema {
                return Err(Error::Model(format!(
                    "init model schema '{}' does not match data schema '{}'",
                    m.schema().name(),
                    data.schema.name()
                )));
            }
            m
        }
        None => TokenClassifierModel::zeros(data.schema.clone(), features.clone())?,
    };
    let examples: Vec<TrainExample> = data
        .sentences
        .iter()
        .map(|s| {
            let texts = s.texts();
            TrainExample::from_labeled(&texts, s.gold_tags().expect("labeled"), &init.features)
        })
        .collect();
    fit_examples(init, &examples, 0.0, config)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    schema: LabelSchema,
    features: FeatureConfig,
    weights: String,
}

const MODEL_FORMAT_VERSION: u32 = 1;

impl TokenClassifierModel {
    pub fn to_json(&self) -> Result<String> {
        let mut bytes = Vec::with_capacity(self.weights.len() * 8);
        for w in &self.weights {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            schema: self.schema.clone(),
            features: self.features.clone(),
            weights: base64::engine::general_purpose::STANDARD.encode(bytes),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model format version {}",
                file.version
            )));
        }
        file.features.validate()?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&file.weights)
            .map_err(|e| Error::Model(format!("corrupt weight encoding: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Model("corrupt weight encoding: length".into()));
        }
        let weights: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let expected = file.schema.tag_count() * file.features.hash_dim;
        if weights.len() != expected {
            return Err(Error::Model(format!(
                "weight count {} does not match schema/features ({expected})",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Model("non-finite weights in model file".into()));
        }
        Ok(TokenClassifierModel {
            weights,
            schema: file.schema,
            features: file.features,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
