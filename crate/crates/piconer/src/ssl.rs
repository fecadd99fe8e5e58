//! Iterative self-training. A baseline model trained on the scarce labeled
//! split pseudo-labels the unlabeled pool; a quality strategy masks the
//! untrustworthy tokens; the model fine-tunes on the combined objective and
//! the cycle repeats until validation F1 stops improving or an iteration cap
//! is hit. The checkpoint with the best validation F1 wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, ScenarioSplit};
use crate::error::{Error, Result};
use crate::eval::strict_score;
use crate::quality::{
    apply_adaptive_mask, apply_confidence_mask, compute_adaptive_thresholds, judge_select,
    JudgeSession, QualityStrategy,
};
use crate::schema::TagId;
use crate::tagger::{
    decode, fit, supervised_loss, FeatureConfig, ProbMatrix, TokenClassifierModel, TokenScorer,
    TrainConfig, TrainExample, fit_examples,
};

/// One unlabeled sentence with model-assigned tags, per-token confidence
/// (max softmax probability), and the selection mask a quality strategy
/// will prune.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledSentence {
    pub sentence: crate::corpus::Sentence,
    pub pseudo_tags: Vec<TagId>,
    pub confidence: Vec<f64>,
    pub selected: Vec<bool>,
}

impl PseudoLabeledSentence {
    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }
}

/// Pseudo-labels every sentence and keeps the probability matrices, which
/// the class-adaptive strategy needs.
pub fn pseudo_label_full<S: TokenScorer + ?Sized>(
    scorer: &S,
    unlabeled: &Dataset,
) -> Result<(Vec<PseudoLabeledSentence>, Vec<ProbMatrix>)> {
    if scorer.schema() != &unlabeled.schema {
        return Err(Error::Schema(format!(
            "scorer schema '{}' does not match dataset schema '{}'",
            scorer.schema().name(),
            unlabeled.schema.name()
        )));
    }
    let mut out = Vec::with_capacity(unlabeled.len());
    let mut probs = Vec::with_capacity(unlabeled.len());
    for sentence in &unlabeled.sentences {
        let matrix = scorer.score(&sentence.texts())?;
        let pseudo_tags = decode(&matrix);
        let confidence: Vec<f64> = matrix
            .rows()
            .iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let selected = vec![true; pseudo_tags.len()];
        out.push(PseudoLabeledSentence {
            sentence: sentence.stripped(),
            pseudo_tags,
            confidence,
            selected,
        });
        probs.push(matrix);
    }
    Ok((out, probs))
}

/// Pseudo-labels every sentence: tags by argmax decoding, confidence as the
/// row maximum, mask initialized all-true.
pub fn pseudo_label<S: TokenScorer + ?Sized>(
    scorer: &S,
    unlabeled: &Dataset,
) -> Result<Vec<PseudoLabeledSentence>> {
    pseudo_label_full(scorer, unlabeled).map(|(pseudo, _)| pseudo)
}

/// Breakdown of the training objective: supervised mean cross-entropy plus
/// `alpha` times the mean cross-entropy over selected pseudo tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub supervised: f64,
    pub unsupervised: f64,
}

pub fn combined_loss(
    model: &TokenClassifierModel,
    labeled: &Dataset,
    pseudo: &[PseudoLabeledSentence],
    alpha: f64,
) -> Result<LossBreakdown> {
    let mut sup_probs = Vec::with_capacity(labeled.len());
    let mut sup_gold = Vec::with_capacity(labeled.len());
    for sentence in &labeled.sentences {
        let tags = sentence
            .gold_tags()
            .ok_or_else(|| Error::Data("combined_loss needs labeled sentences".into()))?;
        sup_probs.push(model.forward(&sentence.texts())?);
        sup_gold.push(tags);
    }
    let supervised = if sup_probs.is_empty() {
        0.0
    } else {
        supervised_loss(&sup_probs, &sup_gold)?
    };

    let mut unsup_sum = 0.0;
    let mut unsup_n = 0usize;
    for p in pseudo {
        let matrix = model.forward(&p.sentence.texts())?;
        for ((row, &tag), &selected) in matrix.rows().iter().zip(&p.pseudo_tags).zip(&p.selected)
        {
            if selected {
                unsup_sum += -(row[tag].max(1e-300)).ln();
                unsup_n += 1;
            }
        }
    }
    let unsupervised = if unsup_n == 0 {
        0.0
    } else {
        unsup_sum / unsup_n as f64
    };

    Ok(LossBreakdown {
        total: supervised + alpha * unsupervised,
        supervised,
        unsupervised,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SslConfig {
    /// Total iteration budget including the baseline (iteration 0).
    pub max_iterations: usize,
    /// Consecutive iterations without > 1e-4 validation-F1 improvement
    /// tolerated before stopping.
    pub patience: usize,
    /// Weight on the pseudo-label loss term.
    pub alpha: f64,
    /// Ramp alpha linearly from 0 over this many iterations; 0 disables.
    #[serde(default)]
    pub alpha_ramp_iterations: usize,
    pub strategy: QualityStrategy,
    pub features: FeatureConfig,
    pub retrain: TrainConfig,
    /// Re-initialize weights each iteration instead of continuing from the
    /// previous checkpoint.
    #[serde(default)]
    pub retrain_from_scratch: bool,
    pub seed: u64,
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config("alpha must be non-negative".into()));
        }
        self.features.validate()?;
        self.retrain.validate()
    }

    fn effective_alpha(&self, iteration: usize) -> f64 {
        if self.alpha_ramp_iterations == 0 {
            return self.alpha;
        }
        let frac = (iteration as f64 / self.alpha_ramp_iterations as f64).min(1.0);
        self.alpha * frac
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub validation_macro_f1: f64,
    pub supervised_loss: f64,
    pub unsupervised_loss: f64,
    pub selected_total: usize,
    pub unlabeled_tokens: usize,
    /// Selected pseudo tokens per entity type (O omitted).
    pub selected_per_type: BTreeMap<String, usize>,
    /// Class thresholds used this iteration, when the strategy has any.
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SslHistory {
    pub records: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    pub best_iteration: usize,
}

impl SslHistory {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn validation_f1(model: &TokenClassifierModel, validation: &Dataset) -> Result<f64> {
    let mut preds = Vec::with_capacity(validation.len());
    for s in &validation.sentences {
        preds.push(decode(&model.forward(&s.texts())?));
    }
    Ok(strict_score(validation, &preds)?.macro_f1)
}

fn selected_per_type(
    pseudo: &[PseudoLabeledSentence],
    schema: &crate::schema::LabelSchema,
) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in pseudo {
        for (&tag, &selected) in p.pseudo_tags.iter().zip(&p.selected) {
            if !selected {
                continue;
            }
            if let Some((ti, _)) = schema.split_tag(tag) {
                *counts.entry(schema.entity_types()[ti].clone()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Runs the self-training loop and returns the best checkpoint plus the full
/// per-iteration log. Deterministic for a fixed scenario and config.
pub fn ssl_train(
    scenario: &ScenarioSplit,
    config: &SslConfig,
    mut judge: Option<&mut JudgeSession>,
) -> Result<(TokenClassifierModel, SslHistory)> {
    config.validate()?;
    let labeled = &scenario.train_labeled;
    let unlabeled = &scenario.train_unlabeled;
    if labeled.is_empty() {
        return Err(Error::Data("self-training needs labeled sentences".into()));
    }
    if scenario.validation.is_empty() {
        return Err(Error::Data(
            "self-training needs a non-empty validation split".into(),
        ));
    }
    if matches!(config.strategy, QualityStrategy::ExternalJudge { .. }) && judge.is_none() {
        return Err(Error::Config(
            "external-judge strategy needs a judge session".into(),
        ));
    }

    let mut history = SslHistory::default();
    if unlabeled.is_empty() {
        history
            .warnings
            .push("unlabeled pool is empty; training reduces to the supervised baseline".into());
    }

    let baseline = fit(labeled, &config.features, &config.retrain, None)?;
    let f1 = validation_f1(&baseline, &scenario.validation)?;
    let sup = combined_loss(&baseline, labeled, &[], 0.0)?;
    history.records.push(IterationRecord {
        iteration: 0,
        validation_macro_f1: f1,
        supervised_loss: sup.supervised,
        unsupervised_loss: 0.0,
        selected_total: 0,
        unlabeled_tokens: unlabeled.token_count(),
        selected_per_type: BTreeMap::new(),
        thresholds: None,
    });

    let mut current = baseline.clone();
    let mut best = baseline;
    let mut best_f1 = f1;
    let mut best_iteration = 0usize;
    let mut stall = 0usize;

    for iteration in 1..config.max_iterations {
        if unlabeled.is_empty() || stall >= config.patience {
            break;
        }
        let (mut pseudo, probs) = pseudo_label_full(&current, unlabeled)?;
        let mut thresholds_used: Option<Vec<f64>> = None;
        match &config.strategy {
            QualityStrategy::ConfidenceMask { theta } => {
                apply_confidence_mask(&mut pseudo, *theta);
            }
            QualityStrategy::ClassAdaptive { sentence_scoped } => {
                let tau = compute_adaptive_thresholds(&probs, &pseudo, *sentence_scoped)?;
                apply_adaptive_mask(&mut pseudo, &tau);
                thresholds_used = Some(tau.tau.clone());
            }
            QualityStrategy::ExternalJudge { scope } => {
                let session = judge.as_deref_mut().expect("checked above");
                judge_select(&mut pseudo, &labeled.schema, session, *scope)?;
            }
        }

        let alpha = config.effective_alpha(iteration);
        let mut examples: Vec<TrainExample> = labeled
            .sentences
            .iter()
            .map(|s| {
                TrainExample::from_labeled(
                    &s.texts(),
                    s.gold_tags().expect("labeled split"),
                    &config.features,
                )
            })
            .collect();
        for p in &pseudo {
            if p.selected_count() == 0 {
                continue;
            }
            examples.push(TrainExample {
                features: crate::tagger::featurize(&p.sentence.texts(), &config.features),
                targets: p.pseudo_tags.clone(),
                mask: p.selected.clone(),
                supervised: false,
            });
        }

        let init = if config.retrain_from_scratch {
            TokenClassifierModel::zeros(labeled.schema.clone(), config.features.clone())?
        } else {
            current.clone()
        };
        let mut round = config.retrain.clone();
        round.seed = config.retrain.seed.wrapping_add(iteration as u64);
        current = fit_examples(init, &examples, alpha, &round)?;

        let f1 = validation_f1(&current, &scenario.validation)?;
        let losses = combined_loss(&current, labeled, &pseudo, alpha)?;
        let selected_total: usize = pseudo.iter().map(|p| p.selected_count()).sum();
        history.records.push(IterationRecord {
            iteration,
            validation_macro_f1: f1,
            supervised_loss: losses.supervised,
            unsupervised_loss: losses.unsupervised,
            selected_total,
            unlabeled_tokens: unlabeled.token_count(),
            selected_per_type: selected_per_type(&pseudo, &labeled.schema),
            thresholds: thresholds_used,
        });

        if f1 > best_f1 + 1e-4 {
            stall = 0;
        } else {
            stall += 1;
        }
        if f1 > best_f1 {
            best_f1 = f1;
            best = current.clone();
            best_iteration = iteration;
        }
    }

    history.best_iteration = best_iteration;
    Ok((best, history))
}
