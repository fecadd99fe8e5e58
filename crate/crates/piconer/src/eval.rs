//! Entity-level scoring: strict and partial span matching, macro averages,
//! percentile-bootstrap confidence intervals, approximate-randomization
//! significance tests, and an error taxonomy.
//!
//! Predictions are BIO2-repaired before scoring; gold is asserted valid and
//! never repaired.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::schema::{repair_bio2, validate_bio2, BioPrefix, LabelSchema, TagId};

/// A decoded entity: type index into the governing schema plus a half-open
/// token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntitySpan {
    pub type_index: usize,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Decodes maximal B-then-I runs into spans. Total: an `I-t` without a
/// compatible predecessor opens a new span (cannot occur post-repair).
pub fn extract_entities(tags: &[TagId], schema: &LabelSchema) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<EntitySpan> = None;
    for (pos, &tag) in tags.iter().enumerate() {
        match schema.split_tag(tag) {
            None => {
                if let Some(s) = open.take() {
                    spans.push(s);
                }
            }
            Some((ti, BioPrefix::Begin)) => {
                if let Some(s) = open.take() {
                    spans.push(s);
                }
                open = Some(EntitySpan {
                    type_index: ti,
                    start: pos,
                    end: pos + 1,
                });
            }
            Some((ti, BioPrefix::Inside)) => match open {
                Some(ref mut s) if s.type_index == ti => s.end = pos + 1,
                _ => {
                    if let Some(s) = open.take() {
                        spans.push(s);
                    }
                    open = Some(EntitySpan {
                        type_index: ti,
                        start: pos,
                        end: pos + 1,
                    });
                }
            },
        }
    }
    if let Some(s) = open {
        spans.push(s);
    }
    spans
}

/// Per-type precision/recall/F1 with support counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub entity_type: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_type: Vec<TypeScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Exact type, start, and end agreement.
    Strict,
    /// Same type and at least one shared token position, matched greedily
    /// left to right, one-to-one.
    Partial,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_alignment(gold: &Dataset, pred: &[Vec<TagId>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Data(format!(
            "{} gold sentences but {} prediction sequences",
            gold.len(),
            pred.len()
        )));
    }
    for (sentence, tags) in gold.sentences.iter().zip(pred) {
        if sentence.len() != tags.len() {
            return Err(Error::Data(format!(
                "sentence '{}' has {} tokens but {} predicted tags",
                sentence.doc_id,
                sentence.len(),
                tags.len()
            )));
        }
        if tags.iter().any(|&t| !gold.schema.is_valid_tag(t)) {
            return Err(Error::Data(format!(
                "prediction for '{}' contains an out-of-range tag",
                sentence.doc_id
            )));
        }
        if !sentence.labeled {
            return Err(Error::Data(format!(
                "gold sentence '{}' is unlabeled",
                sentence.doc_id
            )));
        }
    }
    Ok(())
}

/// TP/FP/FN accumulation for one (gold, pred) span pair list under a metric.
fn match_sentence(
    gold_spans: &[EntitySpan],
    pred_spans: &[EntitySpan],
    metric: Metric,
    tp: &mut [usize],
    gold_n: &mut [usize],
    pred_n: &mut [usize],
) {
    for g in gold_spans {
        gold_n[g.type_index] += 1;
    }
    for p in pred_spans {
        pred_n[p.type_index] += 1;
    }
    match metric {
        Metric::Strict => {
            for p in pred_spans {
                if gold_spans.contains(p) {
                    tp[p.type_index] += 1;
                }
            }
        }
        Metric::Partial => {
            let mut used = vec![false; gold_spans.len()];
            for p in pred_spans {
                if let Some((gi, _)) = gold_spans.iter().enumerate().find(|(gi, g)| {
                    !used[*gi] && g.type_index == p.type_index && g.overlaps(p)
                }) {
                    used[gi] = true;
                    tp[p.type_index] += 1;
                }
            }
        }
    }
}

fn score_indices(
    gold: &Dataset,
    pred: &[Vec<TagId>],
    indices: &[usize],
    metric: Metric,
) -> ScoreReport {
    let n_types = gold.schema.entity_types().len();
    let mut tp = vec![0usize; n_types];
    let mut gold_n = vec![0usize; n_types];
    let mut pred_n = vec![0usize; n_types];
    for &i in indices {
        let gold_tags = gold.sentences[i].gold_tags().expect("gold is labeled");
        let gold_spans = extract_entities(&gold_tags, &gold.schema);
        let repaired = repair_bio2(&pred[i], &gold.schema);
        let pred_spans = extract_entities(&repaired, &gold.schema);
        match_sentence(&gold_spans, &pred_spans, metric, &mut tp, &mut gold_n, &mut pred_n);
    }

    let mut per_type = Vec::new();
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    let mut included = 0usize;
    for ti in 0..n_types {
        if gold_n[ti] == 0 && pred_n[ti] == 0 {
            continue;
        }
        let precision = if pred_n[ti] == 0 {
            0.0
        } else {
            tp[ti] as f64 / pred_n[ti] as f64
        };
        let recall = if gold_n[ti] == 0 {
            0.0
        } else {
            tp[ti] as f64 / gold_n[ti] as f64
        };
        let f = f1(precision, recall);
        sp += precision;
        sr += recall;
        sf += f;
        included += 1;
        per_type.push(TypeScore {
            entity_type: gold.schema.entity_types()[ti].clone(),
            precision,
            recall,
            f1: f,
            gold_support: gold_n[ti],
            predicted: pred_n[ti],
        });
    }
    let denom = included.max(1) as f64;
    ScoreReport {
        per_type,
        macro_precision: sp / denom,
        macro_recall: sr / denom,
        macro_f1: sf / denom,
    }
}

fn score(gold: &Dataset, pred: &[Vec<TagId>], metric: Metric) -> Result<ScoreReport> {
    check_alignment(gold, pred)?;
    for sentence in &gold.sentences {
        let tags = sentence.gold_tags().expect("labeled");
        if !validate_bio2(&tags, &gold.schema).is_empty() {
            return Err(Error::Data(format!(
                "gold sentence '{}' is not BIO2-valid",
                sentence.doc_id
            )));
        }
    }
    let indices: Vec<usize> = (0..gold.len()).collect();
    Ok(score_indices(gold, pred, &indices, metric))
}

/// Strict entity-level scoring: a predicted span counts only with exact
/// (type, start, end) agreement.
pub fn strict_score(gold: &Dataset, pred: &[Vec<TagId>]) -> Result<ScoreReport> {
    score(gold, pred, Metric::Strict)
}

/// Partial-overlap scoring at whatever granularity `gold` carries; the
/// pipeline maps predictions to the coarse scheme before calling this.
pub fn partial_score(gold: &Dataset, pred: &[Vec<TagId>]) -> Result<ScoreReport> {
    score(gold, pred, Metric::Partial)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// Macro-F1 on the full, unresampled test set.
    pub point_estimate: f64,
    /// Mean macro-F1 over the replicates.
    pub replicate_mean: f64,
    /// 2.5th percentile of the replicate distribution.
    pub lower: f64,
    /// 97.5th percentile of the replicate distribution.
    pub upper: f64,
    pub n_replicates: usize,
    pub seed: u64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over sentences: resample with replacement to the
/// original size, recompute macro-F1 per replicate. Deterministic per seed.
pub fn bootstrap(
    gold: &Dataset,
    pred: &[Vec<TagId>],
    metric: Metric,
    n_replicates: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    check_alignment(gold, pred)?;
    if gold.is_empty() {
        return Err(Error::Data("bootstrap over an empty test set".into()));
    }
    if n_replicates == 0 {
        return Err(Error::Config("n_replicates must be at least 1".into()));
    }
    let n = gold.len();
    let all: Vec<usize> = (0..n).collect();
    let point_estimate = score_indices(gold, pred, &all, metric).macro_f1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_replicates);
    for _ in 0..n_replicates {
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        values.push(score_indices(gold, pred, &sample, metric).macro_f1);
    }
    let replicate_mean = values.iter().sum::<f64>() / n_replicates as f64;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite F1"));
    Ok(BootstrapReport {
        point_estimate,
        replicate_mean,
        lower: percentile(&values, 0.025),
        upper: percentile(&values, 0.975),
        n_replicates,
        seed,
    })
}

/// Two-sided approximate randomization test on the macro-F1 difference:
/// per permutation each sentence's A/B predictions swap with probability
/// one half; `p = (count(|perm| >= |observed|) + 1) / (n + 1)`.
pub fn paired_significance(
    gold: &Dataset,
    pred_a: &[Vec<TagId>],
    pred_b: &[Vec<TagId>],
    metric: Metric,
    n_permutations: usize,
    seed: u64,
) -> Result<f64> {
    check_alignment(gold, pred_a)?;
    check_alignment(gold, pred_b)?;
    let indices: Vec<usize> = (0..gold.len()).collect();
    let observed = (score_indices(gold, pred_a, &indices, metric).macro_f1
        - score_indices(gold, pred_b, &indices, metric).macro_f1)
        .abs();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least = 0usize;
    let mut a: Vec<Vec<TagId>> = pred_a.to_vec();
    let mut b: Vec<Vec<TagId>> = pred_b.to_vec();
    for _ in 0..n_permutations {
        for i in 0..gold.len() {
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a[i], &mut b[i]);
            }
        }
        let delta = (score_indices(gold, &a, &indices, metric).macro_f1
            - score_indices(gold, &b, &indices, metric).macro_f1)
            .abs();
        if delta >= observed - 1e-12 {
            at_least += 1;
        }
    }
    Ok((at_least + 1) as f64 / (n_permutations + 1) as f64)
}

/// Error-category counts from comparing predictions to gold spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    /// Same type, overlapping, wrong boundary.
    pub boundary: usize,
    /// Overlapping prediction of a different type.
    pub misclassified: usize,
    /// No overlapping prediction at all.
    pub missed: usize,
    /// Predicted spans matched to no gold span.
    pub spurious: usize,
}

pub fn error_categories(gold: &Dataset, pred: &[Vec<TagId>]) -> Result<ErrorCounts> {
    check_alignment(gold, pred)?;
    let mut counts = ErrorCounts::default();
    for (sentence, tags) in gold.sentences.iter().zip(pred) {
        let gold_spans = extract_entities(&sentence.gold_tags().expect("labeled"), &gold.schema);
        let repaired = repair_bio2(tags, &gold.schema);
        let pred_spans = extract_entities(&repaired, &gold.schema);
        let mut used = vec![false; pred_spans.len()];
        for g in &gold_spans {
            // exact match first
            if let Some(pi) = pred_spans
                .iter()
                .enumerate()
                .position(|(pi, p)| !used[pi] && p == g)
            {
                used[pi] = true;
                continue;
            }
            if let Some(pi) = pred_spans
                .iter()
                .enumerate()
                .position(|(pi, p)| !used[pi] && p.type_index == g.type_index && p.overlaps(g))
            {
                used[pi] = true;
                counts.boundary += 1;
                continue;
            }
            if let Some(pi) = pred_spans
                .iter()
                .enumerate()
                .position(|(pi, p)| !used[pi] && p.overlaps(g))
            {
                used[pi] = true;
                counts.misclassified += 1;
                continue;
            }
            counts.missed += 1;
        }
        counts.spurious += used.iter().filter(|&&u| !u).count();
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Sentence};
    use crate::schema::coarse_schema;

    fn two_type() -> LabelSchema {
        LabelSchema::new(
            "two",
            vec!["age".into(), "sex".into()],
            [
                ("age".to_string(), crate::schema::Coarse::Population),
                ("sex".to_string(), crate::schema::Coarse::Population),
            ]
            .into(),
        )
        .unwrap()
    }

    fn dataset(schema: &LabelSchema, tag_seqs: &[Vec<TagId>]) -> Dataset {
        let sentences = tag_seqs
            .iter()
            .enumerate()
            .map(|(i, tags)| {
                let pairs = tags.iter().map(|&t| ("tok".to_string(), t)).collect();
                Sentence::labeled(pairs, format!("d{i}"), Domain::InDomain, schema).unwrap()
            })
            .collect();
        Dataset::new(schema.clone(), sentences)
    }

    #[test]
    fn extract_entities_hand_cases() {
        let s = two_type();
        let (b_age, i_age, b_sex) = (s.b_tag(0), s.i_tag(0), s.b_tag(1));
        assert!(extract_entities(&[0, 0, 0], &s).is_empty());
        assert_eq!(
            extract_entities(&[b_age, i_age, 0, b_sex], &s),
            vec![
                EntitySpan { type_index: 0, start: 0, end: 2 },
                EntitySpan { type_index: 1, start: 3, end: 4 },
            ]
        );
        assert_eq!(
            extract_entities(&[b_age, b_age], &s),
            vec![
                EntitySpan { type_index: 0, start: 0, end: 1 },
                EntitySpan { type_index: 0, start: 1, end: 2 },
            ]
        );
    }

    #[test]
    fn identical_predictions_score_one() {
        let s = two_type();
        let (b_age, i_age, b_sex) = (s.b_tag(0), s.i_tag(0), s.b_tag(1));
        let gold = dataset(&s, &[vec![b_age, i_age, 0, b_sex]]);
        let pred = vec![vec![b_age, i_age, 0, b_sex]];
        let report = strict_score(&gold, &pred).unwrap();
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.macro_precision, 1.0);
        assert_eq!(report.macro_recall, 1.0);
        let errors = error_categories(&gold, &pred).unwrap();
        assert_eq!(errors, ErrorCounts::default());
    }

    #[test]
    fn strict_boundary_miss_scores_zero() {
        let s = two_type();
        let (b_age, i_age) = (s.b_tag(0), s.i_tag(0));
        let gold = dataset(&s, &[vec![b_age, i_age, 0]]);
        let pred = vec![vec![b_age, 0, 0]];
        let report = strict_score(&gold, &pred).unwrap();
        let age = &report.per_type[0];
        assert_eq!(age.precision, 0.0);
        assert_eq!(age.recall, 0.0);
    }

    #[test]
    fn partial_overlap_counts_as_tp() {
        let s = coarse_schema();
        let (b_p, i_p) = (s.b_tag(0), s.i_tag(0));
        // gold span (P, 0..3), pred (P, 2..5): overlap at token 2
        let gold = dataset(&s, &[vec![b_p, i_p, i_p, 0, 0]]);
        let pred = vec![vec![0, 0, b_p, i_p, i_p]];
        let report = partial_score(&gold, &pred).unwrap();
        assert_eq!(report.per_type[0].f1, 1.0);
    }

    #[test]
    fn partial_type_must_match() {
        let s = coarse_schema();
        let (b_p, i_p) = (s.b_tag(0), s.i_tag(0));
        let (b_i, i_i) = (s.b_tag(1), s.i_tag(1));
        let gold = dataset(&s, &[vec![b_p, i_p, i_p]]);
        let pred = vec![vec![b_i, i_i, i_i]];
        let report = partial_score(&gold, &pred).unwrap();
        // FP for intervention, FN for population
        for t in &report.per_type {
            assert_eq!(t.f1, 0.0, "{}", t.entity_type);
        }
    }

    #[test]
    fn bootstrap_perfect_predictions_degenerate_ci() {
        let s = two_type();
        let b_age = s.b_tag(0);
        let gold = dataset(&s, &[vec![b_age, 0], vec![0, b_age]]);
        let pred = vec![vec![b_age, 0], vec![0, b_age]];
        let report = bootstrap(&gold, &pred, Metric::Strict, 30, 7).unwrap();
        assert_eq!(report.replicate_mean, 1.0);
        assert_eq!((report.lower, report.upper), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_single_replicate_ci_is_that_value() {
        let s = two_type();
        let b_age = s.b_tag(0);
        let gold = dataset(&s, &[vec![b_age, 0], vec![b_age, b_age]]);
        let pred = vec![vec![b_age, 0], vec![0, 0]];
        let report = bootstrap(&gold, &pred, Metric::Strict, 1, 3).unwrap();
        assert_eq!(report.lower, report.upper);
        assert_eq!(report.lower, report.replicate_mean);
    }

    #[test]
    fn bootstrap_is_deterministic_per_seed() {
        let s = two_type();
        let b_age = s.b_tag(0);
        let gold = dataset(&s, &[vec![b_age, 0], vec![b_age, b_age], vec![0, b_age]]);
        let pred = vec![vec![b_age, 0], vec![0, 0], vec![0, b_age]];
        let a = bootstrap(&gold, &pred, Metric::Strict, 30, 11).unwrap();
        let b = bootstrap(&gold, &pred, Metric::Strict, 30, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn self_comparison_p_is_one() {
        let s = two_type();
        let b_age = s.b_tag(0);
        let gold = dataset(&s, &[vec![b_age, 0], vec![0, 0]]);
        let pred = vec![vec![b_age, 0], vec![b_age, 0]];
        let p = paired_significance(&gold, &pred, &pred, Metric::Strict, 99, 5).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn error_taxonomy_hand_cases() {
        let s = two_type();
        let (b_age, i_age, b_sex) = (s.b_tag(0), s.i_tag(0), s.b_tag(1));
        // gold: age span 0..3; pred: age span 0..2 -> boundary
        let gold = dataset(&s, &[vec![b_age, i_age, i_age]]);
        let pred = vec![vec![b_age, i_age, 0]];
        assert_eq!(error_categories(&gold, &pred).unwrap().boundary, 1);
        // gold: age at 0; pred: sex at 0 -> misclassified
        let gold = dataset(&s, &[vec![b_age, 0]]);
        let pred = vec![vec![b_sex, 0]];
        assert_eq!(error_categories(&gold, &pred).unwrap().misclassified, 1);
        // gold span with no overlapping pred -> missed; stray pred -> spurious
        let gold = dataset(&s, &[vec![b_age, 0, 0]]);
        let pred = vec![vec![0, 0, b_sex]];
        let e = error_categories(&gold, &pred).unwrap();
        assert_eq!((e.missed, e.spurious), (1, 1));
    }

    #[test]
    fn misaligned_inputs_error() {
        let s = two_type();
        let gold = dataset(&s, &[vec![0, 0]]);
        assert!(strict_score(&gold, &[vec![0]]).is_err());
        assert!(strict_score(&gold, &[]).is_err());
    }

    #[test]
    fn macro_f1_invariant_under_sentence_reordering() {
        let s = two_type();
        let (b_age, b_sex) = (s.b_tag(0), s.b_tag(1));
        let seqs = vec![vec![b_age, 0], vec![0, b_sex], vec![b_sex, b_age]];
        let preds = vec![vec![b_age, 0], vec![b_sex, 0], vec![0, b_age]];
        let gold = dataset(&s, &seqs);
        let fwd = strict_score(&gold, &preds).unwrap();
        let rev_seqs: Vec<_> = seqs.iter().rev().cloned().collect();
        let rev_preds: Vec<_> = preds.iter().rev().cloned().collect();
        let gold_rev = dataset(&s, &rev_seqs);
        let rev = strict_score(&gold_rev, &rev_preds).unwrap();
        assert!((fwd.macro_f1 - rev.macro_f1).abs() < 1e-12);
    }
}
