//! Pseudo-label selection strategies. Every strategy is a filter over the
//! all-true mask a fresh pseudo-labeled batch carries: a fixed confidence
//! threshold, per-class adaptive thresholds recomputed each iteration, or an
//! external LLM judge asked to confirm each detected span.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::extract_entities;
use crate::judge::JudgeClient;
use crate::schema::LabelSchema;
use crate::ssl::PseudoLabeledSentence;
use crate::tagger::ProbMatrix;

/// How the judge is consulted per pseudo-labeled entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeScope {
    /// One query per contiguous same-type span (the default; the prompts
    /// speak of "the detected tokens" as a phrase).
    SpanRepresentatives,
    /// One query per non-O token.
    AllTokens,
}

/// The selection strategy applied between pseudo-labeling and retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QualityStrategy {
    /// Keep tokens whose confidence reaches a fixed threshold.
    ConfidenceMask { theta: f64 },
    /// Keep tokens whose confidence reaches their class's adaptive threshold.
    /// `sentence_scoped` restricts the threshold numerator to sentences that
    /// predict the class at least once; off by default.
    ClassAdaptive {
        #[serde(default)]
        sentence_scoped: bool,
    },
    /// Ask an external model to confirm each detected span.
    ExternalJudge { scope: JudgeScope },
}

impl Default for QualityStrategy {
    fn default() -> Self {
        QualityStrategy::ConfidenceMask { theta: 0.9 }
    }
}

/// Keeps a token selected only while its confidence is at least `theta`.
pub fn apply_confidence_mask(pseudo: &mut [PseudoLabeledSentence], theta: f64) {
    for p in pseudo {
        for (selected, &conf) in p.selected.iter_mut().zip(&p.confidence) {
            *selected = *selected && conf >= theta;
        }
    }
}

/// Per-tag adaptive thresholds. Tags never predicted carry `+inf`, which
/// vacuously deselects them.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub tau: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Per-tag threshold: the sum over sentences of the per-sentence maximum
/// class probability, divided by the number of tokens decoded as that class.
/// With `sentence_scoped` the numerator sums only sentences that predict the
/// class; otherwise every sentence contributes its maximum.
pub fn compute_adaptive_thresholds(
    probs: &[ProbMatrix],
    pseudo: &[PseudoLabeledSentence],
    sentence_scoped: bool,
) -> Result<ThresholdVector> {
    if probs.len() != pseudo.len() {
        return Err(Error::Data(format!(
            "{} probability matrices for {} pseudo-labeled sentences",
            probs.len(),
            pseudo.len()
        )));
    }
    let tag_count = match probs.first() {
        Some(m) => m.rows().first().map(|r| r.len()).unwrap_or(0),
        None => 0,
    };
    let mut numerator = vec![0.0; tag_count];
    let mut counts = vec![0usize; tag_count];

    for (matrix, p) in probs.iter().zip(pseudo) {
        if matrix.len() != p.pseudo_tags.len() {
            return Err(Error::Data(
                "probability matrix and pseudo tags disagree on length".into(),
            ));
        }
        for &tag in &p.pseudo_tags {
            if tag >= tag_count {
                return Err(Error::Data(format!(
                    "pseudo tag {tag} outside the {tag_count}-tag space"
                )));
            }
            counts[tag] += 1;
        }
        for k in 0..tag_count {
            let sentence_max = matrix
                .rows()
                .iter()
                .map(|row| row[k])
                .fold(f64::NEG_INFINITY, f64::max);
            let predicted_here = p.pseudo_tags.iter().any(|&t| t == k);
            if !sentence_scoped || predicted_here {
                numerator[k] += sentence_max;
            }
        }
    }

    let tau = numerator
        .iter()
        .zip(&counts)
        .map(|(&num, &n)| if n == 0 { f64::INFINITY } else { num / n as f64 })
        .collect();
    Ok(ThresholdVector { tau, counts })
}

/// Keeps a token selected only while its confidence reaches the threshold of
/// its own pseudo tag.
pub fn apply_adaptive_mask(pseudo: &mut [PseudoLabeledSentence], thresholds: &ThresholdVector) {
    for p in pseudo {
        for ((selected, &conf), &tag) in
            p.selected.iter_mut().zip(&p.confidence).zip(&p.pseudo_tags)
        {
            *selected = *selected && conf >= thresholds.tau[tag];
        }
    }
}

struct PromptTemplate {
    id: &'static str,
    text: &'static str,
}

const CONDITION: PromptTemplate = PromptTemplate {
    id: "condition",
    text: "Based on the entity definition below, check if the detected tokens '{tokens}' describe part of the condition in this sentence: \"{sentence}\". Return yes or no only.\n\nDefinition: condition refers to medical conditions that patients often experience, which can be the symptoms that an RCT attempts to prevent or alleviate\n\nSample output: Yes",
};
const ELIGIBILITY: PromptTemplate = PromptTemplate {
    id: "eligibility",
    text: "Based on the entity definition below,  check if the detected tokens '{tokens}'  describe part of  the eligibility in this sentence: \"{sentence}\". Return yes or no only.\n\nDefinition: eligibility specifies the particular health conditions or stages of a disease, or medical history that participants must have, or medication treatment participants receive. Sex or age is not included in this category.\n\nSample output: Yes",
};
const TOTAL_SAMPLE_SIZE: PromptTemplate = PromptTemplate {
    id: "total-sample-size",
    text: "Check if the detected tokens '{tokens}'  describe the total sample size of the recruited participants in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const AGE: PromptTemplate = PromptTemplate {
    id: "age",
    text: "Check if the detected tokens '{tokens}' describe the age in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const LOCATION: PromptTemplate = PromptTemplate {
    id: "location",
    text: "Check if the detected tokens '{tokens}' describe part of the location in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const ETHNICITY: PromptTemplate = PromptTemplate {
    id: "ethnicity",
    text: "Check if the detected tokens '{tokens}' describe the ethnicity in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const INTERVENTION: PromptTemplate = PromptTemplate {
    id: "intervention",
    text: "Check if the detected tokens '{tokens}'  describe part of the intervention under the PICO framework in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const IV_SAMPLE_SIZE: PromptTemplate = PromptTemplate {
    id: "iv-sample-size",
    text: "Check if the detected tokens '{tokens}'  describe the sample size of the intervention arm in this sentence: \"{sentence}\". Return yes or no only.\n\nSample size in control arm (e.g., placebo group) should not be included. \n\nSample output: Yes",
};
const CONTROL: PromptTemplate = PromptTemplate {
    id: "control",
    text: "Check if the detected tokens '{tokens}'  describe part of the control under the PICO framework  in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const CTL_SAMPLE_SIZE: PromptTemplate = PromptTemplate {
    id: "ctl-sample-size",
    text: "Check if the detected tokens '{tokens}'  describe the sample size of the control arm in this sentence: \"{sentence}\". Return yes or no only.\n\nSample size in intervention arm should not be included. \n\nSample output: Yes",
};
const OUTCOME: PromptTemplate = PromptTemplate {
    id: "outcome",
    text: "Check if the detected tokens '{tokens}'  describe part of the outcome in this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const OUTCOME_MEASURE: PromptTemplate = PromptTemplate {
    id: "outcome-measure",
    text: "Based on the entity definition below, Check if the detected tokens '{tokens}'  describe part of the outcome measure in this sentence: \"{sentence}\". Return yes or no only.\n\nDefinition: outcome measure refers to the metrics used to quantify the outcomes of an RCT study\n\nSample output: Yes",
};
const DISCRETE_IV: PromptTemplate = PromptTemplate {
    id: "discrete-iv",
    text: "Based on the example below, Check if the detected tokens '{tokens}'  describe the results in the intervention arm this sentence: \"{sentence}\". Return yes or no only.\n\nExample 1: \n    Input:\n    - Check tokens: 79\n    - Sentence: 79 deaths were observed in the HDCT arm and 77 deaths were observed in the placebo arm.\n    Output: Yes\n\n\nExample 2:\n    Input:\n    - Check tokens: 77\n    - Sentence: 79 deaths were observed in the HDCT arm and 77 deaths were observed in the control arm.\n    Output: No",
};
const DISCRETE_CTL: PromptTemplate = PromptTemplate {
    id: "discrete-ctl",
    text: "Based on the example below, Check if the detected tokens '{tokens}'  describe the results in the control arm this sentence: \"{sentence}\". Return yes or no only.\n\nExample 1: \n    Input:\n    - Check tokens: 77\n    - Sentence: 79 deaths were observed in the HDCT arm and 77 deaths were observed in the ST arm\n    Output: Yes\n\nExample 2: \n    Input:\n    - Check tokens: 79\n    - Sentence: 79 deaths were observed in the HDCT arm and 77 deaths were observed in the ST arm\n    Output: No",
};
const CONTINUOUS_CTL: PromptTemplate = PromptTemplate {
    id: "continuous-ctl",
    text: "Check if the detected tokens '{tokens}'  describe the continuous numeric values in the control arm this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const CONTINUOUS_IV: PromptTemplate = PromptTemplate {
    id: "continuous-iv",
    text: "Check if the detected tokens '{tokens}'  describe the continuous numeric values in the intervention arm this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const SD_IV: PromptTemplate = PromptTemplate {
    id: "sd-iv",
    text: "Check if the detected tokens '{tokens}'  describe the standard deviation values in the intervention arm this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};
const SD_CTL: PromptTemplate = PromptTemplate {
    id: "sd-ctl",
    text: "Check if the detected tokens '{tokens}'  describe the standard deviation values in the control arm this sentence: \"{sentence}\". Return yes or no only.\n\nSample output: Yes",
};

fn template_for(entity_type: &str) -> Result<&'static PromptTemplate> {
    let t = match entity_type {
        "condition" => &CONDITION,
        "eligibility" | "elig-cond" => &ELIGIBILITY,
        "total-sample-size" => &TOTAL_SAMPLE_SIZE,
        "age" => &AGE,
        "location" => &LOCATION,
        "ethnicity" => &ETHNICITY,
        "intervention" => &INTERVENTION,
        "iv-sample-size" => &IV_SAMPLE_SIZE,
        "control" => &CONTROL,
        "ctl-sample-size" => &CTL_SAMPLE_SIZE,
        "outcome" => &OUTCOME,
        "outcome-measure" => &OUTCOME_MEASURE,
        "iv-bin-abs" | "iv-bin-percent" => &DISCRETE_IV,
        "ctl-bin-abs" | "ctl-bin-percent" => &DISCRETE_CTL,
        "iv-mean" | "iv-median" | "iv-q1" | "iv-q3" | "iv-others" => &CONTINUOUS_IV,
        "ctl-mean" | "ctl-median" | "ctl-q1" | "ctl-q3" | "ctl-others" => &CONTINUOUS_CTL,
        "iv-sd" => &SD_IV,
        "ctl-sd" => &SD_CTL,
        other => {
            return Err(Error::Config(format!(
                "no judge prompt registered for entity type '{other}'"
            )))
        }
    };
    Ok(t)
}

/// Fills the `{tokens}` / `{sentence}` placeholders of the template
/// registered for the entity type.
pub fn render_prompt(entity_type: &str, tokens: &str, sentence: &str) -> Result<String> {
    let template = template_for(entity_type)?;
    Ok(template
        .text
        .replace("{tokens}", tokens)
        .replace("{sentence}", sentence))
}

/// Judge verdict on one queried span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject,
    Malformed,
}

/// Case-insensitive leading yes/no; anything else is malformed.
pub fn parse_judge_reply(text: &str) -> Verdict {
    let lower = text.trim_start().to_lowercase();
    if lower.starts_with("yes") {
        Verdict::Accept
    } else if lower.starts_with("no") {
        Verdict::Reject
    } else {
        Verdict::Malformed
    }
}

/// One persisted judge exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub entity_type: String,
    pub tokens: String,
    pub sentence: String,
    pub reply: String,
    pub verdict: Verdict,
    pub timestamp: u64,
}

/// Append-only JSONL store of judge verdicts, keyed by a digest of
/// (template id, tokens, sentence). A warm cache answers without any
/// network traffic.
pub struct JudgeCache {
    path: Option<PathBuf>,
    entries: HashMap<String, Verdict>,
}

impl JudgeCache {
    pub fn in_memory() -> Self {
        JudgeCache {
            path: None,
            entries: HashMap::new(),
        }
    }

    /// Opens (or will create) the backing file and loads existing entries.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let content = std::fs::read_to_string(path)?;
            for (i, line) in content.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord =
                    serde_json::from_str(line).map_err(|e| Error::Parse {
                        line: i + 1,
                        message: format!("bad cache record: {e}"),
                    })?;
                entries.insert(record.key, record.verdict);
            }
        }
        Ok(JudgeCache {
            path: Some(path.to_path_buf()),
            entries,
        })
    }

    pub fn key(template_id: &str, tokens: &str, sentence: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(template_id.as_bytes());
        hasher.update([0]);
        hasher.update(tokens.as_bytes());
        hasher.update([0]);
        hasher.update(sentence.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn get(&self, key: &str) -> Option<Verdict> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn put(&mut self, record: CacheRecord) -> Result<()> {
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
        }
        self.entries.insert(record.key, record.verdict);
        Ok(())
    }
}

/// A judge client paired with its verdict cache.
pub struct JudgeSession {
    pub client: JudgeClient,
    pub cache: JudgeCache,
}

impl JudgeSession {
    pub fn new(client: JudgeClient, cache: JudgeCache) -> Self {
        JudgeSession { client, cache }
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn judge_one(
    session: &mut JudgeSession,
    entity_type: &str,
    tokens: &str,
    sentence: &str,
) -> Result<Verdict> {
    let template = template_for(entity_type)?;
    let key = JudgeCache::key(template.id, tokens, sentence);
    if let Some(verdict) = session.cache.get(&key) {
        return Ok(verdict);
    }
    let prompt = render_prompt(entity_type, tokens, sentence)?;
    let reply = session.client.complete(&prompt)?;
    let verdict = parse_judge_reply(&reply);
    session.cache.put(CacheRecord {
        key,
        entity_type: entity_type.to_string(),
        tokens: tokens.to_string(),
        sentence: sentence.to_string(),
        reply,
        verdict,
        timestamp: now_unix(),
    })?;
    Ok(verdict)
}

/// Asks the judge to confirm each pseudo-labeled entity; rejected or
/// malformed verdicts deselect the span's tokens. O tokens carry no entity
/// claim and keep their mask. Transport failure aborts mid-batch; verdicts
/// already obtained stay in the cache, so a rerun resumes where it stopped.
pub fn judge_select(
    pseudo: &mut [PseudoLabeledSentence],
    schema: &LabelSchema,
    session: &mut JudgeSession,
    scope: JudgeScope,
) -> Result<()> {
    for p in pseudo.iter_mut() {
        let texts = p.sentence.texts();
        let sentence_text = texts.join(" ");
        for span in extract_entities(&p.pseudo_tags, schema) {
            let entity_type = &schema.entity_types()[span.type_index];
            match scope {
                JudgeScope::SpanRepresentatives => {
                    let tokens_text = texts[span.start..span.end].join(" ");
                    let verdict = judge_one(session, entity_type, &tokens_text, &sentence_text)
                        .map_err(partial_progress)?;
                    if verdict != Verdict::Accept {
                        for s in &mut p.selected[span.start..span.end] {
                            *s = false;
                        }
                    }
                }
                JudgeScope::AllTokens => {
                    for pos in span.start..span.end {
                        let verdict = judge_one(session, entity_type, texts[pos], &sentence_text)
                            .map_err(partial_progress)?;
                        if verdict != Verdict::Accept {
                            p.selected[pos] = false;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn partial_progress(e: Error) -> Error {
    match e {
        Error::Transport(msg) => Error::Transport(format!(
            "{msg}; verdicts obtained so far are cached, rerun to resume"
        )),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Sentence};
    use crate::judge::{JudgeClient, JudgeConfig, MockTransport, ScriptedReply, Transport};
    use crate::schema::original_schema;

    fn pseudo_fixture(
        texts: &[&str],
        tags: Vec<usize>,
        confidence: Vec<f64>,
    ) -> PseudoLabeledSentence {
        let sentence = Sentence::unlabeled(
            texts.iter().map(|t| t.to_string()).collect(),
            "doc",
            Domain::InDomain,
        )
        .unwrap();
        let selected = vec![true; tags.len()];
        PseudoLabeledSentence {
            sentence,
            pseudo_tags: tags,
            confidence,
            selected,
        }
    }

    #[test]
    fn confidence_mask_edge_thresholds() {
        let mut pseudo = vec![pseudo_fixture(
            &["a", "b", "c"],
            vec![0, 1, 2],
            vec![0.95, 0.60, 0.80],
        )];
        apply_confidence_mask(&mut pseudo, 0.0);
        assert_eq!(pseudo[0].selected, vec![true, true, true]);
        apply_confidence_mask(&mut pseudo, 0.8);
        assert_eq!(pseudo[0].selected, vec![true, false, true]);
        let mut fresh = vec![pseudo_fixture(
            &["a", "b", "c"],
            vec![0, 1, 2],
            vec![0.95, 0.60, 0.80],
        )];
        apply_confidence_mask(&mut fresh, 1.1);
        assert_eq!(fresh[0].selected, vec![false, false, false]);
    }

    #[test]
    fn confidence_mask_is_monotone_in_theta() {
        let confs = vec![0.1, 0.35, 0.5, 0.72, 0.9, 0.99];
        let tags = vec![0; 6];
        for (lo, hi) in [(0.2, 0.4), (0.5, 0.5), (0.3, 0.95)] {
            let mut a = vec![pseudo_fixture(
                &["t"; 6],
                tags.clone(),
                confs.clone(),
            )];
            let mut b = vec![pseudo_fixture(
                &["t"; 6],
                tags.clone(),
                confs.clone(),
            )];
            apply_confidence_mask(&mut a, lo);
            apply_confidence_mask(&mut b, hi);
            for (x, y) in a[0].selected.iter().zip(&b[0].selected) {
                assert!(*x || !*y, "mask({hi}) must be a subset of mask({lo})");
            }
        }
    }

    #[test]
    fn adaptive_thresholds_hand_case() {
        let probs = vec![ProbMatrix::new(vec![vec![0.9, 0.1], vec![0.8, 0.2]], 2).unwrap()];
        let pseudo = vec![pseudo_fixture(&["x", "y"], vec![0, 0], vec![0.9, 0.8])];
        let tv = compute_adaptive_thresholds(&probs, &pseudo, false).unwrap();
        assert!((tv.tau[0] - 0.45).abs() < 1e-12);
        assert_eq!(tv.tau[1], f64::INFINITY);
        assert_eq!(tv.counts, vec![2, 0]);

        let mut masked = pseudo;
        apply_adaptive_mask(&mut masked, &tv);
        assert_eq!(masked[0].selected, vec![true, true]);
    }

    #[test]
    fn degenerate_certainty_gives_threshold_one() {
        let probs = vec![
            ProbMatrix::new(vec![vec![1.0, 0.0]], 2).unwrap(),
            ProbMatrix::new(vec![vec![1.0, 0.0]], 2).unwrap(),
        ];
        let pseudo = vec![
            pseudo_fixture(&["a"], vec![0], vec![1.0]),
            pseudo_fixture(&["b"], vec![0], vec![1.0]),
        ];
        let tv = compute_adaptive_thresholds(&probs, &pseudo, false).unwrap();
        assert!((tv.tau[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_denominator_counts_decoded_tokens() {
        let probs = vec![
            ProbMatrix::new(
                vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.7, 0.1], vec![0.5, 0.4, 0.1]],
                3,
            )
            .unwrap(),
            ProbMatrix::new(vec![vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]], 3).unwrap(),
        ];
        let pseudo = vec![
            pseudo_fixture(&["a", "b", "c"], vec![0, 1, 0], vec![0.6, 0.7, 0.5]),
            pseudo_fixture(&["d", "e"], vec![1, 2], vec![0.8, 0.4]),
        ];
        let tv = compute_adaptive_thresholds(&probs, &pseudo, false).unwrap();
        assert_eq!(tv.counts, vec![2, 2, 1]);
        assert!((tv.tau[0] - (0.6 + 0.3) / 2.0).abs() < 1e-12);
        assert!((tv.tau[1] - (0.7 + 0.8) / 2.0).abs() < 1e-12);
        assert!((tv.tau[2] - (0.1 + 0.4) / 1.0).abs() < 1e-12);
    }

    #[test]
    fn sentence_scoped_variant_skips_non_predicting_sentences() {
        let probs = vec![
            ProbMatrix::new(vec![vec![0.6, 0.4], vec![0.9, 0.1]], 2).unwrap(),
            ProbMatrix::new(vec![vec![0.3, 0.7]], 2).unwrap(),
        ];
        let pseudo = vec![
            pseudo_fixture(&["a", "b"], vec![0, 0], vec![0.6, 0.9]),
            pseudo_fixture(&["c"], vec![1], vec![0.7]),
        ];
        let full = compute_adaptive_thresholds(&probs, &pseudo, false).unwrap();
        let scoped = compute_adaptive_thresholds(&probs, &pseudo, true).unwrap();
        assert!((full.tau[0] - (0.9 + 0.3) / 2.0).abs() < 1e-12);
        assert!((scoped.tau[0] - 0.9 / 2.0).abs() < 1e-12);
        assert!((full.tau[1] - (0.4 + 0.7) / 1.0).abs() < 1e-12);
        assert!((scoped.tau[1] - 0.7 / 1.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_threshold_inputs_error() {
        let probs = vec![ProbMatrix::new(vec![vec![1.0, 0.0]], 2).unwrap()];
        assert!(compute_adaptive_thresholds(&probs, &[], false).is_err());
    }

    #[test]
    fn infinite_threshold_deselects_its_tag() {
        let tv = ThresholdVector {
            tau: vec![0.0, f64::INFINITY],
            counts: vec![3, 0],
        };
        let mut pseudo = vec![pseudo_fixture(
            &["a", "b"],
            vec![0, 1],
            vec![0.2, 0.99],
        )];
        apply_adaptive_mask(&mut pseudo, &tv);
        assert_eq!(pseudo[0].selected, vec![true, false]);
    }

    #[test]
    fn condition_prompt_renders_with_placeholders_filled() {
        let p = render_prompt("condition", "diabetes", "patients with diabetes enrolled").unwrap();
        assert!(p.starts_with(
            "Based on the entity definition below, check if the detected tokens 'diabetes'"
        ));
        assert!(p.contains("describe part of the condition"));
        assert!(p.contains("\"patients with diabetes enrolled\""));
        assert!(p.contains("Return yes or no only."));
        assert!(!p.contains("{tokens}"));
        assert!(!p.contains("{sentence}"));
    }

    #[test]
    fn age_prompt_mentions_age() {
        let p = render_prompt("age", "65 years", "adults aged 65 years or older").unwrap();
        assert!(p.contains("describe the age in this sentence"));
    }

    #[test]
    fn every_original_entity_type_has_a_prompt() {
        for t in original_schema().entity_types() {
            let p = render_prompt(t, "tok", "a sentence").unwrap();
            assert!(p.contains("Return yes or no only."));
        }
    }

    #[test]
    fn unknown_entity_type_is_an_error() {
        assert!(render_prompt("foo", "x", "y").is_err());
    }

    #[test]
    fn reply_parsing_accepts_rejects_and_flags() {
        assert_eq!(parse_judge_reply("Yes"), Verdict::Accept);
        assert_eq!(parse_judge_reply("  YES, definitely"), Verdict::Accept);
        assert_eq!(parse_judge_reply("no."), Verdict::Reject);
        assert_eq!(parse_judge_reply("No"), Verdict::Reject);
        assert_eq!(parse_judge_reply("I think so"), Verdict::Malformed);
        assert_eq!(parse_judge_reply(""), Verdict::Malformed);
    }

    fn judge_session(script: Vec<ScriptedReply>) -> (JudgeSession, &'static MockTransport) {
        let mock: &'static MockTransport = Box::leak(Box::new(MockTransport::new(script)));
        struct Fwd(&'static MockTransport);
        impl Transport for Fwd {
            fn send(
                &self,
                request: &crate::judge::ChatRequest,
            ) -> crate::error::Result<crate::judge::TransportReply> {
                self.0.send(request)
            }
        }
        let mut config = JudgeConfig::new("http://judge.test", "judge-model");
        config.backoff_base_ms = 0;
        config.requests_per_second = 100_000.0;
        let client = JudgeClient::new(config, Box::new(Fwd(mock))).unwrap();
        (JudgeSession::new(client, JudgeCache::in_memory()), mock)
    }

    fn condition_pseudo(schema: &LabelSchema) -> PseudoLabeledSentence {
        let ti = schema.type_index("condition").unwrap();
        let b = schema.b_tag(ti);
        let tags = vec![b, 0, 0, b, 0];
        pseudo_fixture(
            &["women", "called", "the", "911", "line"],
            tags,
            vec![0.9; 5],
        )
    }

    #[test]
    fn accept_and_reject_verdicts_set_span_masks() {
        let schema = original_schema();
        let mut pseudo = vec![condition_pseudo(&schema)];
        let (mut session, mock) = judge_session(vec![
            ScriptedReply::ok("Yes"),
            ScriptedReply::ok("No"),
        ]);
        judge_select(
            &mut pseudo,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap();
        assert_eq!(pseudo[0].selected, vec![true, true, true, false, true]);
        assert_eq!(mock.request_count(), 2);
    }

    #[test]
    fn all_o_sentence_issues_no_queries() {
        let schema = original_schema();
        let mut pseudo = vec![pseudo_fixture(
            &["nothing", "here"],
            vec![0, 0],
            vec![0.5, 0.5],
        )];
        let (mut session, mock) = judge_session(vec![]);
        judge_select(
            &mut pseudo,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap();
        assert_eq!(mock.request_count(), 0);
        assert_eq!(pseudo[0].selected, vec![true, true]);
    }

    #[test]
    fn warm_cache_answers_without_network_calls() {
        let schema = original_schema();
        let (mut session, mock) = judge_session(vec![
            ScriptedReply::ok("Yes"),
            ScriptedReply::ok("No"),
        ]);
        let mut first = vec![condition_pseudo(&schema)];
        judge_select(
            &mut first,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap();
        assert_eq!(mock.request_count(), 2);

        let mut second = vec![condition_pseudo(&schema)];
        judge_select(
            &mut second,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap();
        assert_eq!(mock.request_count(), 2, "warm cache must answer offline");
        assert_eq!(first[0].selected, second[0].selected);
    }

    #[test]
    fn malformed_reply_counts_as_rejection() {
        let schema = original_schema();
        let mut pseudo = vec![condition_pseudo(&schema)];
        let (mut session, _mock) = judge_session(vec![
            ScriptedReply::ok("perhaps"),
            ScriptedReply::ok("Yes"),
        ]);
        judge_select(
            &mut pseudo,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap();
        assert_eq!(pseudo[0].selected, vec![false, true, true, true, true]);
    }

    #[test]
    fn transport_failure_keeps_cached_progress() {
        let schema = original_schema();
        let mut pseudo = vec![condition_pseudo(&schema)];
        let mut script = vec![ScriptedReply::ok("Yes")];
        script.extend(std::iter::repeat_with(|| ScriptedReply::status(500)).take(8));
        let (mut session, _mock) = judge_session(script);
        let err = judge_select(
            &mut pseudo,
            &schema,
            &mut session,
            JudgeScope::SpanRepresentatives,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Transport(_)));
        assert_eq!(session.cache.len(), 1, "first verdict survives the failure");
    }

    #[test]
    fn cache_round_trips_through_its_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("judge-cache.jsonl");
        let mut cache = JudgeCache::open(&path).unwrap();
        let key = JudgeCache::key("condition", "diabetes", "a sentence");
        cache
            .put(CacheRecord {
                key: key.clone(),
                entity_type: "condition".into(),
                tokens: "diabetes".into(),
                sentence: "a sentence".into(),
                reply: "Yes".into(),
                verdict: Verdict::Accept,
                timestamp: 0,
            })
            .unwrap();
        drop(cache);
        let reloaded = JudgeCache::open(&path).unwrap();
        assert_eq!(reloaded.get(&key), Some(Verdict::Accept));
    }

    #[test]
    fn strategies_only_ever_deselect() {
        let mut pseudo = vec![pseudo_fixture(
            &["a", "b"],
            vec![0, 1],
            vec![0.3, 0.9],
        )];
        pseudo[0].selected = vec![false, true];
        apply_confidence_mask(&mut pseudo, 0.0);
        assert_eq!(
            pseudo[0].selected,
            vec![false, true],
            "a filter never resurrects a deselected token"
        );
    }
}
