//! Corpus data model and file IO: sentences with optional gold BIO2 tags,
//! CoNLL/JSONL formats, scheme mapping, masking scenarios, and a synthetic
//! corpus generator for tests.

mod conll;
mod jsonl;
mod mapping;
mod scenario;
mod synth;

pub use conll::{parse_conll, serialize_conll};
pub use jsonl::{parse_jsonl, serialize_jsonl};
pub use mapping::{coarse_mapping, map_labels, original_to_revised_mapping, MapTarget, TypeMapping};
pub use scenario::{make_scenario, Augmentation, ScenarioConfig, ScenarioSplit};
pub use synth::{synth_corpus, SynthConfig};

use crate::error::{Error, Result};
use crate::schema::{validate_bio2, LabelSchema, TagId};

/// One token of a sentence, optionally carrying a gold tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub gold_tag: Option<TagId>,
}

/// Provenance of a sentence relative to the labeled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    InDomain,
    CrossDomain,
}

/// A tokenized sentence. Either fully labeled (every token has a gold tag and
/// the sequence is BIO2-valid) or fully unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub doc_id: String,
    pub domain: Domain,
    pub labeled: bool,
}

impl Sentence {
    pub fn labeled(
        texts_and_tags: Vec<(String, TagId)>,
        doc_id: impl Into<String>,
        domain: Domain,
        schema: &LabelSchema,
    ) -> Result<Self> {
        if texts_and_tags.is_empty() {
            return Err(Error::Data("sentence has no tokens".into()));
        }
        let tags: Vec<TagId> = texts_and_tags.iter().map(|(_, t)| *t).collect();
        for &t in &tags {
            if !schema.is_valid_tag(t) {
                return Err(Error::Data(format!(
                    "tag id {t} out of range for schema '{}'",
                    schema.name()
                )));
            }
        }
        let violations = validate_bio2(&tags, schema);
        if let Some(v) = violations.first() {
            return Err(Error::Data(format!(
                "gold tags are not BIO2-valid: illegal {} at position {}",
                schema.tag_name(v.tag),
                v.position
            )));
        }
        let tokens = texts_and_tags
            .into_iter()
            .map(|(text, tag)| {
                if text.is_empty() {
                    Err(Error::Data("empty token text".into()))
                } else {
                    Ok(Token {
                        text,
                        gold_tag: Some(tag),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sentence {
            tokens,
            doc_id: doc_id.into(),
            domain,
            labeled: true,
        })
    }

    pub fn unlabeled(
        texts: Vec<String>,
        doc_id: impl Into<String>,
        domain: Domain,
    ) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::Data("sentence has no tokens".into()));
        }
        let tokens = texts
            .into_iter()
            .map(|text| {
                if text.is_empty() {
                    Err(Error::Data("empty token text".into()))
                } else {
                    Ok(Token {
                        text,
                        gold_tag: None,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sentence {
            tokens,
            doc_id: doc_id.into(),
            domain,
            labeled: false,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Gold tag sequence; `None` for unlabeled sentences.
    pub fn gold_tags(&self) -> Option<Vec<TagId>> {
        self.tokens.iter().map(|t| t.gold_tag).collect()
    }

    /// Drops all gold tags, keeping token texts.
    pub fn stripped(&self) -> Sentence {
        Sentence {
            tokens: self
                .tokens
                .iter()
                .map(|t| Token {
                    text: t.text.clone(),
                    gold_tag: None,
                })
                .collect(),
            doc_id: self.doc_id.clone(),
            domain: self.domain,
            labeled: false,
        }
    }
}

/// A schema plus an ordered collection of sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: LabelSchema,
    pub sentences: Vec<Sentence>,
}

impl Dataset {
    pub fn new(schema: LabelSchema, sentences: Vec<Sentence>) -> Self {
        Dataset { schema, sentences }
    }

    pub fn empty(schema: LabelSchema) -> Self {
        Dataset {
            schema,
            sentences: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.sentences.iter().filter(|s| s.labeled).count()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    pub fn all_labeled(&self) -> bool {
        self.sentences.iter().all(|s| s.labeled)
    }
}

/// Removes every gold tag from the dataset; token texts and order unchanged.
pub fn strip_labels(data: &Dataset) -> Dataset {
    Dataset {
        schema: data.schema.clone(),
        sentences: data.sentences.iter().map(Sentence::stripped).collect(),
    }
}
