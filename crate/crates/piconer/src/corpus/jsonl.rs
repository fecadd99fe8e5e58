//! JSONL sentence format: one object per line with doc_id, domain, tokens,
//! and tags (tag strings, or `null` for unlabeled sentences).

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Domain, Sentence};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    doc_id: String,
    domain: Domain,
    tokens: Vec<String>,
    tags: Option<Vec<String>>,
}

pub fn parse_jsonl(text: &str, schema: &LabelSchema) -> Result<Dataset> {
    let mut sentences = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        let sentence = match record.tags {
            Some(tags) => {
                if tags.len() != record.tokens.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!(
                            "{} tokens but {} tags",
                            record.tokens.len(),
                            tags.len()
                        ),
                    });
                }
                let pairs = record
                    .tokens
                    .into_iter()
                    .zip(tags)
                    .map(|(tok, tag)| {
                        let id = schema.tag_id(&tag).ok_or_else(|| Error::Parse {
                            line: idx + 1,
                            message: format!("unknown tag '{tag}'"),
                        })?;
                        Ok((tok, id))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Sentence::labeled(pairs, record.doc_id, record.domain, schema)?
            }
            None => Sentence::unlabeled(record.tokens, record.doc_id, record.domain)?,
        };
        sentences.push(sentence);
    }
    Ok(Dataset::new(schema.clone(), sentences))
}

pub fn serialize_jsonl(data: &Dataset) -> String {
    let mut out = String::new();
    for sentence in &data.sentences {
        let record = SentenceRecord {
            doc_id: sentence.doc_id.clone(),
            domain: sentence.domain,
            tokens: sentence.tokens.iter().map(|t| t.text.clone()).collect(),
            tags: sentence.gold_tags().map(|tags| {
                tags.iter().map(|&t| data.schema.tag_name(t)).collect()
            }),
        };
        out.push_str(&serde_json::to_string(&record).expect("sentence record serializes"));
        out.push('\n');
    }
    out
}
