//! Two-column CoNLL-style format: `<token>\t<tag>` rows, blank line between
//! sentences, `_` in the tag column marks an unlabeled sentence.

use crate::corpus::{Dataset, Domain, Sentence};
use crate::error::{Error, Result};
use crate::schema::LabelSchema;

const UNLABELED_MARK: &str = "_";

/// Parses CoNLL text. Round-trips with [`serialize_conll`].
///
/// Sentences get sequential doc_ids (`s0`, `s1`, ...) and `InDomain`
/// provenance; JSONL is the format that carries provenance.
pub fn parse_conll(text: &str, schema: &LabelSchema) -> Result<Dataset> {
    let mut sentences = Vec::new();
    let mut rows: Vec<(String, String, usize)> = Vec::new();

    let mut flush = |rows: &mut Vec<(String, String, usize)>| -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let doc_id = format!("s{}", sentences.len());
        let unlabeled = rows.iter().filter(|(_, tag, _)| tag == UNLABELED_MARK).count();
        let sentence = if unlabeled == rows.len() {
            Sentence::unlabeled(
                rows.iter().map(|(t, _, _)| t.clone()).collect(),
                doc_id,
                Domain::InDomain,
            )?
        } else if unlabeled == 0 {
            let pairs = rows
                .iter()
                .map(|(tok, tag, line)| {
                    let id = schema.tag_id(tag).ok_or_else(|| Error::Parse {
                        line: *line,
                        message: format!("unknown tag '{tag}' for schema '{}'", schema.name()),
                    })?;
                    Ok((tok.clone(), id))
                })
                .collect::<Result<Vec<_>>>()?;
            Sentence::labeled(pairs, doc_id, Domain::InDomain, schema)?
        } else {
            let line = rows[0].2;
            return Err(Error::Parse {
                line,
                message: "sentence mixes labeled and unlabeled rows".into(),
            });
        };
        sentences.push(sentence);
        rows.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.is_empty() {
            flush(&mut rows)?;
            continue;
        }
        let (token, tag) = raw.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected '<token>\\t<tag>'".into(),
        })?;
        if token.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty token".into(),
            });
        }
        rows.push((token.to_string(), tag.to_string(), line_no));
    }
    flush(&mut rows)?;

    Ok(Dataset::new(schema.clone(), sentences))
}

/// Serializes a dataset back to the two-column format.
pub fn serialize_conll(data: &Dataset) -> String {
    let mut out = String::new();
    for (i, sentence) in data.sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for token in &sentence.tokens {
            out.push_str(&token.text);
            out.push('\t');
            match token.gold_tag {
                Some(tag) => out.push_str(&data.schema.tag_name(tag)),
                None => out.push_str(UNLABELED_MARK),
            }
            out.push('\n');
        }
    }
    out
}
