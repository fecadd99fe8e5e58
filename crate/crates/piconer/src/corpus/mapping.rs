//! Scheme-to-scheme tag conversion: merging fine types under a target
//! schema or collapsing any schema to the coarse P/I/C/O level.

use std::collections::BTreeMap;

use crate::corpus::{Dataset, Sentence, Token};
use crate::error::{Error, Result};
use crate::schema::{repair_bio2, BioPrefix, LabelSchema};

/// Where a source entity type goes: a target type or plain `O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapTarget {
    Type(String),
    Outside,
}

/// Total mapping from source entity types to target types (or `O`).
pub type TypeMapping = BTreeMap<String, MapTarget>;

/// Built-in mapping for the original-to-revised scheme revision: eligibility
/// and condition merge, location and ethnicity fold into other-demographics,
/// outcome measures merge into outcome, and q1/q3 collapse into per-arm
/// others.
pub fn original_to_revised_mapping() -> TypeMapping {
    let renames: &[(&str, &str)] = &[
        ("eligibility", "elig-cond"),
        ("condition", "elig-cond"),
        ("location", "other-demographics"),
        ("ethnicity", "other-demographics"),
        ("outcome-measure", "outcome"),
        ("iv-q1", "iv-others"),
        ("iv-q3", "iv-others"),
        ("ctl-q1", "ctl-others"),
        ("ctl-q3", "ctl-others"),
    ];
    let mut mapping = TypeMapping::new();
    for t in crate::schema::original_schema().entity_types() {
        let target = renames
            .iter()
            .find(|(from, _)| from == t)
            .map(|(_, to)| to.to_string())
            .unwrap_or_else(|| t.clone());
        mapping.insert(t.clone(), MapTarget::Type(target));
    }
    mapping
}

/// Mapping from any schema to the coarse schema via its coarse_map.
pub fn coarse_mapping(from: &LabelSchema) -> TypeMapping {
    from.entity_types()
        .iter()
        .map(|t| {
            let coarse = from
                .coarse_of(t)
                .expect("schema coarse_map is total by construction");
            (t.clone(), MapTarget::Type(coarse.entity_type().to_string()))
        })
        .collect()
}

/// Rewrites every tag of `data` into the `to` schema. B/I prefixes are
/// preserved and the result is re-normalized with [`repair_bio2`], so merged
/// adjacent spans stay legal. Sequence lengths never change.
pub fn map_labels(
    data: &Dataset,
    from: &LabelSchema,
    to: &LabelSchema,
    mapping: &TypeMapping,
) -> Result<Dataset> {
    for t in from.entity_types() {
        if !mapping.contains_key(t) {
            return Err(Error::Config(format!(
                "mapping is missing source type '{t}'"
            )));
        }
    }
    for (src, target) in mapping {
        if from.type_index(src).is_none() {
            return Err(Error::Config(format!(
                "mapping references unknown source type '{src}'"
            )));
        }
        if let MapTarget::Type(t) = target {
            if to.type_index(t).is_none() {
                return Err(Error::Config(format!(
                    "mapping references unknown target type '{t}'"
                )));
            }
        }
    }

    let sentences = data
        .sentences
        .iter()
        .map(|sentence| map_sentence(sentence, from, to, mapping))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(to.clone(), sentences))
}

fn map_sentence(
    sentence: &Sentence,
    from: &LabelSchema,
    to: &LabelSchema,
    mapping: &TypeMapping,
) -> Result<Sentence> {
    if !sentence.labeled {
        return Ok(sentence.clone());
    }
    let tags = sentence.gold_tags().expect("labeled sentence has tags");
    let mapped: Vec<usize> = tags
        .iter()
        .map(|&tag| match from.split_tag(tag) {
            None => 0,
            Some((ti, prefix)) => {
                let src_type = &from.entity_types()[ti];
                match &mapping[src_type] {
                    MapTarget::Outside => 0,
                    MapTarget::Type(target) => {
                        let tti = to
                            .type_index(target)
                            .expect("target type validated above");
                        match prefix {
                            BioPrefix::Begin => to.b_tag(tti),
                            BioPrefix::Inside => to.i_tag(tti),
                        }
                    }
                }
            }
        })
        .collect();
    let repaired = repair_bio2(&mapped, to);
    let tokens = sentence
        .tokens
        .iter()
        .zip(&repaired)
        .map(|(tok, &tag)| Token {
            text: tok.text.clone(),
            gold_tag: Some(tag),
        })
        .collect();
    Ok(Sentence {
        tokens,
        doc_id: sentence.doc_id.clone(),
        domain: sentence.domain,
        labeled: true,
    })
}
