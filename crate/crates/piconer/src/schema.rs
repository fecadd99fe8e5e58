//! Entity-type inventories and their induced BIO2 tag sets.
//!
//! A [`LabelSchema`] owns an ordered list of entity types and a total map
//! from each type to its coarse PICO group. The tag set is derived: index 0
//! is `O`, then `B-t`/`I-t` pairs in entity-type order. Tag indices are the
//! only tag representation used internally; strings appear at the file
//! boundary.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a schema's tag set. `0` is always `O`.
pub type TagId = usize;

/// Coarse PICO group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coarse {
    #[serde(rename = "P")]
    Population,
    #[serde(rename = "I")]
    Intervention,
    #[serde(rename = "C")]
    Control,
    #[serde(rename = "O")]
    Outcome,
}

impl Coarse {
    pub fn entity_type(self) -> &'static str {
        match self {
            Coarse::Population => "population",
            Coarse::Intervention => "intervention",
            Coarse::Control => "control",
            Coarse::Outcome => "outcome",
        }
    }
}

impl fmt::Display for Coarse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Coarse::Population => 'P',
            Coarse::Intervention => 'I',
            Coarse::Control => 'C',
            Coarse::Outcome => 'O',
        };
        write!(f, "{c}")
    }
}

/// BIO2 prefix of a non-`O` tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BioPrefix {
    Begin,
    Inside,
}

/// Entity-type inventory with a total fine-to-coarse map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema", into = "RawSchema")]
pub struct LabelSchema {
    name: String,
    entity_types: Vec<String>,
    coarse_map: BTreeMap<String, Coarse>,
}

#[derive(Serialize, Deserialize)]
struct RawSchema {
    name: String,
    entity_types: Vec<String>,
    coarse_map: BTreeMap<String, Coarse>,
}

impl TryFrom<RawSchema> for LabelSchema {
    type Error = Error;
    fn try_from(raw: RawSchema) -> Result<Self> {
        LabelSchema::new(raw.name, raw.entity_types, raw.coarse_map)
    }
}

impl From<LabelSchema> for RawSchema {
    fn from(s: LabelSchema) -> Self {
        RawSchema {
            name: s.name,
            entity_types: s.entity_types,
            coarse_map: s.coarse_map,
        }
    }
}

impl LabelSchema {
    pub fn new(
        name: impl Into<String>,
        entity_types: Vec<String>,
        coarse_map: BTreeMap<String, Coarse>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = std::collections::BTreeSet::new();
        for t in &entity_types {
            if t.is_empty() {
                return Err(Error::Schema(format!(
                    "schema '{name}': empty entity type name"
                )));
            }
            if !seen.insert(t.clone()) {
                return Err(Error::Schema(format!(
                    "schema '{name}': duplicate entity type '{t}'"
                )));
            }
        }
        for t in &entity_types {
            if !coarse_map.contains_key(t) {
                return Err(Error::Schema(format!(
                    "schema '{name}': coarse_map missing entry for '{t}'"
                )));
            }
        }
        for t in coarse_map.keys() {
            if !seen.contains(t) {
                return Err(Error::Schema(format!(
                    "schema '{name}': coarse_map references unknown type '{t}'"
                )));
            }
        }
        Ok(LabelSchema {
            name,
            entity_types,
            coarse_map,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn coarse_of(&self, entity_type: &str) -> Option<Coarse> {
        self.coarse_map.get(entity_type).copied()
    }

    /// Total tag count: `1 + 2 * |entity_types|`.
    pub fn tag_count(&self) -> usize {
        1 + 2 * self.entity_types.len()
    }

    pub fn is_valid_tag(&self, tag: TagId) -> bool {
        tag < self.tag_count()
    }

    pub const O: TagId = 0;

    pub fn b_tag(&self, type_index: usize) -> TagId {
        1 + 2 * type_index
    }

    pub fn i_tag(&self, type_index: usize) -> TagId {
        2 + 2 * type_index
    }

    /// Entity-type index and prefix of a tag, or `None` for `O`.
    pub fn split_tag(&self, tag: TagId) -> Option<(usize, BioPrefix)> {
        if tag == 0 || tag >= self.tag_count() {
            return None;
        }
        let type_index = (tag - 1) / 2;
        let prefix = if (tag - 1) % 2 == 0 {
            BioPrefix::Begin
        } else {
            BioPrefix::Inside
        };
        Some((type_index, prefix))
    }

    pub fn tag_name(&self, tag: TagId) -> String {
        match self.split_tag(tag) {
            None => "O".to_string(),
            Some((ti, BioPrefix::Begin)) => format!("B-{}", self.entity_types[ti]),
            Some((ti, BioPrefix::Inside)) => format!("I-{}", self.entity_types[ti]),
        }
    }

    pub fn tag_id(&self, name: &str) -> Option<TagId> {
        if name == "O" {
            return Some(0);
        }
        let (prefix, ty) = name.split_once('-')?;
        let ti = self.entity_types.iter().position(|t| t == ty)?;
        match prefix {
            "B" => Some(self.b_tag(ti)),
            "I" => Some(self.i_tag(ti)),
            _ => None,
        }
    }

    pub fn type_index(&self, entity_type: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == entity_type)
    }
}

/// A position where an `I-t` tag opens without a preceding `B-t`/`I-t` of the
/// same type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bio2Violation {
    pub position: usize,
    pub tag: TagId,
}

/// Checks the BIO2 rule: `I-t` must immediately follow `B-t` or `I-t` of the
/// same type. Violations are data, not errors.
pub fn validate_bio2(tags: &[TagId], schema: &LabelSchema) -> Vec<Bio2Violation> {
    let mut violations = Vec::new();
    let mut prev_type: Option<usize> = None;
    for (pos, &tag) in tags.iter().enumerate() {
        match schema.split_tag(tag) {
            None => prev_type = None,
            Some((ti, BioPrefix::Begin)) => prev_type = Some(ti),
            Some((ti, BioPrefix::Inside)) => {
                if prev_type != Some(ti) {
                    violations.push(Bio2Violation { position: pos, tag });
                }
                prev_type = Some(ti);
            }
        }
    }
    violations
}

/// Normalizes a tag sequence to BIO2: an illegal `I-t` opening becomes `B-t`.
/// Idempotent; legal input is returned unchanged.
pub fn repair_bio2(tags: &[TagId], schema: &LabelSchema) -> Vec<TagId> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev_type: Option<usize> = None;
    for &tag in tags {
        match schema.split_tag(tag) {
            None => {
                out.push(tag);
                prev_type = None;
            }
            Some((ti, BioPrefix::Begin)) => {
                out.push(tag);
                prev_type = Some(ti);
            }
            Some((ti, BioPrefix::Inside)) => {
                if prev_type == Some(ti) {
                    out.push(tag);
                } else {
                    out.push(schema.b_tag(ti));
                }
                prev_type = Some(ti);
            }
        }
    }
    out
}

fn types(pairs: &[(&str, Coarse)]) -> (Vec<String>, BTreeMap<String, Coarse>) {
    let entity_types = pairs.iter().map(|(t, _)| t.to_string()).collect();
    let coarse_map = pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect();
    (entity_types, coarse_map)
}

/// The original fine-grained inventory: per-arm sample sizes, demographics,
/// arm names, outcome names/measures, and per-arm binary and continuous
/// outcome values.
pub fn original_schema() -> LabelSchema {
    use Coarse::*;
    let (entity_types, coarse_map) = types(&[
        ("total-sample-size", Population),
        ("iv-sample-size", Population),
        ("ctl-sample-size", Population),
        ("age", Population),
        ("eligibility", Population),
        ("ethnicity", Population),
        ("condition", Population),
        ("location", Population),
        ("intervention", Intervention),
        ("control", Control),
        ("outcome", Outcome),
        ("outcome-measure", Outcome),
        ("iv-bin-abs", Outcome),
        ("ctl-bin-abs", Outcome),
        ("iv-bin-percent", Outcome),
        ("ctl-bin-percent", Outcome),
        ("iv-mean", Outcome),
        ("ctl-mean", Outcome),
        ("iv-median", Outcome),
        ("ctl-median", Outcome),
        ("iv-sd", Outcome),
        ("ctl-sd", Outcome),
        ("iv-q1", Outcome),
        ("ctl-q1", Outcome),
        ("iv-q3", Outcome),
        ("ctl-q3", Outcome),
    ]);
    LabelSchema::new("original", entity_types, coarse_map).expect("built-in schema is valid")
}

/// The revised inventory: adds `sex`, merges eligibility with condition,
/// folds location/ethnicity into `other-demographics`, merges outcome names
/// with outcome measures, and collapses q1/q3 into per-arm `others`.
pub fn revised_schema() -> LabelSchema {
    use Coarse::*;
    let (entity_types, coarse_map) = types(&[
        ("total-sample-size", Population),
        ("iv-sample-size", Population),
        ("ctl-sample-size", Population),
        ("sex", Population),
        ("age", Population),
        ("elig-cond", Population),
        ("other-demographics", Population),
        ("intervention", Intervention),
        ("control", Control),
        ("outcome", Outcome),
        ("iv-bin-abs", Outcome),
        ("ctl-bin-abs", Outcome),
        ("iv-bin-percent", Outcome),
        ("ctl-bin-percent", Outcome),
        ("iv-mean", Outcome),
        ("ctl-mean", Outcome),
        ("iv-median", Outcome),
        ("ctl-median", Outcome),
        ("iv-sd", Outcome),
        ("ctl-sd", Outcome),
        ("iv-others", Outcome),
        ("ctl-others", Outcome),
    ]);
    LabelSchema::new("revised", entity_types, coarse_map).expect("built-in schema is valid")
}

/// The four-type coarse P/I/C/O schema.
pub fn coarse_schema() -> LabelSchema {
    use Coarse::*;
    let (entity_types, coarse_map) = types(&[
        ("population", Population),
        ("intervention", Intervention),
        ("control", Control),
        ("outcome", Outcome),
    ]);
    LabelSchema::new("coarse", entity_types, coarse_map).expect("built-in schema is valid")
}

/// Looks up a built-in schema by name.
pub fn builtin_schema(name: &str) -> Option<LabelSchema> {
    match name {
        "original" => Some(original_schema()),
        "revised" => Some(revised_schema()),
        "coarse" => Some(coarse_schema()),
        _ => None,
    }
}
