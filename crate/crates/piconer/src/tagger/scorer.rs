//! Pluggable classifier contract. External models (out-of-process adapters)
//! implement the same scoring surface as the built-in linear model, speaking
//! a JSONL wire format: request `{tokens}` in, response `{rows}` out.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::LabelSchema;
use crate::tagger::{ProbMatrix, TokenClassifierModel};

/// Scores a sentence into per-token tag distributions.
pub trait TokenScorer {
    fn schema(&self) -> &LabelSchema;
    fn score(&self, texts: &[&str]) -> Result<ProbMatrix>;
}

impl TokenScorer for TokenClassifierModel {
    fn schema(&self) -> &LabelSchema {
        TokenClassifierModel::schema(self)
    }

    fn score(&self, texts: &[&str]) -> Result<ProbMatrix> {
        self.forward(texts)
    }
}

/// Row-stochasticity check for adapter-supplied matrices: every entry in
/// [0, 1] and every row summing to 1 within 1e-9.
pub fn validate_rows(rows: &[Vec<f64>], tag_count: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != tag_count {
            return Err(Error::Contract(format!(
                "row {i} has {} entries, expected {tag_count}",
                row.len()
            )));
        }
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Contract(format!("row {i} has entries outside [0, 1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("row {i} sums to {sum}, not 1")));
        }
    }
    Ok(())
}

/// Wire request: one sentence of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub tokens: Vec<String>,
}

/// Wire response: an `m x C` probability matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub rows: Vec<Vec<f64>>,
}

/// Replays recorded request/response pairs from a JSONL fixture where request
/// and response lines alternate. Used to test the adapter surface without a
/// live external model.
pub struct ReplayScorer {
    schema: LabelSchema,
    responses: HashMap<Vec<String>, Vec<Vec<f64>>>,
}

impl ReplayScorer {
    pub fn from_jsonl(fixture: &str, schema: LabelSchema) -> Result<Self> {
        let mut responses = HashMap::new();
        let mut lines = fixture.lines().filter(|l| !l.trim().is_empty());
        while let Some(req_line) = lines.next() {
            let req: ScoreRequest = serde_json::from_str(req_line)?;
            let resp_line = lines.next().ok_or_else(|| {
                Error::Contract("fixture has a request without a response".into())
            })?;
            let resp: ScoreResponse = serde_json::from_str(resp_line)?;
            responses.insert(req.tokens, resp.rows);
        }
        Ok(ReplayScorer { schema, responses })
    }
}

impl TokenScorer for ReplayScorer {
    fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn score(&self, texts: &[&str]) -> Result<ProbMatrix> {
        let key: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
        let rows = self
            .responses
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::Contract(format!("no recorded response for {key:?}")))?;
        if rows.len() != texts.len() {
            return Err(Error::Contract(format!(
                "{} rows for {} tokens",
                rows.len(),
                texts.len()
            )));
        }
        ProbMatrix::new(rows, self.schema.tag_count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::coarse_schema;
    use crate::tagger::FeatureConfig;

    #[test]
    fn builtin_model_satisfies_the_contract() {
        let features = FeatureConfig {
            window: 0,
            templates: vec![crate::tagger::Template::WordLower],
            hash_dim: 1 << 10,
        };
        let m = TokenClassifierModel::zeros(coarse_schema(), features).unwrap();
        let via_contract = TokenScorer::score(&m, &["a", "b"]).unwrap();
        let direct = m.forward(&["a", "b"]).unwrap();
        assert_eq!(via_contract, direct);
    }

    #[test]
    fn non_stochastic_row_is_a_contract_violation() {
        assert!(validate_rows(&[vec![0.5, 0.6]], 2).is_err());
        assert!(validate_rows(&[vec![0.5, 0.5, 0.0]], 2).is_err());
        assert!(validate_rows(&[vec![-0.1, 1.1]], 2).is_err());
        assert!(validate_rows(&[vec![0.25, 0.75]], 2).is_ok());
    }

    #[test]
    fn replay_fixture_is_byte_stable() {
        let schema = crate::schema::LabelSchema::new(
            "two",
            vec!["x".into()],
            [("x".to_string(), crate::schema::Coarse::Population)].into(),
        )
        .unwrap();
        let fixture = concat!(
            r#"{"tokens":["women"]}"#,
            "\n",
            r#"{"rows":[[0.2,0.5,0.3]]}"#,
            "\n",
        );
        let scorer = ReplayScorer::from_jsonl(fixture, schema).unwrap();
        let a = scorer.score(&["women"]).unwrap();
        let b = scorer.score(&["women"]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows()[0], vec![0.2, 0.5, 0.3]);
        assert!(scorer.score(&["men"]).is_err());
    }
}
