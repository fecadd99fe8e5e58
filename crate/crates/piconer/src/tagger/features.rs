//! Hashed sparse feature extraction over a token window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A feature template. Window-sensitive templates (`WordLower`, `WordShape`)
/// fire at every offset in `[-window, window]`; the rest look at the center
/// token only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    WordLower,
    WordShape,
    Prefix(usize),
    Suffix(usize),
    IsDigit,
    PositionOfNumber,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Context radius, at most 5.
    pub window: usize,
    pub templates: Vec<Template>,
    /// Power of two, at least 2^10.
    pub hash_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window: 2,
            templates: vec![
                Template::WordLower,
                Template::WordShape,
                Template::Prefix(3),
                Template::Suffix(3),
                Template::IsDigit,
            ],
            hash_dim: 1 << 18,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window > 5 {
            return Err(Error::Config(format!("window {} exceeds 5", self.window)));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("templates must be non-empty".into()));
        }
        if self.hash_dim < (1 << 10) || !self.hash_dim.is_power_of_two() {
            return Err(Error::Config(format!(
                "hash_dim {} must be a power of two >= 1024",
                self.hash_dim
            )));
        }
        Ok(())
    }
}

/// FNV-1a, fixed so hashed feature indices are stable across builds.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn shape(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_ascii_digit() {
                'd'
            } else {
                '.'
            }
        })
        .collect()
}

fn is_numeric(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

/// Per-token sparse feature index sets for one sentence. Deterministic; every
/// index is below `config.hash_dim`.
pub fn featurize(texts: &[&str], config: &FeatureConfig) -> Vec<Vec<usize>> {
    let mask = config.hash_dim - 1;
    let w = config.window as isize;
    let mut out = Vec::with_capacity(texts.len());
    for j in 0..texts.len() as isize {
        let mut features = Vec::new();
        let mut push = |s: String| features.push((fnv1a(&s) as usize) & mask);
        for template in &config.templates {
            match template {
                Template::WordLower => {
                    for o in -w..=w {
                        let word = texts
                            .get((j + o) as usize)
                            .map(|t| t.to_lowercase())
                            .unwrap_or_else(|| "<pad>".into());
                        push(format!("lower@{o}={word}"));
                    }
                }
                Template::WordShape => {
                    for o in -w..=w {
                        let s = texts
                            .get((j + o) as usize)
                            .map(|t| shape(t))
                            .unwrap_or_else(|| "<pad>".into());
                        push(format!("shape@{o}={s}"));
                    }
                }
                Template::Prefix(k) => {
                    let t = texts[j as usize];
                    let p: String = t.chars().take(*k).collect();
                    push(format!("prefix{k}={p}"));
                }
                Template::Suffix(k) => {
                    let t = texts[j as usize];
                    let chars: Vec<char> = t.chars().collect();
                    let start = chars.len().saturating_sub(*k);
                    let s: String = chars[start..].iter().collect();
                    push(format!("suffix{k}={s}"));
                }
                Template::IsDigit => {
                    push(format!("digit={}", is_numeric(texts[j as usize])));
                }
                Template::PositionOfNumber => {
                    if is_numeric(texts[j as usize]) {
                        let ordinal = texts[..j as usize]
                            .iter()
                            .filter(|t| is_numeric(t))
                            .count()
                            .min(5);
                        push(format!("numpos={ordinal}"));
                    } else {
                        push("numpos=none".into());
                    }
                }
            }
        }
        out.push(features);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_zero_word_lower_gives_one_feature_per_token() {
        let config = FeatureConfig {
            window: 0,
            templates: vec![Template::WordLower],
            hash_dim: 1 << 10,
        };
        let f = featurize(&["Women", "were", "randomized"], &config);
        assert!(f.iter().all(|fs| fs.len() == 1));
    }

    #[test]
    fn identical_contexts_give_identical_features() {
        let config = FeatureConfig::default();
        let a = featurize(&["a", "b", "c"], &config);
        let b = featurize(&["a", "b", "c"], &config);
        assert_eq!(a, b);
    }

    #[test]
    fn case_differs_in_shape_but_not_lowercase() {
        let config = FeatureConfig {
            window: 0,
            templates: vec![Template::WordLower, Template::WordShape],
            hash_dim: 1 << 12,
        };
        let a = featurize(&["Aspirin"], &config);
        let b = featurize(&["aspirin"], &config);
        assert_eq!(a[0][0], b[0][0], "word-lower feature matches");
        assert_ne!(a[0][1], b[0][1], "shape feature differs");
    }

    #[test]
    fn indices_below_hash_dim() {
        let config = FeatureConfig {
            hash_dim: 1 << 10,
            ..FeatureConfig::default()
        };
        let f = featurize(&["Aspirin", "100", "mg"], &config);
        assert!(f.iter().flatten().all(|&i| i < 1 << 10));
    }

    #[test]
    fn config_validation() {
        assert!(FeatureConfig::default().validate().is_ok());
        let bad = FeatureConfig {
            window: 6,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            hash_dim: 1000,
            ..FeatureConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
