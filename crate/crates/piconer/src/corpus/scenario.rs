//! Masking-ratio scenario construction: carve test/validation from the
//! labeled pool, keep a ratio of the remaining train sentences as labeled,
//! and treat the rest (and/or a cross-domain pool) as unlabeled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{strip_labels, Dataset};
use crate::error::{Error, Result};

/// Which pool supplies the unlabeled training sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    /// Masked remainder of the labeled pool.
    InDomain,
    /// A separate stripped pool.
    CrossDomain,
    /// Both.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Fraction of the train pool kept labeled, in (0, 1].
    pub ratio: f64,
    pub seed: u64,
    pub augmentation: Augmentation,
    /// Fraction of the labeled pool carved off as the test set first.
    pub test_fraction: f64,
    /// Fraction of the post-test remainder carved off as validation.
    pub validation_fraction: f64,
}

impl ScenarioConfig {
    pub fn new(ratio: f64, seed: u64, augmentation: Augmentation) -> Self {
        ScenarioConfig {
            ratio,
            seed,
            augmentation,
            test_fraction: 0.2,
            validation_fraction: 0.1,
        }
    }

    /// No test/validation carving: the whole pool is the train pool.
    pub fn train_only(ratio: f64, seed: u64, augmentation: Augmentation) -> Self {
        ScenarioConfig {
            ratio,
            seed,
            augmentation,
            test_fraction: 0.0,
            validation_fraction: 0.0,
        }
    }
}

/// The four pairwise-disjoint partitions of a masking scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSplit {
    pub train_labeled: Dataset,
    pub train_unlabeled: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub config: ScenarioConfig,
}

/// Builds a scenario from a fully labeled pool. Deterministic per seed:
/// sentence identity is shuffled once, partitions keep original pool order.
pub fn make_scenario(
    labeled_pool: &Dataset,
    cross_pool: &Dataset,
    config: ScenarioConfig,
) -> Result<ScenarioSplit> {
    if !(config.ratio > 0.0 && config.ratio <= 1.0) {
        return Err(Error::Config(format!(
            "ratio must be in (0, 1], got {}",
            config.ratio
        )));
    }
    for f in [config.test_fraction, config.validation_fraction] {
        if !(0.0..1.0).contains(&f) {
            return Err(Error::Config(format!("fraction {f} out of [0, 1)")));
        }
    }
    if !labeled_pool.all_labeled() {
        return Err(Error::Data("labeled pool contains unlabeled sentences".into()));
    }
    if !cross_pool.all_labeled() {
        return Err(Error::Data("cross pool contains unlabeled sentences".into()));
    }

    let n = labeled_pool.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);

    let test_n = (config.test_fraction * n as f64).floor() as usize;
    let rest = n - test_n;
    let val_n = (config.validation_fraction * rest as f64).floor() as usize;
    let train_n = rest - val_n;
    let labeled_n = (config.ratio * train_n as f64).floor() as usize;
    if labeled_n == 0 {
        return Err(Error::Config(format!(
            "labeled selection is empty (ratio {} over train pool of {train_n})",
            config.ratio
        )));
    }

    let mut test_idx: Vec<usize> = order[..test_n].to_vec();
    let mut val_idx: Vec<usize> = order[test_n..test_n + val_n].to_vec();
    let mut lab_idx: Vec<usize> = order[test_n + val_n..test_n + val_n + labeled_n].to_vec();
    let mut mask_idx: Vec<usize> = order[test_n + val_n + labeled_n..].to_vec();
    for idx in [&mut test_idx, &mut val_idx, &mut lab_idx, &mut mask_idx] {
        idx.sort_unstable();
    }

    let pick = |idx: &[usize]| -> Dataset {
        Dataset::new(
            labeled_pool.schema.clone(),
            idx.iter()
                .map(|&i| labeled_pool.sentences[i].clone())
                .collect(),
        )
    };

    let masked_in_domain = || strip_labels(&pick(&mask_idx));
    let stripped_cross = || strip_labels(cross_pool);
    let train_unlabeled = match config.augmentation {
        Augmentation::InDomain => masked_in_domain(),
        Augmentation::CrossDomain => stripped_cross(),
        Augmentation::All => {
            let mut d = masked_in_domain();
            d.sentences.extend(stripped_cross().sentences);
            d
        }
    };

    Ok(ScenarioSplit {
        train_labeled: pick(&lab_idx),
        train_unlabeled,
        validation: pick(&val_idx),
        test: pick(&test_idx),
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Sentence};
    use crate::schema::coarse_schema;

    fn pool(n: usize) -> Dataset {
        let s = coarse_schema();
        let b = s.b_tag(0);
        let sentences = (0..n)
            .map(|i| {
                Sentence::labeled(
                    vec![(format!("w{i}"), b), ("x".into(), 0)],
                    format!("d{i}"),
                    Domain::InDomain,
                    &s,
                )
                .unwrap()
            })
            .collect();
        Dataset::new(s, sentences)
    }

    #[test]
    fn ratio_one_in_domain_has_no_unlabeled() {
        let p = pool(50);
        let split = make_scenario(
            &p,
            &Dataset::empty(p.schema.clone()),
            ScenarioConfig::new(1.0, 3, Augmentation::InDomain),
        )
        .unwrap();
        assert!(split.train_unlabeled.is_empty());
    }

    #[test]
    fn same_seed_is_identical_different_seed_differs() {
        let p = pool(100);
        let empty = Dataset::empty(p.schema.clone());
        let cfg = ScenarioConfig::new(0.3, 9, Augmentation::InDomain);
        let a = make_scenario(&p, &empty, cfg).unwrap();
        let b = make_scenario(&p, &empty, cfg).unwrap();
        assert_eq!(a.train_labeled.sentences, b.train_labeled.sentences);
        assert_eq!(a.test.sentences, b.test.sentences);

        let c = make_scenario(
            &p,
            &empty,
            ScenarioConfig::new(0.3, 10, Augmentation::InDomain),
        )
        .unwrap();
        assert_eq!(a.train_labeled.len(), c.train_labeled.len());
        assert_ne!(a.train_labeled.sentences, c.train_labeled.sentences);
    }

    #[test]
    fn partitions_are_disjoint_and_cover_the_pool() {
        let p = pool(97);
        let empty = Dataset::empty(p.schema.clone());
        let split =
            make_scenario(&p, &empty, ScenarioConfig::new(0.5, 7, Augmentation::InDomain)).unwrap();
        let mut ids: Vec<&str> = split
            .train_labeled
            .sentences
            .iter()
            .chain(&split.train_unlabeled.sentences)
            .chain(&split.validation.sentences)
            .chain(&split.test.sentences)
            .map(|s| s.doc_id.as_str())
            .collect();
        assert_eq!(ids.len(), 97);
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 97);
    }

    #[test]
    fn masking_counts_match_published_grid() {
        let p = pool(9_819);
        let empty = Dataset::empty(p.schema.clone());
        let expected = [
            (0.1, 981, 8_838),
            (0.3, 2_945, 6_874),
            (0.5, 4_909, 4_910),
            (0.7, 6_873, 2_946),
            (0.9, 8_837, 982),
            (1.0, 9_819, 0),
        ];
        for (ratio, labeled, unlabeled) in expected {
            let split = make_scenario(
                &p,
                &empty,
                ScenarioConfig::train_only(ratio, 42, Augmentation::InDomain),
            )
            .unwrap();
            assert_eq!(split.train_labeled.len(), labeled, "ratio {ratio}");
            assert_eq!(split.train_unlabeled.len(), unlabeled, "ratio {ratio}");
        }
    }

    #[test]
    fn invalid_ratio_errors() {
        let p = pool(10);
        let empty = Dataset::empty(p.schema.clone());
        for ratio in [0.0, -0.1, 1.5] {
            assert!(make_scenario(
                &p,
                &empty,
                ScenarioConfig::new(ratio, 1, Augmentation::InDomain)
            )
            .is_err());
        }
    }

    #[test]
    fn cross_domain_uses_stripped_cross_pool() {
        let p = pool(40);
        let cross = pool(15);
        let split = make_scenario(
            &p,
            &cross,
            ScenarioConfig::new(0.5, 2, Augmentation::CrossDomain),
        )
        .unwrap();
        assert_eq!(split.train_unlabeled.len(), 15);
        assert!(split.train_unlabeled.sentences.iter().all(|s| !s.labeled));
    }
}
