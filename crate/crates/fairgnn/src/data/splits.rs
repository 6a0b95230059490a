//! Node splits for training with partial labels and partial sensitive
//! attributes.
//!
//! The labeled training set and the sensitive-observed set are sampled
//! independently (they may overlap). Validation and test nodes are drawn
//! from nodes carrying both attributes that belong to neither training set,
//! so evaluation never touches anything a model was fit on.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Result};

/// Index sets, each sorted ascending.
///
/// Serializes to JSON with keys `v_l`, `v_s`, `val`, `test`, `seed`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Nodes whose labels the classifier trains on.
    #[serde(rename = "v_l")]
    pub train_labeled: Vec<usize>,
    /// Nodes whose sensitive attribute is observed during training.
    #[serde(rename = "v_s")]
    pub sens_observed: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// The seed the sets were sampled with, kept for provenance.
    pub seed: u64,
}

impl SplitSpec {
    /// Checks membership, ordering, uniqueness, attribute availability and
    /// evaluation-set disjointness against a concrete graph.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let labels = graph
            .labels()
            .ok_or_else(|| Error::Data("splits need a graph with labels".into()))?;
        let sensitive = graph
            .sensitive()
            .ok_or_else(|| Error::Data("splits need a graph with sensitive attributes".into()))?;
        for (name, set) in [
            ("train_labeled", &self.train_labeled),
            ("sens_observed", &self.sens_observed),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            if set.is_empty() {
                return Err(Error::Data(format!("{} split is empty", name)));
            }
            if !set.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Data(format!("{} split must be strictly ascending", name)));
            }
            if set[set.len() - 1] >= graph.n() {
                return Err(Error::Data(format!(
                    "{} split references node {} outside 0..{}",
                    name,
                    set[set.len() - 1],
                    graph.n()
                )));
            }
        }
        for &i in &self.train_labeled {
            if labels[i] < 0 {
                return Err(Error::Data(format!("train node {} has no label", i)));
            }
        }
        for &i in &self.sens_observed {
            if sensitive[i] < 0 {
                return Err(Error::Data(format!("node {} has no sensitive attribute", i)));
            }
        }
        for (name, set) in [("val", &self.val), ("test", &self.test)] {
            for &i in set {
                if labels[i] < 0 || sensitive[i] < 0 {
                    return Err(Error::Data(format!(
                        "{} node {} must carry both a label and a sensitive attribute",
                        name, i
                    )));
                }
                if self.train_labeled.binary_search(&i).is_ok()
                    || self.sens_observed.binary_search(&i).is_ok()
                {
                    return Err(Error::Data(format!(
                        "{} node {} overlaps a training set",
                        name, i
                    )));
                }
            }
        }
        let mut overlap = self.val.iter().filter(|i| self.test.binary_search(i).is_ok());
        if let Some(i) = overlap.next() {
            return Err(Error::Data(format!("node {} is in both val and test", i)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("could not encode splits: {}", e)))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SplitSpec> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }
}

/// Samples splits from a fully attributed graph.
///
/// `n_labeled` nodes are drawn from those with labels, `n_sens` independently
/// from those with sensitive attributes. Validation and test sizes are
/// `floor(frac * pool)` where the pool is every node with both attributes
/// that landed in neither training set.
pub fn make_splits(
    graph: &Graph,
    n_labeled: usize,
    n_sens: usize,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<SplitSpec> {
    let labels = graph
        .labels()
        .ok_or_else(|| Error::Data("cannot split a graph without labels".into()))?;
    let sensitive = graph
        .sensitive()
        .ok_or_else(|| Error::Data("cannot split a graph without sensitive attributes".into()))?;
    for (name, frac) in [("val fraction", val_frac), ("test fraction", test_frac)] {
        if !(frac.is_finite() && 0.0 < frac && frac < 1.0) {
            return Err(Error::Config(format!("{} must lie in (0, 1), got {}", name, frac)));
        }
    }
    if val_frac + test_frac > 1.0 {
        return Err(Error::Config(format!(
            "val and test fractions sum to {}, must not exceed 1",
            val_frac + test_frac
        )));
    }
    if n_labeled == 0 || n_sens == 0 {
        return Err(Error::Config("both training sets must be non-empty".into()));
    }

    let labeled_pool: Vec<usize> = (0..graph.n()).filter(|&i| labels[i] >= 0).collect();
    let sens_pool: Vec<usize> = (0..graph.n()).filter(|&i| sensitive[i] >= 0).collect();
    if n_labeled > labeled_pool.len() {
        return Err(Error::Config(format!(
            "requested {} labeled training nodes but only {} have labels",
            n_labeled,
            labeled_pool.len()
        )));
    }
    if n_sens > sens_pool.len() {
        return Err(Error::Config(format!(
            "requested {} sensitive-observed nodes but only {} have the attribute",
            n_sens,
            sens_pool.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_labeled = sample(&labeled_pool, n_labeled, &mut rng);
    let mut sens_observed = sample(&sens_pool, n_sens, &mut rng);
    train_labeled.sort_unstable();
    sens_observed.sort_unstable();

    let eval_pool: Vec<usize> = (0..graph.n())
        .filter(|&i| {
            labels[i] >= 0
                && sensitive[i] >= 0
                && train_labeled.binary_search(&i).is_err()
                && sens_observed.binary_search(&i).is_err()
        })
        .collect();
    let n_val = (val_frac * eval_pool.len() as f64).floor() as usize;
    let n_test = (test_frac * eval_pool.len() as f64).floor() as usize;
    if n_val == 0 || n_test == 0 {
        return Err(Error::Config(format!(
            "evaluation pool of {} nodes yields empty val or test split",
            eval_pool.len()
        )));
    }
    let mut shuffled = eval_pool;
    shuffled.shuffle(&mut rng);
    let mut val: Vec<usize> = shuffled[..n_val].to_vec();
    let mut test: Vec<usize> = shuffled[n_val..n_val + n_test].to_vec();
    val.sort_unstable();
    test.sort_unstable();

    let spec = SplitSpec {
        train_labeled,
        sens_observed,
        val,
        test,
        seed,
    };
    spec.validate(graph)?;
    Ok(spec)
}

fn sample(pool: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut copy = pool.to_vec();
    copy.shuffle(rng);
    copy.truncate(k);
    copy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmath::Tensor;
    use proptest::prelude::*;

    fn ring_graph(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let feats = Tensor::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let labels: Vec<i8> = (0..n).map(|i| (i % 2) as i8).collect();
        let sens: Vec<i8> = (0..n).map(|i| ((i / 2) % 2) as i8).collect();
        Graph::build(n, &edges, feats)
            .unwrap()
            .with_labels(labels)
            .unwrap()
            .with_sensitive(sens)
            .unwrap()
    }

    #[test]
    fn splits_are_deterministic_and_valid() {
        let g = ring_graph(100);
        let a = make_splits(&g, 30, 20, 0.25, 0.5, 7).unwrap();
        let b = make_splits(&g, 30, 20, 0.25, 0.5, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train_labeled.len(), 30);
        assert_eq!(a.sens_observed.len(), 20);
        a.validate(&g).unwrap();
    }

    #[test]
    fn evaluation_sizes_follow_the_floor_rule() {
        let g = ring_graph(100);
        let s = make_splits(&g, 30, 20, 0.25, 0.5, 7).unwrap();
        let in_train = |i: usize| {
            s.train_labeled.binary_search(&i).is_ok() || s.sens_observed.binary_search(&i).is_ok()
        };
        let pool = (0..100).filter(|&i| !in_train(i)).count();
        assert_eq!(s.val.len(), pool / 4);
        assert_eq!(s.test.len(), pool / 2);
    }

    #[test]
    fn training_sets_may_overlap_each_other_but_not_evaluation() {
        // With 80 of 100 nodes in each training pool draw, overlap between
        // the two independent draws is certain.
        let g = ring_graph(100);
        let s = make_splits(&g, 80, 80, 0.3, 0.3, 11).unwrap();
        let overlap = s
            .train_labeled
            .iter()
            .filter(|i| s.sens_observed.binary_search(i).is_ok())
            .count();
        assert!(overlap > 0);
        for i in s.val.iter().chain(&s.test) {
            assert!(s.train_labeled.binary_search(i).is_err());
            assert!(s.sens_observed.binary_search(i).is_err());
        }
    }

    #[test]
    fn missing_attributes_shrink_the_pools() {
        let n = 40;
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let feats = Tensor::from_vec(n, 1, vec![1.0; n]).unwrap();
        // Labels only on even nodes, sensitive everywhere.
        let labels: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let sens: Vec<i8> = (0..n).map(|i| (i % 2) as i8).collect();
        let g = Graph::build(n, &edges, feats)
            .unwrap()
            .with_labels(labels)
            .unwrap()
            .with_sensitive(sens)
            .unwrap();
        assert!(make_splits(&g, 21, 5, 0.3, 0.3, 0).is_err());
        let s = make_splits(&g, 5, 5, 0.5, 0.4, 0).unwrap();
        for &i in s.train_labeled.iter().chain(s.val.iter()).chain(s.test.iter()) {
            assert_eq!(i % 2, 0, "node {} has no label", i);
        }
    }

    #[test]
    fn rejects_bad_fractions() {
        let g = ring_graph(50);
        assert!(make_splits(&g, 10, 10, 0.0, 0.5, 0).is_err());
        assert!(make_splits(&g, 10, 10, 0.5, 1.0, 0).is_err());
        assert!(make_splits(&g, 10, 10, 0.7, 0.7, 0).is_err());
    }

    #[test]
    fn split_files_round_trip() {
        let g = ring_graph(60);
        let s = make_splits(&g, 15, 10, 0.4, 0.4, 3).unwrap();
        assert_eq!(s.seed, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.json");
        s.save(&path).unwrap();
        assert_eq!(SplitSpec::load(&path).unwrap(), s);
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["\"v_l\"", "\"v_s\"", "\"val\"", "\"test\"", "\"seed\""] {
            assert!(text.contains(key), "missing {} in {}", key, text);
        }
    }

    #[test]
    fn validate_catches_corrupt_specs() {
        let g = ring_graph(40);
        let good = make_splits(&g, 10, 10, 0.3, 0.3, 1).unwrap();

        let mut unsorted = good.clone();
        unsorted.val.reverse();
        assert!(unsorted.validate(&g).is_err());

        let mut out_of_range = good.clone();
        *out_of_range.test.last_mut().unwrap() = 40;
        assert!(out_of_range.validate(&g).is_err());

        let mut overlapping = good.clone();
        overlapping.test = overlapping.val.clone();
        assert!(overlapping.validate(&g).is_err());

        let mut leaking = good.clone();
        leaking.val = vec![good.train_labeled[0]];
        assert!(leaking.validate(&g).is_err());
    }

    proptest! {
        #[test]
        fn sampled_splits_always_validate(
            seed in 0u64..500,
            n_labeled in 5usize..40,
            n_sens in 5usize..40,
        ) {
            let g = ring_graph(120);
            let s = make_splits(&g, n_labeled, n_sens, 0.3, 0.3, seed).unwrap();
            prop_assert!(s.validate(&g).is_ok());
            prop_assert_eq!(s.train_labeled.len(), n_labeled);
            prop_assert_eq!(s.sens_observed.len(), n_sens);
        }
    }
}
