//! Synthetic graphs with controllable group imbalance, label bias toward one
//! group, group-correlated features, and homophilous edges.
//!
//! The construction places nodes in two sensitive groups with an exact
//! requested size ratio, draws labels whose positive rate differs between
//! groups by `2 * label_bias`, embeds label and group signal along a random
//! orthonormal pair of directions, and wires edges that prefer same-group
//! endpoints with probability `homophily`. Within a group, partner picks
//! lean toward same-label peers so that graph structure is informative about
//! labels as well as group membership.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffmath::Tensor;
use crate::graph::Graph;
use crate::{Error, Result};

use super::{Dataset, Provenance};

/// Probability that a same-group partner pick is restricted to peers with the
/// same label. People cluster on shared interests inside their community, so
/// neighborhoods carry label signal on top of group signal; the intra-group
/// edge fraction itself stays at the `homophily` target.
const LABEL_AFFINITY: f64 = 0.8;

/// Generator knobs. See field docs for the exact roles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    pub feature_dim: usize,
    /// Majority-to-minority group size ratio, at least 1. Group 1 is the
    /// majority.
    pub group_ratio: f64,
    /// Probability that an edge endpoint is drawn from the same group.
    pub homophily: f64,
    /// Half the gap in positive-label rate between the groups:
    /// `P(y=1 | s=1) = 0.5 + label_bias`, `P(y=1 | s=0) = 0.5 - label_bias`.
    pub label_bias: f64,
    /// Feature signal strength along the label direction.
    pub mu_label: f64,
    /// Feature signal strength along the group direction.
    pub mu_sens: f64,
    /// Standard deviation of isotropic feature noise.
    pub noise: f64,
    /// Target average degree; each node initiates about half of it.
    pub avg_degree: f64,
    /// Seed for every random choice the generator makes.
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> GenSpec {
        GenSpec {
            n: 2000,
            feature_dim: 24,
            group_ratio: 2.5,
            homophily: 0.95,
            label_bias: 0.3,
            mu_label: 0.7,
            mu_sens: 0.5,
            noise: 1.2,
            avg_degree: 10.0,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config(format!("need at least 4 nodes, got {}", self.n)));
        }
        if self.feature_dim < 2 {
            return Err(Error::Config(format!(
                "need at least 2 feature dimensions for the two signal directions, got {}",
                self.feature_dim
            )));
        }
        if !(self.group_ratio.is_finite() && self.group_ratio >= 1.0) {
            return Err(Error::Config(format!(
                "group ratio must be at least 1, got {}",
                self.group_ratio
            )));
        }
        if !(self.homophily.is_finite() && (0.0..=1.0).contains(&self.homophily)) {
            return Err(Error::Config(format!(
                "homophily must lie in [0, 1], got {}",
                self.homophily
            )));
        }
        if !(self.label_bias.is_finite() && (0.0..0.5).contains(&self.label_bias)) {
            return Err(Error::Config(format!(
                "label bias must lie in [0, 0.5), got {}",
                self.label_bias
            )));
        }
        for (name, v) in [("mu_label", self.mu_label), ("mu_sens", self.mu_sens), ("noise", self.noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{} must be non-negative, got {}", name, v)));
            }
        }
        if !(self.avg_degree.is_finite() && self.avg_degree >= 2.0) {
            return Err(Error::Config(format!(
                "average degree must be at least 2, got {}",
                self.avg_degree
            )));
        }
        let majority = majority_count(self.n, self.group_ratio);
        if majority + 2 > self.n {
            return Err(Error::Config(format!(
                "group ratio {} leaves fewer than 2 minority nodes out of {}",
                self.group_ratio, self.n
            )));
        }
        Ok(())
    }
}

fn majority_count(n: usize, ratio: f64) -> usize {
    ((n as f64) * ratio / (1.0 + ratio)).round() as usize
}

/// Builds one dataset from the spec, fully deterministic in `spec.seed`.
/// Labels and sensitive attributes are observed on every node; splits decide
/// what a model may see.
pub fn synth_biased_graph(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;

    // Group assignment: exact counts, shuffled positions.
    let n_major = majority_count(n, spec.group_ratio);
    let mut sens: Vec<i8> = vec![0; n - n_major];
    sens.extend(std::iter::repeat_n(1i8, n_major));
    sens.shuffle(&mut rng);

    // Labels, biased positive toward the majority group.
    let labels: Vec<i8> = sens
        .iter()
        .map(|&s| {
            let p = if s == 1 { 0.5 + spec.label_bias } else { 0.5 - spec.label_bias };
            i8::from(rng.random_bool(p))
        })
        .collect();

    // A random orthonormal pair spanning the label and group directions.
    let (u_label, u_sens) = orthonormal_pair(spec.feature_dim, &mut rng)?;

    let mut feats = vec![0.0f64; n * spec.feature_dim];
    for i in 0..n {
        let y_sign = 2.0 * labels[i] as f64 - 1.0;
        let s_sign = 2.0 * sens[i] as f64 - 1.0;
        let row = &mut feats[i * spec.feature_dim..(i + 1) * spec.feature_dim];
        for (d, slot) in row.iter_mut().enumerate() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *slot = spec.mu_label * y_sign * u_label[d]
                + spec.mu_sens * s_sign * u_sens[d]
                + spec.noise * eps;
        }
    }
    let features = Tensor::from_vec(n, spec.feature_dim, feats)?;

    // Edges: each node initiates half its target degree; every pick chooses
    // a same-group partner with probability `homophily`. Within the same
    // group, picks prefer same-label peers (interest homophily inside a
    // community), which leaves the intra-group edge fraction untouched but
    // lets neighborhoods carry label information.
    let group0: Vec<usize> = (0..n).filter(|&i| sens[i] == 0).collect();
    let group1: Vec<usize> = (0..n).filter(|&i| sens[i] == 1).collect();
    let mut by_label = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    for i in 0..n {
        by_label[sens[i] as usize][labels[i] as usize].push(i);
    }
    let picks_per_node = ((spec.avg_degree / 2.0).round() as usize).max(1);
    let mut edges = Vec::with_capacity(n * picks_per_node);
    let mut chosen: Vec<usize> = Vec::with_capacity(picks_per_node);
    for i in 0..n {
        chosen.clear();
        for _ in 0..picks_per_node {
            let same_group = rng.random_bool(spec.homophily);
            let g = usize::from((sens[i] == 1) == same_group);
            let group_pool = if g == 1 { &group1 } else { &group0 };
            let labeled_pool = &by_label[g][labels[i] as usize];
            let mut pool = group_pool;
            if same_group
                && rng.random_bool(LABEL_AFFINITY)
                && labeled_pool.iter().any(|&v| v != i)
            {
                pool = labeled_pool;
            }
            // Reject self-edges and repeats of this node's own picks; the
            // pools are large enough that a handful of retries suffices.
            let mut j = pool[rng.random_range(0..pool.len())];
            let mut attempts = 0;
            while j == i || chosen.contains(&j) {
                attempts += 1;
                if attempts == 50 {
                    // A small same-label pool may be exhausted by earlier
                    // picks; the whole group always has room.
                    pool = group_pool;
                }
                if attempts > 100 {
                    return Err(Error::Data(format!(
                        "could not find a distinct partner for node {}; groups too small \
                         for the requested degree",
                        i
                    )));
                }
                j = pool[rng.random_range(0..pool.len())];
            }
            chosen.push(j);
            edges.push((i, j));
        }
    }

    let graph = Graph::build(n, &edges, features)?
        .with_labels(labels)?
        .with_sensitive(sens)?;
    Ok(Dataset {
        graph,
        provenance: Provenance::Generated(spec.clone()),
    })
}

fn orthonormal_pair(dim: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    for _ in 0..16 {
        let a: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let b: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm_a = norm(&a);
        if norm_a < 1e-8 {
            continue;
        }
        let u: Vec<f64> = a.iter().map(|v| v / norm_a).collect();
        let proj: f64 = u.iter().zip(&b).map(|(x, y)| x * y).sum();
        let mut w: Vec<f64> = b.iter().zip(&u).map(|(y, x)| y - proj * x).collect();
        let norm_w = norm(&w);
        if norm_w < 1e-8 {
            continue;
        }
        for v in &mut w {
            *v /= norm_w;
        }
        return Ok((u, w));
    }
    Err(Error::Data("could not draw an orthonormal direction pair".into()))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
