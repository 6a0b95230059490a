//! Classification quality and group-fairness metrics.
//!
//! Predictions are thresholded probabilities (`prob >= threshold` counts as
//! positive). Group metrics compare the binary sensitive groups 0 and 1;
//! degenerate inputs (an empty group, a single-class ranking) are errors
//! rather than silently reported zeros.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fraction of thresholded predictions matching the labels.
pub fn accuracy(probs: &[f64], labels: &[i8], threshold: f64) -> Result<f64> {
    validate_probs(probs)?;
    validate_binary("labels", labels, probs.len())?;
    validate_threshold(threshold)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|&(&p, &y)| (p >= threshold) == (y == 1))
        .count();
    Ok(correct as f64 / probs.len() as f64)
}

/// Area under the ROC curve via the rank-sum statistic with average ranks
/// for ties. A constant score vector therefore evaluates to exactly 0.5.
pub fn auc(probs: &[f64], labels: &[i8]) -> Result<f64> {
    validate_probs(probs)?;
    validate_binary("labels", labels, probs.len())?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!(
            "ranking quality needs both classes, got {} positive / {} negative",
            n_pos, n_neg
        )));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).expect("finite probabilities"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average rank.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Statistical parity gap: absolute difference in positive prediction rates
/// between the sensitive groups.
pub fn delta_sp(probs: &[f64], sensitive: &[i8], threshold: f64) -> Result<f64> {
    validate_probs(probs)?;
    validate_binary("sensitive", sensitive, probs.len())?;
    validate_threshold(threshold)?;
    let r0 = group_positive_rate(probs, sensitive, threshold, 0, None, "parity gap")?;
    let r1 = group_positive_rate(probs, sensitive, threshold, 1, None, "parity gap")?;
    Ok((r0 - r1).abs())
}

/// Equal opportunity gap: absolute difference in true positive rates between
/// the sensitive groups, measured on label-1 nodes.
pub fn delta_eo(probs: &[f64], labels: &[i8], sensitive: &[i8], threshold: f64) -> Result<f64> {
    validate_probs(probs)?;
    validate_binary("labels", labels, probs.len())?;
    validate_binary("sensitive", sensitive, probs.len())?;
    validate_threshold(threshold)?;
    let r0 = group_positive_rate(probs, sensitive, threshold, 0, Some(labels), "opportunity gap")?;
    let r1 = group_positive_rate(probs, sensitive, threshold, 1, Some(labels), "opportunity gap")?;
    Ok((r0 - r1).abs())
}

fn group_positive_rate(
    probs: &[f64],
    sensitive: &[i8],
    threshold: f64,
    group: i8,
    restrict_to_label_one: Option<&[i8]>,
    what: &str,
) -> Result<f64> {
    let mut total = 0usize;
    let mut positive = 0usize;
    for (i, (&p, &s)) in probs.iter().zip(sensitive).enumerate() {
        if s != group {
            continue;
        }
        if let Some(labels) = restrict_to_label_one {
            if labels[i] != 1 {
                continue;
            }
        }
        total += 1;
        if p >= threshold {
            positive += 1;
        }
    }
    if total == 0 {
        return Err(Error::Metric(format!(
            "{} undefined: no eligible nodes in sensitive group {}",
            what, group
        )));
    }
    Ok(positive as f64 / total as f64)
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Metric("no predictions to score".into()));
    }
    if let Some(&p) = probs.iter().find(|p| !p.is_finite() || !(0.0..=1.0).contains(*p)) {
        return Err(Error::Metric(format!("probability {} outside [0, 1]", p)));
    }
    Ok(())
}

fn validate_binary(name: &str, values: &[i8], expected_len: usize) -> Result<()> {
    if values.len() != expected_len {
        return Err(Error::Metric(format!(
            "{} has {} entries, predictions have {}",
            name,
            values.len(),
            expected_len
        )));
    }
    if let Some(&v) = values.iter().find(|&&v| v != 0 && v != 1) {
        return Err(Error::Metric(format!("{} must be 0 or 1, got {}", name, v)));
    }
    Ok(())
}

fn validate_threshold(threshold: f64) -> Result<()> {
    if !(threshold.is_finite() && (0.0..=1.0).contains(&threshold)) {
        return Err(Error::Metric(format!("threshold {} outside [0, 1]", threshold)));
    }
    Ok(())
}

/// Per-group numbers behind the two gap metrics, indexed by group id.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Node count per sensitive group.
    pub size: [usize; 2],
    /// Positive prediction rate per group; `delta_sp` is their gap.
    pub positive_rate: [f64; 2],
    /// True positive rate per group; `delta_eo` is their gap.
    pub tpr: [f64; 2],
}

/// The four headline numbers for one evaluation split, plus the per-group
/// rates they are computed from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub auc: f64,
    pub delta_sp: f64,
    pub delta_eo: f64,
    pub group_stats: GroupStats,
}

impl MetricsReport {
    pub fn compute(probs: &[f64], labels: &[i8], sensitive: &[i8], threshold: f64) -> Result<MetricsReport> {
        let positive_rate = [
            group_positive_rate(probs, sensitive, threshold, 0, None, "parity gap")?,
            group_positive_rate(probs, sensitive, threshold, 1, None, "parity gap")?,
        ];
        let tpr = [
            group_positive_rate(probs, sensitive, threshold, 0, Some(labels), "opportunity gap")?,
            group_positive_rate(probs, sensitive, threshold, 1, Some(labels), "opportunity gap")?,
        ];
        let mut size = [0usize; 2];
        for &s in sensitive {
            size[s as usize] += 1;
        }
        Ok(MetricsReport {
            acc: accuracy(probs, labels, threshold)?,
            auc: auc(probs, labels)?,
            delta_sp: delta_sp(probs, sensitive, threshold)?,
            delta_eo: delta_eo(probs, labels, sensitive, threshold)?,
            group_stats: GroupStats { size, positive_rate, tpr },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PROBS: [f64; 6] = [0.9, 0.8, 0.3, 0.6, 0.2, 0.7];
    const LABELS: [i8; 6] = [1, 1, 0, 0, 0, 1];
    const SENS: [i8; 6] = [0, 1, 0, 1, 0, 1];

    #[test]
    fn hand_worked_example() {
        assert!((accuracy(&PROBS, &LABELS, 0.5).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(auc(&PROBS, &LABELS).unwrap(), 1.0);
        assert!((delta_sp(&PROBS, &SENS, 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(delta_eo(&PROBS, &LABELS, &SENS, 0.5).unwrap(), 0.0);

        // Group rates: group 0 predicts positive on 1 of 3 nodes, group 1 on
        // all 3; label-1 nodes are fully recovered in both groups.
        let report = MetricsReport::compute(&PROBS, &LABELS, &SENS, 0.5).unwrap();
        assert_eq!(report.group_stats.size, [3, 3]);
        assert!((report.group_stats.positive_rate[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.group_stats.positive_rate[1], 1.0);
        assert_eq!(report.group_stats.tpr, [1.0, 1.0]);
        let gap = (report.group_stats.positive_rate[0] - report.group_stats.positive_rate[1]).abs();
        assert_eq!(report.delta_sp, gap);
        let eo_gap = (report.group_stats.tpr[0] - report.group_stats.tpr[1]).abs();
        assert_eq!(report.delta_eo, eo_gap);
    }

    #[test]
    fn auc_matches_pairwise_count_with_one_inversion() {
        let probs = [0.1, 0.4, 0.35, 0.8];
        let labels = [0, 0, 1, 1];
        assert_eq!(auc(&probs, &labels).unwrap(), 0.75);
    }

    #[test]
    fn constant_scores_give_half_auc() {
        let probs = [0.5; 7];
        let labels = [1, 0, 1, 0, 1, 0, 0];
        assert_eq!(auc(&probs, &labels).unwrap(), 0.5);
    }

    #[test]
    fn threshold_tie_counts_as_positive() {
        let probs = [0.5, 0.49999];
        let labels = [1, 0];
        assert_eq!(accuracy(&probs, &labels, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn perfect_parity_and_opportunity() {
        let probs = [0.9, 0.9, 0.1, 0.1];
        let sens = [0, 1, 0, 1];
        let labels = [1, 1, 0, 0];
        assert_eq!(delta_sp(&probs, &sens, 0.5).unwrap(), 0.0);
        assert_eq!(delta_eo(&probs, &labels, &sens, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs_are_errors_not_zeros() {
        assert!(accuracy(&[], &[], 0.5).is_err());
        assert!(auc(&[0.6, 0.4], &[1, 1]).is_err());
        assert!(delta_sp(&[0.6, 0.4], &[1, 1], 0.5).is_err());
        // Group 0 exists but holds no label-1 nodes.
        assert!(delta_eo(&[0.6, 0.4], &[0, 1], &[0, 1], 0.5).is_err());
        assert!(accuracy(&[1.5], &[1], 0.5).is_err());
        assert!(accuracy(&[0.5], &[2], 0.5).is_err());
        assert!(accuracy(&[0.5], &[1, 0], 0.5).is_err());
        assert!(accuracy(&[0.5], &[1], f64::NAN).is_err());
    }

    fn metric_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<i8>, Vec<i8>)> {
        proptest::collection::vec((0.0f64..=1.0, 0i8..2, 0i8..2), 4..40).prop_map(|rows| {
            let mut probs = Vec::new();
            let mut labels = Vec::new();
            let mut sens = Vec::new();
            for (p, y, s) in rows {
                probs.push(p);
                labels.push(y);
                sens.push(s);
            }
            (probs, labels, sens)
        })
    }

    proptest! {
        #[test]
        fn metrics_stay_in_unit_interval((probs, labels, sens) in metric_inputs()) {
            if let Ok(a) = accuracy(&probs, &labels, 0.5) {
                prop_assert!((0.0..=1.0).contains(&a));
            }
            if let Ok(a) = auc(&probs, &labels) {
                prop_assert!((0.0..=1.0).contains(&a));
            }
            if let Ok(d) = delta_sp(&probs, &sens, 0.5) {
                prop_assert!((0.0..=1.0).contains(&d));
            }
            if let Ok(d) = delta_eo(&probs, &labels, &sens, 0.5) {
                prop_assert!((0.0..=1.0).contains(&d));
            }
        }

        #[test]
        fn auc_is_invariant_under_monotone_rescaling((probs, labels, _) in metric_inputs()) {
            // Halving is exact in binary floating point, so the ordering and
            // tie structure carry over bit for bit.
            let halved: Vec<f64> = probs.iter().map(|p| p / 2.0).collect();
            match (auc(&probs, &labels), auc(&halved, &labels)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "one side errored: {:?} vs {:?}", a.is_ok(), b.is_ok()),
            }
        }

        #[test]
        fn group_relabeling_leaves_gaps_unchanged((probs, labels, sens) in metric_inputs()) {
            let flipped: Vec<i8> = sens.iter().map(|&s| 1 - s).collect();
            match (delta_sp(&probs, &sens, 0.5), delta_sp(&probs, &flipped, 0.5)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "flip changed definedness"),
            }
            match (
                delta_eo(&probs, &labels, &sens, 0.5),
                delta_eo(&probs, &labels, &flipped, 0.5),
            ) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "flip changed definedness"),
            }
        }

        #[test]
        fn joint_permutation_leaves_everything_unchanged(
            (probs, labels, sens) in metric_inputs(),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
            let y2: Vec<i8> = order.iter().map(|&i| labels[i]).collect();
            let s2: Vec<i8> = order.iter().map(|&i| sens[i]).collect();
            match (
                MetricsReport::compute(&probs, &labels, &sens, 0.5),
                MetricsReport::compute(&p2, &y2, &s2, 0.5),
            ) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.acc, b.acc);
                    prop_assert!((a.auc - b.auc).abs() < 1e-12);
                    prop_assert_eq!(a.delta_sp, b.delta_sp);
                    prop_assert_eq!(a.delta_eo, b.delta_eo);
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed definedness"),
            }
        }
    }
}
