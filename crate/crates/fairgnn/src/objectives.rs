//! Differentiable training objectives, composed from tape primitives.
//!
//! Every function takes predicted probabilities (column vectors on the tape),
//! restricts them to an index set, and returns a `1x1` loss node. Log inputs
//! are clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]` so saturated probabilities
//! yield large finite losses instead of infinities.

use crate::diffmath::{NodeId, Tape, Tensor};
use crate::{Error, Result};

/// Probability floor/ceiling applied before every logarithm.
pub const CLAMP_EPS: f64 = 1e-7;

/// Scalar values of the objective parts for one forward pass, for logging.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossBundle {
    pub classification: f64,
    pub estimator: f64,
    pub constraint: f64,
    pub adversary: f64,
    pub total: f64,
}

fn expect_column(tape: &Tape, what: &'static str, id: NodeId) -> Result<()> {
    let v = tape.value(id);
    if v.cols() != 1 {
        return Err(Error::Shape {
            op: what,
            detail: format!("expected a column vector, got {}x{}", v.rows(), v.cols()),
        });
    }
    Ok(())
}

/// Targets gathered from hard 0/1 attributes at the given nodes, entered on
/// the tape as a constant column.
fn gathered_targets(tape: &mut Tape, attr: &[i8], nodes: &[usize]) -> Result<NodeId> {
    let mut data = Vec::with_capacity(nodes.len());
    for &i in nodes {
        match attr.get(i) {
            Some(0) => data.push(0.0),
            Some(1) => data.push(1.0),
            Some(&v) => {
                return Err(Error::Data(format!(
                    "node {} has attribute {}, expected 0 or 1",
                    i, v
                )))
            }
            None => {
                return Err(Error::Data(format!(
                    "node {} outside attribute vector of length {}",
                    i,
                    attr.len()
                )))
            }
        }
    }
    Ok(tape.constant(Tensor::from_vec(nodes.len(), 1, data)?))
}

/// Binary cross-entropy of `probs` rows against a target column of the same
/// height, both already restricted to the nodes of interest.
fn bce(tape: &mut Tape, probs: NodeId, targets: NodeId) -> Result<NodeId> {
    let rows = tape.value(probs).rows();
    if tape.value(targets).shape() != (rows, 1) {
        return Err(Error::Shape {
            op: "bce",
            detail: format!(
                "targets {}x{} do not match probabilities {}x1",
                tape.value(targets).rows(),
                tape.value(targets).cols(),
                rows
            ),
        });
    }
    let p = tape.clamp(probs, CLAMP_EPS, 1.0 - CLAMP_EPS)?;
    let ln_p = tape.ln(p)?;
    let neg_p = tape.scalar_mul(p, -1.0)?;
    let one_minus_p = tape.add_scalar(neg_p, 1.0)?;
    let ln_1mp = tape.ln(one_minus_p)?;
    let neg_t = tape.scalar_mul(targets, -1.0)?;
    let one_minus_t = tape.add_scalar(neg_t, 1.0)?;
    let pos_term = tape.mul(targets, ln_p)?;
    let neg_term = tape.mul(one_minus_t, ln_1mp)?;
    let sum = tape.add(pos_term, neg_term)?;
    let all: Vec<usize> = (0..rows).collect();
    let mean = tape.mean_rows(sum, &all)?;
    tape.scalar_mul(mean, -1.0)
}

/// Cross-entropy of the classifier's label probabilities on labeled nodes.
pub fn classification_loss(
    tape: &mut Tape,
    probs: NodeId,
    labels: &[i8],
    nodes: &[usize],
) -> Result<NodeId> {
    expect_column(tape, "classification_loss", probs)?;
    let gathered = tape.gather_rows(probs, nodes)?;
    let targets = gathered_targets(tape, labels, nodes)?;
    bce(tape, gathered, targets)
}

/// Cross-entropy of the sensitive-attribute estimator on nodes where the
/// attribute is observed.
pub fn estimator_loss(
    tape: &mut Tape,
    probs: NodeId,
    sensitive: &[i8],
    nodes: &[usize],
) -> Result<NodeId> {
    expect_column(tape, "estimator_loss", probs)?;
    let gathered = tape.gather_rows(probs, nodes)?;
    let targets = gathered_targets(tape, sensitive, nodes)?;
    bce(tape, gathered, targets)
}

/// Cross-entropy of the adversary's group predictions against (possibly
/// soft) targets that already live on the tape.
pub fn adversary_bce(
    tape: &mut Tape,
    adv_probs: NodeId,
    targets: NodeId,
    nodes: &[usize],
) -> Result<NodeId> {
    expect_column(tape, "adversary_bce", adv_probs)?;
    expect_column(tape, "adversary_bce", targets)?;
    if tape.value(adv_probs).rows() != tape.value(targets).rows() {
        return Err(Error::Shape {
            op: "adversary_bce",
            detail: format!(
                "predictions cover {} nodes, targets cover {}",
                tape.value(adv_probs).rows(),
                tape.value(targets).rows()
            ),
        });
    }
    let gathered_p = tape.gather_rows(adv_probs, nodes)?;
    let gathered_t = tape.gather_rows(targets, nodes)?;
    bce(tape, gathered_p, gathered_t)
}

/// Absolute covariance between estimated group membership and the classifier
/// score over the given nodes, with the population (1/n) normalization.
pub fn covariance_constraint(
    tape: &mut Tape,
    s_hat: NodeId,
    y_hat: NodeId,
    nodes: &[usize],
) -> Result<NodeId> {
    expect_column(tape, "covariance_constraint", s_hat)?;
    expect_column(tape, "covariance_constraint", y_hat)?;
    let s = tape.gather_rows(s_hat, nodes)?;
    let y = tape.gather_rows(y_hat, nodes)?;
    let all: Vec<usize> = (0..nodes.len()).collect();
    let prod = tape.mul(s, y)?;
    let mean_prod = tape.mean_rows(prod, &all)?;
    let mean_s = tape.mean_rows(s, &all)?;
    let mean_y = tape.mean_rows(y, &all)?;
    let prod_of_means = tape.mul(mean_s, mean_y)?;
    let cov = tape.sub(mean_prod, prod_of_means)?;
    tape.abs(cov)
}

/// The quantity minimized over classifier and estimator parameters:
/// classification loss, plus estimator loss when an estimator is present,
/// plus `alpha` times the covariance constraint, minus `beta` times the
/// adversary's loss (driving representations the adversary cannot decode).
pub fn main_objective(
    tape: &mut Tape,
    classification: NodeId,
    estimator: Option<NodeId>,
    constraint: NodeId,
    adversary: NodeId,
    alpha: f64,
    beta: f64,
) -> Result<NodeId> {
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("{} must be non-negative, got {}", name, v)));
        }
    }
    let mut total = classification;
    if let Some(est) = estimator {
        total = tape.add(total, est)?;
    }
    let weighted_constraint = tape.scalar_mul(constraint, alpha)?;
    total = tape.add(total, weighted_constraint)?;
    let weighted_adv = tape.scalar_mul(adversary, beta)?;
    tape.sub(total, weighted_adv)
}
