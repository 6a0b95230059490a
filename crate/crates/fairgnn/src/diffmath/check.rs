//! Gradient verification by central finite differences.

use crate::diffmath::{NodeId, Tape, Tensor};
use crate::{Error, Result};

/// Outcome of a sweep over every entry of every checked parameter.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(1, |analytic|)` seen.
    pub max_rel_err: f64,
    /// Parameter index and flat entry index where the maximum occurred.
    pub worst: (usize, usize),
    /// Total number of entries compared.
    pub entries: usize,
}

/// Compares reverse-mode gradients against central differences.
///
/// `build_loss` must register the given parameter values on the fresh tape
/// (in order) and return a `1x1` loss node. It is called once per probe with
/// perturbed copies, so it must be deterministic in the parameter values.
pub fn finite_diff_check<F>(params: &[Tensor], epsilon: f64, mut build_loss: F) -> Result<GradCheck>
where
    F: FnMut(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if params.is_empty() {
        return Err(Error::Invalid("gradient check needs at least one parameter".into()));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Invalid(format!("step size must be positive, got {}", epsilon)));
    }

    let mut eval = |vals: &[Tensor], want_grads: bool| -> Result<(f64, Option<Vec<Tensor>>)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = vals.iter().map(|t| tape.parameter(t.clone())).collect();
        let loss = build_loss_checked(&mut tape, &ids, &mut build_loss)?;
        let value = tape.value(loss).as_scalar()?;
        if !want_grads {
            return Ok((value, None));
        }
        let mut grads = tape.backward(loss)?;
        let collected = ids
            .iter()
            .zip(vals)
            .map(|(&id, p)| grads.take(id).unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
            .collect();
        Ok((value, Some(collected)))
    };

    let (_, analytic) = eval(params, true)?;
    let analytic = analytic.expect("gradients requested");

    let mut work: Vec<Tensor> = params.to_vec();
    let mut max_rel_err = 0.0;
    let mut worst = (0, 0);
    let mut entries = 0;
    for pi in 0..params.len() {
        for k in 0..params[pi].len() {
            let orig = params[pi].data()[k];
            work[pi].data_mut()[k] = orig + epsilon;
            let (plus, _) = eval(&work, false)?;
            work[pi].data_mut()[k] = orig - epsilon;
            let (minus, _) = eval(&work, false)?;
            work[pi].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[pi].data()[k];
            let rel = (a - numeric).abs() / f64::max(1.0, a.abs());
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (pi, k);
            }
            entries += 1;
        }
    }
    Ok(GradCheck { max_rel_err, worst, entries })
}

fn build_loss_checked<F>(tape: &mut Tape, ids: &[NodeId], build_loss: &mut F) -> Result<NodeId>
where
    F: FnMut(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let loss = build_loss(tape, ids)?;
    if tape.value(loss).shape() != (1, 1) {
        let (r, c) = tape.value(loss).shape();
        return Err(Error::Shape {
            op: "finite_diff_check",
            detail: format!("loss must be 1x1, got {}x{}", r, c),
        });
    }
    Ok(loss)
}
