//! The training loop for fairness-constrained node classification.
//!
//! A run proceeds in two stages. First the group estimator is pretrained on
//! the nodes whose sensitive attribute is observed, with a held-out slice of
//! those nodes used to verify it learned more than the majority rate. Then
//! every epoch performs one alternation: a forward pass of the classifier
//! (and estimator), one Adam step for the adversary against the classifier's
//! current representations, and one Adam step for classifier plus estimator
//! against the combined objective with the adversary frozen.
//!
//! Model selection keeps the epoch with the best validation accuracy among
//! epochs whose validation gaps stay under the configured thresholds,
//! falling back to the best accuracy-minus-gaps score when no epoch
//! qualifies.

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::diffmath::{AdamConfig, AdamState, NodeId, Tape, Tensor};
use crate::graph::{sym_normalize, Graph, NormAdj};
use crate::metrics::MetricsReport;
use crate::models::{self, AdversaryParams, Backbone, GnnParams, DEFAULT_HIDDEN};
use crate::objectives::{
    adversary_bce, classification_loss, covariance_constraint, estimator_loss, main_objective,
    LossBundle,
};
use crate::{Error, Result};

/// Where the fairness terms get their per-node group values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveSource {
    /// A pretrained graph-convolution estimator fills in soft probabilities
    /// for every node outside the observed set.
    EstimatedGcn,
    /// Same, but the estimator ignores the graph.
    EstimatedMlp,
    /// No estimator: the covariance term and the adversary are restricted to
    /// the observed nodes with their true hard values.
    ObservedOnly,
}

impl SensitiveSource {
    pub fn estimator_backbone(self) -> Option<Backbone> {
        match self {
            SensitiveSource::EstimatedGcn => Some(Backbone::Gcn),
            SensitiveSource::EstimatedMlp => Some(Backbone::Mlp),
            SensitiveSource::ObservedOnly => None,
        }
    }
}

/// Every knob of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Classifier aggregation.
    pub backbone: Backbone,
    /// Width of the hidden representation, shared by the estimator.
    pub hidden: usize,
    pub epochs: usize,
    /// Estimator-only epochs before the alternation starts.
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 pull applied to classifier and estimator weights (never the
    /// adversary). Off by default.
    pub weight_decay: f64,
    /// Drop probability for hidden units of the classifier during training.
    /// Off by default.
    pub dropout: f64,
    /// Weight of the covariance constraint.
    pub alpha: f64,
    /// Weight of the adversary term.
    pub beta: f64,
    pub sens_source: SensitiveSource,
    /// Validation parity gap an epoch must stay under to be selectable.
    pub sp_threshold: f64,
    /// Validation opportunity gap an epoch must stay under to be selectable.
    pub eo_threshold: f64,
    /// Decision threshold for turning probabilities into predictions.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            backbone: Backbone::Gcn,
            hidden: DEFAULT_HIDDEN,
            epochs: 1000,
            pretrain_epochs: 200,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            dropout: 0.0,
            alpha: 100.0,
            beta: 1.0,
            sens_source: SensitiveSource::EstimatedGcn,
            sp_threshold: 1.0,
            eo_threshold: 1.0,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_inner(false)
    }

    /// A single step tolerates a zero learning rate (reported losses, frozen
    /// parameters); a full fit does not.
    fn validate_inner(&self, allow_zero_lr: bool) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        let lr_ok = self.lr.is_finite() && if allow_zero_lr { self.lr >= 0.0 } else { self.lr > 0.0 };
        if !lr_ok {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{} must be non-negative, got {}", name, v)));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::Config(format!("{} must lie in [0, 1), got {}", name, b)));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(self.dropout.is_finite() && (0.0..1.0).contains(&self.dropout)) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.sens_source.estimator_backbone().is_some() && self.pretrain_epochs == 0 {
            return Err(Error::Config("pretraining needs at least 1 epoch".into()));
        }
        for (name, t) in [("sp_threshold", self.sp_threshold), ("eo_threshold", self.eo_threshold)] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("{} must be non-negative, got {}", name, t)));
            }
        }
        if !(self.threshold.is_finite() && (0.0..=1.0).contains(&self.threshold)) {
            return Err(Error::Config(format!(
                "decision threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    fn main_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    fn adversary_adam(&self) -> AdamConfig {
        AdamConfig { weight_decay: 0.0, ..self.main_adam() }
    }
}

/// A graph, its normalized adjacency, and validated index sets: everything a
/// run reads.
pub struct TrainData<'a> {
    graph: &'a Graph,
    splits: &'a SplitSpec,
    adj: Arc<NormAdj>,
}

impl<'a> TrainData<'a> {
    pub fn new(graph: &'a Graph, splits: &'a SplitSpec) -> Result<TrainData<'a>> {
        splits.validate(graph)?;
        Ok(TrainData {
            graph,
            splits,
            adj: Arc::new(sym_normalize(graph)),
        })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn splits(&self) -> &SplitSpec {
        self.splits
    }

    pub fn adj(&self) -> &Arc<NormAdj> {
        &self.adj
    }

    fn labels(&self) -> &[i8] {
        self.graph.labels().expect("validated by TrainData::new").as_slice()
    }

    fn sensitive(&self) -> &[i8] {
        self.graph.sensitive().expect("validated by TrainData::new").as_slice()
    }
}

/// Everything one run learns.
#[derive(Clone, Debug, PartialEq)]
pub struct FairParams {
    pub classifier: GnnParams,
    pub estimator: Option<GnnParams>,
    pub adversary: AdversaryParams,
}

impl FairParams {
    /// Tensors named `component.tensor` for checkpointing.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .classifier
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (format!("classifier.{}", n), t))
            .collect();
        if let Some(est) = &self.estimator {
            out.extend(
                est.named_tensors()
                    .into_iter()
                    .map(|(n, t)| (format!("estimator.{}", n), t)),
            );
        }
        out.extend(
            self.adversary
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (format!("adversary.{}", n), t)),
        );
        out
    }

    /// Writes checkpointed tensors back into a structurally matching
    /// parameter set. Every tensor must be present, shaped right, and used.
    pub fn assign_named(&mut self, tensors: Vec<(String, Tensor)>) -> Result<()> {
        let mut map: HashMap<String, Tensor> = tensors.into_iter().collect();
        models::assign_named(self.classifier.named_tensors_mut(), &mut |n| {
            map.remove(&format!("classifier.{}", n))
        })?;
        if let Some(est) = self.estimator.as_mut() {
            models::assign_named(est.named_tensors_mut(), &mut |n| {
                map.remove(&format!("estimator.{}", n))
            })?;
        }
        models::assign_named(self.adversary.named_tensors_mut(), &mut |n| {
            map.remove(&format!("adversary.{}", n))
        })?;
        if let Some(name) = map.keys().next() {
            return Err(Error::Checkpoint(format!(
                "checkpoint tensor {} has no matching parameter",
                name
            )));
        }
        Ok(())
    }
}

/// Held-out diagnostics from estimator pretraining.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainStats {
    /// Accuracy on the held-out slice of the observed nodes.
    pub holdout_acc: f64,
    /// AUC on the same slice; absent when the slice has one group only.
    pub holdout_auc: Option<f64>,
    /// Accuracy of always predicting the slice's larger group.
    pub majority_rate: f64,
    /// Set when the trained estimator failed to beat the majority rate,
    /// meaning downstream fairness terms would run on group guesses that
    /// carry no signal.
    pub no_better_than_majority: bool,
}

/// One epoch of the log: the losses seen by that epoch's update and the
/// validation metrics of the parameters it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBundle,
    pub val: MetricsReport,
}

/// Full history of a fit, plus which epoch's parameters were returned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub pretrain: Option<PretrainStats>,
    pub epochs: Vec<EpochRecord>,
    pub selected_epoch: usize,
}

/// Header of the per-epoch curves CSV.
pub const CURVES_HEADER: &str = "epoch,classification_loss,estimator_loss,constraint_loss,\
                                 adversary_loss,val_acc,val_auc,val_delta_sp,val_delta_eo";

impl TrainLog {
    /// The per-epoch history as CSV.
    pub fn curves_csv(&self) -> String {
        let mut out = String::with_capacity(self.epochs.len() * 64);
        out.push_str(CURVES_HEADER);
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.losses.classification,
                r.losses.estimator,
                r.losses.constraint,
                r.losses.adversary,
                r.val.acc,
                r.val.auc,
                r.val.delta_sp,
                r.val.delta_eo,
            ));
        }
        out
    }
}

/// Output of the forward stage of one step, consumed by the two updates.
struct StepForward {
    tape: Tape,
    /// Classifier then estimator parameter nodes, in optimizer order.
    param_nodes: Vec<NodeId>,
    hidden: NodeId,
    yhat: NodeId,
    est_probs: Option<NodeId>,
    /// Group targets: truth on the observed set, estimates elsewhere.
    merged: Tensor,
}

/// One training job. Owns the parameters and optimizer state; the graph and
/// splits are borrowed.
pub struct Trainer<'a> {
    data: &'a TrainData<'a>,
    cfg: TrainConfig,
    params: FairParams,
    opt_main: Option<AdamState>,
    opt_adv: Option<AdamState>,
    rng: ChaCha8Rng,
    epoch: usize,
    pretrain: Option<PretrainStats>,
    /// Nodes the covariance and adversary terms run over.
    fairness_nodes: Vec<usize>,
}

impl<'a> Trainer<'a> {
    /// Initializes parameters from the seed and pretrains the estimator when
    /// the configuration uses one.
    pub fn new(data: &'a TrainData<'a>, cfg: TrainConfig) -> Result<Trainer<'a>> {
        cfg.validate_inner(true)?;
        let d = data.graph.features().cols();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        // The classifier draws first so runs with and without an estimator
        // start from the same classifier weights under one seed.
        let classifier = GnnParams::init(cfg.backbone, d, cfg.hidden, &mut rng)?;
        let adversary = AdversaryParams::init(cfg.hidden, &mut rng)?;
        let (estimator, pretrain) = match cfg.sens_source.estimator_backbone() {
            Some(backbone) => {
                let mut est = GnnParams::init(backbone, d, cfg.hidden, &mut rng)?;
                let stats = pretrain_core(data, &cfg, &mut est, &mut rng)?;
                (Some(est), Some(stats))
            }
            None => {
                // Fairness terms need observed groups on both sides even
                // without an estimator.
                check_both_groups(data)?;
                (None, None)
            }
        };
        let fairness_nodes = match cfg.sens_source {
            SensitiveSource::ObservedOnly => data.splits.sens_observed.clone(),
            _ => (0..data.graph.n()).collect(),
        };
        let (opt_main, opt_adv) = if cfg.lr > 0.0 {
            (
                Some(AdamState::new(cfg.main_adam())?),
                Some(AdamState::new(cfg.adversary_adam())?),
            )
        } else {
            (None, None)
        };
        Ok(Trainer {
            data,
            cfg,
            params: FairParams { classifier, estimator, adversary },
            opt_main,
            opt_adv,
            rng,
            epoch: 0,
            pretrain,
            fairness_nodes,
        })
    }

    pub fn params(&self) -> &FairParams {
        &self.params
    }

    pub fn pretrain_stats(&self) -> Option<PretrainStats> {
        self.pretrain
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    /// One alternation: forward, adversary update, main update.
    pub fn step(&mut self) -> Result<LossBundle> {
        self.epoch += 1;
        let fwd = self.forward().map_err(|e| self.divergence(e))?;
        self.adversary_phase(&fwd).map_err(|e| self.divergence(e))?;
        self.main_phase(fwd).map_err(|e| self.divergence(e))
    }

    fn divergence(&self, e: Error) -> Error {
        match e {
            Error::NonFinite { op } => Error::Diverged {
                epoch: self.epoch,
                msg: format!("non-finite value in {}", op),
            },
            other => other,
        }
    }

    /// Builds the gradient-carrying forward pass and the merged group
    /// targets for this epoch.
    fn forward(&mut self) -> Result<StepForward> {
        let mut tape = Tape::new();
        let clf_nodes = self.params.classifier.register(&mut tape, true);
        let est_nodes = self
            .params
            .estimator
            .as_ref()
            .map(|e| e.register(&mut tape, true));
        let x = tape.constant(self.data.graph.features().clone());
        let adj = Some(self.data.adj());

        let mut hidden = clf_nodes.hidden(&mut tape, adj, x)?;
        if self.cfg.dropout > 0.0 {
            let mask = self.dropout_mask(tape.value(hidden).rows(), tape.value(hidden).cols());
            let mask = tape.constant(mask);
            hidden = tape.mul(hidden, mask)?;
        }
        let yhat = clf_nodes.head(&mut tape, hidden)?;

        let mut param_nodes = clf_nodes.all.clone();
        let est_probs = match &est_nodes {
            Some(nodes) => {
                let h = nodes.hidden(&mut tape, adj, x)?;
                let p = nodes.head(&mut tape, h)?;
                param_nodes.extend(&nodes.all);
                Some(p)
            }
            None => None,
        };

        let merged = self.merged_targets(est_probs.map(|p| tape.value(p)));
        Ok(StepForward { tape, param_nodes, hidden, yhat, est_probs, merged })
    }

    /// Group targets for the fairness terms: ground truth on the observed
    /// set, estimator probabilities elsewhere (zero without an estimator;
    /// those rows are never read).
    fn merged_targets(&self, est_probs: Option<&Tensor>) -> Tensor {
        let n = self.data.graph.n();
        let mut values = match est_probs {
            Some(p) => p.data().to_vec(),
            None => vec![0.0; n],
        };
        let sens = self.data.sensitive();
        for &i in &self.data.splits.sens_observed {
            values[i] = sens[i] as f64;
        }
        Tensor::from_vec(n, 1, values).expect("probabilities and labels are finite")
    }

    fn dropout_mask(&mut self, rows: usize, cols: usize) -> Tensor {
        let keep = 1.0 - self.cfg.dropout;
        let scale = 1.0 / keep;
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| if self.rng.random_bool(keep) { scale } else { 0.0 })
            .collect();
        Tensor::from_vec(rows, cols, data).expect("mask values are finite")
    }

    /// One Adam step for the adversary on this epoch's fixed representations
    /// and targets. Touches no classifier or estimator state.
    fn adversary_phase(&mut self, fwd: &StepForward) -> Result<()> {
        let mut tape = Tape::new();
        let hidden = tape.constant(fwd.tape.value(fwd.hidden).clone());
        let targets = tape.constant(fwd.merged.clone());
        let adv_nodes = self.params.adversary.register(&mut tape, true);
        let probs = adv_nodes.forward(&mut tape, hidden)?;
        let loss = adversary_bce(&mut tape, probs, targets, &self.fairness_nodes)?;
        if let Some(opt) = self.opt_adv.as_mut() {
            let mut grads = tape.backward(loss)?;
            let grad_list: Vec<Option<Tensor>> =
                adv_nodes.all.iter().map(|&id| grads.take(id)).collect();
            let mut tensors: Vec<&mut Tensor> = self
                .params
                .adversary
                .named_tensors_mut()
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            opt.step(&mut tensors, &grad_list)?;
        }
        Ok(())
    }

    /// One Adam step for classifier and estimator against the combined
    /// objective, with the (just-updated) adversary frozen.
    ///
    /// The merged targets stay differentiable here: on nodes without an
    /// observed attribute they are the estimator's output, so the estimator
    /// receives gradient from the covariance and adversary terms, not just
    /// from its own supervised loss.
    fn main_phase(&mut self, fwd: StepForward) -> Result<LossBundle> {
        let StepForward { mut tape, param_nodes, hidden, yhat, est_probs, merged } = fwd;
        let adv_nodes = self.params.adversary.register(&mut tape, false);
        let adv_probs = adv_nodes.forward(&mut tape, hidden)?;
        let targets = match est_probs {
            Some(p) => merge_on_tape(&mut tape, p, self.data)?,
            None => tape.constant(merged),
        };

        let l_c = classification_loss(
            &mut tape,
            yhat,
            self.data.labels(),
            &self.data.splits.train_labeled,
        )?;
        let l_e = match est_probs {
            Some(p) => Some(estimator_loss(
                &mut tape,
                p,
                self.data.sensitive(),
                &self.data.splits.sens_observed,
            )?),
            None => None,
        };
        let l_r = covariance_constraint(&mut tape, targets, yhat, &self.fairness_nodes)?;
        let l_a = adversary_bce(&mut tape, adv_probs, targets, &self.fairness_nodes)?;
        let total = main_objective(&mut tape, l_c, l_e, l_r, l_a, self.cfg.alpha, self.cfg.beta)?;

        let bundle = LossBundle {
            classification: tape.value(l_c).as_scalar()?,
            estimator: l_e.map(|id| tape.value(id).as_scalar()).transpose()?.unwrap_or(0.0),
            constraint: tape.value(l_r).as_scalar()?,
            adversary: tape.value(l_a).as_scalar()?,
            total: tape.value(total).as_scalar()?,
        };

        if let Some(opt) = self.opt_main.as_mut() {
            let mut grads = tape.backward(total)?;
            let grad_list: Vec<Option<Tensor>> =
                param_nodes.iter().map(|&id| grads.take(id)).collect();
            let mut tensors: Vec<&mut Tensor> = self
                .params
                .classifier
                .named_tensors_mut()
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            if let Some(est) = self.params.estimator.as_mut() {
                tensors.extend(est.named_tensors_mut().into_iter().map(|(_, t)| t));
            }
            opt.step(&mut tensors, &grad_list)?;
        }
        Ok(bundle)
    }
}

/// Replaces the observed rows of the estimator's output with ground truth
/// while keeping the unobserved rows differentiable: output ⊙ mask + truth,
/// with both mask and truth constant.
fn merge_on_tape(tape: &mut Tape, est_probs: NodeId, data: &TrainData) -> Result<NodeId> {
    let n = data.graph.n();
    let mut mask = vec![1.0; n];
    let mut truth = vec![0.0; n];
    let sens = data.sensitive();
    for &i in &data.splits.sens_observed {
        mask[i] = 0.0;
        truth[i] = sens[i] as f64;
    }
    let mask = tape.constant(Tensor::from_vec(n, 1, mask).expect("mask values are finite"));
    let truth = tape.constant(Tensor::from_vec(n, 1, truth).expect("labels are finite"));
    let masked = tape.mul(est_probs, mask)?;
    tape.add(masked, truth)
}

fn check_both_groups(data: &TrainData) -> Result<()> {
    let sens = data.sensitive();
    let ones = data
        .splits
        .sens_observed
        .iter()
        .filter(|&&i| sens[i] == 1)
        .count();
    if ones == 0 || ones == data.splits.sens_observed.len() {
        return Err(Error::Data(
            "observed sensitive attributes are all one group; nothing to compare against".into(),
        ));
    }
    Ok(())
}

/// Pretrains a freshly initialized estimator. Exposed for direct inspection;
/// [`fit`] performs the same pretraining internally.
pub fn pretrain_estimator(data: &TrainData, cfg: &TrainConfig) -> Result<(GnnParams, PretrainStats)> {
    cfg.validate()?;
    let Some(backbone) = cfg.sens_source.estimator_backbone() else {
        return Err(Error::Config(
            "this configuration runs without an estimator; nothing to pretrain".into(),
        ));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut est = GnnParams::init(backbone, data.graph.features().cols(), cfg.hidden, &mut rng)?;
    let stats = pretrain_core(data, cfg, &mut est, &mut rng)?;
    Ok((est, stats))
}

/// Trains `est` in place on the observed nodes minus a held-out quarter,
/// then scores it on the holdout.
fn pretrain_core(
    data: &TrainData,
    cfg: &TrainConfig,
    est: &mut GnnParams,
    rng: &mut ChaCha8Rng,
) -> Result<PretrainStats> {
    check_both_groups(data)?;
    let sens = data.sensitive();

    // Stratified holdout: a quarter of each group (at least one node when
    // the group has two or more), so the check sees both groups whenever
    // the data allows it.
    let mut train: Vec<usize> = Vec::new();
    let mut holdout: Vec<usize> = Vec::new();
    for group in [0i8, 1] {
        let mut members: Vec<usize> = data
            .splits
            .sens_observed
            .iter()
            .copied()
            .filter(|&i| sens[i] == group)
            .collect();
        members.shuffle(rng);
        let take = if members.len() >= 2 { (members.len() / 4).max(1) } else { 0 };
        holdout.extend(&members[..take]);
        train.extend(&members[take..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    if holdout.is_empty() {
        // Two observed nodes total: score on the training pair instead of
        // skipping the check.
        holdout = train.clone();
    }

    let mut opt = if cfg.lr > 0.0 { Some(AdamState::new(cfg.main_adam())?) } else { None };
    let adj = Some(data.adj());
    for _ in 0..cfg.pretrain_epochs {
        let mut tape = Tape::new();
        let nodes = est.register(&mut tape, true);
        let x = tape.constant(data.graph.features().clone());
        let (_, probs) = nodes.forward(&mut tape, adj, x)?;
        let loss = estimator_loss(&mut tape, probs, sens, &train)?;
        if let Some(opt) = opt.as_mut() {
            let mut grads = tape.backward(loss)?;
            let grad_list: Vec<Option<Tensor>> =
                nodes.all.iter().map(|&id| grads.take(id)).collect();
            let mut tensors: Vec<&mut Tensor> =
                est.named_tensors_mut().into_iter().map(|(_, t)| t).collect();
            opt.step(&mut tensors, &grad_list)?;
        }
    }

    // Holdout diagnostics against the majority-group null predictor.
    let probs = forward_probs(data, est)?;
    let p: Vec<f64> = holdout.iter().map(|&i| probs[i]).collect();
    let g: Vec<i8> = holdout.iter().map(|&i| sens[i]).collect();
    let ones = g.iter().filter(|&&v| v == 1).count();
    let majority_rate = ones.max(g.len() - ones) as f64 / g.len() as f64;
    let holdout_acc = crate::metrics::accuracy(&p, &g, 0.5)?;
    let holdout_auc = crate::metrics::auc(&p, &g).ok();
    Ok(PretrainStats {
        holdout_acc,
        holdout_auc,
        majority_rate,
        no_better_than_majority: holdout_acc <= majority_rate,
    })
}

/// Clean full-graph forward pass (no dropout), returning per-node
/// probabilities.
fn forward_probs(data: &TrainData, params: &GnnParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let nodes = params.register(&mut tape, false);
    let x = tape.constant(data.graph.features().clone());
    let (_, probs) = nodes.forward(&mut tape, Some(data.adj()), x)?;
    Ok(tape.value(probs).data().to_vec())
}

/// Metrics of the classifier on the given nodes, using ground-truth labels
/// and groups.
pub fn evaluate(
    data: &TrainData,
    params: &FairParams,
    indices: &[usize],
    threshold: f64,
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::Metric("cannot evaluate an empty index set".into()));
    }
    let labels = data
        .graph
        .labels()
        .ok_or_else(|| Error::Data("evaluation needs labels".into()))?;
    let sens = data
        .graph
        .sensitive()
        .ok_or_else(|| Error::Data("evaluation needs sensitive attributes".into()))?;
    let probs = forward_probs(data, &params.classifier)?;
    let p: Vec<f64> = indices.iter().map(|&i| probs[i]).collect();
    let y: Vec<i8> = indices.iter().map(|&i| labels[i]).collect();
    let s: Vec<i8> = indices.iter().map(|&i| sens[i]).collect();
    MetricsReport::compute(&p, &y, &s, threshold)
}

/// Runs the full schedule and returns the selected parameters plus the log.
///
/// Selection prefers the epoch with the highest validation accuracy among
/// epochs whose validation gaps are below the configured thresholds; when no
/// epoch qualifies it falls back to the highest accuracy minus the sum of
/// both gaps. Earlier epochs win ties.
pub fn fit(data: &TrainData, cfg: &TrainConfig) -> Result<(FairParams, TrainLog)> {
    cfg.validate()?;
    let mut trainer = Trainer::new(data, cfg.clone())?;
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_compliant: Option<(f64, usize, FairParams)> = None;
    let mut best_fallback: Option<(f64, usize, FairParams)> = None;
    for epoch in 1..=cfg.epochs {
        let losses = trainer.step()?;
        let val = evaluate(data, trainer.params(), &data.splits.val, cfg.threshold)?;
        if val.delta_sp < cfg.sp_threshold && val.delta_eo < cfg.eo_threshold {
            let better = best_compliant.as_ref().is_none_or(|(acc, ..)| val.acc > *acc);
            if better {
                best_compliant = Some((val.acc, epoch, trainer.params().clone()));
            }
        }
        let score = val.acc - (val.delta_sp + val.delta_eo);
        let better = best_fallback.as_ref().is_none_or(|(s, ..)| score > *s);
        if better {
            best_fallback = Some((score, epoch, trainer.params().clone()));
        }
        records.push(EpochRecord { epoch, losses, val });
    }
    let (_, selected_epoch, params) = best_compliant
        .or(best_fallback)
        .expect("at least one epoch ran");
    let log = TrainLog {
        pretrain: trainer.pretrain_stats(),
        epochs: records,
        selected_epoch,
    };
    Ok((params, log))
}
