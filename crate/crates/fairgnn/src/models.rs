//! Model parameter containers and tape-level forward passes.
//!
//! Three building blocks cover every configuration: a one-hidden-layer
//! network over node features (plain, convolutional, or attention-based
//! aggregation), a sigmoid prediction head, and a linear adversary that
//! reads the hidden representation. Parameters live in plain structs;
//! each training step registers them on a fresh tape.

use std::sync::Arc;

use rand::Rng;

use crate::diffmath::{NodeId, Tape, Tensor};
use crate::graph::NormAdj;
use crate::{Error, Result};

/// Hidden width used when a configuration does not override it.
pub const DEFAULT_HIDDEN: usize = 128;

/// Negative slope of the attention nonlinearity.
pub const LEAKY_SLOPE: f64 = 0.2;

/// How the hidden layer aggregates over the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// Feature-only: ignores the graph entirely.
    Mlp,
    /// Symmetric-normalized neighborhood averaging.
    Gcn,
    /// Single-head additive attention over neighborhoods.
    Gat,
}

/// Parameters of one backbone plus its sigmoid head.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnParams {
    backbone: Backbone,
    w1: Tensor,
    b1: Tensor,
    attn_src: Option<Tensor>,
    attn_dst: Option<Tensor>,
    w_out: Tensor,
    b_out: Tensor,
}

/// Tape handles for one registered parameter set.
pub struct GnnNodes {
    backbone: Backbone,
    w1: NodeId,
    b1: NodeId,
    attn_src: Option<NodeId>,
    attn_dst: Option<NodeId>,
    w_out: NodeId,
    b_out: NodeId,
    /// All parameter nodes in [`GnnParams::named_tensors`] order.
    pub all: Vec<NodeId>,
}

impl GnnParams {
    /// Fresh parameters. Weight matrices are Glorot-uniform, biases zero.
    /// Attention vectors are drawn only for the attention backbone, so the
    /// random stream of the other backbones is unaffected by its extras.
    pub fn init(backbone: Backbone, in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Result<GnnParams> {
        if in_dim == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got input {} and hidden {}",
                in_dim, hidden
            )));
        }
        let w1 = Tensor::glorot_uniform(in_dim, hidden, rng);
        let (attn_src, attn_dst) = if backbone == Backbone::Gat {
            (
                Some(Tensor::glorot_uniform(hidden, 1, rng)),
                Some(Tensor::glorot_uniform(hidden, 1, rng)),
            )
        } else {
            (None, None)
        };
        let w_out = Tensor::glorot_uniform(hidden, 1, rng);
        Ok(GnnParams {
            backbone,
            w1,
            b1: Tensor::zeros(1, hidden),
            attn_src,
            attn_dst,
            w_out,
            b_out: Tensor::zeros(1, 1),
        })
    }

    pub fn backbone(&self) -> Backbone {
        self.backbone
    }

    pub fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    /// Stable name/tensor pairs, the serialization and optimizer order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = vec![("w1", &self.w1), ("b1", &self.b1)];
        if let (Some(s), Some(d)) = (&self.attn_src, &self.attn_dst) {
            out.push(("attn_src", s));
            out.push(("attn_dst", d));
        }
        out.push(("w_out", &self.w_out));
        out.push(("b_out", &self.b_out));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out = vec![("w1", &mut self.w1), ("b1", &mut self.b1)];
        if let (Some(s), Some(d)) = (&mut self.attn_src, &mut self.attn_dst) {
            out.push(("attn_src", s));
            out.push(("attn_dst", d));
        }
        out.push(("w_out", &mut self.w_out));
        out.push(("b_out", &mut self.b_out));
        out
    }

    /// Put every tensor on the tape, as trainable parameters or constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> GnnNodes {
        let mut put = |t: &Tensor| {
            if trainable {
                tape.parameter(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let w1 = put(&self.w1);
        let b1 = put(&self.b1);
        let attn_src = self.attn_src.as_ref().map(&mut put);
        let attn_dst = self.attn_dst.as_ref().map(&mut put);
        let w_out = put(&self.w_out);
        let b_out = put(&self.b_out);
        let mut all = vec![w1, b1];
        all.extend(attn_src);
        all.extend(attn_dst);
        all.push(w_out);
        all.push(b_out);
        GnnNodes {
            backbone: self.backbone,
            w1,
            b1,
            attn_src,
            attn_dst,
            w_out,
            b_out,
            all,
        }
    }
}

impl GnnNodes {
    /// Hidden representation of every node, `n x hidden`.
    pub fn hidden(&self, tape: &mut Tape, adj: Option<&Arc<NormAdj>>, x: NodeId) -> Result<NodeId> {
        let pre = match self.backbone {
            Backbone::Mlp => tape.matmul(x, self.w1)?,
            Backbone::Gcn => {
                let adj = require_adj(adj, "neighborhood averaging")?;
                let support = tape.matmul(x, self.w1)?;
                tape.spmm(adj, support)?
            }
            Backbone::Gat => {
                let adj = require_adj(adj, "attention aggregation")?;
                let z = tape.matmul(x, self.w1)?;
                let attn_src = self.attn_src.expect("attention backbone has attn_src");
                let attn_dst = self.attn_dst.expect("attention backbone has attn_dst");
                let s_src = tape.matmul(z, attn_src)?;
                let s_dst = tape.matmul(z, attn_dst)?;
                let raw = tape.edge_score(adj, s_src, s_dst)?;
                let scores = tape.leaky_relu(raw, LEAKY_SLOPE)?;
                let att = tape.neighbor_softmax(adj, scores)?;
                tape.edge_spmm(adj, att, z)?
            }
        };
        let biased = tape.add_row_bias(pre, self.b1)?;
        tape.relu(biased)
    }

    /// Sigmoid head over a hidden representation, `n x 1` probabilities.
    pub fn head(&self, tape: &mut Tape, hidden: NodeId) -> Result<NodeId> {
        let logits = tape.matmul(hidden, self.w_out)?;
        let biased = tape.add_row_bias(logits, self.b_out)?;
        tape.sigmoid(biased)
    }

    /// Full pass: `(hidden, probabilities)`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        adj: Option<&Arc<NormAdj>>,
        x: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let h = self.hidden(tape, adj, x)?;
        let p = self.head(tape, h)?;
        Ok((h, p))
    }
}

fn require_adj<'a>(adj: Option<&'a Arc<NormAdj>>, what: &str) -> Result<&'a Arc<NormAdj>> {
    adj.ok_or_else(|| Error::Invalid(format!("{} needs a normalized adjacency", what)))
}

/// The linear group predictor read off the hidden representation.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryParams {
    w: Tensor,
    b: Tensor,
}

/// Tape handles for a registered adversary.
pub struct AdversaryNodes {
    w: NodeId,
    b: NodeId,
    pub all: Vec<NodeId>,
}

impl AdversaryParams {
    pub fn init(hidden: usize, rng: &mut impl Rng) -> Result<AdversaryParams> {
        if hidden == 0 {
            return Err(Error::Config("adversary input width must be positive".into()));
        }
        Ok(AdversaryParams {
            w: Tensor::glorot_uniform(hidden, 1, rng),
            b: Tensor::zeros(1, 1),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("w", &self.w), ("b", &self.b)]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("w", &mut self.w), ("b", &mut self.b)]
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> AdversaryNodes {
        let mut put = |t: &Tensor| {
            if trainable {
                tape.parameter(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let w = put(&self.w);
        let b = put(&self.b);
        AdversaryNodes { w, b, all: vec![w, b] }
    }
}

impl AdversaryNodes {
    /// Group-membership probabilities from a hidden representation.
    pub fn forward(&self, tape: &mut Tape, hidden: NodeId) -> Result<NodeId> {
        let logits = tape.matmul(hidden, self.w)?;
        let biased = tape.add_row_bias(logits, self.b)?;
        tape.sigmoid(biased)
    }
}

/// Writes values into named tensors, shape-checked, for checkpoint loading.
pub fn assign_named(
    targets: Vec<(&'static str, &mut Tensor)>,
    source: &mut dyn FnMut(&str) -> Option<Tensor>,
) -> Result<()> {
    for (name, slot) in targets {
        let Some(value) = source(name) else {
            return Err(Error::Checkpoint(format!("missing tensor {}", name)));
        };
        if value.shape() != slot.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {:?}, expected {:?}",
                name,
                value.shape(),
                slot.shape()
            )));
        }
        *slot = value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sym_normalize, Graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn zeroed(mut params: GnnParams) -> GnnParams {
        for (_, t) in params.named_tensors_mut() {
            for v in t.data_mut() {
                *v = 0.0;
            }
        }
        params
    }

    fn path_graph(n: usize, feat: Vec<f64>) -> (Graph, Arc<NormAdj>) {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let dim = feat.len() / n;
        let g = Graph::build(n, &edges, Tensor::from_vec(n, dim, feat).unwrap()).unwrap();
        let adj = Arc::new(sym_normalize(&g));
        (g, adj)
    }

    #[test]
    fn zero_parameters_predict_exactly_half() {
        let (_, adj) = path_graph(3, vec![1.0, -2.0, 3.0]);
        for backbone in [Backbone::Mlp, Backbone::Gcn, Backbone::Gat] {
            let params = zeroed(GnnParams::init(backbone, 1, 4, &mut rng(0)).unwrap());
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::from_vec(3, 1, vec![1.0, -2.0, 3.0]).unwrap());
            let nodes = params.register(&mut tape, false);
            let (_, probs) = nodes.forward(&mut tape, Some(&adj), x).unwrap();
            assert!(tape.value(probs).data().iter().all(|&p| p == 0.5), "{:?}", backbone);
        }
    }

    #[test]
    fn identity_adjacency_reduces_convolution_to_feature_network() {
        let mut r = rng(7);
        let gcn = GnnParams::init(Backbone::Gcn, 3, 5, &mut r).unwrap();
        let mlp = GnnParams {
            backbone: Backbone::Mlp,
            ..gcn.clone()
        };
        let x_data = Tensor::from_vec(4, 3, (0..12).map(|i| (i as f64) * 0.3 - 1.7).collect()).unwrap();
        let id = Arc::new(NormAdj::identity(4));

        let mut t1 = Tape::new();
        let x1 = t1.constant(x_data.clone());
        let n1 = gcn.register(&mut t1, false);
        let (_, p1) = n1.forward(&mut t1, Some(&id), x1).unwrap();

        let mut t2 = Tape::new();
        let x2 = t2.constant(x_data);
        let n2 = mlp.register(&mut t2, false);
        let (_, p2) = n2.forward(&mut t2, None, x2).unwrap();

        assert_eq!(t1.value(p1), t2.value(p2));
    }

    #[test]
    fn two_node_convolution_matches_hand_numbers() {
        // Both normalized entries are 1/2, weights are identity-like, so the
        // hidden value at each node is the mean of the two features.
        let (_, adj) = path_graph(2, vec![1.0, 2.0]);
        let mut params = GnnParams::init(Backbone::Gcn, 1, 1, &mut rng(0)).unwrap();
        for (name, t) in params.named_tensors_mut() {
            let fill = match name {
                "w1" | "w_out" => 1.0,
                _ => 0.0,
            };
            for v in t.data_mut() {
                *v = fill;
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(2, 1, vec![1.0, 2.0]).unwrap());
        let nodes = params.register(&mut tape, false);
        let (h, p) = nodes.forward(&mut tape, Some(&adj), x).unwrap();
        assert_eq!(tape.value(h).data(), &[1.5, 1.5]);
        let expect = 1.0 / (1.0 + (-1.5f64).exp());
        assert!((tape.value(p).get(0, 0) - expect).abs() < 1e-15);
        assert!((tape.value(p).get(1, 0) - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_attention_scores_average_the_neighborhood() {
        // With attention vectors zeroed, every edge in a neighborhood gets
        // equal weight, so the hidden value is the plain neighborhood mean
        // of the projected features.
        let (_, adj) = path_graph(3, vec![3.0, 6.0, 9.0]);
        let mut params = GnnParams::init(Backbone::Gat, 1, 1, &mut rng(0)).unwrap();
        for (name, t) in params.named_tensors_mut() {
            let fill = match name {
                "w1" | "w_out" => 1.0,
                _ => 0.0,
            };
            for v in t.data_mut() {
                *v = fill;
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(3, 1, vec![3.0, 6.0, 9.0]).unwrap());
        let nodes = params.register(&mut tape, false);
        let (h, _) = nodes.forward(&mut tape, Some(&adj), x).unwrap();
        // Neighborhoods with self-loops: {0,1}, {0,1,2}, {1,2}.
        assert_eq!(tape.value(h).data(), &[4.5, 6.0, 7.5]);
    }

    #[test]
    fn attention_follows_the_score_vector() {
        // attn_dst rewards the projected feature of the source of the mass,
        // so node 1 (neighbors 0, 1, 2) should tilt toward node 2.
        let (_, adj) = path_graph(3, vec![1.0, 2.0, 4.0]);
        let mut params = GnnParams::init(Backbone::Gat, 1, 1, &mut rng(0)).unwrap();
        for (name, t) in params.named_tensors_mut() {
            let fill = match name {
                "w1" | "w_out" => 1.0,
                "attn_dst" => 5.0,
                _ => 0.0,
            };
            for v in t.data_mut() {
                *v = fill;
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(3, 1, vec![1.0, 2.0, 4.0]).unwrap());
        let nodes = params.register(&mut tape, false);
        let (h, _) = nodes.forward(&mut tape, Some(&adj), x).unwrap();
        // Node 1 attends over z = {1, 2, 4} with weights softmax(5z).
        let zs = [1.0f64, 2.0, 4.0];
        let mx = 20.0;
        let exps: Vec<f64> = zs.iter().map(|z| (5.0 * z - mx).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let expect: f64 = zs.iter().zip(&exps).map(|(z, e)| z * e / denom).sum();
        assert!((tape.value(h).get(1, 0) - expect).abs() < 1e-12);
        // The winner takes nearly all the mass.
        assert!(tape.value(h).get(1, 0) > 3.99);
    }

    #[test]
    fn adversary_is_the_documented_linear_model() {
        let mut adv = AdversaryParams::init(2, &mut rng(3)).unwrap();
        for (name, t) in adv.named_tensors_mut() {
            let fill = if name == "w" { 1.0 } else { 0.25 };
            for v in t.data_mut() {
                *v = fill;
            }
        }
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::from_vec(2, 2, vec![0.1, 0.2, -0.3, 0.05]).unwrap());
        let nodes = adv.register(&mut tape, false);
        let p = nodes.forward(&mut tape, h).unwrap();
        let expect0 = 1.0 / (1.0 + f64::exp(-(0.1 + 0.2 + 0.25)));
        let expect1 = 1.0 / (1.0 + f64::exp(-(-0.3 + 0.05 + 0.25)));
        assert!((tape.value(p).get(0, 0) - expect0).abs() < 1e-15);
        assert!((tape.value(p).get(1, 0) - expect1).abs() < 1e-15);
    }

    #[test]
    fn relabeling_nodes_permutes_predictions() {
        // Permutation equivariance: rebuilding the graph under a node
        // relabeling permutes the output probabilities accordingly.
        let feats = vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5];
        let edges = [(0usize, 1usize), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)];
        let g1 = Graph::build(6, &edges, Tensor::from_vec(6, 1, feats.clone()).unwrap()).unwrap();
        let adj1 = Arc::new(sym_normalize(&g1));
        let perm = [3usize, 5, 0, 1, 4, 2]; // old -> new
        let edges2: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut feats2 = vec![0.0; 6];
        for (old, &new) in perm.iter().enumerate() {
            feats2[new] = feats[old];
        }
        let g2 = Graph::build(6, &edges2, Tensor::from_vec(6, 1, feats2.clone()).unwrap()).unwrap();
        let adj2 = Arc::new(sym_normalize(&g2));

        for backbone in [Backbone::Gcn, Backbone::Gat] {
            let params = GnnParams::init(backbone, 1, 3, &mut rng(11)).unwrap();
            let mut t1 = Tape::new();
            let x1 = t1.constant(Tensor::from_vec(6, 1, feats.clone()).unwrap());
            let n1 = params.register(&mut t1, false);
            let (_, p1) = n1.forward(&mut t1, Some(&adj1), x1).unwrap();
            let mut t2 = Tape::new();
            let x2 = t2.constant(Tensor::from_vec(6, 1, feats2.clone()).unwrap());
            let n2 = params.register(&mut t2, false);
            let (_, p2) = n2.forward(&mut t2, Some(&adj2), x2).unwrap();
            for old in 0..6 {
                let a = t1.value(p1).get(old, 0);
                let b = t2.value(p2).get(perm[old], 0);
                assert!((a - b).abs() < 1e-12, "{:?} node {}: {} vs {}", backbone, old, a, b);
            }
        }
    }

    #[test]
    fn trainable_registration_exposes_every_parameter() {
        let params = GnnParams::init(Backbone::Gat, 2, 3, &mut rng(1)).unwrap();
        let mut tape = Tape::new();
        let nodes = params.register(&mut tape, true);
        assert_eq!(nodes.all.len(), 6);
        assert_eq!(params.named_tensors().len(), 6);
        let gcn = GnnParams::init(Backbone::Gcn, 2, 3, &mut rng(1)).unwrap();
        assert_eq!(gcn.named_tensors().len(), 4);
    }

    #[test]
    fn init_is_reproducible_and_size_checked() {
        let a = GnnParams::init(Backbone::Gcn, 4, 8, &mut rng(42)).unwrap();
        let b = GnnParams::init(Backbone::Gcn, 4, 8, &mut rng(42)).unwrap();
        assert_eq!(a, b);
        assert!(GnnParams::init(Backbone::Gcn, 0, 8, &mut rng(0)).is_err());
        assert!(AdversaryParams::init(0, &mut rng(0)).is_err());
    }
}
