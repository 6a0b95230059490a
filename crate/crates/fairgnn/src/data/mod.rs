//! Dataset files, splits, synthetic graph generation, and checkpoints.

use std::path::PathBuf;

use crate::graph::Graph;

mod checkpoint;
mod files;
mod splits;
mod synth;

pub use checkpoint::{load_tensors, save_tensors};
pub use files::{load_dataset, read_dataset, write_dataset};
pub use splits::{make_splits, SplitSpec};
pub use synth::{synth_biased_graph, GenSpec};

/// A graph together with a record of where it came from, so every run
/// directory can state exactly what it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    /// Built by [`synth_biased_graph`] from these parameters.
    Generated(GenSpec),
    /// Loaded from these files.
    Files {
        features: PathBuf,
        edges: PathBuf,
        labels: PathBuf,
        sensitive: PathBuf,
    },
}

impl Dataset {
    /// Per-node labels; -1 where missing. Present on every generated
    /// dataset, optional on loaded ones.
    pub fn labels(&self) -> Option<&[i8]> {
        self.graph.labels().map(|v| v.as_slice())
    }

    /// Per-node sensitive attribute; -1 where missing.
    pub fn sensitive(&self) -> Option<&[i8]> {
        self.graph.sensitive().map(|v| v.as_slice())
    }
}
