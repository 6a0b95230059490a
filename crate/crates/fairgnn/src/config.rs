//! Experiment configuration: a TOML file with sections for the dataset
//! source, split sizes, the experiment matrix, and training knobs, plus
//! `--set section.key=value` overrides applied before parsing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::GenSpec;
use crate::models::Backbone;
use crate::trainer::{SensitiveSource, TrainConfig};
use crate::{Error, Result};

/// A cell of the experiment matrix. The name decides the backbone and which
/// fairness machinery is active; remaining knobs come from the config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Feature-only baseline.
    Mlp,
    /// Graph convolution baseline.
    Gcn,
    /// Graph attention baseline.
    Gat,
    /// Full model on a convolutional backbone.
    FairGcn,
    /// Full model on an attention backbone.
    FairGat,
    /// Fairness terms restricted to observed attributes, no estimator.
    FairGcnNoEstimator,
    /// Adversary weight forced to zero.
    FairGcnNoAdversary,
    /// Covariance weight forced to zero.
    FairGcnNoCovariance,
    /// Estimator that ignores the graph.
    FairGcnMlpEstimator,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Mlp,
        ModelKind::Gcn,
        ModelKind::Gat,
        ModelKind::FairGcn,
        ModelKind::FairGat,
        ModelKind::FairGcnNoEstimator,
        ModelKind::FairGcnNoAdversary,
        ModelKind::FairGcnNoCovariance,
        ModelKind::FairGcnMlpEstimator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::Gcn => "GCN",
            ModelKind::Gat => "GAT",
            ModelKind::FairGcn => "FairGCN",
            ModelKind::FairGat => "FairGAT",
            ModelKind::FairGcnNoEstimator => "FairGCN\\E",
            ModelKind::FairGcnNoAdversary => "FairGCN\\A",
            ModelKind::FairGcnNoCovariance => "FairGCN\\C",
            ModelKind::FairGcnMlpEstimator => "FairGCN-MLPest",
        }
    }

    /// Filesystem-safe variant of the name, used for run directories.
    pub fn dir_name(self) -> String {
        self.name().replace('\\', "_")
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown model {:?}; expected one of {}", s, names.join(", ")))
            })
    }

    /// Whether any fairness term can be active for this cell.
    pub fn is_fair(self) -> bool {
        !matches!(self, ModelKind::Mlp | ModelKind::Gcn | ModelKind::Gat)
    }

    /// Forces the fields this cell's identity pins down. Plain baselines
    /// also select purely on validation accuracy, so their selection gates
    /// are opened regardless of the configured thresholds.
    pub fn apply(self, mut cfg: TrainConfig) -> TrainConfig {
        match self {
            ModelKind::Mlp | ModelKind::Gcn | ModelKind::Gat => {
                cfg.backbone = match self {
                    ModelKind::Mlp => Backbone::Mlp,
                    ModelKind::Gcn => Backbone::Gcn,
                    _ => Backbone::Gat,
                };
                cfg.alpha = 0.0;
                cfg.beta = 0.0;
                cfg.sens_source = SensitiveSource::ObservedOnly;
                cfg.sp_threshold = 1.0;
                cfg.eo_threshold = 1.0;
            }
            ModelKind::FairGcn => {
                cfg.backbone = Backbone::Gcn;
                cfg.sens_source = SensitiveSource::EstimatedGcn;
            }
            ModelKind::FairGat => {
                cfg.backbone = Backbone::Gat;
                cfg.sens_source = SensitiveSource::EstimatedGcn;
            }
            ModelKind::FairGcnNoEstimator => {
                cfg.backbone = Backbone::Gcn;
                cfg.sens_source = SensitiveSource::ObservedOnly;
            }
            ModelKind::FairGcnNoAdversary => {
                cfg.backbone = Backbone::Gcn;
                cfg.sens_source = SensitiveSource::EstimatedGcn;
                cfg.beta = 0.0;
            }
            ModelKind::FairGcnNoCovariance => {
                cfg.backbone = Backbone::Gcn;
                cfg.sens_source = SensitiveSource::EstimatedGcn;
                cfg.alpha = 0.0;
            }
            ModelKind::FairGcnMlpEstimator => {
                cfg.backbone = Backbone::Gcn;
                cfg.sens_source = SensitiveSource::EstimatedMlp;
            }
        }
        cfg
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ModelKind, D::Error> {
        let s = String::deserialize(d)?;
        ModelKind::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Paths of the four dataset files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePaths {
    pub features: PathBuf,
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub sensitive: PathBuf,
}

/// Exactly one of a generator spec or a set of files.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub files: Option<FilePaths>,
}

/// How many nodes land in each index set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Size of the labeled training set.
    pub n_labeled: usize,
    /// Size of the observed-sensitive set.
    pub n_sens: usize,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> SplitConfig {
        SplitConfig { n_labeled: 500, n_sens: 200, val_frac: 0.25, test_frac: 0.25 }
    }
}

impl SplitConfig {
    fn validate(&self) -> Result<()> {
        if self.n_labeled == 0 || self.n_sens == 0 {
            return Err(Error::Config("split sizes must be at least 1".into()));
        }
        for (name, f) in [("val_frac", self.val_frac), ("test_frac", self.test_frac)] {
            if !(f.is_finite() && f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{} must lie in (0, 1), got {}", name, f)));
            }
        }
        if self.val_frac + self.test_frac >= 1.0 {
            return Err(Error::Config(format!(
                "val_frac + test_frac must stay under 1, got {}",
                self.val_frac + self.test_frac
            )));
        }
        Ok(())
    }
}

fn default_repeat() -> usize {
    5
}

/// Which cells run, how often, and where results land.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub models: Vec<ModelKind>,
    /// Independent repeats per cell; repeat i uses seed `seed + i`.
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

/// The whole experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub splits: SplitConfig,
    pub experiment: ExperimentSection,
    /// Base training knobs shared by every model.
    #[serde(default)]
    pub train: TrainConfig,
    /// Per-model overrides, keyed by model name, merged over `train`
    /// key-by-key before the model's identity is applied.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub models: BTreeMap<String, toml::Table>,
}

impl ExperimentConfig {
    /// Parses a TOML string after applying `--set` overrides.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("bad experiment file: {}", e)))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("bad experiment config: {}", e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.generate, &self.dataset.files) {
            (Some(spec), None) => spec.validate()?,
            (None, Some(_)) => {}
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset.generate and dataset.files are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "dataset needs either a [dataset.generate] or a [dataset.files] section".into(),
                ))
            }
        }
        self.splits.validate()?;
        if self.experiment.models.is_empty() {
            return Err(Error::Config("model list must not be empty".into()));
        }
        let mut seen = Vec::new();
        for &m in &self.experiment.models {
            if seen.contains(&m) {
                return Err(Error::Config(format!("model {} listed twice", m)));
            }
            seen.push(m);
        }
        if self.experiment.repeat == 0 {
            return Err(Error::Config("repeat must be at least 1".into()));
        }
        self.train.validate()?;
        for name in self.models.keys() {
            ModelKind::parse(name)?;
        }
        // Surface bad override keys or values now, not mid-run.
        for &m in &self.experiment.models {
            self.train_config_for(m)?;
        }
        Ok(())
    }

    /// The effective training configuration of one cell: base knobs, then
    /// the model's override table, then the fields its identity pins.
    pub fn train_config_for(&self, kind: ModelKind) -> Result<TrainConfig> {
        let mut table = toml::Table::try_from(&self.train)
            .map_err(|e| Error::Config(format!("unserializable train section: {}", e)))?;
        if let Some(over) = self.models.get(kind.name()) {
            for (k, v) in over {
                table.insert(k.clone(), v.clone());
            }
        }
        let cfg: TrainConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("bad training config for {}: {}", kind, e)))?;
        let cfg = kind.apply(cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Applies one `section.key=value` override to a parsed TOML tree, creating
/// intermediate tables as needed. Values parse as TOML scalars (or arrays),
/// falling back to a plain string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {:?} is not of the form key=value", spec)))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override {:?} has an empty key segment", spec)));
    }
    let mut current = table;
    for k in &keys[..keys.len() - 1] {
        let entry = current
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override {:?} descends into non-table key {}", spec, k))
        })?;
    }
    current.insert(keys[keys.len() - 1].to_string(), parse_scalar(raw));
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(t) = format!("v = {}", raw).parse::<toml::Table>() {
        if let Some(v) = t.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}
