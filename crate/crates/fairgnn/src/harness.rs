//! Experiment execution: runs each configured model for the configured
//! number of repeats, writes one artifact directory per run, aggregates the
//! results, and renders them.
//!
//! Every run directory is self-contained: the effective training config,
//! the sampled splits, the training curves, the final checkpoint, and the
//! test metrics. A failed cell (one model at one seed) records its error
//! and never aborts the rest of the matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelKind, SplitConfig};
use crate::data::{
    load_dataset, make_splits, save_tensors, synth_biased_graph, write_dataset, Dataset,
    Provenance,
};
use crate::metrics::MetricsReport;
use crate::trainer::{evaluate, fit, TrainConfig, TrainData};
use crate::{Error, Result};

/// Metric keys, in the order they appear in every artifact.
pub const METRICS: [&str; 4] = ["acc", "auc", "delta_sp", "delta_eo"];

fn metric_value(r: &MetricsReport, key: &str) -> f64 {
    match key {
        "acc" => r.acc,
        "auc" => r.auc,
        "delta_sp" => r.delta_sp,
        "delta_eo" => r.delta_eo,
        other => unreachable!("unknown metric {}", other),
    }
}

/// What one successful run reports, as written to its `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(flatten)]
    pub report: MetricsReport,
    pub seed: u64,
    pub epochs_ran: usize,
    pub selected_epoch: usize,
}

/// A failed cell: which model, which seed, what happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub model: String,
    pub seed: u64,
    pub error: String,
}

/// One aggregate line: a model's mean and standard deviation for one metric
/// over its successful repeats. `mean`/`std` are absent when every repeat
/// failed.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub repeats: usize,
}

/// Aggregated results plus any per-cell failures.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
    pub errors: Vec<CellError>,
}

const CSV_HEADER: &str = "model,metric,mean,std,repeats";

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            match (r.mean, r.std) {
                (Some(m), Some(s)) => {
                    out.push_str(&format!("{},{},{},{},{}\n", r.model, r.metric, m, s, r.repeats))
                }
                _ => out.push_str(&format!("{},{},,,{}\n", r.model, r.metric, r.repeats)),
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ResultsTable> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end() == CSV_HEADER => {}
            other => {
                return Err(Error::Data(format!(
                    "results file must start with {:?}, found {:?}",
                    CSV_HEADER, other
                )))
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Data(format!(
                    "results row {} has {} fields, expected 5",
                    idx + 2,
                    fields.len()
                )));
            }
            let parse = |what: &str, s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>().map(Some).map_err(|_| {
                    Error::Data(format!("results row {}: bad {} {:?}", idx + 2, what, s))
                })
            };
            let repeats: usize = fields[4].trim_end().parse().map_err(|_| {
                Error::Data(format!("results row {}: bad repeat count {:?}", idx + 2, fields[4]))
            })?;
            rows.push(TableRow {
                model: fields[0].to_string(),
                metric: fields[1].to_string(),
                mean: parse("mean", fields[2])?,
                std: parse("std", fields[3])?,
                repeats,
            });
        }
        Ok(ResultsTable { rows, errors: Vec::new() })
    }

    /// Monospace table: one row per model, one column per metric, cells as
    /// percentages with one decimal place, `—` where every repeat failed.
    pub fn render(&self) -> String {
        let headers = ["model", "ACC", "AUC", "ΔSP", "ΔEO"];
        let mut models: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !models.contains(&r.model.as_str()) {
                models.push(&r.model);
            }
        }
        let mut grid: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
        for m in &models {
            let mut line = vec![m.to_string()];
            for key in METRICS {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.model == *m && r.metric == key)
                    .and_then(|r| Some((r.mean?, r.std?)))
                    .map(|(mean, std)| format!("{:.1} ± {:.1}", mean * 100.0, std * 100.0))
                    .unwrap_or_else(|| "—".to_string());
                line.push(cell);
            }
            grid.push(line);
        }
        let mut widths = [0usize; 5];
        for line in &grid {
            for (w, cell) in widths.iter_mut().zip(line) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        for line in &grid {
            let mut rendered = String::new();
            for (i, cell) in line.iter().enumerate() {
                rendered.push_str(cell);
                if i + 1 < line.len() {
                    let pad = widths[i] - cell.chars().count() + 2;
                    rendered.extend(std::iter::repeat_n(' ', pad));
                }
            }
            out.push_str(rendered.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Builds the dataset a config points at, generating or loading files.
pub fn resolve_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if let Some(spec) = &cfg.dataset.generate {
        return synth_biased_graph(spec);
    }
    match &cfg.dataset.files {
        Some(f) => load_dataset(&f.features, &f.edges, &f.labels, &f.sensitive),
        None => Err(Error::Config("config has no dataset source".into())),
    }
}

/// Runs the whole matrix. Writes, under the configured output directory:
/// the config echo, the generated dataset (when applicable), one directory
/// per run, `results.csv`, the rendered `table.txt`, and `errors.json` when
/// any cell failed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    cfg.validate()?;
    let out = &cfg.experiment.output;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let dataset = resolve_dataset(cfg)?;
    if matches!(dataset.provenance, Provenance::Generated(_)) {
        let dir = out.join("dataset");
        fs::create_dir_all(&dir)?;
        write_dataset(&dir, &dataset.graph)?;
    }

    let mut outcomes: Vec<(ModelKind, Vec<(u64, Result<RunMetrics>)>)> = Vec::new();
    for &kind in &cfg.experiment.models {
        let base = cfg.train_config_for(kind)?;
        let mut cells = Vec::new();
        for i in 0..cfg.experiment.repeat {
            let mut tc = base.clone();
            tc.seed = cfg.experiment.seed + i as u64;
            let dir = out
                .join("runs")
                .join(kind.dir_name())
                .join(format!("seed{}", tc.seed));
            cells.push((tc.seed, run_cell(&dataset, &tc, &cfg.splits, &dir)));
        }
        outcomes.push((kind, cells));
    }

    let table = aggregate(outcomes);
    fs::write(out.join("results.csv"), table.to_csv())?;
    fs::write(out.join("table.txt"), table.render())?;
    if !table.errors.is_empty() {
        let json = serde_json::to_string_pretty(&table.errors)
            .map_err(|e| Error::Data(format!("could not encode cell errors: {}", e)))?;
        fs::write(out.join("errors.json"), json + "\n")?;
    }
    Ok(table)
}

/// Trains one cell and writes its artifact directory. The repeat seed drives
/// both the split draw and training, so repeats measure the variance of the
/// whole pipeline rather than of initialization alone.
fn run_cell(
    data: &Dataset,
    tc: &TrainConfig,
    sc: &SplitConfig,
    dir: &Path,
) -> Result<RunMetrics> {
    fs::create_dir_all(dir)?;
    let echo = toml::to_string_pretty(tc)
        .map_err(|e| Error::Config(format!("unserializable training config: {}", e)))?;
    fs::write(dir.join("train_config.toml"), echo)?;
    let splits = make_splits(
        &data.graph,
        sc.n_labeled,
        sc.n_sens,
        sc.val_frac,
        sc.test_frac,
        tc.seed,
    )?;
    splits.save(&dir.join("splits.json"))?;
    let td = TrainData::new(&data.graph, &splits)?;
    let (params, log) = fit(&td, tc)?;
    fs::write(dir.join("curves.csv"), log.curves_csv())?;
    save_tensors(&dir.join("checkpoint.bin"), &params.named_tensors())?;
    let report = evaluate(&td, &params, &splits.test, tc.threshold)?;
    let run = RunMetrics {
        report,
        seed: tc.seed,
        epochs_ran: log.epochs.len(),
        selected_epoch: log.selected_epoch,
    };
    let json = serde_json::to_string_pretty(&run)
        .map_err(|e| Error::Data(format!("could not encode metrics: {}", e)))?;
    fs::write(dir.join("metrics.json"), json + "\n")?;
    Ok(run)
}

fn aggregate(outcomes: Vec<(ModelKind, Vec<(u64, Result<RunMetrics>)>)>) -> ResultsTable {
    let mut table = ResultsTable::default();
    for (kind, cells) in outcomes {
        let mut ok = Vec::new();
        for (seed, cell) in cells {
            match cell {
                Ok(m) => ok.push(m),
                Err(e) => table.errors.push(CellError {
                    model: kind.name().to_string(),
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        for key in METRICS {
            let values: Vec<f64> = ok.iter().map(|m| metric_value(&m.report, key)).collect();
            let (mean, std) = if values.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&values);
                (Some(m), Some(s))
            };
            table.rows.push(TableRow {
                model: kind.name().to_string(),
                metric: key.to_string(),
                mean,
                std,
                repeats: values.len(),
            });
        }
    }
    table
}

/// Sample mean and standard deviation (n − 1 denominator; zero for a single
/// value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// The standard ablation family: the full model plus one variant per
/// disabled ingredient.
pub const ABLATION_MODELS: [ModelKind; 5] = [
    ModelKind::FairGcn,
    ModelKind::FairGcnNoAdversary,
    ModelKind::FairGcnNoCovariance,
    ModelKind::FairGcnNoEstimator,
    ModelKind::FairGcnMlpEstimator,
];

/// Runs the ablation family instead of the configured model list.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    let mut sub = cfg.clone();
    sub.experiment.models = ABLATION_MODELS.to_vec();
    run_experiment(&sub)
}

/// A swept quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Size of the observed-sensitive training set.
    SensCount,
    /// Size of the labeled training set.
    LabeledCount,
    Alpha,
    Beta,
}

impl SweepAxis {
    /// The token used in the emitted CSV's `axis` column.
    pub fn token(self) -> &'static str {
        match self {
            SweepAxis::SensCount => "|V_S|",
            SweepAxis::LabeledCount => "|V_L|",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
        }
    }

    /// Directory-safe name.
    fn dir_name(self) -> &'static str {
        match self {
            SweepAxis::SensCount => "v_s",
            SweepAxis::LabeledCount => "v_l",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
        }
    }

    pub fn parse(s: &str) -> Result<SweepAxis> {
        match s {
            "|V_S|" | "v_s" | "V_S" => Ok(SweepAxis::SensCount),
            "|V_L|" | "v_l" | "V_L" => Ok(SweepAxis::LabeledCount),
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            other => Err(Error::Config(format!(
                "unknown sweep axis {:?}; expected |V_S|, |V_L|, alpha or beta",
                other
            ))),
        }
    }

    /// Rewrites one config for one grid value. Count axes must get whole
    /// numbers. Weight axes clear per-model overrides of the swept key so
    /// the grid value actually reaches every cell.
    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> Result<()> {
        let as_count = |value: f64| -> Result<usize> {
            if value.fract() != 0.0 || value < 1.0 || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{} sweep needs whole positive values, got {}",
                    self.token(),
                    value
                )));
            }
            Ok(value as usize)
        };
        match self {
            SweepAxis::SensCount => cfg.splits.n_sens = as_count(value)?,
            SweepAxis::LabeledCount => cfg.splits.n_labeled = as_count(value)?,
            SweepAxis::Alpha => {
                cfg.train.alpha = value;
                for table in cfg.models.values_mut() {
                    table.remove("alpha");
                }
            }
            SweepAxis::Beta => {
                cfg.train.beta = value;
                for table in cfg.models.values_mut() {
                    table.remove("beta");
                }
            }
        }
        Ok(())
    }
}

/// Runs the matrix once per grid value and emits one aggregate CSV with
/// columns `axis,value,model,metric,mean,std`. Sub-experiments land under
/// `<output>/sweep/<axis>/<value>/`; the CSV is also written to
/// `<output>/sweep_<axis>.csv`.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<String> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut csv = String::from("axis,value,model,metric,mean,std\n");
    for &value in values {
        if !value.is_finite() {
            return Err(Error::Config(format!("sweep value {} is not finite", value)));
        }
        let mut sub = cfg.clone();
        axis.apply(&mut sub, value)?;
        sub.experiment.output = cfg
            .experiment
            .output
            .join("sweep")
            .join(axis.dir_name())
            .join(value.to_string());
        let table = run_experiment(&sub)?;
        for row in &table.rows {
            match (row.mean, row.std) {
                (Some(m), Some(s)) => csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    axis.token(),
                    value,
                    row.model,
                    row.metric,
                    m,
                    s
                )),
                _ => csv.push_str(&format!(
                    "{},{},{},{},,\n",
                    axis.token(),
                    value,
                    row.model,
                    row.metric
                )),
            }
        }
    }
    fs::create_dir_all(&cfg.experiment.output)?;
    fs::write(
        cfg.experiment
            .output
            .join(format!("sweep_{}.csv", axis.dir_name())),
        &csv,
    )?;
    Ok(csv)
}

/// Renders the table stored in a results directory.
pub fn report(results_dir: &Path) -> Result<String> {
    let path = results_dir.join("results.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("cannot read {}: {}", path.display(), e)))?;
    let table = ResultsTable::from_csv(&text)?;
    Ok(table.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(output: &Path) -> String {
        format!(
            r#"
            [dataset.generate]
            n = 240
            feature_dim = 6
            group_ratio = 1.5
            homophily = 0.8
            label_bias = 0.1
            mu_label = 1.5
            mu_sens = 1.5
            noise = 0.5
            avg_degree = 4.0
            seed = 3

            [splits]
            n_labeled = 60
            n_sens = 40
            val_frac = 0.25
            test_frac = 0.25

            [experiment]
            models = ["GCN"]
            repeat = 1
            seed = 0
            output = {:?}

            [train]
            hidden = 8
            epochs = 4
            pretrain_epochs = 3
            lr = 0.02
            "#,
            output.display()
        )
    }

    #[test]
    fn one_model_one_repeat_writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("exp");
        let cfg = ExperimentConfig::from_toml(&tiny_config(&out), &[]).unwrap();
        let table = run_experiment(&cfg).unwrap();

        assert!(table.errors.is_empty(), "{:?}", table.errors);
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows.iter().all(|r| r.repeats == 1 && r.std == Some(0.0)));

        for file in ["config.toml", "results.csv", "table.txt"] {
            assert!(out.join(file).is_file(), "missing {}", file);
        }
        assert!(out.join("dataset").join("features.csv").is_file());
        let run = out.join("runs").join("GCN").join("seed0");
        for file in [
            "train_config.toml",
            "splits.json",
            "metrics.json",
            "curves.csv",
            "checkpoint.bin",
        ] {
            assert!(run.join(file).is_file(), "missing {}", file);
        }

        let metrics: RunMetrics =
            serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
        assert_eq!(metrics.seed, 0);
        assert_eq!(metrics.epochs_ran, 4);
        assert!(metrics.report.acc.is_finite());
        // The JSON keys are flat, exactly as consumers expect.
        let raw: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
        for key in ["acc", "auc", "delta_sp", "delta_eo", "group_stats", "seed", "epochs_ran", "selected_epoch"] {
            assert!(raw.get(key).is_some(), "metrics.json lacks {}", key);
        }

        let rendered = fs::read_to_string(out.join("table.txt")).unwrap();
        assert!(rendered.contains("GCN"));
        let csv = fs::read_to_string(out.join("results.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("model,metric,mean,std,repeats\n"));
    }

    #[test]
    fn failed_cells_are_recorded_without_aborting() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("exp");
        // More labeled nodes than the graph has: every cell fails at split
        // sampling, but the run completes and documents it.
        let over = vec!["splits.n_labeled=5000".to_string(), "experiment.repeat=2".to_string()];
        let cfg = ExperimentConfig::from_toml(&tiny_config(&out), &over).unwrap();
        let table = run_experiment(&cfg).unwrap();

        assert_eq!(table.errors.len(), 2);
        assert!(table.errors[0].error.contains("labeled"));
        assert_eq!(table.errors.iter().map(|e| e.seed).collect::<Vec<_>>(), vec![0, 1]);
        assert!(table.rows.iter().all(|r| r.repeats == 0 && r.mean.is_none()));

        let csv = fs::read_to_string(out.join("results.csv")).unwrap();
        assert!(csv.contains("GCN,acc,,,0\n"), "{}", csv);
        assert!(out.join("errors.json").is_file());
        let rendered = fs::read_to_string(out.join("table.txt")).unwrap();
        assert!(rendered.contains("—"), "{}", rendered);
    }

    #[test]
    fn identical_configs_write_identical_results() {
        let tmp = tempfile::tempdir().unwrap();
        let over = vec![
            "experiment.models=[\"GCN\", \"FairGCN\"]".to_string(),
            "experiment.repeat=2".to_string(),
        ];
        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        let cfg_a = ExperimentConfig::from_toml(&tiny_config(&out_a), &over).unwrap();
        let cfg_b = ExperimentConfig::from_toml(&tiny_config(&out_b), &over).unwrap();
        let table_a = run_experiment(&cfg_a).unwrap();
        let table_b = run_experiment(&cfg_b).unwrap();
        assert!(table_a.errors.is_empty(), "{:?}", table_a.errors);
        assert_eq!(table_a, table_b);

        let csv_a = fs::read(out_a.join("results.csv")).unwrap();
        let csv_b = fs::read(out_b.join("results.csv")).unwrap();
        assert_eq!(csv_a, csv_b);
        let m_a = fs::read(out_a.join("runs/FairGCN/seed1/metrics.json")).unwrap();
        let m_b = fs::read(out_b.join("runs/FairGCN/seed1/metrics.json")).unwrap();
        assert_eq!(m_a, m_b);
        let c_a = fs::read(out_a.join("runs/FairGCN/seed0/curves.csv")).unwrap();
        let c_b = fs::read(out_b.join("runs/FairGCN/seed0/curves.csv")).unwrap();
        assert_eq!(c_a, c_b);
    }

    #[test]
    fn ablation_family_echoes_its_forced_flags() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("abl");
        let over = vec![
            "train.epochs=2".to_string(),
            "train.pretrain_epochs=2".to_string(),
            "train.hidden=4".to_string(),
            "train.alpha=3.0".to_string(),
            "train.beta=2.0".to_string(),
            "experiment.repeat=1".to_string(),
        ];
        let cfg = ExperimentConfig::from_toml(&tiny_config(&out), &over).unwrap();
        let table = run_ablation(&cfg).unwrap();
        assert!(table.errors.is_empty(), "{:?}", table.errors);
        assert_eq!(table.rows.len(), ABLATION_MODELS.len() * 4);

        let echo = |dir: &str| -> TrainConfig {
            let text =
                fs::read_to_string(out.join("runs").join(dir).join("seed0/train_config.toml"))
                    .unwrap();
            toml::from_str(&text).unwrap()
        };
        assert_eq!(echo("FairGCN_A").beta, 0.0);
        assert_eq!(echo("FairGCN_A").alpha, 3.0);
        assert_eq!(echo("FairGCN_C").alpha, 0.0);
        assert_eq!(echo("FairGCN_C").beta, 2.0);
        let no_est = echo("FairGCN_E");
        assert_eq!(no_est.sens_source, crate::trainer::SensitiveSource::ObservedOnly);
        let mlp_est = echo("FairGCN-MLPest");
        assert_eq!(mlp_est.sens_source, crate::trainer::SensitiveSource::EstimatedMlp);
    }

    #[test]
    fn single_value_sweep_matches_a_direct_run() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("sw");
        let over = vec![
            "experiment.models=[\"FairGCN\"]".to_string(),
            "train.epochs=2".to_string(),
            "train.pretrain_epochs=2".to_string(),
            "train.hidden=4".to_string(),
        ];
        let cfg = ExperimentConfig::from_toml(&tiny_config(&out), &over).unwrap();
        let csv = sweep(&cfg, SweepAxis::Alpha, &[0.5]).unwrap();

        let direct_out = tmp.path().join("direct");
        let mut direct_over = over.clone();
        direct_over.push("train.alpha=0.5".to_string());
        let direct_cfg =
            ExperimentConfig::from_toml(&tiny_config(&direct_out), &direct_over).unwrap();
        let direct = run_experiment(&direct_cfg).unwrap();

        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "axis,value,model,metric,mean,std");
        assert_eq!(lines.len(), 1 + 4);
        for (line, row) in lines[1..].iter().zip(&direct.rows) {
            let expect = format!(
                "alpha,0.5,{},{},{},{}",
                row.model,
                row.metric,
                row.mean.unwrap(),
                row.std.unwrap()
            );
            assert_eq!(*line, expect);
        }
        assert!(out.join("sweep_alpha.csv").is_file());
        assert!(out.join("sweep/alpha/0.5/results.csv").is_file());
    }

    #[test]
    fn sweep_axes_parse_and_validate() {
        assert_eq!(SweepAxis::parse("|V_S|").unwrap(), SweepAxis::SensCount);
        assert_eq!(SweepAxis::parse("v_l").unwrap(), SweepAxis::LabeledCount);
        assert_eq!(SweepAxis::parse("alpha").unwrap(), SweepAxis::Alpha);
        assert_eq!(SweepAxis::parse("beta").unwrap(), SweepAxis::Beta);
        assert!(SweepAxis::parse("gamma").is_err());

        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(&tiny_config(&tmp.path().join("x")), &[]).unwrap();
        assert!(sweep(&cfg, SweepAxis::SensCount, &[2.5]).is_err());
        assert!(sweep(&cfg, SweepAxis::SensCount, &[0.0]).is_err());
        assert!(sweep(&cfg, SweepAxis::Alpha, &[]).is_err());
        assert!(sweep(&cfg, SweepAxis::Alpha, &[f64::NAN]).is_err());
    }

    #[test]
    fn rendering_matches_the_golden_table() {
        let table = ResultsTable {
            rows: vec![
                TableRow { model: "MLP".into(), metric: "acc".into(), mean: Some(0.653), std: Some(0.012), repeats: 5 },
                TableRow { model: "MLP".into(), metric: "auc".into(), mean: Some(0.701), std: Some(0.008), repeats: 5 },
                TableRow { model: "MLP".into(), metric: "delta_sp".into(), mean: Some(0.032), std: Some(0.004), repeats: 5 },
                TableRow { model: "MLP".into(), metric: "delta_eo".into(), mean: Some(0.029), std: Some(0.006), repeats: 5 },
                TableRow { model: "FairGCN\\E".into(), metric: "acc".into(), mean: None, std: None, repeats: 0 },
                TableRow { model: "FairGCN\\E".into(), metric: "auc".into(), mean: None, std: None, repeats: 0 },
                TableRow { model: "FairGCN\\E".into(), metric: "delta_sp".into(), mean: None, std: None, repeats: 0 },
                TableRow { model: "FairGCN\\E".into(), metric: "delta_eo".into(), mean: None, std: None, repeats: 0 },
            ],
            errors: Vec::new(),
        };
        let golden = "model      ACC         AUC         ΔSP        ΔEO\n\
                      MLP        65.3 ± 1.2  70.1 ± 0.8  3.2 ± 0.4  2.9 ± 0.6\n\
                      FairGCN\\E  —           —           —          —\n";
        assert_eq!(table.render(), golden);

        // Round trip through the CSV form keeps the rendering identical.
        let parsed = ResultsTable::from_csv(&table.to_csv()).unwrap();
        assert_eq!(parsed.render(), golden);

        // No models: header only.
        let empty = ResultsTable::default();
        assert_eq!(empty.render(), "model  ACC  AUC  ΔSP  ΔEO\n");
    }

    #[test]
    fn report_reads_a_results_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let csv = "model,metric,mean,std,repeats\nGCN,acc,0.5,0.1,5\n";
        fs::write(tmp.path().join("results.csv"), csv).unwrap();
        let rendered = report(tmp.path()).unwrap();
        assert!(rendered.contains("50.0 ± 10.0"), "{}", rendered);
        assert!(report(&tmp.path().join("missing")).is_err());

        fs::write(tmp.path().join("results.csv"), "wrong,header\n").unwrap();
        assert!(report(tmp.path()).is_err());
        fs::write(tmp.path().join("results.csv"), "model,metric,mean,std,repeats\nbad,row\n")
            .unwrap();
        assert!(report(tmp.path()).is_err());
    }
}
