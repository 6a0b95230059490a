use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fairgnn::config::ExperimentConfig;
use fairgnn::data::{load_tensors, make_splits, write_dataset, SplitSpec};
use fairgnn::graph::{group_ratio, homophily};
use fairgnn::harness::{self, SweepAxis};
use fairgnn::models::{AdversaryParams, GnnParams};
use fairgnn::trainer::{evaluate, FairParams, TrainConfig, TrainData};
use fairgnn::{Error, Result};

/// Fairness-aware graph learning: train, ablate, sweep and report.
#[derive(Parser)]
#[command(name = "fairgnn", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Materialize the configured dataset (and one set of splits) on disk.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Override any config key, e.g. --set dataset.generate.n=500.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Target directory; defaults to <output>/dataset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured model matrix and print the aggregate table.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-evaluate a finished run from its artifacts, without retraining.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// A run directory containing train_config.toml, splits.json and
        /// checkpoint.bin.
        #[arg(long)]
        run: PathBuf,
        /// Which split to score: train, val or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Run the ablation family (full model plus one variant per disabled
    /// ingredient) regardless of the configured model list.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-run the matrix across a grid of one quantity and print the
    /// aggregated CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// One of |V_S|, |V_L|, alpha, beta.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Render the table stored in a results directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Generate { config, set, out } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let dataset = harness::resolve_dataset(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.experiment.output.join("dataset"));
            std::fs::create_dir_all(&dir)?;
            write_dataset(&dir, &dataset.graph)?;
            let splits = make_splits(
                &dataset.graph,
                cfg.splits.n_labeled,
                cfg.splits.n_sens,
                cfg.splits.val_frac,
                cfg.splits.test_frac,
                cfg.experiment.seed,
            )?;
            splits.save(&dir.join("splits.json"))?;
            println!(
                "wrote {} nodes, {} edges to {}",
                dataset.graph.n(),
                dataset.graph.edge_count(),
                dir.display()
            );
            println!(
                "homophily {:.3}, group ratio {:.2}",
                homophily(&dataset.graph)?,
                group_ratio(&dataset.graph)?
            );
        }
        Cmd::Train { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let table = harness::run_experiment(&cfg)?;
            print!("{}", table.render());
            for e in &table.errors {
                eprintln!("cell failed: {} seed {}: {}", e.model, e.seed, e.error);
            }
            eprintln!("results written to {}", cfg.experiment.output.display());
        }
        Cmd::Ablate { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let table = harness::run_ablation(&cfg)?;
            print!("{}", table.render());
            for e in &table.errors {
                eprintln!("cell failed: {} seed {}: {}", e.model, e.seed, e.error);
            }
            eprintln!("results written to {}", cfg.experiment.output.display());
        }
        Cmd::Sweep { config, set, axis, values } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let axis = SweepAxis::parse(&axis)?;
            let csv = harness::sweep(&cfg, axis, &values)?;
            print!("{}", csv);
        }
        Cmd::Evaluate { config, set, run, split } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let dataset = harness::resolve_dataset(&cfg)?;
            let text = std::fs::read_to_string(run.join("train_config.toml"))?;
            let tc: TrainConfig = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("bad train_config.toml: {}", e)))?;
            let splits = SplitSpec::load(&run.join("splits.json"))?;
            let td = TrainData::new(&dataset.graph, &splits)?;
            let mut params = shaped_params(dataset.graph.features().cols(), &tc)?;
            params.assign_named(load_tensors(&run.join("checkpoint.bin"))?)?;
            let indices = match split.as_str() {
                "test" => &splits.test,
                "val" => &splits.val,
                "train" => &splits.train_labeled,
                other => {
                    return Err(Error::Config(format!(
                        "unknown split {:?}; expected train, val or test",
                        other
                    )))
                }
            };
            let report = evaluate(&td, &params, indices, tc.threshold)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Metric(format!("could not encode metrics: {}", e)))?;
            println!("{}", json);
        }
        Cmd::Report { dir } => {
            print!("{}", harness::report(&dir)?);
        }
    }
    Ok(())
}

/// Parameters with the right shapes for a checkpoint to land in.
fn shaped_params(in_dim: usize, cfg: &TrainConfig) -> Result<FairParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let classifier = GnnParams::init(cfg.backbone, in_dim, cfg.hidden, &mut rng)?;
    let adversary = AdversaryParams::init(cfg.hidden, &mut rng)?;
    let estimator = match cfg.sens_source.estimator_backbone() {
        Some(b) => Some(GnnParams::init(b, in_dim, cfg.hidden, &mut rng)?),
        None => None,
    };
    Ok(FairParams { classifier, estimator, adversary })
}
