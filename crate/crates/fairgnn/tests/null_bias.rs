//! Control experiment: with no planted label bias and no group-aligned
//! feature direction, a trained GCN should show no meaningful parity gap.
//! Guards against the generator or the pipeline manufacturing bias on its own.

use fairgnn::config::ExperimentConfig;
use fairgnn::harness::run_experiment;
use std::path::Path;

fn median_sp(out: &Path, model_dir: &str, repeats: u64) -> f64 {
    let mut vals: Vec<f64> = (0..repeats)
        .map(|s| {
            let path = out
                .join("runs")
                .join(model_dir)
                .join(format!("seed{}", s))
                .join("metrics.json");
            let text = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("{}: {}", path.display(), e));
            serde_json::from_str::<serde_json::Value>(&text).expect("metrics decode")["delta_sp"]
                .as_f64()
                .expect("numeric metric")
        })
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
    vals[vals.len() / 2]
}

#[test]
fn gcn_parity_gap_stays_small_without_planted_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("null");
    let text = format!(
        r#"
        [dataset.generate]
        n = 2000
        feature_dim = 24
        group_ratio = 2.5
        homophily = 0.95
        label_bias = 0.0
        mu_label = 0.7
        mu_sens = 0.0
        noise = 1.2
        avg_degree = 10.0
        seed = 7

        [splits]
        n_labeled = 300
        n_sens = 100
        val_frac = 0.2
        test_frac = 0.5

        [experiment]
        models = ["GCN"]
        repeat = 5
        seed = 0
        output = {out:?}

        [train]
        hidden = 64
        epochs = 300
        lr = 0.005
        "#,
        out = out.display().to_string(),
    );
    let cfg = ExperimentConfig::from_toml(&text, &[]).unwrap();
    let table = run_experiment(&cfg).unwrap();
    assert!(table.errors.is_empty(), "cells failed: {:?}", table.errors);

    let sp = median_sp(&out, "GCN", 5);
    assert!(
        sp < 0.05,
        "median test parity gap {} on unbiased data; the pipeline is inventing bias",
        sp
    );
}
