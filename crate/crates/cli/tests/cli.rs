use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use faultzone::casegen::{self, Scenario, SplitName};
use faultzone::wavefeat::{read_features_csv, write_features_csv, FeatureVector, FEATURE_LEN};

fn faultzone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faultzone")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Features that separate the zones along the first three coordinates,
/// drawn from base-split cases and from cases outside it.
fn synthetic_features(path: &Path) -> (Vec<u64>, Vec<u64>) {
    let base: BTreeSet<u64> = casegen::split_ids(Scenario::One, SplitName::Base).into_iter().collect();
    let mut train: Vec<u64> = Vec::new();
    for zone in casegen::Zone::ALL {
        let of_zone = base.iter().copied().filter(|&id| casegen::decode(Scenario::One, id).unwrap().zone() == zone);
        train.extend(of_zone.step_by(7).take(30));
    }
    train.sort_unstable();
    let test: Vec<u64> = (0..28_800u64).filter(|id| !base.contains(id)).step_by(97).collect();
    let rows: Vec<FeatureVector> = train
        .iter()
        .chain(&test)
        .map(|&id| {
            let zone = casegen::decode(Scenario::One, id).unwrap().zone();
            let mut values = vec![0.0; FEATURE_LEN];
            values[zone.index()] = 1.0;
            values[3 + (id % 50) as usize] = 0.05;
            FeatureVector { case_id: id, zone, values }
        })
        .collect();
    write_features_csv(path, &rows).unwrap();
    (train, test)
}

#[test]
fn default_config_is_accepted_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = faultzone(&["default-config"]);
    assert!(out.status.success());
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let params = faultzone(&["--config", p(&cfg), "params"]);
    assert!(params.status.success(), "{}", String::from_utf8_lossy(&params.stderr));
    let v: serde_json::Value = serde_json::from_slice(&params.stdout).unwrap();
    assert_eq!(v["frequency"], 50.0);
    assert!(v["z_series"].is_array());
}

#[test]
fn train_then_evaluate_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("features.csv");
    let (train, test) = synthetic_features(&feats);
    let model = dir.path().join("model.json");
    for strategy in ["oaa", "oao"] {
        let out = faultzone(&[
            "train",
            "--features",
            p(&feats),
            "--scenario",
            "1",
            "--split",
            "base",
            "--strategy",
            strategy,
            "--c",
            "10",
            "--g",
            "1",
            "--out",
            p(&model),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let rep = dir.path().join(format!("eval_{strategy}"));
        let out = faultzone(&[
            "evaluate",
            "--model",
            p(&model),
            "--features",
            p(&feats),
            "--scenario",
            "1",
            "--split",
            "base",
            "--out",
            p(&rep),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(rep.join("report.txt")).unwrap();
        assert!(text.contains(&format!("correct {n} of {n} (100.00%)", n = test.len())), "{text}");
        let ids: BTreeSet<u64> =
            std::fs::read_to_string(rep.join("test_ids.txt")).unwrap().lines().map(|l| l.parse().unwrap()).collect();
        assert!(train.iter().all(|id| !ids.contains(id)));
        assert_eq!(ids.len(), test.len());
    }
}

#[test]
fn grid_search_writes_table_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("features.csv");
    synthetic_features(&feats);
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[grid]\nc = [1.0, 10.0]\ng = [0.5, 2.0]\ntol = 1e-3\nholdout_fraction = 0.2\n").unwrap();
    let out_dir = dir.path().join("grid");
    let out = faultzone(&[
        "--config",
        p(&cfg),
        "grid-search",
        "--features",
        p(&feats),
        "--scenario",
        "1",
        "--split",
        "base",
        "--strategy",
        "oao",
        "--table",
        "IX",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = std::fs::read_to_string(out_dir.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(grid.starts_with("c,g,correct,total,accuracy,converged"));
    assert!(out_dir.join("model.json").exists());
}

#[test]
fn errors_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[split]\nsubsample = 2.0\ntraining = []\n").unwrap();
    assert_eq!(faultzone(&["--config", p(&bad_cfg), "params"]).status.code(), Some(2));

    let missing = dir.path().join("nope.csv");
    let out = faultzone(&[
        "train",
        "--features",
        p(&missing),
        "--scenario",
        "1",
        "--split",
        "base",
        "--strategy",
        "oaa",
        "--c",
        "1",
        "--g",
        "1",
        "--out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // model trained on 120 features applied to shorter rows
    let feats = dir.path().join("features.csv");
    synthetic_features(&feats);
    let model = dir.path().join("model.json");
    let out = faultzone(&[
        "train",
        "--features",
        p(&feats),
        "--scenario",
        "1",
        "--split",
        "base",
        "--strategy",
        "oaa",
        "--c",
        "1",
        "--g",
        "1",
        "--out",
        p(&model),
    ]);
    assert!(out.status.success());
    let mut clf: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    for m in clf["models"].as_array_mut().unwrap() {
        for sv in m["support_vectors"].as_array_mut().unwrap() {
            sv.as_array_mut().unwrap().truncate(10);
        }
    }
    std::fs::write(&model, clf.to_string()).unwrap();
    let out = faultzone(&[
        "evaluate",
        "--model",
        p(&model),
        "--features",
        p(&feats),
        "--scenario",
        "1",
        "--split",
        "base",
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_then_features_matches_run_scenario_features() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[split]\nsubsample = 0.002\ntraining = [\"base\"]\n").unwrap();
    let waves = dir.path().join("waves");
    let out = faultzone(&["--config", p(&cfg), "--binary", "simulate", "--scenario", "2", "--out", p(&waves)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let feats = dir.path().join("features.csv");
    let out = faultzone(&["--config", p(&cfg), "features", "--waveforms", p(&waves), "--out", p(&feats)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_features_csv(&feats).unwrap();
    let cases = std::fs::read_to_string(waves.join("cases.csv")).unwrap();
    assert_eq!(rows.len(), cases.lines().count() - 1);
    assert!(waves.join("manifest.json").exists());
}
