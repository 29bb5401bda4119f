mod common;

use std::collections::BTreeMap;
use std::fs;

use common::tiny_config;
use otddf::harness::{
    self, manifest_path, map_file, parse_csv, read_json, BenchReport, ExperimentConfig, Manifest, RunSummary,
    TrainSummary, DATASET_FILE, LOSS_HEADER, PER_TIME_HEADER, SERIES_HEADER,
};
use otddf::models::{meta_path, read_dataset};

#[test]
fn config_round_trips_through_json() {
    let cfg = tiny_config();
    let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn presets_parse_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let cfg = ExperimentConfig::load(&entry.unwrap().path()).unwrap();
        cfg.validate().unwrap();
        count += 1;
    }
    assert_eq!(count, 3);
}

#[test]
fn unknown_fields_are_rejected() {
    let text = common::TINY_CONFIG.replacen("\"seed\": 5", "\"seed\": 5, \"sede\": 1", 1);
    assert!(ExperimentConfig::from_json(&text).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = tiny_config();
    cfg.online.windows = Some(vec![3]);
    assert!(cfg.validate().is_err(), "window without a trained map");

    let mut cfg = tiny_config();
    cfg.online.methods.push(harness::Method::Kf);
    assert!(cfg.validate().is_err(), "KF on the quadratic observation");

    let mut cfg = tiny_config();
    cfg.training.window_end = 11;
    cfg.online.horizon = 10;
    assert!(cfg.validate().is_err(), "horizon before metric start");
}

#[test]
fn simulate_writes_byte_identical_dataset() {
    let mut cfg = tiny_config();
    cfg.dataset.trajectories = 2;
    cfg.dataset.horizon = 3;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ds, path) = harness::simulate(&cfg, a.path()).unwrap();
    harness::simulate(&cfg, b.path()).unwrap();
    assert!(meta_path(&path).exists());
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes, fs::read(b.path().join(DATASET_FILE)).unwrap());
    assert_eq!(read_dataset(&path).unwrap(), ds);
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.horizon(), 3);

    cfg.seed += 1;
    let c = tempfile::tempdir().unwrap();
    harness::simulate(&cfg, c.path()).unwrap();
    assert_ne!(bytes, fs::read(c.path().join(DATASET_FILE)).unwrap());
}

#[test]
fn train_writes_maps_and_loss_curves() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let ds = harness::dataset_for(&cfg, dir.path()).unwrap();
    assert!(
        !dir.path().join(DATASET_FILE).exists(),
        "train does not write the dataset"
    );
    let summaries = harness::train(&cfg, &ds, &[2, 4], dir.path()).unwrap();
    assert_eq!(summaries.iter().map(|s| s.window).collect::<Vec<_>>(), vec![2, 4]);
    for s in &summaries {
        assert_eq!(s.burn_in, 10 - s.window);
        assert!(s.final_loss_t.is_finite() && s.final_loss_f.is_finite());
        let text = fs::read_to_string(harness::loss_file(dir.path(), s.window)).unwrap();
        let rows = parse_csv(&text, LOSS_HEADER).unwrap();
        assert_eq!(rows.len(), cfg.training.config.k_outer);
    }
    let stored: Vec<TrainSummary> = read_json(&dir.path().join("training.json")).unwrap();
    assert_eq!(stored, summaries);
    let maps = harness::load_maps(dir.path(), &[2, 4]).unwrap();
    assert_eq!(maps[&4].window, 4);
    assert_eq!(maps[&2].pool_size(), cfg.dataset.trajectories);
}

#[test]
fn load_maps_rejects_mislabelled_window() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let ds = harness::dataset_for(&cfg, dir.path()).unwrap();
    harness::train(&cfg, &ds, &[2], dir.path()).unwrap();
    fs::copy(map_file(dir.path(), 2), map_file(dir.path(), 4)).unwrap();
    assert!(harness::load_maps(dir.path(), &[4]).is_err());
}

fn run_in(cfg: &ExperimentConfig) -> (tempfile::TempDir, RunSummary) {
    let dir = tempfile::tempdir().unwrap();
    let (_, summary) = harness::run(cfg, dir.path()).unwrap();
    (dir, summary)
}

#[test]
fn run_outputs_agree_with_summary() {
    let cfg = tiny_config();
    let (dir, summary) = run_in(&cfg);
    let stored: RunSummary = read_json(&dir.path().join("summary.json")).unwrap();
    assert_eq!(stored, summary);
    assert_eq!(summary.replications, 2);
    assert_eq!(summary.metric_start, 10);

    // Time averages recomputed from the long-format series.
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut sums: BTreeMap<(usize, String, String), (f64, usize)> = BTreeMap::new();
    for row in parse_csv(&text, SERIES_HEADER).unwrap() {
        let t: usize = row[1].parse().unwrap();
        assert!(t >= summary.metric_start && t <= cfg.online.horizon);
        let e = sums
            .entry((row[0].parse().unwrap(), row[2].to_string(), row[3].to_string()))
            .or_default();
        e.0 += row[4].parse::<f64>().unwrap();
        e.1 += 1;
    }
    for entry in &summary.entries {
        for (r, &avg) in entry.per_replication.iter().enumerate() {
            let (sum, n) = sums[&(r, entry.method.clone(), entry.metric.clone())];
            assert!(
                (sum / n as f64 - avg).abs() <= 1e-12 * (1.0 + avg.abs()),
                "{}/{}",
                entry.method,
                entry.metric
            );
        }
    }
    for method in ["enkf", "sir", "otpf", "otddf_w2", "otddf_w4"] {
        assert!(summary.get(method, "mse").is_some(), "{method}");
        assert!(summary.get(method, "mmd").is_some(), "{method}");
        assert!(summary.get(method, "mode_fraction").is_some(), "{method}");
    }

    // Per-time means across replications.
    let text = fs::read_to_string(dir.path().join("per_time.csv")).unwrap();
    let rows = parse_csv(&text, PER_TIME_HEADER).unwrap();
    let mse_rows: Vec<f64> = rows
        .iter()
        .filter(|r| r[1] == "sir/mse")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(mse_rows.len(), cfg.online.horizon - summary.metric_start + 1);
    let avg_of_time_means = mse_rows.iter().sum::<f64>() / mse_rows.len() as f64;
    let sir = summary.get("sir", "mse").unwrap();
    assert!((avg_of_time_means - sir.mean).abs() <= 1e-12 * (1.0 + sir.mean));

    let manifest: Manifest = read_json(&manifest_path(dir.path())).unwrap();
    let commands: Vec<&str> = manifest.runs.iter().map(|r| r.command.as_str()).collect();
    assert_eq!(commands, vec!["train", "run"]);
}

#[test]
fn run_is_deterministic() {
    let cfg = tiny_config();
    let (a, sa) = run_in(&cfg);
    let (b, sb) = run_in(&cfg);
    assert_eq!(sa.entries, sb.entries);
    for file in ["series.csv", "per_time.csv", "map_w2.json", "map_w4.json"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn evaluate_reports_each_window() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let evals = harness::evaluate(&cfg, &[2, 4], dir.path()).unwrap();
    assert_eq!(evals.len(), 2);
    assert!(evals
        .iter()
        .all(|e| e.objective.is_finite() && e.pairs == cfg.dataset.trajectories));
    assert!(dir.path().join("evaluate.json").exists());
}

#[test]
fn bench_covers_requested_methods() {
    let cfg = tiny_config();
    let dir = tempfile::tempdir().unwrap();
    let report = harness::benchmark(&cfg, dir.path()).unwrap();
    assert_eq!(report.particles, 50);
    for method in ["enkf", "sir", "otddf_w2"] {
        let s = report.mean_seconds(method).unwrap_or_else(|| panic!("{method}"));
        assert!(s > 0.0 && s.is_finite());
    }
    assert!(report.mean_seconds("otpf").is_none());
    let stored: BenchReport = read_json(&dir.path().join("bench.json")).unwrap();
    assert_eq!(stored, report);
}

#[test]
fn stored_map_reloads_bit_identical() {
    let cfg = tiny_config();
    let ds = harness::simulate_dataset(&cfg).unwrap();
    let (map, _) = harness::train_maps(&cfg, &ds, &[2]).unwrap().remove(0);
    let dir = tempfile::tempdir().unwrap();
    let path = map_file(dir.path(), 2);
    map.save(&path).unwrap();
    let loaded = otddf::ot_core::TrainedTransportMap::load(&path).unwrap();
    assert_eq!(loaded, map);

    let mut text = fs::read_to_string(&path).unwrap();
    text = text.replacen("\"format\":\"", "\"format\":\"x", 1);
    fs::write(&path, text).unwrap();
    assert!(otddf::ot_core::TrainedTransportMap::load(&path).is_err());
}
