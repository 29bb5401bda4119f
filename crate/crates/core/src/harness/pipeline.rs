use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bench::{bench, BenchReport};
use super::config::ExperimentConfig;
use super::experiment::{per_time_means, run_online, simulate_dataset, train_maps, ReplicationResult, RunSummary};
use super::io::{loss_csv, per_time_csv, record_manifest, relative, series_csv, write_json, write_text, ManifestEntry};
use crate::error::{Error, Result};
use crate::models::{read_dataset, write_dataset, TrajectoryDataset};
use crate::ot_core::TrainedTransportMap;
use crate::rng::derive_seed;

pub const DATASET_FILE: &str = "dataset.csv";

pub fn map_file(out: &Path, w: usize) -> PathBuf {
    out.join(format!("map_w{w}.json"))
}

pub fn loss_file(out: &Path, w: usize) -> PathBuf {
    out.join(format!("loss_w{w}.csv"))
}

fn manifest(out: &Path, command: &str, cfg: &ExperimentConfig, started: Instant, outputs: &[PathBuf]) -> Result<()> {
    record_manifest(
        out,
        ManifestEntry {
            command: command.into(),
            config: cfg.name.clone(),
            seed: cfg.seed,
            seconds: started.elapsed().as_secs_f64(),
            outputs: outputs.iter().map(|p| relative(out, p)).collect(),
            notes: cfg.notes.clone(),
        },
    )
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<(TrajectoryDataset, PathBuf)> {
    let started = Instant::now();
    let ds = simulate_dataset(cfg)?;
    let path = out.join(DATASET_FILE);
    write_dataset(&ds, &path)?;
    manifest(
        out,
        "simulate",
        cfg,
        started,
        &[path.clone(), crate::models::meta_path(&path)],
    )?;
    Ok((ds, path))
}

/// Loads `<out>/dataset.csv` if present, otherwise simulates in memory.
pub fn dataset_for(cfg: &ExperimentConfig, out: &Path) -> Result<TrajectoryDataset> {
    let path = out.join(DATASET_FILE);
    if path.exists() {
        read_dataset(&path)
    } else {
        simulate_dataset(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub window: usize,
    pub burn_in: usize,
    pub k_outer: usize,
    pub k_inner: usize,
    pub seconds: f64,
    pub final_loss_t: f64,
    pub final_loss_f: f64,
}

pub fn train(
    cfg: &ExperimentConfig,
    dataset: &TrajectoryDataset,
    windows: &[usize],
    out: &Path,
) -> Result<Vec<TrainSummary>> {
    let started = Instant::now();
    let trained = train_maps(cfg, dataset, windows)?;
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    for (map, report) in &trained {
        let w = map.window;
        map.save(&map_file(out, w))?;
        write_text(&loss_file(out, w), &loss_csv(&report.loss_curve))?;
        outputs.push(map_file(out, w));
        outputs.push(loss_file(out, w));
        let last = report.loss_curve.last();
        summaries.push(TrainSummary {
            window: w,
            burn_in: map.train_config.burn_in,
            k_outer: map.train_config.k_outer,
            k_inner: map.train_config.k_inner,
            seconds: report.seconds,
            final_loss_t: last.map_or(f64::NAN, |r| r.loss_t),
            final_loss_f: last.map_or(f64::NAN, |r| r.loss_f),
        });
    }
    let path = out.join("training.json");
    write_json(&path, &summaries)?;
    outputs.push(path);
    manifest(out, "train", cfg, started, &outputs)?;
    Ok(summaries)
}

pub fn load_maps(out: &Path, windows: &[usize]) -> Result<BTreeMap<usize, TrainedTransportMap>> {
    windows
        .iter()
        .map(|&w| {
            let map = TrainedTransportMap::load(&map_file(out, w))?;
            if map.window != w {
                return Err(Error::InvalidInput(format!(
                    "{} holds window {}",
                    map_file(out, w).display(),
                    map.window
                )));
            }
            Ok((w, map))
        })
        .collect()
}

/// Trains any missing maps (simulating the dataset if needed) and loads them.
pub fn ensure_maps(
    cfg: &ExperimentConfig,
    windows: &[usize],
    out: &Path,
) -> Result<BTreeMap<usize, TrainedTransportMap>> {
    let missing: Vec<usize> = windows
        .iter()
        .copied()
        .filter(|&w| !map_file(out, w).exists())
        .collect();
    if !missing.is_empty() {
        let ds = dataset_for(cfg, out)?;
        train(cfg, &ds, &missing, out)?;
    }
    load_maps(out, windows)
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<ReplicationResult>, RunSummary)> {
    let started = Instant::now();
    let needs_maps = cfg.online.methods.contains(&super::config::Method::Otddf);
    let maps = if needs_maps {
        ensure_maps(cfg, &cfg.online_windows(), out)?
    } else {
        BTreeMap::new()
    };
    let (results, summary) = run_online(cfg, &maps)?;
    let per_time = out.join("per_time.csv");
    let series = out.join("series.csv");
    let summary_path = out.join("summary.json");
    write_text(&per_time, &per_time_csv(&per_time_means(&results)))?;
    write_text(&series, &series_csv(&results))?;
    write_json(&summary_path, &summary)?;
    manifest(out, "run", cfg, started, &[per_time, series, summary_path])?;
    Ok((results, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub window: usize,
    /// Max-min objective of the trained pair on fresh pairs of the dataset.
    pub objective: f64,
    pub pairs: usize,
}

/// Objective of each stored map on `<out>/dataset.csv` (or the simulated one).
pub fn evaluate(cfg: &ExperimentConfig, windows: &[usize], out: &Path) -> Result<Vec<Evaluation>> {
    let started = Instant::now();
    let ds = dataset_for(cfg, out)?;
    let maps = ensure_maps(cfg, windows, out)?;
    let evals = maps
        .values()
        .map(|map| {
            Ok(Evaluation {
                window: map.window,
                objective: map.objective_on(&ds, derive_seed(cfg.seed, 60 + map.window as u64))?,
                pairs: ds.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("evaluate.json");
    write_json(&path, &evals)?;
    manifest(out, "evaluate", cfg, started, &[path])?;
    Ok(evals)
}

pub fn benchmark(cfg: &ExperimentConfig, out: &Path) -> Result<BenchReport> {
    let started = Instant::now();
    let spec = cfg
        .bench
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config has no bench section".into()))?;
    let needs_map = spec.methods.contains(&super::config::Method::Otddf);
    let maps = if needs_map {
        ensure_maps(cfg, &[spec.window], out)?
    } else {
        BTreeMap::new()
    };
    let report = bench(cfg, maps.get(&spec.window))?;
    let path = out.join("bench.json");
    write_json(&path, &report)?;
    manifest(out, "bench", cfg, started, &[path])?;
    Ok(report)
}
