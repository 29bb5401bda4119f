use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::filters::{
    enkf_step, kalman_predict, kalman_update, otddf_online_step, sir_step, KalmanState, ObservationWindow, OtpfFilter,
    ParticleEnsemble,
};
use crate::metrics::{median_heuristic_bandwidth, MmdReference};
use crate::models::{simulate_trajectories, StateSpaceModel, Trajectory, TrajectoryDataset};
use crate::ot_core::{train_detailed, TrainedTransportMap, TrainingReport};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

pub const METRIC_MSE: &str = "mse";
pub const METRIC_MMD: &str = "mmd";
pub const METRIC_MODE: &str = "mode_fraction";
pub const METRIC_BALANCE: &str = "mode_balance";

pub fn simulate_dataset(cfg: &ExperimentConfig) -> Result<TrajectoryDataset> {
    simulate_trajectories(
        cfg.model.as_model(),
        cfg.dataset.trajectories,
        cfg.dataset.horizon,
        &cfg.initial(),
        cfg.dataset_seed(),
    )
}

/// Trains one map per window, in the order given.
pub fn train_maps(
    cfg: &ExperimentConfig,
    dataset: &TrajectoryDataset,
    windows: &[usize],
) -> Result<Vec<(TrainedTransportMap, TrainingReport)>> {
    windows
        .iter()
        .map(|&w| train_detailed(dataset, &cfg.train_config(w)))
        .collect()
}

pub fn otddf_label(w: usize) -> String {
    format!("otddf_w{w}")
}

/// Per-time values of one metric of one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub method: String,
    pub metric: String,
    pub times: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub series: Vec<Series>,
}

#[derive(Default)]
struct Recorder {
    series: BTreeMap<(String, &'static str), (Vec<usize>, Vec<f64>)>,
}

impl Recorder {
    fn push(&mut self, method: &str, metric: &'static str, t: usize, v: f64) {
        let e = self.series.entry((method.to_string(), metric)).or_default();
        e.0.push(t);
        e.1.push(v);
    }

    fn finish(self, replication: usize) -> ReplicationResult {
        ReplicationResult {
            replication,
            series: self
                .series
                .into_iter()
                .map(|((method, metric), (times, values))| Series {
                    method,
                    metric: metric.to_string(),
                    times,
                    values,
                })
                .collect(),
        }
    }
}

fn squared_error(mean: &[f64], truth: &[f64]) -> f64 {
    mean.iter().zip(truth).map(|(m, x)| (m - x).powi(2)).sum()
}

/// Weighted fraction of particles on the same side as the truth.
pub fn mode_fraction(ensemble: &ParticleEnsemble, truth: &[f64]) -> f64 {
    let n = ensemble.state_dim();
    ensemble
        .particles
        .as_slice()
        .chunks_exact(n)
        .zip(&ensemble.weights)
        .filter(|(x, _)| x.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>() > 0.0)
        .map(|(_, w)| w)
        .sum()
}

struct Scorer<'a> {
    cfg: &'a ExperimentConfig,
    truth: &'a Trajectory,
    references: BTreeMap<usize, MmdReference>,
    start: usize,
}

impl Scorer<'_> {
    fn is_metric_time(&self, t: usize) -> bool {
        t >= self.start
    }

    fn record(&self, rec: &mut Recorder, label: &str, t: usize, e: &ParticleEnsemble) -> Result<()> {
        let x = self.truth.state(t);
        if self.cfg.metrics.mse {
            rec.push(label, METRIC_MSE, t, squared_error(e.mean().as_slice(), x));
        }
        if self.cfg.metrics.mode_fraction {
            let f = mode_fraction(e, x);
            rec.push(label, METRIC_MODE, t, f);
            rec.push(label, METRIC_BALANCE, t, f.min(1.0 - f));
        }
        if let Some(reference) = self.references.get(&t) {
            if e.weights.iter().any(|w| *w != e.weights[0]) {
                return Err(Error::InvalidInput(format!(
                    "{label}: MMD expects an equally weighted ensemble"
                )));
            }
            rec.push(label, METRIC_MMD, t, reference.mmd(&e.particles)?);
        }
        Ok(())
    }
}

fn initial_ensemble(cfg: &ExperimentConfig, count: usize, rng: &mut SimRng) -> ParticleEnsemble {
    let init = cfg.initial();
    let n = init.mean.len();
    let mut particles = DMatrix::zeros(n, count);
    for col in particles.as_mut_slice().chunks_exact_mut(n) {
        col.copy_from_slice(&init.sample(rng));
    }
    ParticleEnsemble::uniform(particles)
}

type StepFn<'a> = dyn FnMut(&ParticleEnsemble, &[f64], usize) -> Result<ParticleEnsemble> + 'a;

/// Runs a recursive ensemble filter from `t = 1` to the horizon.
fn run_recursive(
    scorer: &Scorer<'_>,
    rec: &mut Recorder,
    label: &str,
    mut ensemble: ParticleEnsemble,
    step: &mut StepFn<'_>,
) -> Result<()> {
    for t in 1..=scorer.truth.horizon() {
        ensemble = step(&ensemble, scorer.truth.observation(t), t).map_err(|e| annotate(label, t, e))?;
        if scorer.is_metric_time(t) {
            scorer.record(rec, label, t, &ensemble)?;
        }
    }
    Ok(())
}

fn annotate(label: &str, t: usize, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{label} at t = {t}: {m}")),
        other => other,
    }
}

pub fn replication_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(derive_seed(cfg.seed, 20), r as u64)
}

/// One simulated truth trajectory filtered by every selected method.
pub fn run_replication(
    cfg: &ExperimentConfig,
    maps: &BTreeMap<usize, TrainedTransportMap>,
    replication: usize,
) -> Result<ReplicationResult> {
    let model: &dyn StateSpaceModel = cfg.model.as_model();
    let seed = replication_seed(cfg, replication);
    let horizon = cfg.online.horizon;
    let truth_set = simulate_trajectories(model, 1, horizon, &cfg.initial(), derive_seed(seed, 1))?;
    let truth = &truth_set.trajectories()[0];
    let count = cfg.online.particles;
    let start = cfg.metric_start();
    let prior = initial_ensemble(cfg, count, &mut rng_from_seed(derive_seed(seed, 2)));
    let mut rec = Recorder::default();

    let mut references = BTreeMap::new();
    if let Some(mmd) = &cfg.metrics.mmd {
        let mut rng = rng_from_seed(derive_seed(seed, 40));
        let mut e = initial_ensemble(cfg, mmd.reference_particles, &mut rng);
        for t in 1..=horizon {
            e = sir_step(&e, truth.observation(t), model, &mut rng)?;
            if t >= start && (t - start).is_multiple_of(mmd.stride) {
                let h = match mmd.bandwidth {
                    Some(h) => h,
                    None => median_heuristic_bandwidth(&e.particles)?,
                };
                if cfg.metrics.mode_fraction {
                    let f = mode_fraction(&e, truth.state(t));
                    rec.push("reference", METRIC_MODE, t, f);
                    rec.push("reference", METRIC_BALANCE, t, f.min(1.0 - f));
                }
                references.insert(t, MmdReference::new(e.particles.clone(), h)?);
            }
        }
    }
    let scorer = Scorer {
        cfg,
        truth,
        references,
        start,
    };

    for &method in &cfg.online.methods {
        if method == Method::Otpf && cfg.online.otpf_replications.is_some_and(|k| replication >= k) {
            continue;
        }
        let label = method.name();
        let mut rng = rng_from_seed(derive_seed(seed, 10 + method as u64));
        match method {
            Method::Kf => {
                let lg = model
                    .linear_gaussian()
                    .ok_or_else(|| Error::InvalidInput("the Kalman filter needs a linear-Gaussian model".into()))?;
                let init = cfg.initial();
                let n = init.mean.len();
                let mut state = KalmanState {
                    mean: DVector::from_vec(init.mean.clone()),
                    covariance: DMatrix::identity(n, n) * (init.std * init.std),
                };
                for t in 1..=horizon {
                    state = kalman_update(&lg, &kalman_predict(&lg, &state), truth.observation(t))?.posterior;
                    if t >= start && cfg.metrics.mse {
                        rec.push(
                            label,
                            METRIC_MSE,
                            t,
                            squared_error(state.mean.as_slice(), truth.state(t)),
                        );
                    }
                }
            }
            Method::Enkf => run_recursive(&scorer, &mut rec, label, prior.clone(), &mut |e, y, _| {
                enkf_step(e, y, model, &mut rng)
            })?,
            Method::Sir => run_recursive(&scorer, &mut rec, label, prior.clone(), &mut |e, y, _| {
                sir_step(e, y, model, &mut rng)
            })?,
            Method::Otpf => {
                let mut filter = OtpfFilter::new(cfg.online.otpf.clone());
                let otpf_seed = derive_seed(seed, 30);
                run_recursive(&scorer, &mut rec, label, prior.clone(), &mut |e, y, t| {
                    filter.step(e, y, model, derive_seed(otpf_seed, t as u64))
                })?
            }
            Method::Otddf => {
                for w in cfg.online_windows() {
                    let map = maps
                        .get(&w)
                        .ok_or_else(|| Error::InvalidInput(format!("no trained map for window {w}")))?;
                    let label = otddf_label(w);
                    let step_seed = derive_seed(seed, 100 + w as u64);
                    let mut window = ObservationWindow::for_map(map);
                    for t in 1..=horizon {
                        window.push(truth.observation(t))?;
                        if t >= start {
                            let e = otddf_online_step(map, &window, count, derive_seed(step_seed, t as u64))?;
                            scorer.record(&mut rec, &label, t, &e)?;
                        }
                    }
                }
            }
        }
    }
    Ok(rec.finish(replication))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub method: String,
    pub metric: String,
    /// Mean over replications of the time average.
    pub mean: f64,
    pub std_error: f64,
    pub per_replication: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub particles: usize,
    pub horizon: usize,
    pub metric_start: usize,
    pub replications: usize,
    pub seconds: f64,
    pub entries: Vec<SummaryEntry>,
}

impl RunSummary {
    pub fn get(&self, method: &str, metric: &str) -> Option<&SummaryEntry> {
        self.entries.iter().find(|e| e.method == method && e.metric == metric)
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(cfg: &ExperimentConfig, results: &[ReplicationResult], seconds: f64) -> RunSummary {
    let mut grouped: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in results {
        for s in &r.series {
            let avg = s.values.iter().sum::<f64>() / s.values.len() as f64;
            grouped
                .entry((s.method.clone(), s.metric.clone()))
                .or_default()
                .push(avg);
        }
    }
    let entries = grouped
        .into_iter()
        .map(|((method, metric), per_replication)| {
            let (mean, std_error) = mean_and_se(&per_replication);
            SummaryEntry {
                method,
                metric,
                mean,
                std_error,
                per_replication,
            }
        })
        .collect();
    RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        particles: cfg.online.particles,
        horizon: cfg.online.horizon,
        metric_start: cfg.metric_start(),
        replications: results.len(),
        seconds,
        entries,
    }
}

/// Mean over replications per `(t, method/metric)`.
pub fn per_time_means(results: &[ReplicationResult]) -> Vec<(usize, String, f64)> {
    let mut acc: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for r in results {
        for s in &r.series {
            let label = format!("{}/{}", s.method, s.metric);
            for (&t, &v) in s.times.iter().zip(&s.values) {
                let e = acc.entry((label.clone(), t)).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|((label, t), (sum, n))| (t, label, sum / n as f64))
        .collect()
}

/// Runs all replications in parallel; results come back sorted by index.
pub fn run_online(
    cfg: &ExperimentConfig,
    maps: &BTreeMap<usize, TrainedTransportMap>,
) -> Result<(Vec<ReplicationResult>, RunSummary)> {
    cfg.validate()?;
    let started = Instant::now();
    let mut results = (0..cfg.online.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, maps, r))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|r| r.replication);
    let summary = summarize(cfg, &results, started.elapsed().as_secs_f64());
    Ok((results, summary))
}
