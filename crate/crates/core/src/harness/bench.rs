use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use super::experiment::otddf_label;
use crate::error::{Error, Result};
use crate::filters::{
    enkf_step, kalman_predict, kalman_update, otddf_online_step, sir_step, KalmanState, ObservationWindow, OtpfFilter,
    ParticleEnsemble,
};
use crate::models::simulate_trajectories;
use crate::ot_core::TrainedTransportMap;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub method: String,
    pub steps: usize,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub particles: usize,
    pub entries: Vec<BenchEntry>,
    pub hardware: String,
}

impl BenchReport {
    pub fn mean_seconds(&self, method: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.method == method).map(|e| e.mean_seconds)
    }
}

pub fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "{}-{}, {} hardware thread(s), single-threaded filter steps",
        std::env::consts::ARCH,
        std::env::consts::OS,
        threads
    )
}

/// Wall-clock time per online step of each method at a common particle
/// count, over `steps` consecutive steps of one simulated trajectory.
pub fn bench(cfg: &ExperimentConfig, map: Option<&TrainedTransportMap>) -> Result<BenchReport> {
    let spec = cfg
        .bench
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("config has no bench section".into()))?;
    let model = cfg.model.as_model();
    let seed = derive_seed(cfg.seed, 50);
    let lead = spec.window + spec.warmup;
    let horizon = lead + spec.steps;
    let truth = simulate_trajectories(model, 1, horizon, &cfg.initial(), derive_seed(seed, 1))?;
    let truth = &truth.trajectories()[0];
    let init = cfg.initial();
    let n = init.mean.len();
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    let mut particles = DMatrix::zeros(n, spec.particles);
    for col in particles.as_mut_slice().chunks_exact_mut(n) {
        col.copy_from_slice(&init.sample(&mut rng));
    }
    let prior = ParticleEnsemble::uniform(particles);
    let timed = (lead + 1)..=horizon;

    let mut entries = Vec::new();
    for &method in &spec.methods {
        let mut rng = rng_from_seed(derive_seed(seed, 10 + method as u64));
        let (label, seconds) = match method {
            Method::Kf => {
                let lg = model
                    .linear_gaussian()
                    .ok_or_else(|| Error::InvalidInput("the Kalman filter needs a linear-Gaussian model".into()))?;
                let mut state = KalmanState {
                    mean: DVector::from_vec(init.mean.clone()),
                    covariance: DMatrix::identity(n, n) * (init.std * init.std),
                };
                for t in 1..=lead {
                    state = kalman_update(&lg, &kalman_predict(&lg, &state), truth.observation(t))?.posterior;
                }
                let started = Instant::now();
                for t in timed.clone() {
                    state = kalman_update(&lg, &kalman_predict(&lg, &state), truth.observation(t))?.posterior;
                }
                (method.name().to_string(), started.elapsed().as_secs_f64())
            }
            Method::Enkf | Method::Sir => {
                let mut step = |e: &ParticleEnsemble, t: usize| {
                    let y = truth.observation(t);
                    if method == Method::Enkf {
                        enkf_step(e, y, model, &mut rng)
                    } else {
                        sir_step(e, y, model, &mut rng)
                    }
                };
                let mut e = prior.clone();
                for t in 1..=lead {
                    e = step(&e, t)?;
                }
                let started = Instant::now();
                for t in timed.clone() {
                    e = step(&e, t)?;
                }
                (method.name().to_string(), started.elapsed().as_secs_f64())
            }
            Method::Otpf => {
                let mut filter = OtpfFilter::new(cfg.online.otpf.clone());
                let mut e = prior.clone();
                for t in (lead + 1 - spec.warmup)..=lead {
                    e = filter.step(&e, truth.observation(t), model, derive_seed(seed, 1000 + t as u64))?;
                }
                let started = Instant::now();
                for t in timed.clone() {
                    e = filter.step(&e, truth.observation(t), model, derive_seed(seed, 1000 + t as u64))?;
                }
                (method.name().to_string(), started.elapsed().as_secs_f64())
            }
            Method::Otddf => {
                let map = map.ok_or_else(|| Error::InvalidInput("OT-DDF timing needs a trained map".into()))?;
                let mut window = ObservationWindow::for_map(map);
                for t in 1..=lead {
                    window.push(truth.observation(t))?;
                    if window.is_full() {
                        std::hint::black_box(otddf_online_step(map, &window, spec.particles, t as u64)?);
                    }
                }
                let started = Instant::now();
                for t in timed.clone() {
                    window.push(truth.observation(t))?;
                    std::hint::black_box(otddf_online_step(
                        map,
                        &window,
                        spec.particles,
                        derive_seed(seed, 5000 + t as u64),
                    )?);
                }
                (otddf_label(map.window), started.elapsed().as_secs_f64())
            }
        };
        entries.push(BenchEntry {
            method: label,
            steps: spec.steps,
            mean_seconds: seconds / spec.steps as f64,
        });
    }
    Ok(BenchReport {
        model: model.name().to_string(),
        particles: spec.particles,
        entries,
        hardware: hardware_note(),
    })
}
