use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::enkf::propagate;
use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::ot_core::{random_permutation, MaxMinTrainer, Standardizer, TrainConfig, TrainingPairs};
use crate::rng::{derive_seed, fill_standard_normal, rng_from_seed};

fn default_true() -> bool {
    true
}

/// Per-step solver budget for the online OT particle filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtpfConfig {
    /// Architecture, learning rates, batch size, `k_inner` and `k_outer`
    /// (per filter step); `window` and `burn_in` are ignored.
    pub solver: TrainConfig,
    /// Reuse the previous step's networks and optimizer moments.
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

impl Default for OtpfConfig {
    fn default() -> Self {
        Self {
            solver: TrainConfig {
                k_outer: 64,
                k_inner: 10,
                ..TrainConfig::default()
            },
            warm_start: true,
        }
    }
}

/// OT particle filter: every step simulates `(X', Y')` pairs from the model,
/// solves the max-min problem for a one-step map and pushes the forecast
/// particles through it with the actual observation.
#[derive(Debug, Clone)]
pub struct OtpfFilter {
    pub config: OtpfConfig,
    trainer: Option<MaxMinTrainer>,
    steps: u64,
}

impl OtpfFilter {
    pub fn new(config: OtpfConfig) -> Self {
        Self {
            config,
            trainer: None,
            steps: 0,
        }
    }

    /// Number of completed filter steps.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(
        &mut self,
        ensemble: &ParticleEnsemble,
        y: &[f64],
        model: &dyn StateSpaceModel,
        seed: u64,
    ) -> Result<ParticleEnsemble> {
        let cfg = &self.config.solver;
        cfg.validate()?;
        let count = ensemble.len();
        if count == 0 {
            return Err(Error::InvalidInput("empty ensemble".into()));
        }
        let (n, m) = (model.state_dim(), model.obs_dim());
        let mut rng = rng_from_seed(seed);
        let forecast = propagate(ensemble, model, &mut rng)?;
        let mut simulated = DMatrix::zeros(m, count);
        let mut noise = vec![0.0; m];
        for (x, out) in forecast
            .as_slice()
            .chunks_exact(n)
            .zip(simulated.as_mut_slice().chunks_exact_mut(m))
        {
            fill_standard_normal(&mut rng, &mut noise);
            model.observe(x, &noise, out)?;
        }
        // Per-step coordinates keep the normalized problem nearly stationary
        // across steps, which is what makes warm starts effective.
        let scaler = Standardizer::fit(&[&forecast], &simulated, m);
        let slice = crate::models::TrainingSlice {
            base: scaler.states(&forecast),
            terminal: scaler.states(&forecast),
            windows: scaler.windows(&simulated),
        };
        let pairs = TrainingPairs::from_slice(&slice, random_permutation(count, derive_seed(seed, 1)))?;

        let mut trainer = match self.trainer.take() {
            Some(t) if self.config.warm_start => t,
            _ => MaxMinTrainer::new(n, m, cfg, &mut rng),
        };
        trainer.run(&pairs, cfg.k_outer, &mut rng, None)?;
        let z = scaler.states(&forecast);
        let zy = scaler.window(y);
        let pushed = trainer.map.forward_shared_context(&z, &zy);
        self.trainer = Some(trainer);
        self.steps += 1;
        Ok(ParticleEnsemble::uniform(scaler.states_inverse(&pushed)))
    }
}

/// One OTPF step without warm start.
pub fn otpf_step(
    ensemble: &ParticleEnsemble,
    y: &[f64],
    model: &dyn StateSpaceModel,
    config: &OtpfConfig,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let mut filter = OtpfFilter::new(OtpfConfig {
        warm_start: false,
        ..config.clone()
    });
    filter.step(ensemble, y, model, seed)
}
