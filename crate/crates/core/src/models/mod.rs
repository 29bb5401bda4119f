//! Benchmark state-space models and recorded trajectory datasets.
//!
//! A model is a pair of samplers: the transition `X_t ~ a(.|X_{t-1})` and the
//! observation `Y_t ~ h(.|X_t)`. All randomness enters through explicit
//! standard-normal noise vectors, so a model evaluated on the same inputs and
//! the same noise is deterministic.

mod dataset;
mod linear;
mod lorenz;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::rng::fill_standard_normal;

pub use dataset::{
    extract_training_slice, meta_path, read_dataset, simulate_trajectories, write_dataset, DatasetMeta, TrainingSlice,
    Trajectory, TrajectoryDataset,
};
pub use linear::{linear_step, observe, LinearModelParams, ObservationKind};
pub use lorenz::{lorenz63_drift, lorenz63_step, Lorenz63Params};

/// Linear-Gaussian description `X' = A X + Q^{1/2} V`, `Y = H X + R^{1/2} W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian {
    pub transition: nalgebra::DMatrix<f64>,
    pub process_cov: nalgebra::DMatrix<f64>,
    pub observation: nalgebra::DMatrix<f64>,
    pub obs_cov: nalgebra::DMatrix<f64>,
}

/// A time-invariant stochastic state-space model with additive Gaussian
/// observation noise.
pub trait StateSpaceModel: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    /// One transition driven by a standard-normal `noise` of length `state_dim`.
    fn transition(&self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()>;

    /// Noise-free observation function `h(x)`.
    fn observation_mean(&self, x: &[f64], out: &mut [f64]);

    /// Standard deviation of the additive observation noise.
    fn obs_noise_std(&self) -> f64;

    /// Present when the model is linear-Gaussian, enabling the exact Kalman filter.
    fn linear_gaussian(&self) -> Option<LinearGaussian> {
        None
    }

    /// `h(x) + obs_noise_std * noise`.
    fn observe(&self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("observation noise", self.obs_dim(), noise.len())?;
        check_dim("observation output", self.obs_dim(), out.len())?;
        self.observation_mean(x, out);
        let s = self.obs_noise_std();
        for (o, n) in out.iter_mut().zip(noise) {
            *o += s * n;
        }
        Ok(())
    }

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngLike, out: &mut [f64]) -> Result<()> {
        let mut noise = vec![0.0; self.state_dim()];
        rng.fill_normal(&mut noise);
        self.transition(x, &noise, out)
    }

    fn sample_observation(&self, x: &[f64], rng: &mut dyn RngLike, out: &mut [f64]) -> Result<()> {
        let mut noise = vec![0.0; self.obs_dim()];
        rng.fill_normal(&mut noise);
        self.observe(x, &noise, out)
    }
}

/// Object-safe view of a random generator, so `dyn StateSpaceModel` can draw noise.
pub trait RngLike {
    fn fill_normal(&mut self, out: &mut [f64]);
}

impl<R: Rng> RngLike for R {
    fn fill_normal(&mut self, out: &mut [f64]) {
        fill_standard_normal(self, out);
    }
}

/// Isotropic Gaussian initial-state sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl InitialDistribution {
    pub fn sample(&self, rng: &mut dyn RngLike) -> Vec<f64> {
        let mut x = vec![0.0; self.mean.len()];
        rng.fill_normal(&mut x);
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v = m + self.std * *v;
        }
        x
    }
}

/// Serializable model selection used by experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Linear(LinearModelParams),
    Lorenz63(Lorenz63Params),
}

impl ModelSpec {
    pub fn as_model(&self) -> &dyn StateSpaceModel {
        match self {
            ModelSpec::Linear(p) => p,
            ModelSpec::Lorenz63(p) => p,
        }
    }

    /// Standard normal for the linear model; the positive Lorenz fixed point
    /// with a unit Gaussian perturbation for Lorenz 63.
    pub fn default_initial(&self) -> InitialDistribution {
        match self {
            ModelSpec::Linear(_) => InitialDistribution {
                mean: vec![0.0; 2],
                std: 1.0,
            },
            ModelSpec::Lorenz63(p) => InitialDistribution {
                mean: p.fixed_point().to_vec(),
                std: 1.0,
            },
        }
    }
}
