use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LinearGaussian, StateSpaceModel};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    /// `h(x) = x_1`
    Linear,
    /// `h(x) = x_1^2`
    Quadratic,
}

/// Two-dimensional rotation dynamics observed through the first coordinate.
/// State and observation noise share the standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelParams {
    pub alpha: f64,
    pub sigma: f64,
    pub observation_kind: ObservationKind,
}

impl LinearModelParams {
    pub fn new(alpha: f64, sigma: f64, observation_kind: ObservationKind) -> Result<Self> {
        if !(alpha.abs() <= 1.0) {
            return Err(Error::InvalidInput(format!("|alpha| must be <= 1, got {alpha}")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Self {
            alpha,
            sigma,
            observation_kind,
        })
    }

    /// `[[a, sqrt(1-a^2)], [-sqrt(1-a^2), a]]`, row-major.
    pub fn dynamics_matrix(&self) -> [[f64; 2]; 2] {
        let a = self.alpha;
        let s = (1.0 - a * a).max(0.0).sqrt();
        [[a, s], [-s, a]]
    }

    fn h(&self, x0: f64) -> f64 {
        match self.observation_kind {
            ObservationKind::Linear => x0,
            ObservationKind::Quadratic => x0 * x0,
        }
    }
}

/// `A x + sigma * noise`.
pub fn linear_step(x: &[f64], params: &LinearModelParams, noise: &[f64]) -> Result<[f64; 2]> {
    check_dim("linear state", 2, x.len())?;
    check_dim("linear process noise", 2, noise.len())?;
    if !(params.alpha.abs() <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "|alpha| must be <= 1, got {}",
            params.alpha
        )));
    }
    let a = params.dynamics_matrix();
    Ok([
        a[0][0] * x[0] + a[0][1] * x[1] + params.sigma * noise[0],
        a[1][0] * x[0] + a[1][1] * x[1] + params.sigma * noise[1],
    ])
}

/// `h(x) + sigma_obs * noise` for any model.
pub fn observe(x: &[f64], model: &dyn StateSpaceModel, noise: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.obs_dim()];
    model.observe(x, noise, &mut out)?;
    Ok(out)
}

impl StateSpaceModel for LinearModelParams {
    fn name(&self) -> &str {
        match self.observation_kind {
            ObservationKind::Linear => "linear",
            ObservationKind::Quadratic => "quadratic",
        }
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn transition(&self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("linear output", 2, out.len())?;
        out.copy_from_slice(&linear_step(x, self, noise)?);
        Ok(())
    }

    fn observation_mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.h(x[0]);
    }

    fn obs_noise_std(&self) -> f64 {
        self.sigma
    }

    fn linear_gaussian(&self) -> Option<LinearGaussian> {
        if self.observation_kind != ObservationKind::Linear {
            return None;
        }
        let a = self.dynamics_matrix();
        let s2 = self.sigma * self.sigma;
        Some(LinearGaussian {
            transition: DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]]),
            process_cov: DMatrix::identity(2, 2) * s2,
            observation: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            obs_cov: DMatrix::from_element(1, 1, s2),
        })
    }
}
