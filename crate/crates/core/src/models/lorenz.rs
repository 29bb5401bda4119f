use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{check_dim, Error, Result};

/// Stochastic Lorenz 63 discretized by explicit Euler-Maruyama, observed
/// through its first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lorenz63Params {
    #[serde(default = "defaults::sigma_l")]
    pub sigma_l: f64,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    /// Diffusion coefficient; the per-step increment has std `process_noise_std * sqrt(dt)`.
    #[serde(default = "defaults::process_noise_std")]
    pub process_noise_std: f64,
    #[serde(default = "defaults::obs_noise_var")]
    pub obs_noise_var: f64,
}

mod defaults {
    pub fn sigma_l() -> f64 {
        10.0
    }
    pub fn rho() -> f64 {
        28.0
    }
    pub fn beta() -> f64 {
        8.0 / 3.0
    }
    pub fn dt() -> f64 {
        0.01
    }
    pub fn process_noise_std() -> f64 {
        2.0
    }
    pub fn obs_noise_var() -> f64 {
        0.1
    }
}

impl Default for Lorenz63Params {
    fn default() -> Self {
        Self {
            sigma_l: defaults::sigma_l(),
            rho: defaults::rho(),
            beta: defaults::beta(),
            dt: defaults::dt(),
            process_noise_std: defaults::process_noise_std(),
            obs_noise_var: defaults::obs_noise_var(),
        }
    }
}

impl Lorenz63Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.obs_noise_var > 0.0) {
            return Err(Error::InvalidInput(format!(
                "obs_noise_var must be > 0, got {}",
                self.obs_noise_var
            )));
        }
        if !(self.process_noise_std >= 0.0) {
            return Err(Error::InvalidInput("process_noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// The equilibrium `(sqrt(b(r-1)), sqrt(b(r-1)), r-1)` on the positive wing.
    pub fn fixed_point(&self) -> [f64; 3] {
        let c = (self.beta * (self.rho - 1.0)).max(0.0).sqrt();
        [c, c, self.rho - 1.0]
    }
}

pub fn lorenz63_drift(x: &[f64; 3], p: &Lorenz63Params) -> [f64; 3] {
    [
        p.sigma_l * (x[1] - x[0]),
        x[0] * (p.rho - x[2]) - x[1],
        x[0] * x[1] - p.beta * x[2],
    ]
}

/// `x + dt f(x) + process_noise_std sqrt(dt) noise`.
pub fn lorenz63_step(x: &[f64], params: &Lorenz63Params, noise: &[f64]) -> Result<[f64; 3]> {
    check_dim("lorenz state", 3, x.len())?;
    check_dim("lorenz process noise", 3, noise.len())?;
    params.validate()?;
    let xs = [x[0], x[1], x[2]];
    let f = lorenz63_drift(&xs, params);
    let g = params.process_noise_std * params.dt.sqrt();
    let out = [
        xs[0] + params.dt * f[0] + g * noise[0],
        xs[1] + params.dt * f[1] + g * noise[1],
        xs[2] + params.dt * f[2] + g * noise[2],
    ];
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow(format!(
            "lorenz63 step produced a non-finite state from {xs:?}"
        )));
    }
    Ok(out)
}

impl StateSpaceModel for Lorenz63Params {
    fn name(&self) -> &str {
        "lorenz63"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn transition(&self, x: &[f64], noise: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("lorenz output", 3, out.len())?;
        out.copy_from_slice(&lorenz63_step(x, self, noise)?);
        Ok(())
    }

    fn observation_mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }

    fn obs_noise_std(&self) -> f64 {
        self.obs_noise_var.sqrt()
    }
}
