use nalgebra::DMatrix;
use rand::Rng;

use super::enkf::propagate;
use super::ParticleEnsemble;
use crate::error::{check_dim, Error, Result};
use crate::models::StateSpaceModel;
use crate::rng::SimRng;

/// `log N(y; h(x), sigma_obs^2 I)` up to the normalizing constant.
pub fn gaussian_log_likelihood(model: &dyn StateSpaceModel, x: &[f64], y: &[f64], scratch: &mut [f64]) -> f64 {
    model.observation_mean(x, scratch);
    let s2 = model.obs_noise_std().powi(2);
    -0.5 * scratch.iter().zip(y).map(|(h, y)| (y - h) * (y - h)).sum::<f64>() / s2
}

/// Systematic resampling: offspring positions `(u0 + k) / N`, `u0` in `[0, 1)`
/// scaled by `1/N`. Returns the parent index of each offspring.
pub fn systematic_resample(weights: &[f64], u0: f64) -> Vec<usize> {
    let count = weights.len();
    let mut out = Vec::with_capacity(count);
    let mut cumulative = weights[0];
    let mut parent = 0;
    for k in 0..count {
        let u = (u0 + k as f64) / count as f64;
        while u >= cumulative && parent + 1 < count {
            parent += 1;
            cumulative += weights[parent];
        }
        out.push(parent);
    }
    out
}

/// Importance weighting of `forecast` by `y` in log space, then systematic
/// resampling back to uniform weights.
pub fn sir_update(
    forecast: &DMatrix<f64>,
    prior_weights: &[f64],
    y: &[f64],
    model: &dyn StateSpaceModel,
    rng: &mut SimRng,
) -> Result<ParticleEnsemble> {
    let (n, count) = (forecast.nrows(), forecast.ncols());
    if count == 0 {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    check_dim("observation", model.obs_dim(), y.len())?;
    let mut scratch = vec![0.0; model.obs_dim()];
    let log_w: Vec<f64> = forecast
        .as_slice()
        .chunks_exact(n)
        .zip(prior_weights)
        .map(|(x, &w)| w.ln() + gaussian_log_likelihood(model, x, y, &mut scratch))
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights(format!("maximum log-weight is {max}")));
    }
    let mut weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let parents = systematic_resample(&weights, rng.random::<f64>());
    let mut particles = DMatrix::zeros(n, count);
    let src = forecast.as_slice();
    for (dst, &p) in particles.as_mut_slice().chunks_exact_mut(n).zip(&parents) {
        dst.copy_from_slice(&src[p * n..(p + 1) * n]);
    }
    Ok(ParticleEnsemble::uniform(particles))
}

pub fn sir_step(
    ensemble: &ParticleEnsemble,
    y: &[f64],
    model: &dyn StateSpaceModel,
    rng: &mut SimRng,
) -> Result<ParticleEnsemble> {
    let forecast = propagate(ensemble, model, rng)?;
    sir_update(&forecast, &ensemble.weights, y, model, rng)
}
