use nalgebra::{DMatrix, DVector};

use super::ParticleEnsemble;
use crate::error::{check_dim, Error, Result};
use crate::models::StateSpaceModel;
use crate::rng::{fill_standard_normal, SimRng};

/// Pushes every particle through the model's transition kernel.
pub fn propagate(ensemble: &ParticleEnsemble, model: &dyn StateSpaceModel, rng: &mut SimRng) -> Result<DMatrix<f64>> {
    let n = model.state_dim();
    check_dim("ensemble state dim", n, ensemble.state_dim())?;
    let mut out = DMatrix::zeros(n, ensemble.len());
    let mut noise = vec![0.0; n];
    for (src, dst) in ensemble
        .particles
        .as_slice()
        .chunks_exact(n)
        .zip(out.as_mut_slice().chunks_exact_mut(n))
    {
        fill_standard_normal(rng, &mut noise);
        model.transition(src, &noise, dst)?;
    }
    Ok(out)
}

/// Stochastic (perturbed-observation) EnKF analysis of `forecast` given `y`.
///
/// `perturbations` holds one standard-normal column per particle; particle `i`
/// assimilates `y + sigma_obs * perturbations[:, i]`.
pub fn enkf_update(
    forecast: &DMatrix<f64>,
    y: &[f64],
    model: &dyn StateSpaceModel,
    perturbations: &DMatrix<f64>,
) -> Result<ParticleEnsemble> {
    let (n, m, count) = (forecast.nrows(), model.obs_dim(), forecast.ncols());
    if count == 0 {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    check_dim("observation", m, y.len())?;
    check_dim("perturbation rows", m, perturbations.nrows())?;
    check_dim("perturbation columns", count, perturbations.ncols())?;
    let mut predicted = DMatrix::zeros(m, count);
    for (x, h) in forecast
        .as_slice()
        .chunks_exact(n)
        .zip(predicted.as_mut_slice().chunks_exact_mut(m))
    {
        model.observation_mean(x, h);
    }
    let x_mean = forecast.column_mean();
    let h_mean = predicted.column_mean();
    let mut cov_xh = DMatrix::zeros(n, m);
    let mut cov_hh = DMatrix::zeros(m, m);
    for j in 0..count {
        let dx = forecast.column(j) - &x_mean;
        let dh = predicted.column(j) - &h_mean;
        cov_xh.ger(1.0, &dx, &dh, 1.0);
        cov_hh.ger(1.0, &dh, &dh, 1.0);
    }
    let denom = (count.max(2) - 1) as f64;
    cov_xh /= denom;
    cov_hh /= denom;
    let s_obs = model.obs_noise_std();
    let innovation_cov = &cov_hh + DMatrix::identity(m, m) * (s_obs * s_obs);
    let chol = match innovation_cov.clone().cholesky() {
        Some(c) => c,
        None => (innovation_cov + DMatrix::identity(m, m) * 1e-8)
            .cholesky()
            .ok_or_else(|| Error::Singular("EnKF innovation covariance".into()))?,
    };
    // K = C_xh S^{-1}
    let gain = chol.solve(&cov_xh.transpose()).transpose();
    let mut analysis = forecast.clone();
    let yv = DVector::from_column_slice(y);
    for j in 0..count {
        let innovation = &yv + perturbations.column(j) * s_obs - predicted.column(j);
        let mut col = analysis.column_mut(j);
        col.gemv(1.0, &gain, &innovation, 1.0);
    }
    Ok(ParticleEnsemble::uniform(analysis))
}

pub fn enkf_step(
    ensemble: &ParticleEnsemble,
    y: &[f64],
    model: &dyn StateSpaceModel,
    rng: &mut SimRng,
) -> Result<ParticleEnsemble> {
    if ensemble.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let forecast = propagate(ensemble, model, rng)?;
    let mut perturbations = DMatrix::zeros(model.obs_dim(), ensemble.len());
    fill_standard_normal(rng, perturbations.as_mut_slice());
    enkf_update(&forecast, y, model, &perturbations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearModelParams, ObservationKind};
    use crate::rng::rng_from_seed;

    #[test]
    fn zero_innovation_leaves_particles() {
        let model = LinearModelParams::new(0.9, 0.3, ObservationKind::Linear).unwrap();
        // every particle predicts observation 1.5
        let forecast = DMatrix::from_fn(2, 6, |i, j| if i == 0 { 1.5 } else { j as f64 });
        let pert = DMatrix::zeros(1, 6);
        let out = enkf_update(&forecast, &[1.5], &model, &pert).unwrap();
        assert_eq!(out.particles, forecast);
    }

    #[test]
    fn size_and_weights_preserved() {
        let model = LinearModelParams::new(0.9, 0.3, ObservationKind::Quadratic).unwrap();
        let mut rng = rng_from_seed(1);
        let mut e = ParticleEnsemble::uniform(DMatrix::from_fn(2, 50, |i, j| (i + j) as f64 * 0.1));
        for t in 0..20 {
            e = enkf_step(&e, &[0.1 * t as f64], &model, &mut rng).unwrap();
            assert_eq!(e.len(), 50);
            e.check_simplex().unwrap();
        }
    }

    #[test]
    fn empty_rejected() {
        let model = LinearModelParams::new(0.9, 0.3, ObservationKind::Linear).unwrap();
        let e = ParticleEnsemble::uniform(DMatrix::zeros(2, 0));
        assert!(enkf_step(&e, &[0.0], &model, &mut rng_from_seed(0)).is_err());
    }
}
