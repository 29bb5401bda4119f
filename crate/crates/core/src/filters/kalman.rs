use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::models::LinearGaussian;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Posterior after one predict/update, with the innovation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanStep {
    pub posterior: KalmanState,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
}

fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

pub fn kalman_predict(lg: &LinearGaussian, state: &KalmanState) -> KalmanState {
    let a = &lg.transition;
    KalmanState {
        mean: a * &state.mean,
        covariance: symmetrize(&(a * &state.covariance * a.transpose() + &lg.process_cov)),
    }
}

/// Measurement update in Joseph form.
pub fn kalman_update(lg: &LinearGaussian, prior: &KalmanState, y: &[f64]) -> Result<KalmanStep> {
    let h = &lg.observation;
    check_dim("kalman observation", h.nrows(), y.len())?;
    let innovation = DVector::from_column_slice(y) - h * &prior.mean;
    let s = symmetrize(&(h * &prior.covariance * h.transpose() + &lg.obs_cov));
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance is not positive definite".into()))?;
    // K = P H^T S^{-1}
    let gain = chol.solve(&(h * &prior.covariance)).transpose();
    let n = prior.mean.len();
    let i_kh = DMatrix::identity(n, n) - &gain * h;
    let covariance =
        symmetrize(&(&i_kh * &prior.covariance * i_kh.transpose() + &gain * &lg.obs_cov * gain.transpose()));
    Ok(KalmanStep {
        posterior: KalmanState {
            mean: &prior.mean + &gain * &innovation,
            covariance,
        },
        innovation,
        innovation_cov: s,
    })
}

/// Posteriors for `Y_1, Y_2, ...` starting from the prior on `X_0`.
pub fn kalman_filter(lg: &LinearGaussian, observations: &[Vec<f64>], prior: KalmanState) -> Result<Vec<KalmanState>> {
    check_dim("kalman prior", lg.transition.nrows(), prior.mean.len())?;
    let mut state = prior;
    let mut out = Vec::with_capacity(observations.len());
    for y in observations {
        let predicted = kalman_predict(lg, &state);
        state = kalman_update(lg, &predicted, y)?.posterior;
        out.push(state.clone());
    }
    Ok(out)
}
