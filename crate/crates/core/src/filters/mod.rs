//! Online inference: the OT-DDF push-forward and the comparison baselines.

mod enkf;
mod ensemble;
mod kalman;
mod otddf;
mod otpf;
mod sir;

pub use enkf::{enkf_step, enkf_update, propagate};
pub use ensemble::ParticleEnsemble;
pub use kalman::{kalman_filter, kalman_predict, kalman_update, KalmanState, KalmanStep};
pub use otddf::{otddf_online_step, ObservationWindow};
pub use otpf::{otpf_step, OtpfConfig, OtpfFilter};
pub use sir::{gaussian_log_likelihood, sir_step, sir_update, systematic_resample};
