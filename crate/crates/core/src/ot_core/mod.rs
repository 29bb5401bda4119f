//! Transport-map learning: residual networks, ADAM, the empirical max-min
//! objective and the offline training loop.

mod adam;
mod loss;
mod map;
mod nn;
mod pairs;
mod train;

pub use adam::{adam_step, AdamState};
pub use loss::{evaluate_objective, gradient, loss_f, loss_f_grad, loss_t, loss_t_grad, push_batch, LossKind};
pub use map::{Standardizer, TrainedTransportMap, MAP_FORMAT};
pub use nn::{Activation, Architecture, ResidualNetwork, Tape};
pub use pairs::{make_training_pairs, random_permutation, TrainingPairs};
pub use train::{
    train, train_detailed, train_pairs, LossRecord, LrSchedule, MaxMinTrainer, TrainConfig, TrainingReport,
};

/// `f(x, y)` for a single input.
pub fn forward_f(net: &ResidualNetwork, x: &[f64], y_window: &[f64]) -> f64 {
    let input: Vec<f64> = x.iter().chain(y_window).copied().collect();
    net.forward_one(&input)[0]
}

/// `T(x, y)` for a single input.
pub fn forward_t(net: &ResidualNetwork, x: &[f64], y_window: &[f64]) -> Vec<f64> {
    let input: Vec<f64> = x.iter().chain(y_window).copied().collect();
    net.forward_one(&input)
}
