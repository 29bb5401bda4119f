//! Optimal-transport data-driven filtering.
//!
//! The offline stage learns, from recorded state/observation trajectories, a
//! map `T(x, y)` that pushes samples of the burn-in state distribution to the
//! posterior of the state given the last `w` observations. The online stage
//! approximates the filter by drawing base samples and applying the map to the
//! current observation window.
//!
//! Modules:
//! * [`models`]: benchmark models, trajectory simulation and dataset files;
//! * [`ot_core`]: networks, gradients, ADAM and the max-min training loop;
//! * [`filters`]: the online push-forward step and the KF/EnKF/SIR/OTPF baselines;
//! * [`metrics`]: MSE, MMD and time averages;
//! * [`harness`]: experiment configs, pipelines, timing and CLI plumbing.

pub mod error;
pub mod filters;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod ot_core;
pub mod rng;

pub use error::{Error, Result};
