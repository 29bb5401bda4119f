use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;

use super::ParticleEnsemble;
use crate::error::{check_dim, Error, Result};
use crate::ot_core::TrainedTransportMap;
use crate::rng::rng_from_seed;

/// The most recent `w` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    capacity: usize,
    obs_dim: usize,
    buffer: VecDeque<Vec<f64>>,
}

impl ObservationWindow {
    pub fn new(capacity: usize, obs_dim: usize) -> Self {
        Self {
            capacity,
            obs_dim,
            buffer: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn for_map(map: &TrainedTransportMap) -> Self {
        Self::new(map.window, map.obs_dim)
    }

    pub fn push(&mut self, y: &[f64]) -> Result<()> {
        check_dim("window observation", self.obs_dim, y.len())?;
        self.buffer.push_back(y.to_vec());
        if self.buffer.len() > self.capacity {
            self.buffer.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.capacity
    }

    /// Oldest observation first, matching the training layout.
    pub fn flatten(&self) -> Vec<f64> {
        self.buffer.iter().flatten().copied().collect()
    }
}

/// Draws `count` base points from the map's pool (with replacement) and
/// pushes them through the map conditioned on the current window.
pub fn otddf_online_step(
    map: &TrainedTransportMap,
    window: &ObservationWindow,
    count: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if window.capacity != map.window || window.obs_dim != map.obs_dim {
        return Err(Error::InvalidInput(format!(
            "window shape ({} x {}) does not match the map ({} x {})",
            window.capacity, window.obs_dim, map.window, map.obs_dim
        )));
    }
    if !window.is_full() {
        return Err(Error::WindowWarmUp {
            have: window.len(),
            need: window.capacity,
        });
    }
    if count == 0 {
        return Err(Error::InvalidInput("particle count must be >= 1".into()));
    }
    let n = map.state_dim;
    let pool = map.pool_size();
    let mut rng = rng_from_seed(seed);
    let mut base = DMatrix::zeros(n, count);
    for dst in base.as_mut_slice().chunks_exact_mut(n) {
        dst.copy_from_slice(map.base_point(rng.random_range(0..pool)));
    }
    let particles = map.push_forward(&base, &window.flatten())?;
    Ok(ParticleEnsemble::uniform(particles))
}
