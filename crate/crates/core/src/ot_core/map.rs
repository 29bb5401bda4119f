use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::loss::evaluate_objective;
use super::nn::ResidualNetwork;
use super::pairs::{make_training_pairs, TrainingPairs};
use super::train::TrainConfig;
use crate::error::{check_dim, Error, Result};
use crate::models::TrajectoryDataset;

pub const MAP_FORMAT: &str = "otddf-map/1";

/// Affine change of coordinates used during training: states are shifted per
/// coordinate and divided by one common scale, observations are shifted and
/// scaled per observation coordinate (shared by all window slots).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub state_shift: Vec<f64>,
    pub state_scale: f64,
    pub obs_shift: Vec<f64>,
    pub obs_scale: Vec<f64>,
}

fn guard_scale(s: f64) -> f64 {
    if s.is_finite() && s > 1e-12 {
        s
    } else {
        1.0
    }
}

impl Standardizer {
    pub fn identity(state_dim: usize, obs_dim: usize) -> Self {
        Self {
            state_shift: vec![0.0; state_dim],
            state_scale: 1.0,
            obs_shift: vec![0.0; obs_dim],
            obs_scale: vec![1.0; obs_dim],
        }
    }

    pub fn fit(states: &[&DMatrix<f64>], windows: &DMatrix<f64>, obs_dim: usize) -> Self {
        let n = states[0].nrows();
        let count: usize = states.iter().map(|s| s.ncols()).sum();
        let mut shift = vec![0.0; n];
        for s in states {
            for col in s.column_iter() {
                for (a, v) in shift.iter_mut().zip(col.iter()) {
                    *a += v;
                }
            }
        }
        shift.iter_mut().for_each(|a| *a /= count as f64);
        let mut ss = 0.0;
        for s in states {
            for col in s.column_iter() {
                ss += col.iter().zip(&shift).map(|(v, c)| (v - c).powi(2)).sum::<f64>();
            }
        }
        let state_scale = guard_scale((ss / (count * n) as f64).sqrt());

        let mut obs_shift = vec![0.0; obs_dim];
        let mut obs_sq = vec![0.0; obs_dim];
        let per = windows.len() / obs_dim;
        for (k, v) in windows.iter().enumerate() {
            obs_shift[k % obs_dim] += v;
        }
        obs_shift.iter_mut().for_each(|a| *a /= per as f64);
        for (k, v) in windows.iter().enumerate() {
            obs_sq[k % obs_dim] += (v - obs_shift[k % obs_dim]).powi(2);
        }
        let obs_scale = obs_sq.iter().map(|s| guard_scale((s / per as f64).sqrt())).collect();
        Self {
            state_shift: shift,
            state_scale,
            obs_shift,
            obs_scale,
        }
    }

    pub fn states(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.state_shift.len();
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.state_shift[i % n]) / self.state_scale
        })
    }

    pub fn states_inverse(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.state_shift.len();
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            z[(i, j)] * self.state_scale + self.state_shift[i % n]
        })
    }

    pub fn window(&self, y: &[f64]) -> Vec<f64> {
        let m = self.obs_shift.len();
        y.iter()
            .enumerate()
            .map(|(k, v)| (v - self.obs_shift[k % m]) / self.obs_scale[k % m])
            .collect()
    }

    pub fn windows(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.obs_shift.len();
        DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| {
            (y[(i, j)] - self.obs_shift[i % m]) / self.obs_scale[i % m]
        })
    }

    pub fn pairs(&self, p: &TrainingPairs) -> TrainingPairs {
        TrainingPairs {
            base: self.states(&p.base),
            terminal: self.states(&p.terminal),
            windows: self.windows(&p.windows),
            permutation: p.permutation.clone(),
        }
    }
}

/// The offline product: learned map and potential, the coordinates they were
/// trained in, and the empirical base distribution `{X^j_{t0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedTransportMap {
    pub format: String,
    pub map_net: ResidualNetwork,
    pub potential_net: ResidualNetwork,
    pub window: usize,
    pub state_dim: usize,
    pub obs_dim: usize,
    pub standardizer: Standardizer,
    /// Column-major `state_dim x pool_size`.
    pub base_pool: Vec<f64>,
    pub train_config: TrainConfig,
}

impl TrainedTransportMap {
    pub fn pool_size(&self) -> usize {
        self.base_pool.len() / self.state_dim
    }

    pub fn base_point(&self, j: usize) -> &[f64] {
        &self.base_pool[j * self.state_dim..(j + 1) * self.state_dim]
    }

    pub fn context_dim(&self) -> usize {
        self.window * self.obs_dim
    }

    /// Applies the learned map to every column of `base` with the flattened
    /// (oldest-first) observation window.
    pub fn push_forward(&self, base: &DMatrix<f64>, window: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("base state rows", self.state_dim, base.nrows())?;
        check_dim("observation window length", self.context_dim(), window.len())?;
        let z = self.standardizer.states(base);
        let zy = self.standardizer.window(window);
        let out = self.map_net.forward_shared_context(&z, &zy);
        Ok(self.standardizer.states_inverse(&out))
    }

    /// Max-min objective of the trained pair on fresh pairs drawn from `dataset`
    /// (in training coordinates).
    pub fn objective_on(&self, dataset: &TrajectoryDataset, seed: u64) -> Result<f64> {
        let pairs = make_training_pairs(dataset, self.train_config.burn_in, self.window, seed)?;
        check_dim("dataset state dim", self.state_dim, pairs.state_dim())?;
        let scaled = self.standardizer.pairs(&pairs);
        Ok(evaluate_objective(&self.potential_net, &self.map_net, &scaled))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("map serializes");
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        if map.format != MAP_FORMAT {
            return Err(Error::parse(
                path.display().to_string(),
                format!("unsupported map format {:?}", map.format),
            ));
        }
        check_dim("map input", map.state_dim + map.context_dim(), map.map_net.input_dim())?;
        check_dim("map output", map.state_dim, map.map_net.output_dim())?;
        check_dim(
            "map parameters",
            map.map_net.arch.param_count(),
            map.map_net.params.len(),
        )?;
        check_dim(
            "potential parameters",
            map.potential_net.arch.param_count(),
            map.potential_net.params.len(),
        )?;
        if map.state_dim == 0 || map.base_pool.is_empty() || !map.base_pool.len().is_multiple_of(map.state_dim) {
            return Err(Error::parse(path.display().to_string(), "malformed base pool"));
        }
        Ok(map)
    }
}
