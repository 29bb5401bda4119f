use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{check_dim, Error, Result};
use crate::models::{extract_training_slice, TrainingSlice, TrajectoryDataset};
use crate::rng::rng_from_seed;

/// Empirical target and source couplings, one column per sample.
///
/// `(terminal[:, i], windows[:, i])` are draws from the joint law of the state
/// and its observation window; `(base[:, i], windows[:, i])` pair a window
/// with the base state of trajectory `permutation[i]`, which realizes the
/// independent coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairs {
    pub base: DMatrix<f64>,
    pub terminal: DMatrix<f64>,
    pub windows: DMatrix<f64>,
    pub permutation: Vec<usize>,
}

impl TrainingPairs {
    /// Pairs with an explicit permutation of the unpermuted base states.
    pub fn from_slice(slice: &TrainingSlice, permutation: Vec<usize>) -> Result<Self> {
        let count = slice.base.ncols();
        check_dim("permutation length", count, permutation.len())?;
        check_dim("terminal count", count, slice.terminal.ncols())?;
        check_dim("window count", count, slice.windows.ncols())?;
        let mut seen = vec![false; count];
        for &p in &permutation {
            if p >= count || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidInput("permutation is not a bijection".into()));
            }
        }
        let base = DMatrix::from_fn(slice.base.nrows(), count, |i, j| slice.base[(i, permutation[j])]);
        Ok(Self {
            base,
            terminal: slice.terminal.clone(),
            windows: slice.windows.clone(),
            permutation,
        })
    }

    pub fn len(&self) -> usize {
        self.base.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn context_dim(&self) -> usize {
        self.windows.nrows()
    }

    /// Columns `indices` (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), indices.len(), |i, j| m[(i, indices[j])]);
        Self {
            base: pick(&self.base),
            terminal: pick(&self.terminal),
            windows: pick(&self.windows),
            permutation: indices.iter().map(|&i| self.permutation[i]).collect(),
        }
    }
}

pub fn random_permutation(count: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    perm
}

/// Training pairs from `(X_{t0}, X_{t0+w}, Y_{t0+w,t0})` with base states
/// shuffled by a uniformly random permutation drawn from `seed`.
pub fn make_training_pairs(dataset: &TrajectoryDataset, t0: usize, w: usize, seed: u64) -> Result<TrainingPairs> {
    let slice = extract_training_slice(dataset, t0, w)?;
    let perm = random_permutation(dataset.len(), seed);
    TrainingPairs::from_slice(&slice, perm)
}
