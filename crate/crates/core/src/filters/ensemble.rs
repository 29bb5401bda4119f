use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `N` weighted state samples, one particle per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub particles: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn uniform(particles: DMatrix<f64>) -> Self {
        let n = particles.ncols();
        Self {
            particles,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weighted(particles: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let e = Self { particles, weights };
        e.check_simplex()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.particles.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.particles.nrows()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        let n = self.state_dim();
        &self.particles.as_slice()[i * n..(i + 1) * n]
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.state_dim());
        for (col, &w) in self.particles.column_iter().zip(&self.weights) {
            m.axpy(w, &col, 1.0);
        }
        m
    }

    pub fn check_simplex(&self) -> Result<()> {
        if self.weights.len() != self.len() {
            return Err(Error::InvalidInput("one weight per particle required".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}")));
        }
        Ok(())
    }
}
