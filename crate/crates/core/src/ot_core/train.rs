//! Offline max-min training of the conditional transport map.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::{loss_t_grad, potential_loss_grad, push_batch};
use super::map::{Standardizer, TrainedTransportMap, MAP_FORMAT};
use super::nn::{Activation, Architecture, ResidualNetwork};
use super::pairs::{random_permutation, TrainingPairs};
use crate::error::{Error, Result};
use crate::models::{extract_training_slice, TrajectoryDataset};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

fn default_true() -> bool {
    true
}

/// Multiplier applied to both learning rates over the outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `0.5 (1 + cos(pi (k - 1) / k_outer))` at outer iteration `k`.
    Cosine,
}

impl LrSchedule {
    pub fn factor(self, iteration: usize, k_outer: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                let progress = (iteration.saturating_sub(1)) as f64 / k_outer.max(1) as f64;
                0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub window: usize,
    pub burn_in: usize,
    pub batch_size: usize,
    pub lr_f: f64,
    pub lr_t: f64,
    pub k_inner: usize,
    pub k_outer: usize,
    pub f_blocks: usize,
    pub f_width: usize,
    pub t_blocks: usize,
    pub t_width: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    /// Train in shifted/rescaled coordinates (translation plus one isotropic
    /// state scale, which leaves the quadratic-cost transport map unchanged).
    #[serde(default = "default_true")]
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 1,
            burn_in: 0,
            batch_size: 64,
            lr_f: 1e-3,
            lr_t: 5e-4,
            k_inner: 10,
            k_outer: 2000,
            f_blocks: 1,
            f_width: 64,
            t_blocks: 2,
            t_width: 48,
            activation: Activation::Relu,
            lr_schedule: LrSchedule::Constant,
            standardize: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("window", self.window),
            ("batch_size", self.batch_size),
            ("k_inner", self.k_inner),
            ("k_outer", self.k_outer),
            ("f_width", self.f_width),
            ("t_width", self.t_width),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be >= 1")));
            }
        }
        if !(self.lr_f > 0.0 && self.lr_t > 0.0) {
            return Err(Error::InvalidInput("learning rates must be > 0".into()));
        }
        Ok(())
    }

    pub fn potential_architecture(&self, state_dim: usize, context_dim: usize) -> Architecture {
        Architecture {
            input_dim: state_dim + context_dim,
            output_dim: 1,
            width: self.f_width,
            blocks: self.f_blocks,
            activation: self.activation,
            state_skip: false,
        }
    }

    pub fn map_architecture(&self, state_dim: usize, context_dim: usize) -> Architecture {
        Architecture {
            input_dim: state_dim + context_dim,
            output_dim: state_dim,
            width: self.t_width,
            blocks: self.t_blocks,
            activation: self.activation,
            state_skip: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub loss_t: f64,
    pub loss_f: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub loss_curve: Vec<LossRecord>,
    pub map_updates: usize,
    pub potential_updates: usize,
    pub seconds: f64,
}

/// Networks plus optimizer state for the alternating ADAM updates. Kept as a
/// value so online use can warm-start from the previous solve.
#[derive(Debug, Clone)]
pub struct MaxMinTrainer {
    pub potential: ResidualNetwork,
    pub map: ResidualNetwork,
    potential_adam: AdamState,
    map_adam: AdamState,
    lr_f: f64,
    lr_t: f64,
    schedule: LrSchedule,
    /// Learning-rate multiplier of the current outer iteration.
    lr_factor: f64,
    k_inner: usize,
    batch_size: usize,
    pub map_updates: usize,
    pub potential_updates: usize,
}

impl MaxMinTrainer {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, context_dim: usize, cfg: &TrainConfig, rng: &mut R) -> Self {
        let potential = ResidualNetwork::init(cfg.potential_architecture(state_dim, context_dim), rng);
        let map = ResidualNetwork::init(cfg.map_architecture(state_dim, context_dim), rng);
        Self {
            potential_adam: AdamState::new(potential.params.len()),
            map_adam: AdamState::new(map.params.len()),
            potential,
            map,
            lr_f: cfg.lr_f,
            lr_t: cfg.lr_t,
            schedule: cfg.lr_schedule,
            lr_factor: 1.0,
            k_inner: cfg.k_inner,
            batch_size: cfg.batch_size,
            map_updates: 0,
            potential_updates: 0,
        }
    }

    /// One outer iteration: draw a batch with replacement, `k_inner` map
    /// updates, then one potential update. Returns the last map loss and the
    /// potential loss.
    pub fn outer_step(&mut self, pairs: &TrainingPairs, iteration: usize, rng: &mut SimRng) -> Result<(f64, f64)> {
        let indices: Vec<usize> = (0..self.batch_size).map(|_| rng.random_range(0..pairs.len())).collect();
        let batch = pairs.subset(&indices);
        let mut last_t = f64::NAN;
        for _ in 0..self.k_inner {
            let (value, grad) = loss_t_grad(&self.potential, &self.map, &batch);
            if !value.is_finite() {
                return Err(Error::TrainingDiverged {
                    iteration,
                    loss: "map",
                    value,
                });
            }
            adam_step(
                &mut self.map.params,
                &grad,
                &mut self.map_adam,
                self.lr_t * self.lr_factor,
            )?;
            self.map_updates += 1;
            last_t = value;
        }
        let pushed = push_batch(&self.map, &batch);
        let (value_f, grad_f) = potential_loss_grad(&self.potential, &pushed, &batch);
        if !value_f.is_finite() {
            return Err(Error::TrainingDiverged {
                iteration,
                loss: "potential",
                value: value_f,
            });
        }
        adam_step(
            &mut self.potential.params,
            &grad_f,
            &mut self.potential_adam,
            self.lr_f * self.lr_factor,
        )?;
        self.potential_updates += 1;
        Ok((last_t, value_f))
    }

    pub fn run(
        &mut self,
        pairs: &TrainingPairs,
        k_outer: usize,
        rng: &mut SimRng,
        mut curve: Option<&mut Vec<LossRecord>>,
    ) -> Result<()> {
        if pairs.is_empty() {
            return Err(Error::InvalidInput("no training pairs".into()));
        }
        for k in 1..=k_outer {
            self.lr_factor = self.schedule.factor(k, k_outer);
            let (loss_t, loss_f) = self.outer_step(pairs, k, rng)?;
            if let Some(c) = curve.as_deref_mut() {
                c.push(LossRecord {
                    iteration: k,
                    loss_t,
                    loss_f,
                });
            }
        }
        Ok(())
    }
}

pub fn train(dataset: &TrajectoryDataset, config: &TrainConfig) -> Result<TrainedTransportMap> {
    train_detailed(dataset, config).map(|(map, _)| map)
}

/// Builds pairs from `X_{t0}`, `X_{t0+w}` and the window, then trains.
pub fn train_detailed(
    dataset: &TrajectoryDataset,
    config: &TrainConfig,
) -> Result<(TrainedTransportMap, TrainingReport)> {
    config.validate()?;
    let slice = extract_training_slice(dataset, config.burn_in, config.window)?;
    let perm = random_permutation(dataset.len(), derive_seed(config.seed, 1));
    let pairs = TrainingPairs::from_slice(&slice, perm)?;
    train_pairs(&pairs, &slice.base, dataset.obs_dim(), config)
}

/// Trains on explicit pairs. `base_pool` (`state_dim x count`) becomes the
/// empirical base distribution sampled online.
pub fn train_pairs(
    pairs: &TrainingPairs,
    base_pool: &nalgebra::DMatrix<f64>,
    obs_dim: usize,
    config: &TrainConfig,
) -> Result<(TrainedTransportMap, TrainingReport)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no training pairs".into()));
    }
    if config.batch_size > pairs.len() {
        return Err(Error::InvalidInput(format!(
            "batch size {} exceeds the {} available pairs",
            config.batch_size,
            pairs.len()
        )));
    }
    if pairs.context_dim() != config.window * obs_dim {
        return Err(Error::DimensionMismatch {
            what: "window length",
            expected: config.window * obs_dim,
            got: pairs.context_dim(),
        });
    }
    let (n, ctx) = (pairs.state_dim(), pairs.context_dim());
    let standardizer = if config.standardize {
        Standardizer::fit(&[&pairs.base, &pairs.terminal], &pairs.windows, obs_dim)
    } else {
        Standardizer::identity(n, obs_dim)
    };
    let scaled = standardizer.pairs(pairs);

    let started = Instant::now();
    let mut rng = rng_from_seed(derive_seed(config.seed, 2));
    let mut trainer = MaxMinTrainer::new(n, ctx, config, &mut rng);
    let mut curve = Vec::with_capacity(config.k_outer);
    trainer.run(&scaled, config.k_outer, &mut rng, Some(&mut curve))?;
    let report = TrainingReport {
        loss_curve: curve,
        map_updates: trainer.map_updates,
        potential_updates: trainer.potential_updates,
        seconds: started.elapsed().as_secs_f64(),
    };
    let map = TrainedTransportMap {
        format: MAP_FORMAT.to_string(),
        map_net: trainer.map,
        potential_net: trainer.potential,
        window: config.window,
        state_dim: n,
        obs_dim,
        standardizer,
        base_pool: base_pool.as_slice().to_vec(),
        train_config: config.clone(),
    };
    Ok((map, report))
}
