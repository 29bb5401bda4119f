#![allow(dead_code)]

use nalgebra::DMatrix;
use otddf::models::TrainingSlice;
use otddf::ot_core::{
    random_permutation, train_pairs, TrainConfig, TrainedTransportMap, TrainingPairs, TrainingReport,
};
use otddf::rng::{rng_from_seed, standard_normal_vec};

/// X ~ N(0, 1), Y = X + N(0, 1); the posterior of X given y is N(y/2, 1/2).
pub fn gaussian_pairs(count: usize, seed: u64) -> (TrainingPairs, DMatrix<f64>) {
    let mut rng = rng_from_seed(seed);
    let x = standard_normal_vec(&mut rng, count);
    let noise = standard_normal_vec(&mut rng, count);
    let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let states = DMatrix::from_row_slice(1, count, &x);
    let slice = TrainingSlice {
        base: states.clone(),
        terminal: states.clone(),
        windows: DMatrix::from_row_slice(1, count, &y),
    };
    let pairs = TrainingPairs::from_slice(&slice, random_permutation(count, seed ^ 0x5a5a)).unwrap();
    (pairs, states)
}

pub fn gaussian_config(seed: u64) -> TrainConfig {
    TrainConfig {
        window: 1,
        seed,
        ..TrainConfig::default()
    }
}

pub fn train_gaussian(count: usize, config: &TrainConfig) -> (TrainedTransportMap, TrainingReport) {
    let (pairs, pool) = gaussian_pairs(count, config.seed);
    train_pairs(&pairs, &pool, 1, config).unwrap()
}

pub struct GaussianScore {
    pub mean_abs_error: f64,
    pub variance: f64,
    pub per_y: Vec<(f64, f64, f64)>,
}

/// Pushes the whole base pool through `T(., y)` for y on an evenly spaced
/// grid over [-1.5, 1.5] and compares with the exact posterior.
pub fn score_gaussian(map: &TrainedTransportMap, grid: usize) -> GaussianScore {
    let pool = DMatrix::from_column_slice(1, map.pool_size(), &map.base_pool);
    let mut per_y = Vec::new();
    for k in 0..grid {
        let y = -1.5 + 3.0 * k as f64 / (grid - 1) as f64;
        let out = map.push_forward(&pool, &[y]).unwrap();
        let mean = out.mean();
        let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / out.len() as f64;
        per_y.push((y, mean, var));
    }
    let mean_abs_error = per_y.iter().map(|(y, m, _)| (m - y / 2.0).abs()).sum::<f64>() / grid as f64;
    let variance = per_y.iter().map(|(_, _, v)| v).sum::<f64>() / grid as f64;
    GaussianScore {
        mean_abs_error,
        variance,
        per_y,
    }
}

/// A complete experiment small enough to run in well under a second.
pub const TINY_CONFIG: &str = r#"{
    "name": "tiny", "seed": 5,
    "model": { "kind": "linear", "alpha": 0.9, "sigma": 0.31622776601683794, "observation_kind": "quadratic" },
    "dataset": { "trajectories": 200, "horizon": 12 },
    "training": {
        "config": { "window": 1, "burn_in": 0, "seed": 0, "batch_size": 16, "lr_f": 0.001, "lr_t": 0.0005,
                    "k_inner": 2, "k_outer": 20, "f_blocks": 1, "f_width": 8, "t_blocks": 1, "t_width": 8 },
        "windows": [2, 4], "window_end": 10
    },
    "online": { "particles": 50, "horizon": 14, "replications": 2, "methods": ["enkf", "sir", "otpf", "otddf"],
                "otpf": { "solver": { "window": 1, "burn_in": 0, "seed": 0, "batch_size": 16, "lr_f": 0.001,
                          "lr_t": 0.0005, "k_inner": 2, "k_outer": 3, "f_blocks": 1, "f_width": 8,
                          "t_blocks": 1, "t_width": 8 } } },
    "metrics": { "mse": true, "mmd": { "reference_particles": 200, "stride": 2 }, "mode_fraction": true },
    "bench": { "particles": 50, "steps": 100, "methods": ["enkf", "sir", "otddf"], "window": 2, "warmup": 2 }
}"#;

pub fn tiny_config() -> otddf::harness::ExperimentConfig {
    otddf::harness::ExperimentConfig::from_json(TINY_CONFIG).unwrap()
}
