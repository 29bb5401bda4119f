//! Experiment orchestration: configs, the simulate/train/run/evaluate/bench
//! pipeline, timing and output files.

mod bench;
mod config;
mod experiment;
mod io;
mod pipeline;

pub use bench::{bench, hardware_note, BenchEntry, BenchReport};
pub use config::{BenchSpec, DatasetSpec, ExperimentConfig, Method, MetricSpec, MmdSpec, OnlineSpec, TrainingSpec};
pub use experiment::{
    mode_fraction, otddf_label, per_time_means, replication_seed, run_online, run_replication, simulate_dataset,
    summarize, train_maps, ReplicationResult, RunSummary, Series, SummaryEntry, METRIC_BALANCE, METRIC_MMD,
    METRIC_MODE, METRIC_MSE,
};
pub use io::{
    loss_csv, manifest_path, parse_csv, per_time_csv, read_json, record_manifest, series_csv, write_json, Manifest,
    ManifestEntry, LOSS_HEADER, PER_TIME_HEADER, SERIES_HEADER,
};
pub use pipeline::{
    benchmark, dataset_for, ensure_maps, evaluate, load_maps, loss_file, map_file, run, simulate, train, Evaluation,
    TrainSummary, DATASET_FILE,
};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "OTDDF_THREADS";

/// Runs `f` inside a rayon pool capped by `OTDDF_THREADS` when it is set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let threads: usize =
                v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                    Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
                })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
