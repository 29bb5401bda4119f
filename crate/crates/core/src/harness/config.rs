use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::OtpfConfig;
use crate::models::{InitialDistribution, ModelSpec};
use crate::ot_core::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kf,
    Enkf,
    Sir,
    Otpf,
    Otddf,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Kf, Method::Enkf, Method::Sir, Method::Otpf, Method::Otddf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kf => "kf",
            Method::Enkf => "enkf",
            Method::Sir => "sir",
            Method::Otpf => "otpf",
            Method::Otddf => "otddf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?} (expected kf, enkf, sir, otpf, otddf)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Number of recorded trajectories `J`.
    pub trajectories: usize,
    /// Trajectory length `t_f`.
    pub horizon: usize,
    /// Overrides the seed derived from the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    /// Shared settings; `window`, `burn_in` and `seed` are set per map.
    pub config: TrainConfig,
    pub windows: Vec<usize>,
    /// `t0 + w`, the same for every window, so `t0 = window_end - w`.
    pub window_end: usize,
}

impl TrainingSpec {
    pub fn burn_in(&self, w: usize) -> usize {
        self.window_end.saturating_sub(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSpec {
    /// Particle count `N` shared by all ensemble methods.
    pub particles: usize,
    /// Length of each simulated truth trajectory.
    pub horizon: usize,
    pub replications: usize,
    pub methods: Vec<Method>,
    /// Windows whose maps run online; defaults to every trained window.
    #[serde(default)]
    pub windows: Option<Vec<usize>>,
    #[serde(default)]
    pub otpf: OtpfConfig,
    /// OTPF runs only in the first `otpf_replications` replications.
    #[serde(default)]
    pub otpf_replications: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmdSpec {
    /// SIR particle count of the reference posterior.
    pub reference_particles: usize,
    /// Evaluate every `stride` steps.
    pub stride: usize,
    /// Fixed kernel bandwidth; the median heuristic on the reference sample
    /// when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default = "default_true")]
    pub mse: bool,
    #[serde(default)]
    pub mmd: Option<MmdSpec>,
    /// Fraction `p` of particles in the half-plane `{x : <x, X_t> > 0}` of the
    /// true state, and the per-time balance `min(p, 1 - p)`.
    #[serde(default)]
    pub mode_fraction: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            mse: true,
            mmd: None,
            mode_fraction: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub particles: usize,
    pub steps: usize,
    pub methods: Vec<Method>,
    /// Window of the OT-DDF map to time.
    pub window: usize,
    /// Untimed steps run before timing each method.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
}

fn default_warmup() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: Option<InitialDistribution>,
    pub dataset: DatasetSpec,
    pub training: TrainingSpec,
    pub online: OnlineSpec,
    #[serde(default)]
    pub metrics: MetricSpec,
    #[serde(default)]
    pub bench: Option<BenchSpec>,
    /// Free-form notes carried into the output manifest.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::parse("experiment config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn initial(&self) -> InitialDistribution {
        self.initial.clone().unwrap_or_else(|| self.model.default_initial())
    }

    pub fn online_windows(&self) -> Vec<usize> {
        self.online
            .windows
            .clone()
            .unwrap_or_else(|| self.training.windows.clone())
    }

    /// Training config for the map of window `w`.
    pub fn train_config(&self, w: usize) -> TrainConfig {
        TrainConfig {
            window: w,
            burn_in: self.training.burn_in(w),
            seed: crate::rng::derive_seed(self.seed, 1000 + w as u64),
            ..self.training.config.clone()
        }
    }

    pub fn dataset_seed(&self) -> u64 {
        self.dataset
            .seed
            .unwrap_or_else(|| crate::rng::derive_seed(self.seed, 10))
    }

    /// First time step that enters the metrics.
    pub fn metric_start(&self) -> usize {
        self.training.window_end
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.as_model();
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.dataset.trajectories == 0 || self.dataset.horizon == 0 {
            return bad("dataset needs J >= 1 and t_f >= 1".into());
        }
        if self.training.windows.is_empty() {
            return bad("at least one window size is required".into());
        }
        for &w in &self.training.windows {
            if w == 0 || w > self.training.window_end || self.training.window_end > self.dataset.horizon {
                return Err(Error::InvalidWindow {
                    t0: self.training.burn_in(w),
                    w,
                    t_f: self.dataset.horizon,
                });
            }
        }
        for w in self.online_windows() {
            if !self.training.windows.contains(&w) {
                return bad(format!("online window {w} has no trained map"));
            }
        }
        self.training.config.validate()?;
        if self.training.config.batch_size > self.dataset.trajectories {
            return bad(format!(
                "batch size {} exceeds J = {}",
                self.training.config.batch_size, self.dataset.trajectories
            ));
        }
        let o = &self.online;
        if o.particles == 0 || o.replications == 0 {
            return bad("online stage needs N >= 1 and at least one replication".into());
        }
        if o.horizon < self.metric_start() {
            return bad(format!(
                "online horizon {} ends before the first metric time {}",
                o.horizon,
                self.metric_start()
            ));
        }
        if o.methods.contains(&Method::Kf) && model.linear_gaussian().is_none() {
            return bad(format!(
                "the Kalman filter needs a linear-Gaussian model, not {}",
                model.name()
            ));
        }
        if o.methods.contains(&Method::Otpf) {
            o.otpf.solver.validate()?;
            if o.otpf_replications == Some(0) {
                return bad("otpf_replications must be >= 1".into());
            }
        }
        if let Some(m) = &self.metrics.mmd {
            if m.reference_particles == 0 || m.stride == 0 {
                return bad("MMD needs reference_particles >= 1 and stride >= 1".into());
            }
            if let Some(h) = m.bandwidth {
                if !(h > 0.0) {
                    return bad(format!("bandwidth must be > 0, got {h}"));
                }
            }
        }
        if let Some(b) = &self.bench {
            if b.steps < 100 || b.particles == 0 {
                return bad("bench needs at least 100 timed steps and N >= 1".into());
            }
            if b.methods.contains(&Method::Otddf) && !self.training.windows.contains(&b.window) {
                return bad(format!("bench window {} has no trained map", b.window));
            }
            if b.methods.contains(&Method::Kf) && model.linear_gaussian().is_none() {
                return bad("the Kalman filter needs a linear-Gaussian model".into());
            }
        }
        if let Some(init) = &self.initial {
            if init.mean.len() != model.state_dim() {
                return Err(Error::DimensionMismatch {
                    what: "initial mean",
                    expected: model.state_dim(),
                    got: init.mean.len(),
                });
            }
        }
        Ok(())
    }
}
