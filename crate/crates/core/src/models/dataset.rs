use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InitialDistribution, StateSpaceModel};
use crate::error::{check_dim, Error, Result};
use crate::rng::substream;

/// One recorded run: states `X_0..X_{t_f}` and observations `Y_1..Y_{t_f}`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    state_dim: usize,
    obs_dim: usize,
    states: Vec<f64>,
    observations: Vec<f64>,
}

impl Trajectory {
    pub fn from_rows(states: &[Vec<f64>], observations: &[Vec<f64>]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidInput("trajectory needs at least X_0".into()));
        }
        check_dim("observation count", states.len() - 1, observations.len())?;
        let n = states[0].len();
        let m = observations.first().map_or(0, Vec::len);
        for s in states {
            check_dim("state", n, s.len())?;
        }
        for o in observations {
            check_dim("observation", m, o.len())?;
        }
        Ok(Self {
            state_dim: n,
            obs_dim: m,
            states: states.concat(),
            observations: observations.concat(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.states.len() / self.state_dim - 1
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// `X_t` for `t` in `0..=t_f`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    /// `Y_t` for `t` in `1..=t_f`.
    pub fn observation(&self, t: usize) -> &[f64] {
        assert!(t >= 1, "observations are indexed from t = 1");
        &self.observations[(t - 1) * self.obs_dim..t * self.obs_dim]
    }

    /// `(Y_{from+1}, ..., Y_{to})` flattened oldest-first.
    pub fn observation_window(&self, from: usize, to: usize) -> &[f64] {
        &self.observations[from * self.obs_dim..to * self.obs_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub model_name: String,
    pub seed: u64,
    trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn new(model_name: impl Into<String>, seed: u64, trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset needs at least one trajectory".into()))?;
        for tr in &trajectories {
            check_dim("trajectory horizon", first.horizon(), tr.horizon())?;
            check_dim("trajectory state dim", first.state_dim, tr.state_dim)?;
            check_dim("trajectory obs dim", first.obs_dim, tr.obs_dim)?;
        }
        Ok(Self {
            model_name: model_name.into(),
            seed,
            trajectories,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].horizon()
    }

    pub fn state_dim(&self) -> usize {
        self.trajectories[0].state_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.trajectories[0].obs_dim
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            model: self.model_name.clone(),
            n: self.state_dim(),
            m: self.obs_dim(),
            j: self.len(),
            t_f: self.horizon(),
            seed: self.seed,
        }
    }
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub t_f: usize,
    pub seed: u64,
}

/// Simulates `count` independent trajectories of length `t_f`. Trajectory `j`
/// draws from ChaCha stream `j` of `seed`, so the result does not depend on
/// thread scheduling.
pub fn simulate_trajectories(
    model: &dyn StateSpaceModel,
    count: usize,
    t_f: usize,
    x0: &InitialDistribution,
    seed: u64,
) -> Result<TrajectoryDataset> {
    if count == 0 || t_f == 0 {
        return Err(Error::InvalidInput(format!(
            "need J >= 1 and t_f >= 1, got J = {count}, t_f = {t_f}"
        )));
    }
    check_dim("initial distribution", model.state_dim(), x0.mean.len())?;
    let trajectories = (0..count)
        .into_par_iter()
        .map(|j| simulate_one(model, t_f, x0, seed, j as u64))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryDataset::new(model.name(), seed, trajectories)
}

fn simulate_one(
    model: &dyn StateSpaceModel,
    t_f: usize,
    x0: &InitialDistribution,
    seed: u64,
    j: u64,
) -> Result<Trajectory> {
    let (n, m) = (model.state_dim(), model.obs_dim());
    let mut rng = substream(seed, j);
    let mut states = Vec::with_capacity((t_f + 1) * n);
    let mut observations = vec![0.0; t_f * m];
    states.extend(x0.sample(&mut rng));
    let mut next = vec![0.0; n];
    for t in 1..=t_f {
        model.sample_transition(&states[(t - 1) * n..t * n], &mut rng, &mut next)?;
        states.extend_from_slice(&next);
        model.sample_observation(&next, &mut rng, &mut observations[(t - 1) * m..t * m])?;
    }
    Ok(Trajectory {
        state_dim: n,
        obs_dim: m,
        states,
        observations,
    })
}

/// Per-trajectory `X_{t0}`, `X_{t0+w}` and the window `(Y_{t0+1}, .., Y_{t0+w})`,
/// one column per trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSlice {
    pub base: DMatrix<f64>,
    pub terminal: DMatrix<f64>,
    pub windows: DMatrix<f64>,
}

pub fn extract_training_slice(dataset: &TrajectoryDataset, t0: usize, w: usize) -> Result<TrainingSlice> {
    let t_f = dataset.horizon();
    if w == 0 || t0 + w > t_f {
        return Err(Error::InvalidWindow { t0, w, t_f });
    }
    let (n, m, count) = (dataset.state_dim(), dataset.obs_dim(), dataset.len());
    let mut base = DMatrix::zeros(n, count);
    let mut terminal = DMatrix::zeros(n, count);
    let mut windows = DMatrix::zeros(w * m, count);
    for (j, tr) in dataset.trajectories().iter().enumerate() {
        base.column_mut(j).copy_from_slice(tr.state(t0));
        terminal.column_mut(j).copy_from_slice(tr.state(t0 + w));
        windows.column_mut(j).copy_from_slice(tr.observation_window(t0, t0 + w));
    }
    Ok(TrainingSlice {
        base,
        terminal,
        windows,
    })
}

/// `dataset.csv` -> `dataset.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn fmt17(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

/// Writes the dataset CSV (`traj,t,x_0..,y_0..`) and its metadata sidecar.
pub fn write_dataset(dataset: &TrajectoryDataset, csv_path: &Path) -> Result<()> {
    let (n, m) = (dataset.state_dim(), dataset.obs_dim());
    let mut out = String::from("traj,t");
    for i in 0..n {
        let _ = write!(out, ",x_{i}");
    }
    for i in 0..m {
        let _ = write!(out, ",y_{i}");
    }
    out.push('\n');
    for (j, tr) in dataset.trajectories().iter().enumerate() {
        for t in 0..=tr.horizon() {
            let _ = write!(out, "{j},{t}");
            for &v in tr.state(t) {
                out.push(',');
                fmt17(&mut out, v);
            }
            for i in 0..m {
                out.push(',');
                if t > 0 {
                    fmt17(&mut out, tr.observation(t)[i]);
                }
            }
            out.push('\n');
        }
    }
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(csv_path, out).map_err(|e| Error::io(csv_path, e))?;
    let meta_file = meta_path(csv_path);
    let meta = serde_json::to_string_pretty(&dataset.meta()).expect("metadata serializes");
    fs::write(&meta_file, meta).map_err(|e| Error::io(&meta_file, e))
}

pub fn read_dataset(csv_path: &Path) -> Result<TrajectoryDataset> {
    let meta_file = meta_path(csv_path);
    let meta_text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::parse(meta_file.display().to_string(), e))?;
    let text = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let ctx = csv_path.display().to_string();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(&ctx, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() != 2 + meta.n + meta.m || cols[0] != "traj" || cols[1] != "t" {
        return Err(Error::parse(&ctx, format!("unexpected header {header:?}")));
    }
    let rows_per = meta.t_f + 1;
    let mut trajectories = Vec::with_capacity(meta.j);
    let mut states = Vec::with_capacity(rows_per * meta.n);
    let mut observations = Vec::with_capacity(meta.t_f * meta.m);
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(
                &ctx,
                format!("line {}: {} fields", lineno + 2, fields.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::parse(&ctx, format!("line {}: {s:?}: {e}", lineno + 2)))
        };
        let j: usize = fields[0].parse().map_err(|e| Error::parse(&ctx, e))?;
        let t: usize = fields[1].parse().map_err(|e| Error::parse(&ctx, e))?;
        if j != trajectories.len() || t != states.len() / meta.n.max(1) {
            return Err(Error::parse(&ctx, format!("line {}: rows out of order", lineno + 2)));
        }
        for f in &fields[2..2 + meta.n] {
            states.push(parse(f)?);
        }
        if t > 0 {
            for f in &fields[2 + meta.n..] {
                observations.push(parse(f)?);
            }
        }
        if t == meta.t_f {
            trajectories.push(Trajectory {
                state_dim: meta.n,
                obs_dim: meta.m,
                states: std::mem::take(&mut states),
                observations: std::mem::take(&mut observations),
            });
        }
    }
    if trajectories.len() != meta.j || !states.is_empty() {
        return Err(Error::parse(
            &ctx,
            format!(
                "expected {} complete trajectories, found {}",
                meta.j,
                trajectories.len()
            ),
        ));
    }
    TrajectoryDataset::new(meta.model, meta.seed, trajectories)
}
