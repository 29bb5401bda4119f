//! C ABI over the core toolkit: simulate or load trajectory datasets, train
//! transport maps offline, and push particles through them online.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns an [`OtddfStatus`]
//! and leaves a message for [`otddf_last_error_message`] on failure. Matrices
//! cross the boundary row-major, one particle per row.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::DMatrix;
use otddf::error::Error;
use otddf::filters::{otddf_online_step, ObservationWindow};
use otddf::models::{read_dataset, simulate_trajectories, write_dataset, ModelSpec, TrajectoryDataset};
use otddf::ot_core::{train, TrainConfig, TrainedTransportMap};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtddfStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8, wrong buffer length or an out-of-range index.
    InvalidArgument = 1,
    /// Burn-in plus window exceeds the dataset horizon, or the observation
    /// window does not match the map.
    InvalidWindow = 2,
    Io = 3,
    /// Malformed JSON, CSV or map file.
    Parse = 4,
    TrainingDiverged = 5,
    /// Overflow, singular matrix or degenerate weights.
    Numerical = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Simulated or loaded trajectory dataset.
pub struct OtddfDataset(TrajectoryDataset);

/// Trained transport map together with its base pool.
pub struct OtddfMap(TrainedTransportMap);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(message: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(message.bytes().filter(|&b| b != 0));
    });
}

struct Failure(OtddfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => OtddfStatus::InvalidArgument,
            Error::InvalidWindow { .. } | Error::WindowWarmUp { .. } => OtddfStatus::InvalidWindow,
            Error::Io { .. } => OtddfStatus::Io,
            Error::Parse { .. } => OtddfStatus::Parse,
            Error::TrainingDiverged { .. } => OtddfStatus::TrainingDiverged,
            Error::NumericalOverflow(_) | Error::Singular(_) | Error::DegenerateWeights(_) => OtddfStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(OtddfStatus::InvalidArgument, message.into())
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OtddfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OtddfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {message}"));
            OtddfStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_opt(p: *mut usize, v: usize) {
    if !p.is_null() {
        *p = v;
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(OtddfStatus::Parse, format!("{what}: {e}")))
}

/// Overlays the given JSON object on the default training configuration.
fn training_config(text: &str) -> Result<TrainConfig, Failure> {
    let given: serde_json::Value = parse_json(text, "training config")?;
    let serde_json::Value::Object(given) = given else {
        return Err(Failure(
            OtddfStatus::Parse,
            "training config must be a JSON object".into(),
        ));
    };
    let mut merged = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    merged
        .as_object_mut()
        .expect("struct serializes to an object")
        .extend(given);
    serde_json::from_value(merged).map_err(|e| Failure(OtddfStatus::Parse, format!("training config: {e}")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn otddf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// without the terminator; 0 means no error has been recorded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn otddf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Simulates `trajectories` trajectories of `horizon` steps from the model
/// described by `model_json`, e.g. `{"kind":"lorenz63"}` or
/// `{"kind":"linear","alpha":0.9,"sigma":0.3,"observation_kind":"quadratic"}`.
/// The initial state is the model's default initial distribution.
///
/// # Safety
/// `model_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_simulate(
    model_json: *const c_char,
    trajectories: usize,
    horizon: usize,
    seed: u64,
    out: *mut *mut OtddfDataset,
) -> OtddfStatus {
    guard(|| {
        let spec: ModelSpec = parse_json(text(model_json, "model_json")?, "model")?;
        let ds = simulate_trajectories(spec.as_model(), trajectories, horizon, &spec.default_initial(), seed)?;
        put(out, OtddfDataset(ds))
    })
}

/// Reads a dataset CSV and its metadata sidecar.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_load(path: *const c_char, out: *mut *mut OtddfDataset) -> OtddfStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        put(out, OtddfDataset(read_dataset(&path)?))
    })
}

/// Writes the dataset as CSV plus metadata sidecar.
///
/// # Safety
/// `dataset` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_save(dataset: *const OtddfDataset, path: *const c_char) -> OtddfStatus {
    guard(|| {
        let ds = reference(dataset, "dataset")?;
        write_dataset(&ds.0, &PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Trajectory count, horizon and dimensions; any output may be null.
///
/// # Safety
/// `dataset` must come from this library; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_dims(
    dataset: *const OtddfDataset,
    trajectories: *mut usize,
    horizon: *mut usize,
    state_dim: *mut usize,
    obs_dim: *mut usize,
) -> OtddfStatus {
    guard(|| {
        let ds = &reference(dataset, "dataset")?.0;
        write_opt(trajectories, ds.len());
        write_opt(horizon, ds.horizon());
        write_opt(state_dim, ds.state_dim());
        write_opt(obs_dim, ds.obs_dim());
        Ok(())
    })
}

/// Copies observation `y_t` (`t` in `1..=horizon`) of trajectory `j` into
/// `out`, which must hold exactly `obs_dim` values.
///
/// # Safety
/// `dataset` must come from this library; `out` must be valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_observation(
    dataset: *const OtddfDataset,
    j: usize,
    t: usize,
    out: *mut f64,
    len: usize,
) -> OtddfStatus {
    guard(|| {
        let ds = &reference(dataset, "dataset")?.0;
        if j >= ds.len() || t == 0 || t > ds.horizon() {
            return Err(invalid(format!("index (j={j}, t={t}) out of range")));
        }
        if len != ds.obs_dim() {
            return Err(invalid(format!("buffer holds {len} values, need {}", ds.obs_dim())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(ds.trajectories()[j].observation(t));
        Ok(())
    })
}

/// Copies state `X_t` (`t` in `0..=horizon`) of trajectory `j` into `out`,
/// which must hold exactly `state_dim` values.
///
/// # Safety
/// `dataset` must come from this library; `out` must be valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_state(
    dataset: *const OtddfDataset,
    j: usize,
    t: usize,
    out: *mut f64,
    len: usize,
) -> OtddfStatus {
    guard(|| {
        let ds = &reference(dataset, "dataset")?.0;
        if j >= ds.len() || t > ds.horizon() {
            return Err(invalid(format!("index (j={j}, t={t}) out of range")));
        }
        if len != ds.state_dim() {
            return Err(invalid(format!("buffer holds {len} values, need {}", ds.state_dim())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(ds.trajectories()[j].state(t));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn otddf_dataset_free(dataset: *mut OtddfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains a map on `dataset`. `config_json` holds the training configuration
/// (window, burn-in, seed, architecture, learning rates, iteration counts);
/// omitted fields take their defaults. Null means all defaults.
///
/// # Safety
/// `dataset` must come from this library; `config_json` must be null or
/// NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_train(
    dataset: *const OtddfDataset,
    config_json: *const c_char,
    out: *mut *mut OtddfMap,
) -> OtddfStatus {
    guard(|| {
        let ds = &reference(dataset, "dataset")?.0;
        let cfg: TrainConfig = if config_json.is_null() {
            TrainConfig::default()
        } else {
            training_config(text(config_json, "config_json")?)?
        };
        put(out, OtddfMap(train(ds, &cfg)?))
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_load(path: *const c_char, out: *mut *mut OtddfMap) -> OtddfStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        put(out, OtddfMap(TrainedTransportMap::load(&path)?))
    })
}

/// # Safety
/// `map` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_save(map: *const OtddfMap, path: *const c_char) -> OtddfStatus {
    guard(|| {
        let map = reference(map, "map")?;
        map.0.save(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// State dimension, observation dimension, window size and base pool size;
/// any output may be null.
///
/// # Safety
/// `map` must come from this library; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_dims(
    map: *const OtddfMap,
    state_dim: *mut usize,
    obs_dim: *mut usize,
    window: *mut usize,
    pool_size: *mut usize,
) -> OtddfStatus {
    guard(|| {
        let map = &reference(map, "map")?.0;
        write_opt(state_dim, map.state_dim);
        write_opt(obs_dim, map.obs_dim);
        write_opt(window, map.window);
        write_opt(pool_size, map.pool_size());
        Ok(())
    })
}

fn window_of(map: &TrainedTransportMap, window: &[f64]) -> Result<(), Failure> {
    if window.len() != map.context_dim() {
        return Err(Failure(
            OtddfStatus::InvalidWindow,
            format!(
                "window holds {} values, map expects {} x {}",
                window.len(),
                map.window,
                map.obs_dim
            ),
        ));
    }
    Ok(())
}

/// Applies the map to `count` given base states (`count x state_dim`,
/// row-major) conditioned on the observation window (`window x obs_dim`,
/// oldest first, row-major). Writes `count x state_dim` values to `out`.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_push_forward(
    map: *const OtddfMap,
    base: *const f64,
    count: usize,
    window: *const f64,
    window_len: usize,
    out: *mut f64,
    out_len: usize,
) -> OtddfStatus {
    guard(|| {
        let map = &reference(map, "map")?.0;
        let n = map.state_dim;
        let len = count.checked_mul(n).ok_or_else(|| invalid("count overflows"))?;
        if out_len != len {
            return Err(invalid(format!("out holds {out_len} values, need {len}")));
        }
        let window = slice(window, window_len, "window")?;
        window_of(map, window)?;
        // Row-major count x n is column-major n x count.
        let base = DMatrix::from_column_slice(n, count, slice(base, len, "base")?);
        let pushed = map.push_forward(&base, window)?;
        slice_mut(out, len, "out")?.copy_from_slice(pushed.as_slice());
        Ok(())
    })
}

/// One online filtering step: draws `count` base states from the map's pool
/// and pushes them through the map. Deterministic in `seed`.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_sample(
    map: *const OtddfMap,
    window: *const f64,
    window_len: usize,
    count: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> OtddfStatus {
    guard(|| {
        let map = &reference(map, "map")?.0;
        let len = count
            .checked_mul(map.state_dim)
            .ok_or_else(|| invalid("count overflows"))?;
        if out_len != len {
            return Err(invalid(format!("out holds {out_len} values, need {len}")));
        }
        let window = slice(window, window_len, "window")?;
        window_of(map, window)?;
        let mut buffer = ObservationWindow::for_map(map);
        for y in window.chunks_exact(map.obs_dim) {
            buffer.push(y)?;
        }
        let ensemble = otddf_online_step(map, &buffer, count, seed)?;
        slice_mut(out, len, "out")?.copy_from_slice(ensemble.particles.as_slice());
        Ok(())
    })
}

/// # Safety
/// `map` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn otddf_map_free(map: *mut OtddfMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
