use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::ReplicationResult;
use crate::error::{Error, Result};
use crate::ot_core::LossRecord;

pub const PER_TIME_HEADER: &str = "t,label,value";
pub const SERIES_HEADER: &str = "replication,t,method,metric,value";
pub const LOSS_HEADER: &str = "iteration,loss_t,loss_f";

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

pub fn per_time_csv(rows: &[(usize, String, f64)]) -> String {
    let mut s = String::from(PER_TIME_HEADER);
    s.push('\n');
    for (t, label, v) in rows {
        let _ = writeln!(s, "{t},{label},{v:.16e}");
    }
    s
}

pub fn series_csv(results: &[ReplicationResult]) -> String {
    let mut s = String::from(SERIES_HEADER);
    s.push('\n');
    for r in results {
        for series in &r.series {
            for (t, v) in series.times.iter().zip(&series.values) {
                let _ = writeln!(s, "{},{t},{},{},{v:.16e}", r.replication, series.method, series.metric);
            }
        }
    }
    s
}

pub fn loss_csv(curve: &[LossRecord]) -> String {
    let mut s = String::from(LOSS_HEADER);
    s.push('\n');
    for r in curve {
        let _ = writeln!(s, "{},{:.16e},{:.16e}", r.iteration, r.loss_t, r.loss_f);
    }
    s
}

/// Splits a CSV body into rows after checking the header.
pub fn parse_csv<'a>(text: &'a str, header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    if first != header {
        return Err(Error::parse(
            "csv header",
            format!("expected {header:?}, found {first:?}"),
        ));
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() == width {
                Ok(fields)
            } else {
                Err(Error::parse(
                    "csv row",
                    format!("row {} has {} fields, expected {width}", i + 2, fields.len()),
                ))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config: String,
    pub seed: u64,
    pub seconds: f64,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub runs: Vec<ManifestEntry>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.join("manifest.json")
}

/// Appends `entry` to `<out>/manifest.json`, creating it when missing.
pub fn record_manifest(out: &Path, entry: ManifestEntry) -> Result<()> {
    let path = manifest_path(out);
    let mut manifest = if path.exists() {
        read_json::<Manifest>(&path)?
    } else {
        Manifest {
            tool: "otddf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            runs: Vec::new(),
        }
    };
    manifest.runs.push(entry);
    write_json(&path, &manifest)
}

pub fn relative(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}
