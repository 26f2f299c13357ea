//! CSV record types and readers/writers for every file the pipeline emits.
//!
//! Every file has a header row. Floats are written with Rust's shortest
//! round-trip formatting, so parsing a file back is lossless.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

impl IoError {
    pub fn invalid(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Invalid { path: path.display().to_string(), msg: msg.into() }
    }
}

/// Writes `rows` with an explicit header, so empty tables still get one.
pub fn write_csv<R: Serialize>(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let ctx = |source| IoError::Csv { path: path.display().to_string(), source };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|source| IoError::Io { path: dir.display().to_string(), source })?;
        }
    }
    let file = File::create(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(ctx)?;
    for row in rows {
        w.serialize(row).map_err(ctx)?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

/// Reads all records, checking that the header matches `expected`.
pub fn read_csv<R: DeserializeOwned>(path: impl AsRef<Path>, expected: &[&str]) -> Result<Vec<R>, IoError> {
    let path = path.as_ref();
    let ctx = |source| IoError::Csv { path: path.display().to_string(), source };
    let file = File::open(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = r.headers().map_err(ctx)?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(IoError::invalid(path, format!("header {got:?}, expected {expected:?}")));
    }
    r.deserialize().collect::<Result<Vec<R>, _>>().map_err(ctx)
}

pub const TRANSITION_HEADER: &[&str] = &["s", "a", "theta", "s_next", "prob"];
pub const SF_HEADER: &[&str] = &["s", "a", "theta", "dim", "value"];
pub const OMEGA_HEADER: &[&str] = &["dim", "value"];
pub const REWARD_HEADER: &[&str] = &["s", "a", "mean"];
pub const FINAL_REWARD_HEADER: &[&str] = &["s", "a", "value", "provenance"];
pub const COE_SET_HEADER: &[&str] = &["s", "a"];
pub const FIT_LOG_HEADER: &[&str] = &["step", "grad_norm", "loglik"];
pub const METRICS_HEADER: &[&str] = &["metric", "mean", "stderr"];
pub const QTABLE_HEADER: &[&str] = &["state", "belief", "action", "q"];
pub const EXPERT_HEADER: &[&str] = &["traj", "t", "s", "a", "s_next"];
pub const CONTEXTS_HEADER: &[&str] = &["traj", "theta"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub s: usize,
    pub a: usize,
    pub theta: usize,
    pub s_next: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfRow {
    pub s: usize,
    pub a: usize,
    pub theta: usize,
    pub dim: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaRow {
    pub dim: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub s: usize,
    pub a: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRewardRow {
    pub s: usize,
    pub a: usize,
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRow {
    pub s: usize,
    pub a: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitLogRow {
    pub step: usize,
    pub grad_norm: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub state: usize,
    pub belief: String,
    pub action: usize,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRow {
    pub traj: usize,
    pub t: usize,
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRow {
    pub traj: usize,
    pub theta: usize,
}
