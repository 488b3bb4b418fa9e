//! On-disk artifacts of a run and their readers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use quench_core::integrate::Termination;
use quench_core::{
    BoundsReport, EnvelopeReport, ICValidationReport, QuenchReport, RateFit, Sample,
};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::Config;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LOGLOG_FILE: &str = "loglog.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONVERGENCE_FILE: &str = "convergence.json";

/// Everything `run` reports about one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// `None` when the solver aborted; `error` then says why.
    pub termination: Option<Termination>,
    pub error: Option<String>,
    pub step_count: usize,
    pub rejections: usize,
    pub steps_below_tau_min: usize,
    pub quench: Option<QuenchReport>,
    pub bounds: Option<BoundsReport>,
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
    pub envelope: Option<EnvelopeReport>,
    pub validation: ICValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPaths {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
    pub loglog: PathBuf,
}

impl ArtifactPaths {
    pub fn in_dir(dir: &Path) -> Self {
        ArtifactPaths {
            trajectory: dir.join(TRAJECTORY_FILE),
            summary: dir.join(SUMMARY_FILE),
            loglog: dir.join(LOGLOG_FILE),
        }
    }
}

/// Written after every other artifact of a successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Config,
    pub artifacts: ArtifactPaths,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogRow {
    #[serde(rename = "log_T_minus_t")]
    pub log_t_minus_t: f64,
    pub log_y: f64,
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(fs::File::create(path)?))
}

fn write_rows<S: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = S>,
    header: &[&str],
) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    // serialising structs emits the header on the first row only
    let mut empty = true;
    for row in rows {
        w.serialize(row)?;
        empty = false;
    }
    if empty {
        w.write_record(header)?;
    }
    w.flush()
}

pub fn write_trajectory(path: &Path, samples: &[Sample]) -> io::Result<()> {
    write_rows(
        path,
        samples,
        &["t", "u_left", "u_right", "tau", "mass", "flux_balance"],
    )
}

pub fn write_loglog(path: &Path, rows: &[LogLogRow]) -> io::Result<()> {
    write_rows(path, rows, &["log_T_minus_t", "log_y"])
}

fn read_rows<S: DeserializeOwned>(path: &Path) -> io::Result<Vec<S>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(io::Error::from))
        .collect()
}

pub fn read_trajectory(path: &Path) -> io::Result<Vec<Sample>> {
    read_rows(path)
}

pub fn read_loglog(path: &Path) -> io::Result<Vec<LogLogRow>> {
    read_rows(path)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

/// Writes through a temporary file and a rename, so a present file is
/// always complete.
pub fn write_json_atomic<S: Serialize>(path: &Path, value: &S) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub fn read_json<S: DeserializeOwned>(path: &Path) -> io::Result<S> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
