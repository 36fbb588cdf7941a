//! Experiment artifacts: solver run reports and metrics tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hsirestore_core::{MetricsReport, SolverConfig};

use crate::io::IoError;

/// Everything needed to regenerate a restoration run: the configuration that
/// produced it plus convergence diagnostics and timing.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: SolverConfig,
    pub input_shape: (usize, usize, usize),
    pub iterations: usize,
    pub converged: bool,
    pub rel_change_history: Vec<f64>,
    pub wall_seconds: f64,
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Metrics table as CSV: `band,psnr_db,ssim` per-band rows (0-based band
/// indices) followed by the `mpsnr`, `mssim`, `ergas` aggregate rows.
pub fn metrics_to_csv(report: &MetricsReport) -> String {
    let mut out = String::from("band,psnr_db,ssim\n");
    for (band, (psnr, ssim)) in report
        .per_band_psnr
        .iter()
        .zip(report.per_band_ssim.iter())
        .enumerate()
    {
        writeln!(out, "{band},{psnr},{ssim}").expect("string write");
    }
    writeln!(out, "mpsnr,{}", report.mpsnr).expect("string write");
    writeln!(out, "mssim,{}", report.mssim).expect("string write");
    writeln!(out, "ergas,{}", report.ergas).expect("string write");
    out
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<(), IoError> {
    fs::write(path, metrics_to_csv(report)).map_err(|source| IoError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Profile vector as CSV with `index,value` rows.
pub fn profile_to_csv(profile: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in profile.iter().enumerate() {
        writeln!(out, "{i},{v}").expect("string write");
    }
    out
}

/// Append a suffix to a path stem, keeping it a stem.
pub fn stem_with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
