//! Output records, their file formats and the all-or-nothing writer.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! yields bit-identical values.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const LINKS_CSV: &str = "links.csv";
pub const COHORTS_CSV: &str = "cohorts.csv";
pub const ALERTS_JSONL: &str = "alerts.jsonl";
pub const ITERATIONS_CSV: &str = "iterations.csv";
pub const DENSITY_CSV: &str = "density.csv";
pub const DETECTIONS_CSV: &str = "detections.csv";
pub const GROUND_TRUTH_CSV: &str = "ground_truth.csv";
pub const CONFIG_TXT: &str = "config.txt";

pub const LINKS_HEADER: [&str; 7] = ["frame", "from_x", "from_y", "to_x", "to_y", "cohort_id", "cost"];
pub const COHORTS_HEADER: [&str; 9] =
    ["frame", "cohort_id", "count", "centroid_x", "centroid_y", "mean_dir_rad", "mean_speed_px", "kappa", "weight"];
pub const ITERATIONS_HEADER: [&str; 5] = ["frame", "iter", "links", "total_cost", "frac_changed"];
pub const DENSITY_HEADER: [&str; 4] = ["frame", "col", "row", "count"];

/// One selected link; `cohort_id` is empty for vectors outside any reported cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub frame: usize,
    pub from_x: f64,
    pub from_y: f64,
    pub to_x: f64,
    pub to_y: f64,
    pub cohort_id: Option<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub frame: usize,
    pub cohort_id: usize,
    pub count: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub mean_dir_rad: f64,
    pub mean_speed_px: f64,
    pub kappa: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub frame_issued: usize,
    pub cohort_id: usize,
    pub location_id: String,
    pub eta_seconds: f64,
    pub count: usize,
    pub approach_angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub frame: usize,
    pub iter: usize,
    pub links: usize,
    pub total_cost: f64,
    pub frac_changed: f64,
}

/// Non-empty density cells only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub frame: usize,
    pub col: usize,
    pub row: usize,
    pub count: u32,
}

/// CSV bytes with the header written even when there are no rows.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Input(e.to_string()))
}

pub fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::Input(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut r = csv::Reader::from_reader(file);
    let got: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if got != header {
        return Err(CliError::Input(format!("{}: expected header {}", path.display(), header.join(","))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Writes every file into a staging directory inside `dir`, then renames
/// them into place. A failure while staging leaves `dir` untouched.
pub fn write_all_atomic(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(dir)?;
    for (name, bytes) in files {
        let mut f = fs::File::create(staging.path().join(name))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    for (name, _) in files {
        fs::rename(staging.path().join(name), dir.join(name))?;
    }
    Ok(())
}
