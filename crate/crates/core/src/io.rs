//! Detections and ground-truth CSV files.
//!
//! Detections: header `frame,x,y,score`. Ground truth adds `object_id,cohort_id`;
//! the detections reader accepts either and ignores trailing columns.
//! Floats are written in shortest round-trip form so files re-read bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Detection;

pub const DETECTIONS_HEADER: [&str; 4] = ["frame", "x", "y", "score"];
pub const GROUND_TRUTH_HEADER: [&str; 6] = ["frame", "x", "y", "score", "object_id", "cohort_id"];

/// One row of a ground-truth file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub score: f64,
    /// `-1` for clutter.
    pub object_id: i64,
    /// `-1` for walkers and clutter.
    pub cohort_id: i64,
}

impl TruthRow {
    pub fn detection(&self) -> Detection<f64> {
        Detection::new(self.frame, self.x, self.y, self.score)
    }
}

fn parse_field<F: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<F> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing column `{name}`") })?;
    raw.trim()
        .parse::<F>()
        .map_err(|_| Error::Parse { line, msg: format!("bad {name} value `{raw}`") })
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<()> {
    let h = rdr.headers()?.clone();
    let ok = h.len() >= want.len() && want.iter().zip(h.iter()).all(|(w, g)| g.trim() == *w);
    if !ok {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header starting with `{}`", want.join(",")),
        });
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(r)
}

fn parse_detection(rec: &csv::StringRecord) -> Result<Detection<f64>> {
    let line = rec.position().map_or(0, |p| p.line());
    let d: Detection<f64> = Detection::new(
        parse_field(rec, 0, "frame")?,
        parse_field(rec, 1, "x")?,
        parse_field(rec, 2, "y")?,
        parse_field(rec, 3, "score")?,
    );
    if !(d.x.is_finite() && d.y.is_finite()) {
        return Err(Error::Parse { line, msg: "position must be finite".into() });
    }
    if !(d.score >= 0.0) {
        return Err(Error::Parse { line, msg: "score must be >= 0".into() });
    }
    Ok(d)
}

/// Groups detections by frame. Index `f` of the result holds frame `f`
/// (possibly empty); rows are stably re-sorted by frame.
pub fn read_detections<R: Read>(r: R) -> Result<Vec<Vec<Detection<f64>>>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &DETECTIONS_HEADER)?;
    let mut frames: Vec<Vec<Detection<f64>>> = Vec::new();
    for rec in rdr.records() {
        let d = parse_detection(&rec?)?;
        if frames.len() <= d.frame {
            frames.resize_with(d.frame + 1, Vec::new);
        }
        frames[d.frame].push(d);
    }
    Ok(frames)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Vec<Detection<f64>>>> {
    read_detections(std::fs::File::open(path)?)
}

pub fn write_detections<W: Write>(w: W, frames: &[Vec<Detection<f64>>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(DETECTIONS_HEADER)?;
    for d in frames.iter().flatten() {
        wtr.write_record([d.frame.to_string(), d.x.to_string(), d.y.to_string(), d.score.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_ground_truth<R: Read>(r: R) -> Result<Vec<TruthRow>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &GROUND_TRUTH_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let d = parse_detection(&rec)?;
        rows.push(TruthRow {
            frame: d.frame,
            x: d.x,
            y: d.y,
            score: d.score,
            object_id: parse_field(&rec, 4, "object_id")?,
            cohort_id: parse_field(&rec, 5, "cohort_id")?,
        });
    }
    rows.sort_by_key(|r| r.frame);
    Ok(rows)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<TruthRow>> {
    read_ground_truth(std::fs::File::open(path)?)
}

pub fn write_ground_truth<W: Write>(w: W, rows: &[TruthRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(GROUND_TRUTH_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.frame.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.score.to_string(),
            r.object_id.to_string(),
            r.cohort_id.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
