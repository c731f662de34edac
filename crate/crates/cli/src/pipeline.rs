//! simulate / load / detect, then track, report and alert.

use std::ops::Range;
use std::path::Path;

use crowdflow::alert::{check_alerts, cohort_report, density_map, AlertDeduper, CohortIdTracker};
use crowdflow::detect::{detect_frame, read_pgm};
use crowdflow::io::{load_detections, load_ground_truth, write_detections, write_ground_truth, TruthRow};
use crowdflow::linker::Tracker;
use crowdflow::sim::simulate;
use crowdflow::Detection;

use crate::config::RunConfig;
use crate::output::*;
use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    /// Indexed by frame number.
    pub frames: Vec<Vec<Detection>>,
    pub truth: Option<Vec<TruthRow>>,
    pub arena: (f64, f64),
    pub simulated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackOutput {
    pub links: Vec<LinkRow>,
    pub cohorts: Vec<CohortRow>,
    pub alerts: Vec<AlertRecord>,
    pub iterations: Vec<IterationRow>,
    pub density: Vec<DensityRow>,
}

fn pgm_frames(dir: &Path, cfg: &RunConfig) -> Result<Vec<Vec<Detection>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!("{}: no .pgm frames", dir.display())));
    }
    paths
        .iter()
        .enumerate()
        .map(|(f, p)| {
            let img = read_pgm(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Ok(detect_frame(&img, &cfg.detector, f)?)
        })
        .collect()
}

/// Extent of the detections, rounded up; at least 1 x 1.
fn extent(frames: &[Vec<Detection>]) -> (f64, f64) {
    let (mut w, mut h) = (1.0f64, 1.0f64);
    for d in frames.iter().flatten() {
        w = w.max(d.x.ceil() + 1.0);
        h = h.max(d.y.ceil() + 1.0);
    }
    (w, h)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let input_err = |p: &Path, e: crowdflow::Error| CliError::Input(format!("{}: {e}", p.display()));
    let (frames, mut truth, simulated) = if let Some(p) = &cfg.input.detections {
        (load_detections(p).map_err(|e| input_err(p, e))?, None, false)
    } else if let Some(dir) = &cfg.input.frames_dir {
        (pgm_frames(dir, cfg)?, None, false)
    } else if let Some(s) = &cfg.scenario {
        let (frames, gt) = simulate(s)?;
        (frames, Some(gt.rows), true)
    } else {
        return Err(CliError::Usage(
            "no input: set input.detections or input.frames_dir, or pick a preset".into(),
        ));
    };
    if let Some(p) = &cfg.input.ground_truth {
        truth = Some(load_ground_truth(p).map_err(|e| input_err(p, e))?);
    }
    let arena = cfg
        .input
        .arena
        .or(cfg.scenario.as_ref().map(|s| s.arena))
        .unwrap_or_else(|| extent(&frames));
    Ok(Inputs { frames, truth, arena, simulated })
}

/// Parses `A..B` (half-open), `A..` or `..B`.
pub fn parse_frame_range(s: &str) -> Result<(usize, Option<usize>)> {
    let bad = || CliError::Usage(format!("bad frame range `{s}`: expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a = if a.is_empty() { 0 } else { a.trim().parse().map_err(|_| bad())? };
    let b = if b.is_empty() { None } else { Some(b.trim().parse().map_err(|_| bad())?) };
    if b.is_some_and(|b| b < a) {
        return Err(bad());
    }
    Ok((a, b))
}

/// Clamps a requested range to `n` frames.
pub fn clamp_range(n: usize, range: Option<(usize, Option<usize>)>) -> Range<usize> {
    let (a, b) = range.unwrap_or((0, None));
    let b = b.unwrap_or(n).min(n);
    a.min(b)..b
}

/// Tracks `frames`, whose first entry is frame number `first`.
pub fn run_track(frames: &[Vec<Detection>], first: usize, arena: (f64, f64), cfg: &RunConfig) -> Result<TrackOutput> {
    let mut out = TrackOutput::default();
    let mut tracker = Tracker::new(cfg.tracker_config(arena))?;
    let mut ids = CohortIdTracker::default();
    let mut dedup = AlertDeduper::default();
    dedup.eta_frac = cfg.alert.dedup_eta_frac;
    dedup.frames = cfg.alert.dedup_frames;
    let rcfg = &cfg.alert.report;

    for i in 0..frames.len().saturating_sub(1) {
        let t = first + i;
        let f2 = frames.get(i + 2).map(|f| f.as_slice());
        let step = tracker.step(t, &frames[i], &frames[i + 1], f2)?;
        let mut reports = cohort_report(&step.model, &step.vectors, &cfg.calib, t, rcfg);
        let id_of = ids.assign(&mut reports);

        for (k, l) in step.links.iter().enumerate() {
            out.links.push(LinkRow {
                frame: t,
                from_x: l.from_pos.x,
                from_y: l.from_pos.y,
                to_x: l.to_pos.x,
                to_y: l.to_pos.y,
                cohort_id: step.label_of(k).and_then(|c| id_of.get(&c).copied()),
                cost: l.cost.total,
            });
        }
        for r in &reports {
            out.cohorts.push(CohortRow {
                frame: t,
                cohort_id: r.cohort_id,
                count: r.count,
                centroid_x: r.centroid.x,
                centroid_y: r.centroid.y,
                mean_dir_rad: r.mean_direction,
                mean_speed_px: r.mean_speed,
                kappa: r.kappa,
                weight: r.weight,
            });
            for a in check_alerts(r, &cfg.locations, &cfg.calib, rcfg.angle_tol_deg) {
                if dedup.admit(&a) {
                    out.alerts.push(AlertRecord {
                        frame_issued: a.frame_issued,
                        cohort_id: a.cohort_id,
                        location_id: a.location_id,
                        eta_seconds: a.eta_seconds,
                        count: a.count,
                        approach_angle_deg: a.approach_angle_deg,
                    });
                }
            }
        }
        out.iterations.extend(step.iterations.iter().map(|r| IterationRow {
            frame: r.frame,
            iter: r.iter,
            links: r.links,
            total_cost: r.total_cost,
            frac_changed: r.frac_changed,
        }));
    }
    for (i, dets) in frames.iter().enumerate() {
        let m = density_map(dets, arena, cfg.alert.density_cell_px)?;
        for row in 0..m.rows {
            for col in 0..m.cols {
                let count = m.get(col, row);
                if count > 0 {
                    out.density.push(DensityRow { frame: first + i, col, row, count });
                }
            }
        }
    }
    Ok(out)
}

fn detection_bytes(frames: &[Vec<Detection>]) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    write_detections(&mut b, frames)?;
    Ok(b)
}

fn truth_bytes(rows: &[TruthRow]) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    write_ground_truth(&mut b, rows)?;
    Ok(b)
}

/// Files written by `simulate`.
pub fn simulate_files(cfg: &RunConfig) -> Result<Vec<(String, Vec<u8>)>> {
    let scen = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("simulate needs a preset or simulator.* settings".into()))?;
    let (frames, gt) = simulate(scen)?;
    Ok(vec![
        (DETECTIONS_CSV.into(), detection_bytes(&frames)?),
        (GROUND_TRUTH_CSV.into(), truth_bytes(&gt.rows)?),
        (CONFIG_TXT.into(), cfg.to_text().into_bytes()),
    ])
}

/// Runs the full track pipeline and returns its output files.
pub fn track_files(cfg: &RunConfig, range: Option<(usize, Option<usize>)>) -> Result<(TrackOutput, Vec<(String, Vec<u8>)>)> {
    let inputs = load_inputs(cfg)?;
    let r = clamp_range(inputs.frames.len(), range);
    let out = run_track(&inputs.frames[r.clone()], r.start, inputs.arena, cfg)?;
    let mut files = vec![
        (LINKS_CSV.to_string(), csv_bytes(&LINKS_HEADER, &out.links)?),
        (COHORTS_CSV.to_string(), csv_bytes(&COHORTS_HEADER, &out.cohorts)?),
        (ALERTS_JSONL.to_string(), jsonl_bytes(&out.alerts)?),
        (ITERATIONS_CSV.to_string(), csv_bytes(&ITERATIONS_HEADER, &out.iterations)?),
        (DENSITY_CSV.to_string(), csv_bytes(&DENSITY_HEADER, &out.density)?),
        (CONFIG_TXT.to_string(), cfg.to_text().into_bytes()),
    ];
    if inputs.simulated {
        files.push((DETECTIONS_CSV.into(), detection_bytes(&inputs.frames)?));
        if let Some(t) = &inputs.truth {
            files.push((GROUND_TRUTH_CSV.into(), truth_bytes(t)?));
        }
    }
    Ok((out, files))
}
