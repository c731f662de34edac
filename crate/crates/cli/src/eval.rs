//! Scores tracker output against simulator ground truth.
//!
//! * A predicted link is a true positive when both endpoints lie within 1 px
//!   of the same ground-truth object in consecutive frames.
//! * Precision with no predicted links is 1 by convention (nothing was
//!   wrong); recall with no true links is likewise 1.
//! * Cohort counts and directions are compared at the final evaluated frame.
//!   A cohort is active there once its onset has passed and at least one
//!   member is seen in both that frame and the next. Its true direction is
//!   the circular mean of those members' displacements. Reported and true
//!   directions are paired greedily by angular distance.
//! * A report speaks for a cohort when more than half of its links start on
//!   that cohort's members. Onset latency is the first such report frame
//!   minus the onset frame, where the onset frame is the origin frame of the
//!   first organized step.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use crowdflow::geometry::{angular_diff, mean_resultant_unweighted};
use crowdflow::io::TruthRow;
use serde::{Serialize, Serializer};

use crate::output::{CohortRow, LinkRow};
use crate::{CliError, Result};

/// Endpoint match radius in px.
pub const MATCH_RADIUS: f64 = 1.0;
/// Mean resultant length that marks organized motion when inferring onsets.
pub const ONSET_RBAR: f64 = 0.7;

fn latency_ser<S: Serializer>(v: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(n) => s.serialize_u64(*n as u64),
        None => s.serialize_str("not detected"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortEval {
    pub cohort: usize,
    pub onset_frame: Option<usize>,
    pub first_report_frame: Option<usize>,
    #[serde(serialize_with = "latency_ser")]
    pub latency_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub link_precision: f64,
    pub link_recall: f64,
    pub true_positives: usize,
    pub predicted_links: usize,
    pub true_links: usize,
    pub cohort_count_error: usize,
    /// `None` when no reported cohort could be paired with a true one.
    pub mean_direction_error_deg: Option<f64>,
    /// Largest latency over cohorts whose onset falls in the evaluated frames.
    #[serde(serialize_with = "latency_ser")]
    pub onset_latency_frames: Option<usize>,
    pub cohorts: Vec<CohortEval>,
}

/// Ground truth indexed for endpoint lookups.
pub struct Truth {
    frames: Vec<Vec<TruthRow>>,
    grids: Vec<HashMap<(i64, i64), Vec<usize>>>,
    /// Cohort of each object id.
    cohort_of: HashMap<i64, i64>,
    pub n_cohorts: usize,
}

impl Truth {
    pub fn new(rows: &[TruthRow]) -> Self {
        let n = rows.iter().map(|r| r.frame + 1).max().unwrap_or(0);
        let mut frames = vec![Vec::new(); n];
        let mut cohort_of = HashMap::new();
        for r in rows {
            frames[r.frame].push(r.clone());
            if r.object_id >= 0 {
                cohort_of.insert(r.object_id, r.cohort_id);
            }
        }
        let grids = frames
            .iter()
            .map(|f| {
                let mut g: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
                for (i, r) in f.iter().enumerate() {
                    g.entry((r.x.floor() as i64, r.y.floor() as i64)).or_default().push(i);
                }
                g
            })
            .collect();
        let n_cohorts = rows.iter().map(|r| r.cohort_id + 1).max().unwrap_or(0).max(0) as usize;
        Self { frames, grids, cohort_of, n_cohorts }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Nearest real object within [`MATCH_RADIUS`] of `(x, y)` in `frame`.
    pub fn object_at(&self, frame: usize, x: f64, y: f64) -> Option<i64> {
        let (rows, grid) = (self.frames.get(frame)?, &self.grids[frame]);
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        let mut best: Option<(f64, i64)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                for &i in grid.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                    let r = &rows[i];
                    let d = (r.x - x).hypot(r.y - y);
                    if r.object_id >= 0 && d <= MATCH_RADIUS && best.is_none_or(|b| d < b.0) {
                        best = Some((d, r.object_id));
                    }
                }
            }
        }
        best.map(|b| b.1)
    }

    pub fn cohort_of(&self, object: i64) -> i64 {
        self.cohort_of.get(&object).copied().unwrap_or(-1)
    }

    /// `(object, from row, to row)` for every object seen in `f` and `f + 1`.
    fn steps(&self, f: usize) -> Vec<(i64, &TruthRow, &TruthRow)> {
        let Some(next) = self.frames.get(f + 1) else { return Vec::new() };
        let at: HashMap<i64, &TruthRow> = next.iter().filter(|r| r.object_id >= 0).map(|r| (r.object_id, r)).collect();
        self.frames[f]
            .iter()
            .filter(|r| r.object_id >= 0)
            .filter_map(|r| at.get(&r.object_id).map(|n| (r.object_id, r, *n)))
            .collect()
    }

    /// Member displacement angles of cohort `c` from `f` to `f + 1`.
    fn cohort_angles(&self, f: usize, c: i64) -> Vec<f64> {
        self.steps(f)
            .into_iter()
            .filter(|(o, _, _)| self.cohort_of(*o) == c)
            .filter(|(_, a, b)| a.x != b.x || a.y != b.y)
            .map(|(_, a, b)| (b.y - a.y).atan2(b.x - a.x))
            .collect()
    }

    /// First origin frame whose member displacements are organized.
    pub fn infer_onset(&self, c: usize) -> Option<usize> {
        (0..self.n_frames().saturating_sub(1)).find(|&f| {
            let a = self.cohort_angles(f, c as i64);
            a.len() >= 3 && mean_resultant_unweighted(&a).is_ok_and(|m| m.rbar >= ONSET_RBAR)
        })
    }

    /// The true cohort a report speaks for, if any: more than half of the
    /// report's links must start on that cohort's members.
    pub fn report_cohort(&self, links: &[LinkRow], frame: usize, cohort_id: usize) -> Option<usize> {
        let mine: Vec<&LinkRow> = links.iter().filter(|l| l.frame == frame && l.cohort_id == Some(cohort_id)).collect();
        let mut votes: HashMap<i64, usize> = HashMap::new();
        for l in &mine {
            if let Some(o) = self.object_at(frame, l.from_x, l.from_y) {
                *votes.entry(self.cohort_of(o)).or_default() += 1;
            }
        }
        votes
            .into_iter()
            .find(|&(c, n)| c >= 0 && 2 * n > mine.len())
            .map(|(c, _)| c as usize)
    }
}

fn greedy_direction_error(reported: &[f64], truth: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &r) in reported.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            pairs.push((angular_diff(r, t).abs(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut ur, mut ut) = (vec![false; reported.len()], vec![false; truth.len()]);
    let mut errs = Vec::new();
    for (d, i, j) in pairs {
        if !ur[i] && !ut[j] {
            ur[i] = true;
            ut[j] = true;
            errs.push(d.to_degrees());
        }
    }
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Evaluated origin frames: every frame with a successor, cut to `range`.
pub fn eval_frames(truth: &Truth, range: Option<(usize, Option<usize>)>) -> Range<usize> {
    crate::pipeline::clamp_range(truth.n_frames().saturating_sub(1), range)
}

/// `onsets[c]` overrides the inferred onset of cohort `c` when given.
pub fn evaluate(
    links: &[LinkRow],
    cohorts: &[CohortRow],
    truth_rows: &[TruthRow],
    onsets: Option<&[usize]>,
    range: Option<(usize, Option<usize>)>,
) -> Result<EvalReport> {
    let truth = Truth::new(truth_rows);
    let frames = eval_frames(&truth, range);
    if let Some(l) = links.iter().find(|l| l.frame + 1 >= truth.n_frames()) {
        return Err(CliError::Input(format!(
            "link at frame {} is outside the ground truth ({} frames)",
            l.frame,
            truth.n_frames()
        )));
    }
    let links: Vec<LinkRow> = links.iter().filter(|l| frames.contains(&l.frame)).copied().collect();

    let mut true_set: HashSet<(usize, i64)> = HashSet::new();
    for f in frames.clone() {
        true_set.extend(truth.steps(f).into_iter().map(|(o, _, _)| (f, o)));
    }
    let mut hits: HashSet<(usize, i64)> = HashSet::new();
    for l in &links {
        let a = truth.object_at(l.frame, l.from_x, l.from_y);
        let b = truth.object_at(l.frame + 1, l.to_x, l.to_y);
        if let (Some(a), Some(b)) = (a, b) {
            if a == b {
                hits.insert((l.frame, a));
            }
        }
    }
    let tp = hits.len();
    let precision = if links.is_empty() { 1.0 } else { tp as f64 / links.len() as f64 };
    let recall = if true_set.is_empty() { 1.0 } else { tp as f64 / true_set.len() as f64 };

    let onset: Vec<Option<usize>> = (0..truth.n_cohorts)
        .map(|c| match onsets {
            Some(o) => o.get(c).copied(),
            None => truth.infer_onset(c),
        })
        .collect();

    let (count_err, dir_err) = match frames.clone().last() {
        None => (0, None),
        Some(last) => {
            let true_dirs: Vec<f64> = (0..truth.n_cohorts)
                .filter(|&c| onset[c].is_some_and(|o| o <= last))
                .filter_map(|c| {
                    let a = truth.cohort_angles(last, c as i64);
                    mean_resultant_unweighted(&a).ok().map(|m| m.mean)
                })
                .collect();
            let reported: Vec<f64> = cohorts.iter().filter(|r| r.frame == last).map(|r| r.mean_dir_rad).collect();
            (reported.len().abs_diff(true_dirs.len()), greedy_direction_error(&reported, &true_dirs))
        }
    };

    let mut per_cohort = Vec::new();
    for (c, &o) in onset.iter().enumerate() {
        let first = o.and_then(|o| {
            cohorts
                .iter()
                .filter(|r| r.frame >= o && frames.contains(&r.frame))
                .find(|r| truth.report_cohort(&links, r.frame, r.cohort_id) == Some(c))
                .map(|r| r.frame)
        });
        per_cohort.push(CohortEval {
            cohort: c,
            onset_frame: o,
            first_report_frame: first,
            latency_frames: o.zip(first).map(|(o, f)| f - o),
        });
    }
    let considered: Vec<&CohortEval> =
        per_cohort.iter().filter(|e| e.onset_frame.is_some_and(|o| frames.contains(&o))).collect();
    let latency = if considered.is_empty() || considered.iter().any(|e| e.latency_frames.is_none()) {
        None
    } else {
        considered.iter().filter_map(|e| e.latency_frames).max()
    };

    Ok(EvalReport {
        link_precision: precision,
        link_recall: recall,
        true_positives: tp,
        predicted_links: links.len(),
        true_links: true_set.len(),
        cohort_count_error: count_err,
        mean_direction_error_deg: dir_err,
        onset_latency_frames: latency,
        cohorts: per_cohort,
    })
}

/// Ground truth dressed up as tracker output: every true link, labelled by
/// cohort, and one report per active cohort and frame.
pub fn truth_as_prediction(truth_rows: &[TruthRow], onsets: Option<&[usize]>) -> (Vec<LinkRow>, Vec<CohortRow>) {
    let truth = Truth::new(truth_rows);
    let onset: Vec<Option<usize>> = (0..truth.n_cohorts)
        .map(|c| match onsets {
            Some(o) => o.get(c).copied(),
            None => truth.infer_onset(c),
        })
        .collect();
    let (mut links, mut reports) = (Vec::new(), Vec::new());
    for f in 0..truth.n_frames().saturating_sub(1) {
        for (o, a, b) in truth.steps(f) {
            let c = truth.cohort_of(o);
            let active = c >= 0 && onset[c as usize].is_some_and(|on| on <= f);
            links.push(LinkRow {
                frame: f,
                from_x: a.x,
                from_y: a.y,
                to_x: b.x,
                to_y: b.y,
                cohort_id: active.then_some(c as usize),
                cost: 0.0,
            });
        }
        for c in 0..truth.n_cohorts {
            if !onset[c].is_some_and(|on| on <= f) {
                continue;
            }
            let a = truth.cohort_angles(f, c as i64);
            if let Ok(m) = mean_resultant_unweighted(&a) {
                reports.push(CohortRow {
                    frame: f,
                    cohort_id: c,
                    count: a.len(),
                    centroid_x: 0.0,
                    centroid_y: 0.0,
                    mean_dir_rad: m.mean,
                    mean_speed_px: 0.0,
                    kappa: 0.0,
                    weight: 0.0,
                });
            }
        }
    }
    (links, reports)
}
