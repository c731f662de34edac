//! Cohort reports, approach alerts and density maps.

use std::collections::HashMap;

use crate::cohort::{aggregate_components, CohortModel};
use crate::error::{Error, Result};
use crate::geometry::{angular_diff, CalibrationConfig, Detection, FlowVector, Vec2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveLocation<T> {
    pub id: String,
    pub position: Vec2<T>,
    /// Arrival zone radius in px.
    pub radius: T,
}

impl<T: Scalar> SensitiveLocation<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) || !self.position.x.is_finite() || !self.position.y.is_finite() {
            return Err(Error::InvalidConfig(format!("location `{}` needs a finite position and radius > 0", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub min_members: usize,
    pub r_min: f64,
    pub angle_tol_deg: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { min_members: 5, r_min: 0.7, angle_tol_deg: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortReport<T> {
    pub frame: usize,
    /// Index of the mixture component this report summarizes.
    pub component: usize,
    pub cohort_id: usize,
    pub count: usize,
    pub centroid: Vec2<T>,
    /// px/frame.
    pub mean_speed: T,
    pub mean_speed_mps: T,
    pub mean_direction: T,
    pub rbar: T,
    pub kappa: T,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent<T> {
    pub frame_issued: usize,
    pub cohort_id: usize,
    pub location_id: String,
    pub eta_seconds: T,
    pub count: usize,
    pub approach_angle_deg: T,
}

/// One report per component with enough coherent members. `cohort_id` is
/// the component index here; see [`CohortIdTracker`] for ids stable over time.
pub fn cohort_report<T: Scalar>(
    model: &CohortModel<T>,
    vectors: &[FlowVector<T>],
    calib: &CalibrationConfig<T>,
    frame: usize,
    cfg: &ReportConfig,
) -> Vec<CohortReport<T>> {
    let mixture = model.mixture();
    let organized: Vec<bool> = model.components.iter().map(|c| c.organized).collect();
    let aggs = aggregate_components(&mixture, &organized, vectors, &model.labels);
    aggs.iter()
        .enumerate()
        .filter(|(_, a)| a.count >= cfg.min_members && a.rbar >= T::lit(cfg.r_min))
        .map(|(c, a)| CohortReport {
            frame,
            component: c,
            cohort_id: c,
            count: a.count,
            centroid: a.centroid,
            mean_speed: a.mean_speed,
            mean_speed_mps: calib.px_per_frame_to_mps(a.mean_speed),
            mean_direction: a.mean_dir,
            rbar: a.rbar,
            kappa: a.vm.kappa,
            weight: a.vm.weight,
        })
        .collect()
}

/// Straight-line, constant-velocity approach test against each location.
pub fn check_alerts<T: Scalar>(
    report: &CohortReport<T>,
    locations: &[SensitiveLocation<T>],
    calib: &CalibrationConfig<T>,
    angle_tol_deg: f64,
) -> Vec<AlertEvent<T>> {
    let speed = calib.px_per_frame_to_mps(report.mean_speed);
    if !(speed > T::zero()) {
        return Vec::new();
    }
    let cos_tol = T::lit(angle_tol_deg.to_radians().cos());
    // absorbs rounding in cos() so the boundary stays inclusive
    let slack = T::lit(1e-12);
    locations
        .iter()
        .filter_map(|loc| {
            let to = loc.position.sub(report.centroid);
            let dist = to.norm();
            if !(dist > T::zero()) {
                return None;
            }
            let off = angular_diff(report.mean_direction, to.angle());
            if off.cos() < cos_tol - slack {
                return None;
            }
            let eta = ((dist - loc.radius) * calib.meters_per_pixel / speed).max(T::zero());
            Some(AlertEvent {
                frame_issued: report.frame,
                cohort_id: report.cohort_id,
                location_id: loc.id.clone(),
                eta_seconds: eta,
                count: report.count,
                approach_angle_deg: off.abs().to_degrees(),
            })
        })
        .collect()
}

/// Suppresses repeats of a (cohort, location) alert until the ETA moves by
/// more than `eta_frac` or `frames` frames have passed.
#[derive(Debug, Clone)]
pub struct AlertDeduper<T> {
    pub eta_frac: f64,
    pub frames: usize,
    last: HashMap<(usize, String), (usize, T)>,
}

impl<T: Scalar> Default for AlertDeduper<T> {
    fn default() -> Self {
        Self { eta_frac: 0.2, frames: 20, last: HashMap::new() }
    }
}

impl<T: Scalar> AlertDeduper<T> {
    /// Returns true when the event should be emitted, and records it.
    pub fn admit(&mut self, e: &AlertEvent<T>) -> bool {
        let key = (e.cohort_id, e.location_id.clone());
        let fire = match self.last.get(&key) {
            None => true,
            Some(&(f, eta)) => {
                e.frame_issued >= f + self.frames || (e.eta_seconds - eta).abs() > T::lit(self.eta_frac) * eta.abs()
            }
        };
        if fire {
            self.last.insert(key, (e.frame_issued, e.eta_seconds));
        }
        fire
    }
}

/// Keeps cohort ids stable across frames by matching each new report to the
/// closest live cohort direction.
#[derive(Debug, Clone)]
pub struct CohortIdTracker<T> {
    /// Maximum direction change (radians) to keep an id.
    pub max_turn: T,
    /// Frames an id survives without a matching report.
    pub ttl: usize,
    live: Vec<(usize, T, usize)>,
    next: usize,
}

impl<T: Scalar> Default for CohortIdTracker<T> {
    fn default() -> Self {
        Self { max_turn: T::lit(30f64.to_radians()), ttl: 10, live: Vec::new(), next: 0 }
    }
}

impl<T: Scalar> CohortIdTracker<T> {
    /// Rewrites `cohort_id` on each report; returns component index to id.
    pub fn assign(&mut self, reports: &mut [CohortReport<T>]) -> HashMap<usize, usize> {
        let frame = reports.first().map(|r| r.frame);
        let mut pairs: Vec<(T, usize, usize)> = Vec::new();
        for (ri, r) in reports.iter().enumerate() {
            for (li, l) in self.live.iter().enumerate() {
                let d = angular_diff(r.mean_direction, l.1).abs();
                if d <= self.max_turn {
                    pairs.push((d, ri, li));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut rep_id = vec![None; reports.len()];
        let mut used = vec![false; self.live.len()];
        for (_, ri, li) in pairs {
            if rep_id[ri].is_none() && !used[li] {
                rep_id[ri] = Some(self.live[li].0);
                used[li] = true;
            }
        }
        let mut map = HashMap::new();
        for (ri, r) in reports.iter_mut().enumerate() {
            let id = rep_id[ri].unwrap_or_else(|| {
                self.next += 1;
                self.next - 1
            });
            r.cohort_id = id;
            map.insert(r.component, id);
            match self.live.iter_mut().find(|l| l.0 == id) {
                Some(l) => {
                    l.1 = r.mean_direction;
                    l.2 = r.frame;
                }
                None => self.live.push((id, r.mean_direction, r.frame)),
            }
        }
        if let Some(f) = frame {
            let ttl = self.ttl;
            self.live.retain(|l| l.2 + ttl >= f);
        }
        map
    }
}

/// Detection counts on a uniform grid; cells are half-open `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub cell_px: f64,
    pub cols: usize,
    pub rows: usize,
    /// Row-major.
    pub counts: Vec<u32>,
}

impl DensityMap {
    pub fn get(&self, col: usize, row: usize) -> u32 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn density_map<T: Scalar>(detections: &[Detection<T>], arena: (T, T), cell_px: T) -> Result<DensityMap> {
    if !(cell_px > T::zero()) || !(arena.0 > T::zero()) || !(arena.1 > T::zero()) {
        return Err(Error::InvalidInput("cell size and arena must be positive".into()));
    }
    let cols = (arena.0 / cell_px).ceil().to_usize().unwrap_or(0).max(1);
    let rows = (arena.1 / cell_px).ceil().to_usize().unwrap_or(0).max(1);
    let mut counts = vec![0u32; cols * rows];
    for d in detections {
        if !(d.x >= T::zero() && d.x < arena.0 && d.y >= T::zero() && d.y < arena.1) {
            continue;
        }
        let c = ((d.x / cell_px).floor().to_usize().unwrap_or(0)).min(cols - 1);
        let r = ((d.y / cell_px).floor().to_usize().unwrap_or(0)).min(rows - 1);
        counts[r * cols + c] += 1;
    }
    Ok(DensityMap { cell_px: cell_px.to_f64_lossy(), cols, rows, counts })
}
