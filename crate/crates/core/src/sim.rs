//! Synthetic crowd scenes with exact ground truth.
//!
//! Walkers take isotropic Gaussian steps. Cohort members jitter like walkers
//! until their onset frame, then move at a fixed speed with a per-frame
//! heading drawn from a von Mises distribution around the cohort direction.
//! Positions reflect at the arena walls; a reflected member keeps moving in
//! the mirrored direction rather than grinding along the wall.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::alert::SensitiveLocation;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, CalibrationConfig, Detection, Vec2};
use crate::io::TruthRow;

pub const PRESET_NAMES: [&str; 4] = ["interdigitated", "onset", "multi-gate", "sparse"];

/// Axis-aligned box `[x0, x1] x [y0, y1]` in px.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerSpec {
    pub count: usize,
    pub step_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSpec {
    pub count: usize,
    /// Radians, y axis pointing down.
    pub direction: f64,
    /// px/frame.
    pub speed: f64,
    pub heading_kappa: f64,
    pub spawn_region: Region,
    pub onset_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub arena: (f64, f64),
    pub n_frames: usize,
    pub seed: u64,
    pub walkers: WalkerSpec,
    pub cohorts: Vec<CohortSpec>,
    pub p_miss: f64,
    pub clutter_rate: f64,
    pub calib: CalibrationConfig<f64>,
    pub locations: Vec<SensitiveLocation<f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            arena: (800.0, 800.0),
            n_frames: 20,
            seed: 0,
            walkers: WalkerSpec { count: 0, step_sigma: 1.0 },
            cohorts: Vec::new(),
            p_miss: 0.0,
            clutter_rate: 0.0,
            calib: CalibrationConfig::default(),
            locations: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (w, h) = self.arena;
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return bad(format!("arena {w} x {h} must be positive"));
        }
        if self.n_frames == 0 {
            return bad("n_frames must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.p_miss) {
            return bad(format!("p_miss {} outside [0, 1)", self.p_miss));
        }
        if !(self.clutter_rate.is_finite() && self.clutter_rate >= 0.0) {
            return bad(format!("clutter_rate {} must be >= 0", self.clutter_rate));
        }
        if !(self.walkers.step_sigma.is_finite() && self.walkers.step_sigma >= 0.0) {
            return bad("walker step_sigma must be >= 0".into());
        }
        self.calib.validate()?;
        let max_disp = self.calib.max_disp_px();
        for (i, c) in self.cohorts.iter().enumerate() {
            if !(c.speed.is_finite() && c.speed >= 0.0 && c.speed <= max_disp) {
                return bad(format!("cohort {i}: speed {} outside [0, {max_disp}]", c.speed));
            }
            if c.onset_frame >= self.n_frames {
                return bad(format!("cohort {i}: onset_frame {} >= n_frames", c.onset_frame));
            }
            if !(c.heading_kappa.is_finite() && c.heading_kappa >= 0.0) || !c.direction.is_finite() {
                return bad(format!("cohort {i}: bad heading"));
            }
            let r = c.spawn_region;
            let inside = 0.0 <= r.x0 && r.x0 <= r.x1 && r.x1 <= w && 0.0 <= r.y0 && r.y0 <= r.y1 && r.y1 <= h;
            if !inside {
                return bad(format!("cohort {i}: spawn region outside the arena"));
            }
        }
        for l in &self.locations {
            l.validate()?;
        }
        Ok(())
    }

    pub fn population(&self) -> usize {
        self.walkers.count + self.cohorts.iter().map(|c| c.count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// One row per emitted detection, in emission order.
    pub rows: Vec<TruthRow>,
    /// True position of every object in every frame, dropped or not.
    pub trajectories: Vec<Vec<Vec2<f64>>>,
    /// Cohort index per object, `-1` for walkers.
    pub cohort_of: Vec<i64>,
    pub n_frames: usize,
}

impl GroundTruth {
    /// Rebuilds ground truth from CSV rows (trajectories cover detected rows only).
    pub fn from_rows(rows: Vec<TruthRow>) -> Self {
        let n_frames = rows.iter().map(|r| r.frame + 1).max().unwrap_or(0);
        let n_obj = rows.iter().map(|r| r.object_id + 1).max().unwrap_or(0).max(0) as usize;
        let mut cohort_of = vec![-1; n_obj];
        let mut trajectories = vec![vec![Vec2::new(f64::NAN, f64::NAN); n_frames]; n_obj];
        for r in &rows {
            if r.object_id >= 0 {
                cohort_of[r.object_id as usize] = r.cohort_id;
                trajectories[r.object_id as usize][r.frame] = Vec2::new(r.x, r.y);
            }
        }
        Self { rows, trajectories, cohort_of, n_frames }
    }

    pub fn frame_rows(&self) -> Vec<Vec<TruthRow>> {
        let mut out = vec![Vec::new(); self.n_frames];
        for r in &self.rows {
            out[r.frame].push(*r);
        }
        out
    }

    pub fn detections(&self) -> Vec<Vec<Detection<f64>>> {
        self.frame_rows().iter().map(|f| f.iter().map(|r| r.detection()).collect()).collect()
    }

    /// Detected object pairs in consecutive frames: `(frame, from, to, object_id)`.
    pub fn true_links(&self) -> Vec<(usize, Vec2<f64>, Vec2<f64>, i64)> {
        let frames = self.frame_rows();
        let mut out = Vec::new();
        for t in 0..frames.len().saturating_sub(1) {
            for a in frames[t].iter().filter(|r| r.object_id >= 0) {
                if let Some(b) = frames[t + 1].iter().find(|r| r.object_id == a.object_id) {
                    out.push((t, Vec2::new(a.x, a.y), Vec2::new(b.x, b.y), a.object_id));
                }
            }
        }
        out
    }
}

/// Best-Fisher rejection sampler; `kappa = 0` is uniform.
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-8 {
        return wrap_angle(rng.gen_range(-PI..PI));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen();
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen();
            let th = if u3 > 0.5 { f.acos() } else { -f.acos() };
            return wrap_angle(mu + th);
        }
    }
}

/// Folds `v` back into `[0, hi]`; returns whether an odd number of bounces occurred.
fn reflect(mut v: f64, hi: f64) -> (f64, bool) {
    let mut flipped = false;
    for _ in 0..64 {
        if v < 0.0 {
            v = -v;
        } else if v > hi {
            v = 2.0 * hi - v;
        } else {
            break;
        }
        flipped = !flipped;
    }
    (v.clamp(0.0, hi), flipped)
}

struct Agent {
    pos: Vec2<f64>,
    cohort: Option<usize>,
    /// Current base heading (mirrored on wall bounces).
    dir: f64,
}

/// Runs a scenario. Detections and ground-truth rows are emitted in the same
/// order, so `truth.detections()` equals the returned detections.
pub fn simulate(cfg: &ScenarioConfig) -> Result<(Vec<Vec<Detection<f64>>>, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = cfg.arena;
    let step = Normal::new(0.0, cfg.walkers.step_sigma.max(0.0)).expect("sigma checked");
    let clutter = (cfg.clutter_rate > 0.0).then(|| Poisson::new(cfg.clutter_rate).expect("rate checked"));

    let mut agents = Vec::with_capacity(cfg.population());
    for _ in 0..cfg.walkers.count {
        let pos = Vec2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        agents.push(Agent { pos, cohort: None, dir: 0.0 });
    }
    for (ci, c) in cfg.cohorts.iter().enumerate() {
        let r = c.spawn_region;
        for _ in 0..c.count {
            let x = if r.x1 > r.x0 { rng.gen_range(r.x0..r.x1) } else { r.x0 };
            let y = if r.y1 > r.y0 { rng.gen_range(r.y0..r.y1) } else { r.y0 };
            agents.push(Agent { pos: Vec2::new(x, y), cohort: Some(ci), dir: c.direction });
        }
    }

    let mut frames = Vec::with_capacity(cfg.n_frames);
    let mut rows = Vec::new();
    let mut trajectories = vec![Vec::with_capacity(cfg.n_frames); agents.len()];
    for f in 0..cfg.n_frames {
        if f > 0 {
            for a in agents.iter_mut() {
                let moving = a.cohort.map(|c| &cfg.cohorts[c]).filter(|c| f > c.onset_frame);
                let d = match moving {
                    Some(c) => {
                        let th = sample_von_mises(&mut rng, a.dir, c.heading_kappa);
                        Vec2::new(c.speed * th.cos(), c.speed * th.sin())
                    }
                    None => Vec2::new(step.sample(&mut rng), step.sample(&mut rng)),
                };
                let (x, fx) = reflect(a.pos.x + d.x, w);
                let (y, fy) = reflect(a.pos.y + d.y, h);
                a.pos = Vec2::new(x, y);
                if fx {
                    a.dir = wrap_angle(std::f64::consts::PI - a.dir);
                }
                if fy {
                    a.dir = wrap_angle(-a.dir);
                }
            }
        }
        let mut dets = Vec::new();
        for (id, a) in agents.iter().enumerate() {
            trajectories[id].push(a.pos);
            if cfg.p_miss > 0.0 && rng.gen::<f64>() < cfg.p_miss {
                continue;
            }
            let cohort_id = a.cohort.map_or(-1, |c| c as i64);
            rows.push(TruthRow { frame: f, x: a.pos.x, y: a.pos.y, score: 1.0, object_id: id as i64, cohort_id });
            dets.push(Detection::new(f, a.pos.x, a.pos.y, 1.0));
        }
        let n_clutter = clutter.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_clutter {
            let (x, y) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
            rows.push(TruthRow { frame: f, x, y, score: 1.0, object_id: -1, cohort_id: -1 });
            dets.push(Detection::new(f, x, y, 1.0));
        }
        frames.push(dets);
    }
    let cohort_of = agents.iter().map(|a| a.cohort.map_or(-1, |c| c as i64)).collect();
    Ok((frames, GroundTruth { rows, trajectories, cohort_of, n_frames: cfg.n_frames }))
}

/// Fixed scenario definitions:
///
/// | preset | arena | frames | population | notes |
/// |---|---|---|---|---|
/// | interdigitated | 800x800 | 20 | 2 x 100 | directions 0 and pi, 4 px/frame, kappa 8, overlapping spawn boxes, p_miss 0.05 |
/// | onset | 1000x1000 | 24 | 500 walkers (sigma 0.5) + 20 | cohort starts at frame 10, heading -pi/2 at 4 px/frame, kappa 20 |
/// | multi-gate | 1000x1000 | 20 | 3 x 60 + 60 walkers | east, north and west toward three gates, paths cross mid-arena |
/// | sparse | 1000x1000 | 20 | 25 + 20 + 5 walkers | directions 0 and pi/2, kappa 8, walkers sigma 3 |
pub fn preset_scenario(name: &str) -> Result<ScenarioConfig> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let base = ScenarioConfig::default();
    let loc = |id: &str, x: f64, y: f64, r: f64| SensitiveLocation { id: id.to_string(), position: Vec2::new(x, y), radius: r };
    let cfg = match name {
        "interdigitated" => ScenarioConfig {
            arena: (800.0, 800.0),
            n_frames: 20,
            cohorts: vec![
                CohortSpec {
                    count: 100,
                    direction: 0.0,
                    speed: 4.0,
                    heading_kappa: 8.0,
                    spawn_region: Region::new(50.0, 100.0, 650.0, 700.0),
                    onset_frame: 0,
                },
                CohortSpec {
                    count: 100,
                    direction: PI,
                    speed: 4.0,
                    heading_kappa: 8.0,
                    spawn_region: Region::new(150.0, 100.0, 750.0, 700.0),
                    onset_frame: 0,
                },
            ],
            p_miss: 0.05,
            locations: vec![loc("east-exit", 790.0, 400.0, 10.0), loc("west-exit", 10.0, 400.0, 10.0)],
            ..base
        },
        "onset" => ScenarioConfig {
            arena: (1000.0, 1000.0),
            n_frames: 24,
            walkers: WalkerSpec { count: 500, step_sigma: 0.5 },
            cohorts: vec![CohortSpec {
                count: 20,
                direction: -FRAC_PI_2,
                speed: 4.0,
                heading_kappa: 20.0,
                spawn_region: Region::new(400.0, 600.0, 600.0, 800.0),
                onset_frame: 10,
            }],
            locations: vec![loc("gate", 500.0, 100.0, 20.0)],
            ..base
        },
        "multi-gate" => ScenarioConfig {
            arena: (1000.0, 1000.0),
            n_frames: 20,
            walkers: WalkerSpec { count: 60, step_sigma: 1.0 },
            cohorts: vec![
                CohortSpec {
                    count: 60,
                    direction: 0.0,
                    speed: 4.0,
                    heading_kappa: 10.0,
                    spawn_region: Region::new(250.0, 400.0, 450.0, 600.0),
                    onset_frame: 0,
                },
                CohortSpec {
                    count: 60,
                    direction: -FRAC_PI_2,
                    speed: 4.0,
                    heading_kappa: 10.0,
                    spawn_region: Region::new(400.0, 550.0, 600.0, 750.0),
                    onset_frame: 0,
                },
                CohortSpec {
                    count: 60,
                    direction: PI,
                    speed: 4.0,
                    heading_kappa: 10.0,
                    spawn_region: Region::new(550.0, 400.0, 750.0, 600.0),
                    onset_frame: 0,
                },
            ],
            locations: vec![
                loc("gate-east", 950.0, 500.0, 20.0),
                loc("gate-north", 500.0, 50.0, 20.0),
                loc("gate-west", 50.0, 500.0, 20.0),
            ],
            ..base
        },
        "sparse" => ScenarioConfig {
            arena: (1000.0, 1000.0),
            n_frames: 20,
            walkers: WalkerSpec { count: 5, step_sigma: 3.0 },
            cohorts: vec![
                CohortSpec {
                    count: 25,
                    direction: 0.0,
                    speed: 4.0,
                    heading_kappa: 8.0,
                    spawn_region: Region::new(100.0, 100.0, 800.0, 900.0),
                    onset_frame: 0,
                },
                CohortSpec {
                    count: 20,
                    direction: FRAC_PI_2,
                    speed: 4.0,
                    heading_kappa: 8.0,
                    spawn_region: Region::new(100.0, 100.0, 900.0, 800.0),
                    onset_frame: 0,
                },
            ],
            ..base
        },
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(cfg)
}
