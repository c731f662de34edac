//! Flat `section.key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional; the
//! defaults are the library defaults. Unknown keys are an error. List-like
//! entries use numbered keys so their order survives a round trip:
//!
//! ```text
//! seed = 3
//! calibration.fps = 25
//! cohort.radius = auto
//! simulator.preset = onset
//! simulator.cohort.0 = 20 -1.5708 4 20 400 600 600 800 10
//! alert.location.0 = gate 500 100 20
//! ```
//!
//! A cohort line is `count direction speed kappa x0 y0 x1 y1 onset_frame`; a
//! location line is `id x y radius`. Either list, when present, replaces the
//! preset's list. Any `simulator.*` key turns on simulation when no input is
//! given.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crowdflow::alert::ReportConfig;
use crowdflow::cohort::CohortConfig;
use crowdflow::sim::{preset_scenario, CohortSpec, Region, ScenarioConfig};
use crowdflow::{CalibrationConfig, DetectorConfig, SensitiveLocation, TrackerConfig, Vec2};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkerSection {
    pub max_iters: usize,
    pub converge_frac: f64,
    pub lambda_points: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub var_floor: f64,
    pub weight_eps: f64,
    pub lookahead: bool,
}

impl Default for LinkerSection {
    fn default() -> Self {
        let t = TrackerConfig::default();
        Self {
            max_iters: t.max_iters,
            converge_frac: t.converge_frac,
            lambda_points: t.lambda_points,
            lambda_lo: t.lambda_lo,
            lambda_hi: t.lambda_hi,
            var_floor: t.var_floor,
            weight_eps: t.weight_eps,
            lookahead: t.lookahead,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertSection {
    pub report: ReportConfig,
    pub dedup_eta_frac: f64,
    pub dedup_frames: usize,
    /// Density map cell side in px.
    pub density_cell_px: f64,
}

impl Default for AlertSection {
    fn default() -> Self {
        Self { report: ReportConfig::default(), dedup_eta_frac: 0.2, dedup_frames: 20, density_cell_px: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InputSection {
    pub detections: Option<PathBuf>,
    /// Directory of PGM frames, read in file-name order.
    pub frames_dir: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    /// Scene size in px; otherwise the scenario arena or the detections' extent.
    pub arena: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub calib: CalibrationConfig,
    pub detector: DetectorConfig,
    pub linker: LinkerSection,
    pub cohort: CohortConfig,
    pub alert: AlertSection,
    pub input: InputSection,
    pub preset: Option<String>,
    /// Resolved scenario (preset plus overrides); `None` when nothing asks for one.
    pub scenario: Option<ScenarioConfig>,
    pub locations: Vec<SensitiveLocation>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            calib: CalibrationConfig::default(),
            detector: DetectorConfig::default(),
            linker: LinkerSection::default(),
            cohort: CohortConfig::default(),
            alert: AlertSection::default(),
            input: InputSection::default(),
            preset: None,
            scenario: None,
            locations: Vec::new(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses the raw `key = value` lines; duplicate keys are rejected.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(usage(format!("config line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

struct Pairs(BTreeMap<String, String>);

impl Pairs {
    fn take<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *slot = v.parse().map_err(|_| usage(format!("bad value for `{key}`: `{v}`")))?;
        }
        Ok(())
    }

    fn take_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let mut slot = None;
        if let Some(v) = self.0.remove(key) {
            slot = Some(v.parse().map_err(|_| usage(format!("bad value for `{key}`: `{v}`")))?);
        }
        Ok(slot)
    }

    /// Removes `prefix.N` keys and returns them ordered by `N`.
    fn take_numbered(&mut self, prefix: &str) -> Result<Vec<(String, String)>> {
        let dotted = format!("{prefix}.");
        let keys: Vec<String> = self.0.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
        let mut items = Vec::new();
        for k in keys {
            let n: usize = k[dotted.len()..].parse().map_err(|_| usage(format!("`{k}`: expected a numeric index")))?;
            let v = self.0.remove(&k).unwrap();
            items.push((n, k, v));
        }
        items.sort_by_key(|t| t.0);
        Ok(items.into_iter().map(|(_, k, v)| (k, v)).collect())
    }
}

fn numbers(key: &str, v: &str, n: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = v
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("`{key}`: expected numbers, got `{v}`")))?;
    if vals.len() != n {
        return Err(usage(format!("`{key}`: expected {n} values, got {}", vals.len())));
    }
    Ok(vals)
}

fn whole(key: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(usage(format!("`{key}`: expected a non-negative integer, got {v}")))
    }
}

fn cohort_line(key: &str, v: &str) -> Result<CohortSpec> {
    let n = numbers(key, v, 9)?;
    Ok(CohortSpec {
        count: whole(key, n[0])?,
        direction: n[1],
        speed: n[2],
        heading_kappa: n[3],
        spawn_region: Region::new(n[4], n[5], n[6], n[7]),
        onset_frame: whole(key, n[8])?,
    })
}

fn location_line(key: &str, v: &str) -> Result<SensitiveLocation> {
    let mut it = v.split_whitespace();
    let id = it.next().ok_or_else(|| usage(format!("`{key}`: expected `id x y radius`")))?;
    let rest: Vec<&str> = it.collect();
    let n = numbers(key, &rest.join(" "), 3)?;
    Ok(SensitiveLocation { id: id.to_string(), position: Vec2::new(n[0], n[1]), radius: n[2] })
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_pairs(map: BTreeMap<String, String>) -> Result<Self> {
        let mut p = Pairs(map);
        let mut c = RunConfig::default();
        p.take("seed", &mut c.seed)?;

        p.take("calibration.meters_per_pixel", &mut c.calib.meters_per_pixel)?;
        p.take("calibration.fps", &mut c.calib.fps)?;
        p.take("calibration.v_max", &mut c.calib.v_max)?;

        p.take("detector.sigma1", &mut c.detector.sigma1)?;
        p.take("detector.ratio", &mut c.detector.ratio)?;
        p.take("detector.k_thresh", &mut c.detector.k_thresh)?;

        let l = &mut c.linker;
        p.take("linker.max_iters", &mut l.max_iters)?;
        p.take("linker.converge_frac", &mut l.converge_frac)?;
        p.take("linker.lambda_points", &mut l.lambda_points)?;
        p.take("linker.lambda_lo", &mut l.lambda_lo)?;
        p.take("linker.lambda_hi", &mut l.lambda_hi)?;
        p.take("linker.var_floor", &mut l.var_floor)?;
        p.take("linker.weight_eps", &mut l.weight_eps)?;
        p.take("linker.lookahead", &mut l.lookahead)?;

        let k = &mut c.cohort;
        p.take("cohort.k_max", &mut k.k_max)?;
        p.take("cohort.w_min", &mut k.w_min)?;
        p.take("cohort.beta", &mut k.beta)?;
        p.take("cohort.k_nn", &mut k.k_nn)?;
        if let Some(r) = p.take_opt::<String>("cohort.radius")? {
            k.radius = match r.as_str() {
                "auto" => None,
                v => Some(v.parse().map_err(|_| usage(format!("bad value for `cohort.radius`: `{v}`")))?),
            };
        }
        p.take("cohort.min_speed", &mut k.min_speed)?;
        p.take("cohort.kappa_min", &mut k.kappa_min)?;
        p.take("cohort.density_floor", &mut k.density_floor)?;
        p.take("cohort.sparse_density", &mut k.sparse_density)?;

        let a = &mut c.alert;
        p.take("alert.min_members", &mut a.report.min_members)?;
        p.take("alert.r_min", &mut a.report.r_min)?;
        p.take("alert.angle_tol_deg", &mut a.report.angle_tol_deg)?;
        p.take("alert.dedup_eta_frac", &mut a.dedup_eta_frac)?;
        p.take("alert.dedup_frames", &mut a.dedup_frames)?;
        p.take("alert.density_cell_px", &mut a.density_cell_px)?;
        let locs = p
            .take_numbered("alert.location")?
            .iter()
            .map(|(k, v)| location_line(k, v))
            .collect::<Result<Vec<_>>>()?;

        c.input.detections = p.take_opt("input.detections")?;
        c.input.frames_dir = p.take_opt("input.frames_dir")?;
        c.input.ground_truth = p.take_opt("input.ground_truth")?;
        if let Some(v) = p.take_opt::<String>("input.arena")? {
            let n = numbers("input.arena", &v, 2)?;
            c.input.arena = Some((n[0], n[1]));
        }

        c.preset = p.take_opt("simulator.preset")?;
        let sim_keys = p.0.keys().any(|k| k.starts_with("simulator."));
        let mut scen = match &c.preset {
            Some(name) => Some(preset_scenario(name)?),
            None if sim_keys => Some(ScenarioConfig::default()),
            None => None,
        };
        if let Some(s) = scen.as_mut() {
            p.take("simulator.n_frames", &mut s.n_frames)?;
            p.take("simulator.arena_width", &mut s.arena.0)?;
            p.take("simulator.arena_height", &mut s.arena.1)?;
            let mut walkers = s.walkers;
            p.take("simulator.walkers", &mut walkers.count)?;
            p.take("simulator.walker_sigma", &mut walkers.step_sigma)?;
            s.walkers = walkers;
            p.take("simulator.p_miss", &mut s.p_miss)?;
            p.take("simulator.clutter_rate", &mut s.clutter_rate)?;
            let cohorts = p.take_numbered("simulator.cohort")?;
            if !cohorts.is_empty() {
                s.cohorts = cohorts.iter().map(|(k, v)| cohort_line(k, v)).collect::<Result<_>>()?;
            }
        }
        c.locations = match (&scen, locs.is_empty()) {
            (_, false) => locs,
            (Some(s), true) => s.locations.clone(),
            (None, true) => Vec::new(),
        };
        c.scenario = scen;

        if let Some(k) = p.0.keys().next() {
            return Err(usage(format!("unknown config key `{k}`")));
        }
        c.sync();
        c.validate()?;
        Ok(c)
    }

    /// Pushes the shared settings (seed, calibration, locations) into the
    /// scenario and cohort sections. Call after changing any of them.
    pub fn sync(&mut self) {
        self.cohort.seed = self.seed;
        if let Some(s) = self.scenario.as_mut() {
            s.seed = self.seed;
            s.calib = self.calib;
            s.locations = self.locations.clone();
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync();
        self
    }

    /// Starts from a preset with every other setting at its default.
    pub fn for_preset(name: &str) -> Result<Self> {
        Self::from_text(&format!("simulator.preset = {name}"))
    }

    pub fn validate(&self) -> Result<()> {
        self.calib.validate()?;
        self.detector.validate()?;
        for l in &self.locations {
            l.validate()?;
        }
        if let Some(s) = &self.scenario {
            s.validate()?;
        }
        let l = &self.linker;
        if l.lambda_points < 2 || !(l.lambda_lo > 0.0 && l.lambda_lo < l.lambda_hi) {
            return Err(usage("linker: need lambda_points >= 2 and 0 < lambda_lo < lambda_hi"));
        }
        if !(self.alert.density_cell_px > 0.0) {
            return Err(usage("alert.density_cell_px must be > 0"));
        }
        if let Some((w, h)) = self.input.arena {
            if !(w > 0.0 && h > 0.0) {
                return Err(usage("input.arena must be positive"));
            }
        }
        Ok(())
    }

    pub fn tracker_config(&self, arena: (f64, f64)) -> TrackerConfig {
        let l = &self.linker;
        TrackerConfig {
            calib: self.calib,
            max_iters: l.max_iters,
            converge_frac: l.converge_frac,
            lambda_points: l.lambda_points,
            lambda_lo: l.lambda_lo,
            lambda_hi: l.lambda_hi,
            var_floor: l.var_floor,
            weight_eps: l.weight_eps,
            lookahead: l.lookahead,
            arena: Some(arena),
            cohort: self.cohort,
        }
    }

    /// The effective configuration in the same format; parsing it back gives
    /// an equal `RunConfig`.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("calibration.meters_per_pixel", self.calib.meters_per_pixel.to_string());
        kv("calibration.fps", self.calib.fps.to_string());
        kv("calibration.v_max", self.calib.v_max.to_string());
        kv("detector.sigma1", self.detector.sigma1.to_string());
        kv("detector.ratio", self.detector.ratio.to_string());
        kv("detector.k_thresh", self.detector.k_thresh.to_string());
        let l = &self.linker;
        kv("linker.max_iters", l.max_iters.to_string());
        kv("linker.converge_frac", l.converge_frac.to_string());
        kv("linker.lambda_points", l.lambda_points.to_string());
        kv("linker.lambda_lo", l.lambda_lo.to_string());
        kv("linker.lambda_hi", l.lambda_hi.to_string());
        kv("linker.var_floor", l.var_floor.to_string());
        kv("linker.weight_eps", l.weight_eps.to_string());
        kv("linker.lookahead", l.lookahead.to_string());
        let k = &self.cohort;
        kv("cohort.k_max", k.k_max.to_string());
        kv("cohort.w_min", k.w_min.to_string());
        kv("cohort.beta", k.beta.to_string());
        kv("cohort.k_nn", k.k_nn.to_string());
        kv("cohort.radius", k.radius.map_or("auto".to_string(), |r| r.to_string()));
        kv("cohort.min_speed", k.min_speed.to_string());
        kv("cohort.kappa_min", k.kappa_min.to_string());
        kv("cohort.density_floor", k.density_floor.to_string());
        kv("cohort.sparse_density", k.sparse_density.to_string());
        let a = &self.alert;
        kv("alert.min_members", a.report.min_members.to_string());
        kv("alert.r_min", a.report.r_min.to_string());
        kv("alert.angle_tol_deg", a.report.angle_tol_deg.to_string());
        kv("alert.dedup_eta_frac", a.dedup_eta_frac.to_string());
        kv("alert.dedup_frames", a.dedup_frames.to_string());
        kv("alert.density_cell_px", a.density_cell_px.to_string());
        for (i, loc) in self.locations.iter().enumerate() {
            kv(
                &format!("alert.location.{i}"),
                format!("{} {} {} {}", loc.id, loc.position.x, loc.position.y, loc.radius),
            );
        }
        let path = |p: &PathBuf| p.display().to_string();
        if let Some(p) = &self.input.detections {
            kv("input.detections", path(p));
        }
        if let Some(p) = &self.input.frames_dir {
            kv("input.frames_dir", path(p));
        }
        if let Some(p) = &self.input.ground_truth {
            kv("input.ground_truth", path(p));
        }
        if let Some((w, h)) = self.input.arena {
            kv("input.arena", format!("{w} {h}"));
        }
        if let Some(name) = &self.preset {
            kv("simulator.preset", name.clone());
        }
        if let Some(s) = &self.scenario {
            kv("simulator.n_frames", s.n_frames.to_string());
            kv("simulator.arena_width", s.arena.0.to_string());
            kv("simulator.arena_height", s.arena.1.to_string());
            kv("simulator.walkers", s.walkers.count.to_string());
            kv("simulator.walker_sigma", s.walkers.step_sigma.to_string());
            kv("simulator.p_miss", s.p_miss.to_string());
            kv("simulator.clutter_rate", s.clutter_rate.to_string());
            for (i, c) in s.cohorts.iter().enumerate() {
                let r = c.spawn_region;
                kv(
                    &format!("simulator.cohort.{i}"),
                    format!(
                        "{} {} {} {} {} {} {} {} {}",
                        c.count, c.direction, c.speed, c.heading_kappa, r.x0, r.y0, r.x1, r.y1, c.onset_frame
                    ),
                );
            }
        }
        o
    }
}
