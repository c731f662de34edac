//! One function per subcommand. Each resolves its inputs, does the work and
//! writes its files in a single atomic batch.

use std::path::{Path, PathBuf};

use crowdflow::io::load_ground_truth;

use crate::config::{parse_pairs, RunConfig};
use crate::eval::{evaluate, EvalReport};
use crate::output::*;
use crate::pipeline::{simulate_files, track_files, TrackOutput};
use crate::render::render_frames;
use crate::{CliError, Result};

pub const EVAL_JSON: &str = "eval.json";

type FrameRange = Option<(usize, Option<usize>)>;

/// Config file, then `--preset`, then `--seed`; later sources win.
pub fn resolve_config(config: Option<&Path>, preset: Option<&str>, seed: Option<u64>) -> Result<RunConfig> {
    let mut pairs = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            parse_pairs(&text)?
        }
        None => Default::default(),
    };
    if let Some(name) = preset {
        pairs.insert("simulator.preset".into(), name.into());
    }
    if let Some(s) = seed {
        pairs.insert("seed".into(), s.to_string());
    }
    RunConfig::from_pairs(pairs)
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    write_all_atomic(out, &simulate_files(cfg)?)
}

pub fn cmd_track(cfg: &RunConfig, out: &Path, range: FrameRange) -> Result<TrackOutput> {
    let (result, files) = track_files(cfg, range)?;
    write_all_atomic(out, &files)?;
    Ok(result)
}

fn existing(p: PathBuf, what: &str) -> Result<PathBuf> {
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::Input(format!("{what} not found: {}", p.display())))
    }
}

/// Paths default to the files `track` and `simulate` leave in `out`.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    out: &Path,
    links: Option<&Path>,
    cohorts: Option<&Path>,
    truth: Option<&Path>,
    range: FrameRange,
) -> Result<EvalReport> {
    let links = existing(links.map_or_else(|| out.join(LINKS_CSV), Path::to_path_buf), "links")?;
    let cohorts = existing(cohorts.map_or_else(|| out.join(COHORTS_CSV), Path::to_path_buf), "cohort reports")?;
    let truth = truth
        .map(Path::to_path_buf)
        .or_else(|| cfg.input.ground_truth.clone())
        .unwrap_or_else(|| out.join(GROUND_TRUTH_CSV));
    let truth = existing(truth, "ground truth")?;

    let links: Vec<LinkRow> = read_csv(&links, &LINKS_HEADER)?;
    let cohorts: Vec<CohortRow> = read_csv(&cohorts, &COHORTS_HEADER)?;
    let rows = load_ground_truth(&truth).map_err(|e| CliError::Input(format!("{}: {e}", truth.display())))?;
    let onsets: Option<Vec<usize>> = cfg.scenario.as_ref().map(|s| s.cohorts.iter().map(|c| c.onset_frame).collect());
    let report = evaluate(&links, &cohorts, &rows, onsets.as_deref(), range)?;

    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    json.push(b'\n');
    write_all_atomic(out, &[(EVAL_JSON.into(), json)])?;
    Ok(report)
}

/// Arena for drawing: configured, simulated, or the extent of the links.
fn render_arena(cfg: &RunConfig, links: &[LinkRow]) -> (f64, f64) {
    cfg.input.arena.or(cfg.scenario.as_ref().map(|s| s.arena)).unwrap_or_else(|| {
        links.iter().fold((1.0f64, 1.0f64), |(w, h), l| {
            (w.max(l.from_x.max(l.to_x).ceil() + 1.0), h.max(l.from_y.max(l.to_y).ceil() + 1.0))
        })
    })
}

/// Writes one SVG per frame and returns the file names. Without an explicit
/// end frame the range runs to the last linked frame; with no links at all
/// a single empty frame 0 is drawn.
pub fn cmd_render(cfg: &RunConfig, out: &Path, links: Option<&Path>, range: FrameRange) -> Result<Vec<String>> {
    let path = existing(links.map_or_else(|| out.join(LINKS_CSV), Path::to_path_buf), "links")?;
    let links: Vec<LinkRow> = read_csv(&path, &LINKS_HEADER)?;
    let (a, b) = range.unwrap_or((0, None));
    let end = b.unwrap_or_else(|| links.iter().map(|l| l.frame + 1).max().unwrap_or(1).max(a + 1));
    let files = render_frames(&links, a..end, render_arena(cfg, &links), &cfg.locations);
    write_all_atomic(out, &files)?;
    Ok(files.into_iter().map(|f| f.0).collect())
}
