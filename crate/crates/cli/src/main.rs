use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crowdflow::sim::PRESET_NAMES;
use crowdflow_cli::commands::*;
use crowdflow_cli::pipeline::parse_frame_range;
use crowdflow_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "crowdflow", version, about = "Track crowd flows, find cohorts and raise arrival alerts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Half-open frame range A..B
    #[arg(long)]
    frames: Option<String>,
    /// Simulator preset (see `crowdflow presets`)
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a scene and write detections plus ground truth
    Simulate(Common),
    /// Detect (or load), link, cluster and alert
    Track(Common),
    /// Score links and cohort reports against ground truth
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to OUT/links.csv
        #[arg(long)]
        links: Option<PathBuf>,
        /// Defaults to OUT/cohorts.csv
        #[arg(long)]
        cohorts: Option<PathBuf>,
        /// Defaults to input.ground_truth, then OUT/ground_truth.csv
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Draw one SVG per frame from a links file
    Render {
        #[command(flatten)]
        common: Common,
        /// Defaults to OUT/links.csv
        #[arg(long)]
        links: Option<PathBuf>,
    },
    /// List simulator presets
    Presets,
}

fn setup(c: &Common) -> Result<(crowdflow_cli::config::RunConfig, Option<(usize, Option<usize>)>)> {
    let cfg = resolve_config(c.config.as_deref(), c.preset.as_deref(), c.seed)?;
    let range = c.frames.as_deref().map(parse_frame_range).transpose()?;
    Ok((cfg, range))
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate(c) => {
            let (cfg, _) = setup(&c)?;
            cmd_simulate(&cfg, &c.out)?;
            eprintln!("wrote simulation to {}", c.out.display());
        }
        Cmd::Track(c) => {
            let (cfg, range) = setup(&c)?;
            let r = cmd_track(&cfg, &c.out, range)?;
            eprintln!(
                "{} links, {} cohort reports, {} alerts -> {}",
                r.links.len(),
                r.cohorts.len(),
                r.alerts.len(),
                c.out.display()
            );
        }
        Cmd::Evaluate { common: c, links, cohorts, truth } => {
            let (cfg, range) = setup(&c)?;
            let r = cmd_evaluate(&cfg, &c.out, links.as_deref(), cohorts.as_deref(), truth.as_deref(), range)?;
            println!("{}", serde_json::to_string_pretty(&r).map_err(|e| CliError::Input(e.to_string()))?);
        }
        Cmd::Render { common: c, links } => {
            let (cfg, range) = setup(&c)?;
            let files = cmd_render(&cfg, &c.out, links.as_deref(), range)?;
            eprintln!("{} frames -> {}", files.len(), Path::new(&c.out).display());
        }
        Cmd::Presets => {
            for p in PRESET_NAMES {
                println!("{p}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
