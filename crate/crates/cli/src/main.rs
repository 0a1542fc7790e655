//! Experiment runner: configuration, seeded field generation, artifact
//! emission and the verification suite.

mod artifacts;
mod config;
mod fields;
mod plots;
mod stages;

use anyhow::{Context as _, Result};
use artifacts::{Artifacts, Row};
use clap::{Parser, Subcommand, ValueEnum};
use config::ExperimentConfig;
use gaugebeam::checks::{checks, find_check, Scale, SuiteOptions};
use serde_json::json;
use stages::{Experiment, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gaugebeam", version, about = "Gauge-field experiments: transport, beams, ray transforms and the Schrödinger solver")]
struct Cli {
    /// Bundled configuration name (flat-identity, gauge-pair) or a TOML file.
    #[arg(long, global = true, default_value = "flat-identity")]
    config: String,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArtMode {
    Forward,
    Invert,
    Gauge,
}

#[derive(Subcommand)]
enum Command {
    /// Trace inflow geodesics.
    Geodesic,
    /// Parallel transport along inflow geodesics.
    Transport,
    /// Scattering data of both connections and the scattering identity.
    Scatter,
    /// Gaussian beam construction, residual and stationary-phase tables.
    Beam,
    /// Attenuated ray transform: forward data, inversion or gauge reconstruction.
    Art {
        #[arg(value_enum)]
        mode: ArtMode,
    },
    /// Schrödinger solver: boundary-flux gauge gaps, energy ratios, norm conservation.
    Schrod,
    /// Every stage, then plot scripts and the manifest.
    Run,
    /// The property suite.
    Verify {
        /// Reduced workload with unchanged bounds.
        #[arg(long)]
        smoke: bool,
        /// Run only these checks (ids such as C3).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Plot scripts for the tables in a directory.
    Plots {
        /// Directory of CSV tables (default: the output directory).
        dir: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run_stages(cfg: ExperimentConfig, stages: &[Stage], with_plots: bool) -> Result<bool> {
    let mut out = Artifacts::create(&cfg.out)?;
    out.write("config.toml", cfg.to_toml()?)?;
    let ctx = Experiment::new(cfg)?;
    let mut rows: Vec<Row> = Vec::new();
    for &stage in stages {
        let stage_rows = ctx.run(stage, &mut out);
        for r in &stage_rows {
            println!("{}", r.line());
        }
        rows.extend(stage_rows);
    }
    if with_plots {
        for p in plots::emit_plots(out.dir())? {
            out.record(&p)?;
        }
    }
    let passed = !rows.is_empty() && rows.iter().all(|r| r.passed);
    let mut files = out.files().to_vec();
    files.push("manifest.json".into());
    out.write_json(
        "manifest.json",
        &json!({
            "name": ctx.cfg.name,
            "seed": ctx.cfg.seed,
            "metric": ctx.cfg.metric,
            "stages": stages.iter().map(|s| s.name()).collect::<Vec<_>>(),
            "passed": passed,
            "checks": rows,
            "files": files,
        }),
    )?;
    println!("{} -> {}", if passed { "all checks passed" } else { "some checks failed" }, out.dir().display());
    Ok(passed)
}

fn verify(cli: &Cli, smoke: bool, only: &[String]) -> Result<bool> {
    let selected = if only.is_empty() {
        checks()
    } else {
        only.iter().map(|id| find_check(id).with_context(|| format!("unknown check {id:?}"))).collect::<Result<Vec<_>>>()?
    };
    let opts = SuiteOptions { seed: cli.seed.unwrap_or(0), scale: if smoke { Scale::Smoke } else { Scale::Full } };
    let mut reports = Vec::new();
    for check in &selected {
        let report = check.run(&opts);
        println!("{}", report.line());
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    if let Some(dir) = &cli.out {
        let mut out = Artifacts::create(dir)?;
        out.write_json("verify.json", &json!({ "seed": opts.seed, "scale": opts.scale, "passed": passed, "checks": reports }))?;
    }
    Ok(passed)
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Verify { smoke, only } => verify(cli, *smoke, only),
        Command::Plots { dir } => {
            let dir = match dir {
                Some(d) => d.clone(),
                None => load(cli)?.out,
            };
            let written = plots::emit_plots(&dir)?;
            if written.is_empty() {
                println!("no tables in {}", dir.display());
            }
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        command => {
            let cfg = load(cli)?;
            let (stages, with_plots): (Vec<Stage>, bool) = match command {
                Command::Geodesic => (vec![Stage::Geodesic], false),
                Command::Transport => (vec![Stage::Transport], false),
                Command::Scatter => (vec![Stage::Scatter], false),
                Command::Beam => (vec![Stage::Beam], false),
                Command::Art { mode: ArtMode::Forward } => (vec![Stage::ArtForward], false),
                Command::Art { mode: ArtMode::Invert } => (vec![Stage::ArtInvert], false),
                Command::Art { mode: ArtMode::Gauge } => (vec![Stage::ArtGauge], false),
                Command::Schrod => (vec![Stage::Schrod], false),
                _ => (Stage::ALL.to_vec(), true),
            };
            run_stages(cfg, &stages, with_plots)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
