//! `gfm-sim`: batch front end for the transient stability toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gfm_core::analysis::surface::SurfaceAxis;
use gfm_core::config::{load_config, parse_config_over, ExperimentConfig};
use gfm_core::experiments::{
    describe_cct, find_preset, presets, run_cct_reports, run_simulations, run_surfaces, write_cct_reports,
    write_simulations, write_surfaces, CommandOutput,
};
use gfm_core::Strategy;

#[derive(Parser)]
#[command(name = "gfm-sim", version, about = "Transient stability of droop-controlled grid-forming inverters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured fault for each strategy and write traces.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Simulated time span (s).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Bisect the simulated CCT and compare it with the analytic integral.
    FindCct {
        #[command(flatten)]
        source: Source,
        /// Search tolerance (s), at least one integration step.
        #[arg(long)]
        tol: Option<f64>,
        /// Longest fault duration tried (s).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Tabulate analytic CCT over terminal voltage and a second axis.
    Surface {
        #[command(flatten)]
        source: Source,
        /// Terminal-voltage levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        v_grid: Option<Vec<f64>>,
        /// Meaning of the second axis.
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Second-axis values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// List the shipped presets.
    ListPresets,
}

#[derive(Args)]
struct Source {
    /// TOML configuration file (applied on top of the preset, if both are given).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (see list-presets).
    #[arg(long)]
    preset: Option<String>,
    /// Strategy to run; repeat for several. Overrides the configured list.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    SagDepth,
    DroopGain,
    PowerRef,
}

impl From<AxisArg> for SurfaceAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::SagDepth => SurfaceAxis::SagDepth,
            AxisArg::DroopGain => SurfaceAxis::DroopGain,
            AxisArg::PowerRef => SurfaceAxis::PowerRef,
        }
    }
}

fn resolve(source: &Source) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&source.preset, &source.config) {
        (None, None) => bail!("one of --preset or --config is required"),
        (Some(name), None) => find_preset(name)?.config,
        (None, Some(path)) => load_config(path)?,
        (Some(name), Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config_over(&text, find_preset(name)?.config)?
        }
    };
    if !source.strategies.is_empty() {
        cfg.strategies = source
            .strategies
            .iter()
            .map(|s| Strategy::from_name(s))
            .collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

fn report(out: &CommandOutput) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    println!("summary: {}", out.summary.display());
}

fn simulate(source: &Source, horizon: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = resolve(source)?;
    if horizon.is_some() {
        cfg.simulation.horizon = horizon;
    }
    let runs = run_simulations(&cfg)?;
    for r in &runs {
        println!(
            "{:<14} {:<12} slips={} min_p={:.4} delta=[{:.4}, {:.4}] rad",
            r.strategy.label(),
            r.verdict.status.name(),
            r.verdict.slip_count,
            r.trace.min_p(),
            r.trace.min_delta(),
            r.trace.max_delta()
        );
    }
    report(&write_simulations(&source.out, source.preset.as_deref(), &cfg, &runs)?);
    Ok(())
}

fn find_cct_cmd(source: &Source, tol: Option<f64>, horizon: Option<f64>) -> anyhow::Result<()> {
    let mut cfg = resolve(source)?;
    if let Some(t) = tol {
        cfg.search.tol = t;
    }
    if let Some(h) = horizon {
        cfg.search.horizon_cap = h;
    }
    let reports = run_cct_reports(&cfg)?;
    for r in &reports {
        let gap = r.relative_gap.map_or("n/a".to_string(), |g| format!("{:.3}%", 100.0 * g));
        println!(
            "{:<14} simulated: {:<28} analytic: {} s  gap: {gap}",
            r.strategy.label(),
            describe_cct(&r.simulated),
            r.analytic.t_cc
        );
    }
    report(&write_cct_reports(&source.out, source.preset.as_deref(), &cfg, &reports)?);
    Ok(())
}

fn surface(source: &Source, v_grid: Option<Vec<f64>>, axis: Option<AxisArg>, values: Option<Vec<f64>>) -> anyhow::Result<()> {
    let mut cfg = resolve(source)?;
    if let Some(v) = v_grid {
        cfg.surface.v_grid = v;
    }
    if let Some(a) = axis {
        cfg.surface.axis = a.into();
    }
    if let Some(v) = values {
        cfg.surface.values = v;
    }
    let surfaces = run_surfaces(&cfg)?;
    let out = write_surfaces(&source.out, source.preset.as_deref(), &cfg, &surfaces)?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    report(&out);
    Ok(())
}

fn list_presets() {
    for p in presets() {
        println!("{:<12} {}", p.name, p.description());
        println!("{:<12} mirrors {}; run with `{}`", "", p.figure, p.kind.command());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { source, horizon } => simulate(&source, horizon),
        Command::FindCct { source, tol, horizon } => find_cct_cmd(&source, tol, horizon),
        Command::Surface { source, v_grid, axis, values } => surface(&source, v_grid, axis, values),
        Command::ListPresets => {
            list_presets();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
