//! Experiment presets and report writers used by the command-line front end.
//!
//! Every output starts with the operating-point assumptions that the
//! published case studies leave open (current limit, grid strength, power
//! reference), so files are self-describing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::surface::{cct_surface, fmt_num, Surface};
use crate::analysis::{analytic_cct, CctResult};
use crate::config::{default_surface, ExperimentConfig};
use crate::control::Strategy;
use crate::error::{Error, Result};
use crate::network::FaultState;
use crate::params::build_effective_network;
use crate::plant::Plant;
use crate::sim::{
    classify_stability, find_cct, run_scenario, CctOutcome, CctSearch, FaultScenario, SimTrace, StabilityVerdict,
    VerdictStatus, TRACE_COLUMNS,
};

/// What a preset is meant to be run with by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    Simulate,
    FindCct,
    Surface,
}

impl PresetKind {
    pub fn command(self) -> &'static str {
        match self {
            PresetKind::Simulate => "simulate",
            PresetKind::FindCct => "find-cct",
            PresetKind::Surface => "surface",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Case study the preset mirrors.
    pub figure: &'static str,
    pub kind: PresetKind,
    pub config: ExperimentConfig,
}

impl Preset {
    /// One-line description including the assumed operating point.
    pub fn description(&self) -> String {
        let inv = &self.config.system.inverter;
        format!(
            "{} [I_max = {} pu, SCR = {}, X/R = {}, P* = {} pu, m_p = {}]",
            self.summary,
            inv.i_max,
            fmt_short(self.config.system.scr()),
            fmt_short(x_over_r(&self.config)),
            inv.p_ref,
            inv.m_p
        )
    }
}

fn fmt_short(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

fn x_over_r(cfg: &ExperimentConfig) -> f64 {
    let g = &cfg.system.grid;
    if g.r_g == 0.0 {
        f64::INFINITY
    } else {
        g.x_g / g.r_g
    }
}

fn strategies(names: &[&str]) -> Vec<Strategy> {
    names.iter().map(|n| Strategy::from_name(n).expect("built-in strategy name")).collect()
}

fn preset_config(fault: FaultState, duration: f64, names: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        scenario: FaultScenario::new(fault, 0.1, duration),
        strategies: strategies(names),
        ..ExperimentConfig::default()
    }
}

/// The shipped presets, in listing order.
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "validate",
            summary: "conventional droop, bolted PCC fault: simulated vs analytic CCT",
            figure: "CCT validation: analytic integral vs time-domain bisection",
            kind: PresetKind::FindCct,
            config: preset_config(FaultState::Bolted, 0.02, &["conventional"]),
        },
        Preset {
            name: "sag40",
            summary: "40% grid voltage sag for 400 ms, all four strategies",
            figure: "case study: 40% voltage sag at the PCC for 400 ms",
            kind: PresetKind::Simulate,
            config: preset_config(
                FaultState::Sag { depth: 0.4 },
                0.4,
                &["conventional", "b9", "b10-mistuned", "adaptive"],
            ),
        },
        Preset {
            name: "bolted200ms",
            summary: "bolted PCC fault for 200 ms, all four strategies",
            figure: "case study: bolted fault at the PCC for 200 ms",
            kind: PresetKind::Simulate,
            config: preset_config(FaultState::Bolted, 0.2, &["conventional", "b9", "b10", "adaptive"]),
        },
        Preset {
            name: "bolted1s",
            summary: "bolted PCC fault for 1 s, all four strategies",
            figure: "case study: bolted fault at the PCC for 1 s",
            kind: PresetKind::Simulate,
            config: preset_config(FaultState::Bolted, 1.0, &["conventional", "b9", "b10", "adaptive"]),
        },
        Preset {
            name: "surface",
            summary: "analytic CCT over terminal voltage x sag depth, adaptive and conventional",
            figure: "CCT surface of the adaptive function over voltage and sag depth",
            kind: PresetKind::Surface,
            config: ExperimentConfig {
                strategies: strategies(&["conventional", "adaptive"]),
                surface: default_surface(),
                ..ExperimentConfig::default()
            },
        },
    ]
}

pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name).collect()
}

pub fn find_preset(name: &str) -> Result<Preset> {
    presets().into_iter().find(|p| p.name == name).ok_or_else(|| {
        Error::Usage(format!("unknown preset '{name}'; valid presets: {}", preset_names().join(", ")))
    })
}

/// Operating-point assumptions echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumptions {
    pub s_base_va: f64,
    pub f_base_hz: f64,
    pub n_modules: u32,
    pub i_max_pu: f64,
    pub p_ref_pu: f64,
    pub m_p: f64,
    pub e_ref_pu: f64,
    pub scr: f64,
    pub x_over_r: f64,
    pub r_g_pu: f64,
    pub x_g_pu: f64,
    pub v_g_pu: f64,
    pub load_s_pu: f64,
    pub load_pf: f64,
    pub z_inv_pcc_r_pu: f64,
    pub z_inv_pcc_x_pu: f64,
    pub fault: String,
    pub fault_start_s: f64,
    pub fault_duration_s: f64,
    pub dt_s: f64,
    pub strategies: Vec<String>,
}

impl Assumptions {
    pub fn of(cfg: &ExperimentConfig) -> Result<Self> {
        let sys = &cfg.system;
        let net = build_effective_network(sys)?;
        Ok(Self {
            s_base_va: sys.base.s_base,
            f_base_hz: sys.base.f_base,
            n_modules: sys.inverter.n_modules,
            i_max_pu: sys.inverter.i_max,
            p_ref_pu: sys.inverter.p_ref,
            m_p: sys.inverter.m_p,
            e_ref_pu: sys.inverter.e_ref,
            scr: sys.scr(),
            x_over_r: x_over_r(cfg),
            r_g_pu: sys.grid.r_g,
            x_g_pu: sys.grid.x_g,
            v_g_pu: sys.grid.v_g,
            load_s_pu: sys.grid.load_s,
            load_pf: sys.grid.load_pf,
            z_inv_pcc_r_pu: net.z_inv_pcc.re,
            z_inv_pcc_x_pu: net.z_inv_pcc.im,
            fault: cfg.scenario.fault.label(),
            fault_start_s: cfg.scenario.start,
            fault_duration_s: cfg.scenario.duration,
            dt_s: cfg.simulation.dt,
            strategies: cfg.strategies.iter().map(|s| s.label().to_string()).collect(),
        })
    }

    /// `# key = value` lines for CSV headers.
    pub fn comment_block(&self) -> Result<String> {
        let text = toml::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
        let mut out = String::new();
        for line in text.lines() {
            let _ = writeln!(out, "# {line}");
        }
        Ok(out)
    }
}

/// One strategy's time-domain run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub strategy: Strategy,
    pub trace: SimTrace,
    pub verdict: StabilityVerdict,
}

/// Simulate the configured scenario for every strategy (concurrently, in order).
pub fn run_simulations(cfg: &ExperimentConfig) -> Result<Vec<SimulationRun>> {
    cfg.validate()?;
    cfg.strategies
        .par_iter()
        .map(|&strategy| {
            let trace = run_scenario(&cfg.sim_config(strategy))?;
            let eq = trace.post_equilibrium.ok_or_else(|| {
                Error::Setup(format!("no post-fault equilibrium for the {} strategy", strategy.label()))
            })?;
            let verdict = classify_stability(&trace, eq);
            Ok(SimulationRun { strategy, trace, verdict })
        })
        .collect()
}

/// Simulated and analytic CCT side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct CctReport {
    pub strategy: Strategy,
    pub simulated: CctSearch,
    pub analytic: CctResult,
    /// `|sim − analytic| / analytic` when both are finite.
    pub relative_gap: Option<f64>,
}

pub fn run_cct_reports(cfg: &ExperimentConfig) -> Result<Vec<CctReport>> {
    cfg.validate()?;
    cfg.strategies
        .par_iter()
        .map(|&strategy| {
            let simulated = find_cct(&cfg.sim_config(strategy), &cfg.search)?;
            let plant = Plant::new(cfg.system, strategy)?;
            let analytic = analytic_cct(&plant, cfg.scenario.fault)?;
            let sim = simulated.seconds();
            let relative_gap = (sim.is_finite() && analytic.t_cc.is_finite() && analytic.t_cc > 0.0)
                .then(|| (sim - analytic.t_cc).abs() / analytic.t_cc);
            Ok(CctReport { strategy, simulated, analytic, relative_gap })
        })
        .collect()
}

pub fn run_surfaces(cfg: &ExperimentConfig) -> Result<Vec<Surface>> {
    cfg.validate()?;
    cfg.strategies.iter().map(|s| cct_surface(&cfg.system, s, &cfg.surface)).collect()
}

#[derive(Serialize)]
struct SimEntry {
    strategy: String,
    status: VerdictStatus,
    slip_count: u32,
    final_angle_error_rad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clearing_angle_rad: Option<f64>,
    delta_0_rad: f64,
    min_p_pu: f64,
    min_delta_rad: f64,
    max_delta_rad: f64,
    peak_current_pu: f64,
    trace_file: String,
}

#[derive(Serialize)]
struct CctEntry {
    strategy: String,
    simulated: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulated_cct_s: Option<f64>,
    analytic_cct_s: String,
    delta_0_rad: f64,
    delta_cca_rad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_gap: Option<f64>,
    search_tol_s: f64,
    horizon_cap_s: f64,
    runs: usize,
}

#[derive(Serialize)]
struct SurfaceEntry {
    strategy: String,
    axis1: &'static str,
    axis2: &'static str,
    rows: usize,
    columns: usize,
    max_finite_cct_s: Option<f64>,
    infinite_cells: usize,
    file: String,
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    warnings: Vec<String>,
    assumptions: Assumptions,
    results: Vec<T>,
}

fn write_summary<T: Serialize>(dir: &Path, summary: &Summary<T>) -> Result<PathBuf> {
    let text = toml::to_string(summary).map_err(|e| Error::Io(e.to_string()))?;
    let path = dir.join("summary.toml");
    fs::write(&path, text)?;
    Ok(path)
}

fn write_manifest(dir: &Path, files: &[(String, &[&str])]) -> Result<()> {
    let mut out = String::from(
        "# Column manifest. CSV files start with '#' comment lines holding the\n# assumed operating point, followed by one header row.\n",
    );
    for (file, cols) in files {
        let quoted: Vec<String> = cols.iter().map(|c| format!("\"{c}\"")).collect();
        let _ = writeln!(out, "\n[\"{file}\"]\ncolumns = [{}]", quoted.join(", "));
    }
    fs::write(dir.join("manifest.toml"), out)?;
    Ok(())
}

fn with_header(assumptions: &Assumptions, body: Vec<u8>) -> Result<Vec<u8>> {
    let mut out = assumptions.comment_block()?.into_bytes();
    out.extend(body);
    Ok(out)
}

fn count_inf(s: &Surface) -> usize {
    s.cells().filter(|c| c.2 == f64::INFINITY).count()
}

/// Outcome of a command: summary path and non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub summary: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn write_simulations(dir: &Path, preset: Option<&str>, cfg: &ExperimentConfig, runs: &[SimulationRun]) -> Result<CommandOutput> {
    fs::create_dir_all(dir)?;
    let assumptions = Assumptions::of(cfg)?;
    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut manifest = Vec::new();
    let mut warnings = Vec::new();
    for r in runs {
        let name = format!("{}.csv", r.strategy.label());
        let mut body = Vec::new();
        r.trace.write_csv(&mut body)?;
        let path = dir.join(&name);
        fs::write(&path, with_header(&assumptions, body)?)?;
        files.push(path);
        manifest.push((name.clone(), &TRACE_COLUMNS[..]));
        if r.verdict.status == VerdictStatus::Inconclusive {
            warnings.push(format!("{}: verdict inconclusive (less than 0.5 s after clearing)", r.strategy.label()));
        }
        entries.push(SimEntry {
            strategy: r.strategy.label().into(),
            status: r.verdict.status,
            slip_count: r.verdict.slip_count,
            final_angle_error_rad: r.verdict.final_angle_error,
            loss_time_s: r.verdict.loss_time,
            clearing_angle_rad: r.trace.clearing_angle,
            delta_0_rad: r.trace.delta_0,
            min_p_pu: r.trace.min_p(),
            min_delta_rad: r.trace.min_delta(),
            max_delta_rad: r.trace.max_delta(),
            peak_current_pu: r.trace.peak_current,
            trace_file: name,
        });
    }
    write_manifest(dir, &manifest)?;
    let summary = write_summary(
        dir,
        &Summary { command: "simulate", preset: preset.map(Into::into), warnings: warnings.clone(), assumptions, results: entries },
    )?;
    Ok(CommandOutput { summary, files, warnings })
}

/// Human-readable CCT value.
pub fn describe_cct(search: &CctSearch) -> String {
    match search.outcome {
        CctOutcome::Found(r) => format!("{} s", fmt_num(r.t_cc)),
        CctOutcome::ExceedsHorizon { cap } => format!("exceeds horizon (>= {} s)", fmt_num(cap)),
    }
}

pub fn write_cct_reports(dir: &Path, preset: Option<&str>, cfg: &ExperimentConfig, reports: &[CctReport]) -> Result<CommandOutput> {
    fs::create_dir_all(dir)?;
    let assumptions = Assumptions::of(cfg)?;
    let mut warnings = Vec::new();
    let entries = reports
        .iter()
        .map(|r| {
            warnings.extend(r.simulated.warnings.iter().map(|w| format!("{}: {w}", r.strategy.label())));
            CctEntry {
                strategy: r.strategy.label().into(),
                simulated: describe_cct(&r.simulated),
                simulated_cct_s: Some(r.simulated.seconds()).filter(|t| t.is_finite()),
                analytic_cct_s: fmt_num(r.analytic.t_cc),
                delta_0_rad: r.analytic.delta_0,
                delta_cca_rad: r.analytic.delta_cca,
                relative_gap: r.relative_gap,
                search_tol_s: cfg.search.tol,
                horizon_cap_s: cfg.search.horizon_cap,
                runs: r.simulated.runs,
            }
        })
        .collect();
    let summary = write_summary(
        dir,
        &Summary { command: "find-cct", preset: preset.map(Into::into), warnings: warnings.clone(), assumptions, results: entries },
    )?;
    Ok(CommandOutput { summary, files: vec![], warnings })
}

pub fn write_surfaces(dir: &Path, preset: Option<&str>, cfg: &ExperimentConfig, surfaces: &[Surface]) -> Result<CommandOutput> {
    fs::create_dir_all(dir)?;
    let assumptions = Assumptions::of(cfg)?;
    let mut files = Vec::new();
    let mut manifest = Vec::new();
    let mut entries = Vec::new();
    for s in surfaces {
        let name = format!("surface_{}.csv", s.strategy.label());
        let mut body = Vec::new();
        s.write_csv(&mut body)?;
        let path = dir.join(&name);
        fs::write(&path, with_header(&assumptions, body)?)?;
        files.push(path);
        manifest.push((name.clone(), &["axis1", "axis2", "cct_seconds"][..]));
        let max_finite = s.cells().map(|c| c.2).filter(|t| t.is_finite()).fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))));
        entries.push(SurfaceEntry {
            strategy: s.strategy.label().into(),
            axis1: "v_t",
            axis2: s.spec.axis.name(),
            rows: s.spec.v_grid.len(),
            columns: s.spec.values.len(),
            max_finite_cct_s: max_finite,
            infinite_cells: count_inf(s),
            file: name,
        });
    }
    write_manifest(dir, &manifest)?;
    let summary = write_summary(
        dir,
        &Summary { command: "surface", preset: preset.map(Into::into), warnings: vec![], assumptions, results: entries },
    )?;
    Ok(CommandOutput { summary, files, warnings: vec![] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_presets() {
        let names = preset_names();
        for n in ["validate", "sag40", "bolted200ms", "bolted1s", "surface"] {
            assert!(names.contains(&n), "{n}");
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        for p in presets() {
            p.config.validate().unwrap();
            let d = p.description();
            assert!(d.contains("I_max = 1.2 pu") && d.contains("SCR = 5") && d.contains("P* = 1 pu"), "{d}");
        }
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let e = find_preset("fig9").unwrap_err().to_string();
        assert!(e.contains("validate") && e.contains("bolted1s"), "{e}");
    }

    #[test]
    fn assumptions_comment_block() {
        let a = Assumptions::of(&find_preset("sag40").unwrap().config).unwrap();
        let block = a.comment_block().unwrap();
        assert!(block.lines().all(|l| l.starts_with("# ")));
        assert!(block.contains("# i_max_pu = 1.2"));
        assert!(block.contains("# fault = \"sag40\""));
    }
}
