//! TOML experiment configuration.
//!
//! Every section is optional and every key falls back to the nominal
//! defaults, except that a `[grid]` section must give its impedance either as
//! `r_g`/`x_g` or as `scr`/`x_over_r`. Unknown keys are rejected.
//!
//! ```toml
//! [base]
//! s_base = 100e6          # VA
//! v_base = 230e3          # V
//! f_base = 50.0           # Hz
//!
//! [transformer.mv_hv]     # per unit on own rating, per winding
//! s_rated = 210e6
//! r_winding = 0.0027
//! l_winding = 0.08
//! magnetizing = [500.0, 500.0]
//!
//! [transformer.lv_mv]
//! s_rated = 1.6e6
//!
//! [inverter]
//! s_rated_unit = 500e3    # VA per module
//! v_ac = 1e3              # V
//! filter_r = 0.001        # ohm
//! filter_l = 200e-6       # H
//! filter_c = 300e-6       # F (stored only)
//! n_modules = 200
//! v_dc = 2440.0           # V (stored only)
//! m_p = 0.05
//! p_ref = 1.0
//! i_max = 1.2
//! omega_ref = 1.0
//! e_ref = 1.0
//!
//! [grid]
//! v_g = 1.0
//! scr = 5.0               # or r_g / x_g in pu on s_base
//! x_over_r = 10.0
//! load_s = 1.0
//! load_pf = 0.8
//!
//! [scenario]
//! fault = { kind = "sag", depth = 0.4 }   # none | bolted | sag
//! start = 0.1
//! duration = 0.4
//!
//! [simulation]
//! dt = 50e-6
//! horizon = 3.5
//! warm_start = true
//! output_decimation = 20
//! # power_filter_tau = 0.01
//!
//! [search]
//! tol = 1e-4
//! horizon_cap = 1.0
//! settle = 3.0
//!
//! [[strategy]]
//! kind = "adaptive"
//! v_high = 0.9
//! v_low = 0.5
//!
//! [surface]
//! v_grid = [0.55, 0.6, 0.7, 0.8, 0.9]
//! axis = "sag_depth"      # sag_depth | droop_gain | power_ref
//! values = [0.3, 0.5, 0.7]
//! base_fault = { kind = "bolted" }
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::analysis::surface::{SurfaceAxis, SurfaceSpec};
use crate::control::Strategy;
use crate::error::{Error, Result};
use crate::network::FaultState;
use crate::params::{
    validate_params, BaseQuantities, GridParams, InverterParams, SystemParameters, TransformerParams,
    DEFAULT_SCR, DEFAULT_X_OVER_R,
};
use crate::sim::{CctSearchOptions, FaultScenario, SimConfig, DEFAULT_DECIMATION, DEFAULT_DT};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseSection {
    s_base: Option<f64>,
    v_base: Option<f64>,
    f_base: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformerSection {
    s_rated: Option<f64>,
    r_winding: Option<f64>,
    l_winding: Option<f64>,
    magnetizing: Option<(f64, f64)>,
}

impl TransformerSection {
    fn apply(self, t: &mut TransformerParams) {
        set(&mut t.s_rated, self.s_rated);
        set(&mut t.r_winding, self.r_winding);
        set(&mut t.l_winding, self.l_winding);
        if self.magnetizing.is_some() {
            t.magnetizing = self.magnetizing;
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Transformers {
    mv_hv: Option<TransformerSection>,
    lv_mv: Option<TransformerSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InverterSection {
    s_rated_unit: Option<f64>,
    v_ac: Option<f64>,
    filter_r: Option<f64>,
    filter_l: Option<f64>,
    filter_c: Option<f64>,
    n_modules: Option<u32>,
    v_dc: Option<f64>,
    m_p: Option<f64>,
    p_ref: Option<f64>,
    i_max: Option<f64>,
    omega_ref: Option<f64>,
    e_ref: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    v_g: Option<f64>,
    r_g: Option<f64>,
    x_g: Option<f64>,
    scr: Option<f64>,
    x_over_r: Option<f64>,
    load_s: Option<f64>,
    load_pf: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    fault: Option<FaultState>,
    start: Option<f64>,
    duration: Option<f64>,
    clear_at_angle: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    dt: Option<f64>,
    horizon: Option<f64>,
    warm_start: Option<bool>,
    initial_delta: Option<f64>,
    output_decimation: Option<usize>,
    power_filter_tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchSection {
    tol: Option<f64>,
    horizon_cap: Option<f64>,
    settle: Option<f64>,
    monotone_probes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceSection {
    v_grid: Option<Vec<f64>>,
    axis: Option<SurfaceAxis>,
    values: Option<Vec<f64>>,
    base_fault: Option<FaultState>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    base: Option<BaseSection>,
    transformer: Option<Transformers>,
    inverter: Option<InverterSection>,
    grid: Option<GridSection>,
    scenario: Option<ScenarioSection>,
    simulation: Option<SimulationSection>,
    search: Option<SearchSection>,
    #[serde(default)]
    strategy: Vec<Strategy>,
    surface: Option<SurfaceSection>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Integration settings shared by every strategy of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub dt: f64,
    /// `None` means fault end plus three seconds.
    pub horizon: Option<f64>,
    pub warm_start: bool,
    pub initial_delta: f64,
    pub output_decimation: usize,
    pub power_filter_tau: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: None,
            warm_start: true,
            initial_delta: 0.0,
            output_decimation: DEFAULT_DECIMATION,
            power_filter_tau: None,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemParameters,
    pub scenario: FaultScenario,
    pub simulation: SimulationSettings,
    pub search: CctSearchOptions,
    pub strategies: Vec<Strategy>,
    pub surface: SurfaceSpec,
}

/// Default surface grid: terminal voltage 0.55..=0.9 by sag depth 0.1..=0.9.
pub fn default_surface() -> SurfaceSpec {
    SurfaceSpec {
        v_grid: (0..8).map(|k| 0.55 + 0.05 * f64::from(k)).collect(),
        axis: SurfaceAxis::SagDepth,
        values: (1..10).map(|k| 0.1 * f64::from(k)).collect(),
        base_fault: FaultState::Bolted,
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemParameters::nominal(),
            scenario: FaultScenario::new(FaultState::Bolted, 0.1, 0.02),
            simulation: SimulationSettings::default(),
            search: CctSearchOptions::default(),
            strategies: vec![Strategy::Conventional],
            surface: default_surface(),
        }
    }
}

impl ExperimentConfig {
    /// Simulation of this experiment's scenario under `strategy`.
    pub fn sim_config(&self, strategy: Strategy) -> SimConfig {
        let mut c = SimConfig::new(self.system, strategy, self.scenario);
        let s = &self.simulation;
        c.dt = s.dt;
        if let Some(h) = s.horizon {
            c.horizon = h;
        }
        c.warm_start = s.warm_start;
        c.initial_delta = s.initial_delta;
        c.output_decimation = s.output_decimation;
        c.power_filter_tau = s.power_filter_tau;
        c
    }

    /// Check the physical parameters and every strategy.
    pub fn validate(&self) -> Result<()> {
        let v = validate_params(&self.system);
        if !v.is_empty() {
            return Err(Error::Validation(v.iter().map(ToString::to_string).collect()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        self.scenario.validate()
    }
}

fn resolve_grid(section: GridSection, s_ref: f64) -> Result<GridParams> {
    let mut g = GridParams::nominal();
    set(&mut g.v_g, section.v_g);
    set(&mut g.load_s, section.load_s);
    set(&mut g.load_pf, section.load_pf);
    let explicit = section.r_g.is_some() || section.x_g.is_some();
    let ratio = section.scr.is_some() || section.x_over_r.is_some();
    match (explicit, ratio) {
        (true, true) => Err(Error::Config(
            "grid: give either r_g/x_g or scr/x_over_r, not both".into(),
        )),
        (true, false) => {
            g.r_g = section.r_g.ok_or_else(|| Error::Config("missing grid.r_g (x_g was given)".into()))?;
            g.x_g = section.x_g.ok_or_else(|| Error::Config("missing grid.x_g (r_g was given)".into()))?;
            Ok(g)
        }
        (false, true) => {
            let scr = section.scr.ok_or_else(|| Error::Config("missing grid.scr (x_over_r was given)".into()))?;
            let xr = section.x_over_r.unwrap_or(DEFAULT_X_OVER_R);
            GridParams::from_scr(g.v_g, scr, xr, s_ref, g.load_s, g.load_pf)
                .map_err(|e| Error::Config(format!("grid: {e}")))
        }
        (false, false) => Err(Error::Config(format!(
            "missing grid.x_g: the [grid] section needs r_g/x_g or scr (default without the section: SCR {DEFAULT_SCR}, X/R {DEFAULT_X_OVER_R})"
        ))),
    }
}

/// Parse a configuration from TOML text on top of `defaults`.
pub fn parse_config_over(text: &str, defaults: ExperimentConfig) -> Result<ExperimentConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let mut cfg = defaults;
    let sys = &mut cfg.system;

    if let Some(b) = file.base {
        let s = b.s_base.unwrap_or(sys.base.s_base);
        let v = b.v_base.unwrap_or(sys.base.v_base);
        let f = b.f_base.unwrap_or(sys.base.f_base);
        sys.base = BaseQuantities::new(s, v, f).map_err(|e| Error::Config(format!("base: {e}")))?;
    }
    if let Some(t) = file.transformer {
        if let Some(s) = t.mv_hv {
            s.apply(&mut sys.mv_hv);
        }
        if let Some(s) = t.lv_mv {
            s.apply(&mut sys.lv_mv);
        }
    }
    if let Some(i) = file.inverter {
        let inv: &mut InverterParams = &mut sys.inverter;
        set(&mut inv.s_rated_unit, i.s_rated_unit);
        set(&mut inv.v_ac, i.v_ac);
        set(&mut inv.filter_r, i.filter_r);
        set(&mut inv.filter_l, i.filter_l);
        set(&mut inv.filter_c, i.filter_c);
        set(&mut inv.n_modules, i.n_modules);
        set(&mut inv.v_dc, i.v_dc);
        set(&mut inv.m_p, i.m_p);
        set(&mut inv.p_ref, i.p_ref);
        set(&mut inv.i_max, i.i_max);
        set(&mut inv.omega_ref, i.omega_ref);
        set(&mut inv.e_ref, i.e_ref);
    }
    if let Some(g) = file.grid {
        sys.grid = resolve_grid(g, 1.0)?;
    }
    if let Some(s) = file.scenario {
        set(&mut cfg.scenario.fault, s.fault);
        set(&mut cfg.scenario.start, s.start);
        set(&mut cfg.scenario.duration, s.duration);
        if s.clear_at_angle.is_some() {
            cfg.scenario.clear_at_angle = s.clear_at_angle;
        }
    }
    if let Some(s) = file.simulation {
        let sim = &mut cfg.simulation;
        set(&mut sim.dt, s.dt);
        if s.horizon.is_some() {
            sim.horizon = s.horizon;
        }
        set(&mut sim.warm_start, s.warm_start);
        set(&mut sim.initial_delta, s.initial_delta);
        set(&mut sim.output_decimation, s.output_decimation);
        if s.power_filter_tau.is_some() {
            sim.power_filter_tau = s.power_filter_tau;
        }
    }
    if let Some(s) = file.search {
        set(&mut cfg.search.tol, s.tol);
        set(&mut cfg.search.horizon_cap, s.horizon_cap);
        set(&mut cfg.search.settle, s.settle);
        set(&mut cfg.search.monotone_probes, s.monotone_probes);
    }
    if !file.strategy.is_empty() {
        cfg.strategies = file.strategy;
    }
    if let Some(s) = file.surface {
        set(&mut cfg.surface.v_grid, s.v_grid);
        set(&mut cfg.surface.axis, s.axis);
        set(&mut cfg.surface.values, s.values);
        set(&mut cfg.surface.base_fault, s.base_fault);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_over(text, ExperimentConfig::default())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
