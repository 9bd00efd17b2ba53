//! Fixed-step time-domain simulation of the closed loop.
//!
//! Each RK4 stage re-solves the algebraic network (current limiter included)
//! and evaluates the control law, so the angle obeys
//! `dδ/dt = ω_b (ω(δ) − ω*)` against an ideal grid at `ω*`.

pub mod search;
mod verdict;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::surface::fmt_num;
use crate::control::Strategy;
use crate::error::{Error, Result};
use crate::network::FaultState;
use crate::params::{validate_params, EffectiveNetwork, SystemParameters};
use crate::plant::Plant;

pub use search::{
    find_critical_angle, find_cct, sweep, CctSearch, CctSearchOptions, CctOutcome, CriticalAngleSearch,
};
pub use verdict::{classify_stability, StabilityVerdict, VerdictStatus, MIN_POST_CLEAR};

pub const DEFAULT_DT: f64 = 50e-6;
pub const DEFAULT_DECIMATION: usize = 20;

/// When the fault is applied and removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultScenario {
    pub fault: FaultState,
    /// Fault inception (s).
    pub start: f64,
    /// Fault duration (s). Ignored when `clear_at_angle` is set.
    pub duration: f64,
    /// Clear as soon as the angle reaches this value instead of after `duration`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear_at_angle: Option<f64>,
}

impl FaultScenario {
    pub fn new(fault: FaultState, start: f64, duration: f64) -> Self {
        Self { fault, start, duration, clear_at_angle: None }
    }

    pub fn none() -> Self {
        Self::new(FaultState::None, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.fault.validate()?;
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(Error::Parameter(format!("fault start must be >= 0, got {}", self.start)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Parameter(format!("fault duration must be >= 0, got {}", self.duration)));
        }
        if let Some(a) = self.clear_at_angle {
            if !a.is_finite() {
                return Err(Error::Parameter("clearing angle must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub system: SystemParameters,
    pub strategy: Strategy,
    pub scenario: FaultScenario,
    /// Integration step (s), `0 < dt <= 1 ms`.
    pub dt: f64,
    /// Simulated time span (s).
    pub horizon: f64,
    /// Start at the computed pre-fault equilibrium.
    pub warm_start: bool,
    /// Starting angle when not warm-starting.
    pub initial_delta: f64,
    /// Record every n-th step.
    pub output_decimation: usize,
    /// Time constant of a first-order filter on the measured power (s).
    pub power_filter_tau: Option<f64>,
}

impl SimConfig {
    /// Defaults with three seconds of post-clearing time.
    pub fn new(system: SystemParameters, strategy: Strategy, scenario: FaultScenario) -> Self {
        Self {
            system,
            strategy,
            scenario,
            dt: DEFAULT_DT,
            horizon: scenario.start + scenario.duration + 3.0,
            warm_start: true,
            initial_delta: 0.0,
            output_decimation: DEFAULT_DECIMATION,
            power_filter_tau: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_params(&self.system);
        if !violations.is_empty() {
            return Err(Error::Validation(violations.iter().map(ToString::to_string).collect()));
        }
        self.strategy.validate()?;
        self.scenario.validate()?;
        if !(self.dt > 0.0 && self.dt <= 1e-3) {
            return Err(Error::Parameter(format!("dt must be in (0, 1 ms], got {}", self.dt)));
        }
        let end = self.scenario.start + if self.scenario.clear_at_angle.is_some() { 0.0 } else { self.scenario.duration };
        if !(self.horizon.is_finite() && self.horizon > end) {
            return Err(Error::Parameter(format!(
                "horizon {} must exceed fault end {end}",
                self.horizon
            )));
        }
        if self.output_decimation == 0 {
            return Err(Error::Parameter("output_decimation must be >= 1".into()));
        }
        if let Some(tau) = self.power_filter_tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::Parameter(format!("power filter time constant must be > 0, got {tau}")));
            }
        }
        if !self.initial_delta.is_finite() {
            return Err(Error::Parameter("initial angle must be finite".into()));
        }
        Ok(())
    }

    /// Number of integration steps in the horizon.
    pub fn steps(&self) -> usize {
        to_steps(self.horizon, self.dt)
    }
}

/// Snap a time to the integration grid.
pub fn to_steps(t: f64, dt: f64) -> usize {
    (t / dt).round().max(0.0) as usize
}

/// Integrator state: angle and (when filtering) the measured power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub delta: f64,
    pub p_meas: f64,
}

/// Derivative of the state on a fixed network.
fn derivative(plant: &Plant, net: &EffectiveNetwork, s: &SimState, tau: Option<f64>) -> Result<SimState> {
    let p_meas = tau.map(|_| s.p_meas);
    let (sol, out) = plant.evaluate(s.delta, net, p_meas)?;
    let ddelta = plant.system.base.omega_base * (out.omega - plant.system.inverter.omega_ref);
    let dp = match tau {
        Some(tau) => (sol.p - s.p_meas) / tau,
        None => 0.0,
    };
    Ok(SimState { delta: ddelta, p_meas: dp })
}

/// One classical RK4 step of length `dt` on the network `net`.
pub fn integrate_step(
    plant: &Plant,
    net: &EffectiveNetwork,
    state: &SimState,
    dt: f64,
    power_filter_tau: Option<f64>,
    step: usize,
) -> Result<SimState> {
    let fail = |message: String| Error::Integration { step, message };
    if !(state.delta.is_finite() && state.p_meas.is_finite()) {
        return Err(fail(format!("non-finite state (delta = {}, p = {})", state.delta, state.p_meas)));
    }
    let at = |s: &SimState, k: &SimState, h: f64| SimState {
        delta: s.delta + h * k.delta,
        p_meas: s.p_meas + h * k.p_meas,
    };
    let f = |s: &SimState| derivative(plant, net, s, power_filter_tau).map_err(|e| fail(e.to_string()));
    let k1 = f(state)?;
    let k2 = f(&at(state, &k1, 0.5 * dt))?;
    let k3 = f(&at(state, &k2, 0.5 * dt))?;
    let k4 = f(&at(state, &k3, dt))?;
    let next = SimState {
        delta: state.delta + dt / 6.0 * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta),
        p_meas: state.p_meas + dt / 6.0 * (k1.p_meas + 2.0 * k2.p_meas + 2.0 * k3.p_meas + k4.p_meas),
    };
    if !(next.delta.is_finite() && next.p_meas.is_finite()) {
        return Err(fail("state became non-finite".into()));
    }
    Ok(next)
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub delta: f64,
    /// Synchronizing frequency (pu).
    pub omega: f64,
    pub p: f64,
    pub q: f64,
    pub i_mag: f64,
    pub v_t: f64,
    pub limiter: bool,
    pub fx: f64,
    pub p_ref_eff: f64,
    pub m_p_eff: f64,
}

pub const TRACE_COLUMNS: [&str; 11] =
    ["t", "delta", "omega", "p", "q", "i_mag", "v_t", "limiter", "fx", "p_ref_eff", "m_p_eff"];

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub horizon: f64,
    pub omega_ref: f64,
    pub i_max: f64,
    /// Pre-fault equilibrium (or the initial angle without warm start).
    pub delta_0: f64,
    /// Stable closed-loop equilibrium of the healthy network, if one exists.
    pub post_equilibrium: Option<f64>,
    /// Fault inception and clearing instants on the step grid.
    pub fault_on: Option<f64>,
    pub fault_off: Option<f64>,
    /// Angle at the clearing instant.
    pub clearing_angle: Option<f64>,
    /// Largest current magnitude over every accepted step.
    pub peak_current: f64,
}

impl SimTrace {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trace is never empty")
    }

    pub fn min_p(&self) -> f64 {
        self.samples.iter().map(|s| s.p).fold(f64::INFINITY, f64::min)
    }

    pub fn min_delta(&self) -> f64 {
        self.samples.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min)
    }

    pub fn max_delta(&self) -> f64 {
        self.samples.iter().map(|s| s.delta).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with the fixed column order of [`TRACE_COLUMNS`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for s in &self.samples {
            w.write_record([
                fmt_num(s.t),
                fmt_num(s.delta),
                fmt_num(s.omega),
                fmt_num(s.p),
                fmt_num(s.q),
                fmt_num(s.i_mag),
                fmt_num(s.v_t),
                (s.limiter as u8).to_string(),
                fmt_num(s.fx),
                fmt_num(s.p_ref_eff),
                fmt_num(s.m_p_eff),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run one scenario from the configured initial condition to the horizon.
pub fn run_scenario(config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let plant = Plant::new(config.system, config.strategy)?;
    let healthy = plant.network(FaultState::None);
    let faulted = plant.network(config.scenario.fault);
    let post_equilibrium = plant.equilibria(FaultState::None).ok().map(|e| e.stable);

    let delta_0 = if config.warm_start {
        post_equilibrium.ok_or_else(|| {
            Error::Setup(format!(
                "no pre-fault equilibrium for the {} strategy",
                config.strategy.label()
            ))
        })?
    } else {
        config.initial_delta
    };
    let p0 = plant.solve(delta_0, &healthy)?.p;
    let mut state = SimState { delta: delta_0, p_meas: p0 };

    let dt = config.dt;
    let n = config.steps();
    let sc = &config.scenario;
    let has_fault = sc.fault != FaultState::None && (sc.duration > 0.0 || sc.clear_at_angle.is_some());
    let on_step = to_steps(sc.start, dt);
    let mut off_step = match (has_fault, sc.clear_at_angle) {
        (false, _) => Some(on_step),
        (true, None) => Some(to_steps(sc.start + sc.duration, dt)),
        (true, Some(_)) => None,
    };
    let angle_dir = sc.clear_at_angle.map(|a| (a - delta_0).signum());

    let mut samples = Vec::with_capacity(n / config.output_decimation + 1);
    let mut peak_current: f64 = 0.0;
    let mut clearing_angle = None;

    for k in 0..=n {
        let in_fault = has_fault && k >= on_step && off_step.map_or(true, |off| k < off);
        let net = if in_fault { &faulted } else { &healthy };
        let p_meas = config.power_filter_tau.map(|_| state.p_meas);
        let (sol, out) = plant.evaluate(state.delta, net, p_meas).map_err(|e| Error::Integration {
            step: k,
            message: e.to_string(),
        })?;
        peak_current = peak_current.max(sol.i_mag());
        if k % config.output_decimation == 0 {
            samples.push(Sample {
                t: k as f64 * dt,
                delta: state.delta,
                omega: out.omega,
                p: sol.p,
                q: sol.q,
                i_mag: sol.i_mag(),
                v_t: sol.v_t,
                limiter: sol.limiter_active,
                fx: out.fx,
                p_ref_eff: out.p_ref_eff,
                m_p_eff: out.m_p_eff,
            });
        }
        if k == n {
            break;
        }
        state = integrate_step(&plant, net, &state, dt, config.power_filter_tau, k)?;
        if in_fault {
            if let (Some(target), Some(dir), None) = (sc.clear_at_angle, angle_dir, off_step) {
                if dir * (state.delta - target) >= 0.0 || dir == 0.0 {
                    off_step = Some(k + 1);
                }
            }
        }
        if has_fault && off_step == Some(k + 1) && k + 1 > on_step {
            clearing_angle = Some(state.delta);
        }
    }

    let fault_on = has_fault.then(|| on_step as f64 * dt);
    let fault_off = if has_fault { off_step.filter(|&s| s <= n).map(|s| s as f64 * dt) } else { None };
    Ok(SimTrace {
        samples,
        dt,
        horizon: n as f64 * dt,
        omega_ref: config.system.inverter.omega_ref,
        i_max: config.system.inverter.i_max,
        delta_0,
        post_equilibrium,
        fault_on,
        fault_off,
        clearing_angle,
        peak_current,
    })
}
