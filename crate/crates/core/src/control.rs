//! Droop power-synchronization loop and the control strategies.
//!
//! Every law returns the inverter frequency ω in pu; the angle dynamics are
//! `dδ/dt = ω_b (ω − ω*)` against an ideal grid at ω*.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::InverterParams;

/// Thresholds of the voltage-dependent adaptive factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveFunctionConfig {
    #[serde(default = "default_v_high")]
    pub v_high: f64,
    #[serde(default = "default_v_low")]
    pub v_low: f64,
}

fn default_v_high() -> f64 {
    0.9
}
fn default_v_low() -> f64 {
    0.5
}

impl Default for AdaptiveFunctionConfig {
    fn default() -> Self {
        Self { v_high: 0.9, v_low: 0.5 }
    }
}

/// Droop-gain reduction below a voltage trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainVariationConfig {
    #[serde(default = "default_v_trigger")]
    pub v_trigger: f64,
    #[serde(default = "default_gain_scale")]
    pub gain_scale: f64,
}

fn default_v_trigger() -> f64 {
    0.9
}
fn default_gain_scale() -> f64 {
    0.5
}

impl Default for GainVariationConfig {
    fn default() -> Self {
        Self {
            v_trigger: default_v_trigger(),
            gain_scale: default_gain_scale(),
        }
    }
}

/// Proportional setpoint curtailment above a current threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurtailmentConfig {
    #[serde(default = "default_i_threshold")]
    pub i_threshold: f64,
    #[serde(default = "default_k_p")]
    pub k_p: f64,
}

fn default_i_threshold() -> f64 {
    1.0
}
fn default_k_p() -> f64 {
    1.0
}

/// Gain that drives the curtailed setpoint negative at full current.
pub const MISTUNED_K_P: f64 = 8.0;

impl Default for CurtailmentConfig {
    fn default() -> Self {
        Self {
            i_threshold: default_i_threshold(),
            k_p: default_k_p(),
        }
    }
}

impl CurtailmentConfig {
    pub fn mistuned() -> Self {
        Self {
            k_p: MISTUNED_K_P,
            ..Self::default()
        }
    }
}

/// Synchronization-loop control law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Conventional,
    Adaptive(AdaptiveFunctionConfig),
    #[serde(rename = "gain_variation_b9")]
    GainVariation(GainVariationConfig),
    #[serde(rename = "setpoint_curtail_b10")]
    SetpointCurtailment(CurtailmentConfig),
}

pub const STRATEGY_NAMES: [&str; 5] = ["conventional", "adaptive", "b9", "b10", "b10-mistuned"];

impl Strategy {
    /// Strategy with default constants from its short name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "conventional" => Ok(Strategy::Conventional),
            "adaptive" => Ok(Strategy::Adaptive(AdaptiveFunctionConfig::default())),
            "b9" | "gain_variation_b9" => Ok(Strategy::GainVariation(GainVariationConfig::default())),
            "b10" | "setpoint_curtail_b10" => {
                Ok(Strategy::SetpointCurtailment(CurtailmentConfig::default()))
            }
            "b10-mistuned" => Ok(Strategy::SetpointCurtailment(CurtailmentConfig::mistuned())),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}', expected one of: {}",
                STRATEGY_NAMES.join(", ")
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Conventional => "conventional",
            Strategy::Adaptive(_) => "adaptive",
            Strategy::GainVariation(_) => "b9",
            Strategy::SetpointCurtailment(c) if c.k_p >= MISTUNED_K_P => "b10-mistuned",
            Strategy::SetpointCurtailment(_) => "b10",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match *self {
            Strategy::Conventional => Ok(()),
            Strategy::Adaptive(c) => {
                if c.v_low > 0.0 && c.v_low < c.v_high {
                    Ok(())
                } else {
                    bad(format!("adaptive thresholds need 0 < v_low < v_high, got {} / {}", c.v_low, c.v_high))
                }
            }
            Strategy::GainVariation(c) => {
                if c.v_trigger > 0.0 && c.gain_scale > 0.0 {
                    Ok(())
                } else {
                    bad(format!("b9 constants must be positive, got v_trigger {} gain_scale {}", c.v_trigger, c.gain_scale))
                }
            }
            Strategy::SetpointCurtailment(c) => {
                if c.i_threshold > 0.0 && c.k_p > 0.0 {
                    Ok(())
                } else {
                    bad(format!("b10 constants must be positive, got i_threshold {} k_p {}", c.i_threshold, c.k_p))
                }
            }
        }
    }
}

/// Local quantities the control laws read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    pub p: f64,
    pub v_t: f64,
    pub i_mag: f64,
}

/// Frequency command and the effective parameters that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub omega: f64,
    pub fx: f64,
    pub p_ref_eff: f64,
    pub m_p_eff: f64,
}

/// Loop state of one run, as recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlState {
    /// Synchronization angle relative to the grid, rad.
    pub theta: f64,
    pub omega: f64,
    pub fx_value: f64,
    pub p_ref_eff: f64,
    pub m_p_eff: f64,
}

/// Piecewise adaptive factor: 1 above `v_high`, `v` in `(v_low, v_high]`, 0 at or below `v_low`.
pub fn adaptive_fx(v: f64, cfg: &AdaptiveFunctionConfig) -> f64 {
    if v > cfg.v_high {
        1.0
    } else if v > cfg.v_low {
        v
    } else {
        0.0
    }
}

pub fn omega_conventional(p: f64, inv: &InverterParams) -> f64 {
    inv.omega_ref + inv.m_p * (inv.p_ref - p)
}

/// Modified droop with both gain and setpoint scaled by the adaptive factor.
pub fn omega_adaptive(p: f64, v_t: f64, inv: &InverterParams, cfg: &AdaptiveFunctionConfig) -> (f64, f64) {
    let f = adaptive_fx(v_t, cfg);
    (inv.omega_ref + inv.m_p * f * (inv.p_ref * f - p), f)
}

fn b9_gain(v_t: f64, inv: &InverterParams, cfg: &GainVariationConfig) -> f64 {
    if v_t < cfg.v_trigger {
        inv.m_p * cfg.gain_scale
    } else {
        inv.m_p
    }
}

pub fn omega_b9(p: f64, v_t: f64, inv: &InverterParams, cfg: &GainVariationConfig) -> f64 {
    inv.omega_ref + b9_gain(v_t, inv, cfg) * (inv.p_ref - p)
}

/// Curtailed setpoint. Goes negative when `k_p` is large enough.
pub fn p_ref_b10(i_mag: f64, inv: &InverterParams, cfg: &CurtailmentConfig) -> f64 {
    inv.p_ref - cfg.k_p * (i_mag - cfg.i_threshold).max(0.0)
}

/// Evaluate `strategy` on one set of measurements.
pub fn control_step(strategy: &Strategy, inv: &InverterParams, m: &Measurements) -> ControlOutput {
    match strategy {
        Strategy::Conventional => ControlOutput {
            omega: omega_conventional(m.p, inv),
            fx: 1.0,
            p_ref_eff: inv.p_ref,
            m_p_eff: inv.m_p,
        },
        Strategy::Adaptive(cfg) => {
            let (omega, fx) = omega_adaptive(m.p, m.v_t, inv, cfg);
            ControlOutput {
                omega,
                fx,
                p_ref_eff: inv.p_ref * fx,
                m_p_eff: inv.m_p * fx,
            }
        }
        Strategy::GainVariation(cfg) => ControlOutput {
            omega: omega_b9(m.p, m.v_t, inv, cfg),
            fx: 1.0,
            p_ref_eff: inv.p_ref,
            m_p_eff: b9_gain(m.v_t, inv, cfg),
        },
        Strategy::SetpointCurtailment(cfg) => {
            let p_ref_eff = p_ref_b10(m.i_mag, inv, cfg);
            ControlOutput {
                omega: inv.omega_ref + inv.m_p * (p_ref_eff - m.p),
                fx: 1.0,
                p_ref_eff,
                m_p_eff: inv.m_p,
            }
        }
    }
}
