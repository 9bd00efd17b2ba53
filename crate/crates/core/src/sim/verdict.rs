//! Stability classification of a simulated trace.

use std::f64::consts::PI;

use serde::Serialize;

use super::SimTrace;

/// Post-clearing time a trace needs before a verdict is attempted (s).
pub const MIN_POST_CLEAR: f64 = 0.5;
const ANGLE_BAND: f64 = 0.05;
const OMEGA_BAND: f64 = 1e-3;
const SETTLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Stable,
    Unstable,
    /// Too little simulated time after clearing to decide.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub status: VerdictStatus,
    /// Pole slips: how many odd multiples of π the angle deviation passed.
    pub slip_count: u32,
    /// `δ(T) − δ_eq` at the end of the trace (rad).
    pub final_angle_error: f64,
    /// First instant the deviation exceeded π.
    pub loss_time: Option<f64>,
}

impl VerdictStatus {
    pub fn name(self) -> &'static str {
        match self {
            VerdictStatus::Stable => "stable",
            VerdictStatus::Unstable => "unstable",
            VerdictStatus::Inconclusive => "inconclusive",
        }
    }
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        self.status == VerdictStatus::Stable
    }
}

/// Classify `trace` against the post-fault stable equilibrium `post_equilibrium`.
///
/// A pole slip is counted each time `|δ − δ_eq|` passes π, 3π, 5π, …. The
/// trace is stable when no slip occurred and, over the final tenth of the
/// horizon, the angle stays within 0.05 rad of the equilibrium and the
/// frequency within 1e-3 pu of nominal.
pub fn classify_stability(trace: &SimTrace, post_equilibrium: f64) -> StabilityVerdict {
    let mut max_dev: f64 = 0.0;
    let mut loss_time = None;
    for s in &trace.samples {
        let dev = (s.delta - post_equilibrium).abs();
        if dev > PI && loss_time.is_none() {
            loss_time = Some(s.t);
        }
        max_dev = max_dev.max(dev);
    }
    let slip_count = if max_dev > PI { ((max_dev + PI) / (2.0 * PI)).floor() as u32 } else { 0 };
    let last = trace.last();
    let final_angle_error = last.delta - post_equilibrium;

    let settle_from = trace.horizon * (1.0 - SETTLE_FRACTION);
    let settled = trace
        .samples
        .iter()
        .filter(|s| s.t >= settle_from)
        .all(|s| (s.delta - post_equilibrium).abs() < ANGLE_BAND && (s.omega - trace.omega_ref).abs() < OMEGA_BAND);

    let status = if slip_count > 0 {
        VerdictStatus::Unstable
    } else {
        let cleared = match (trace.fault_on, trace.fault_off) {
            (None, _) => Some(0.0),
            (Some(_), off) => off,
        };
        match cleared {
            Some(t) if trace.horizon - t >= MIN_POST_CLEAR - 1e-12 => {
                if settled {
                    VerdictStatus::Stable
                } else {
                    VerdictStatus::Unstable
                }
            }
            _ => VerdictStatus::Inconclusive,
        }
    };
    StabilityVerdict { status, slip_count, final_angle_error, loss_time }
}
