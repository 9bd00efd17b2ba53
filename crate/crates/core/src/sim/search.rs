//! Bisection searches for the simulated critical clearing time and angle.

use rayon::prelude::*;
use serde::Serialize;

use super::{classify_stability, run_scenario, to_steps, SimConfig, SimTrace, StabilityVerdict, VerdictStatus};
use crate::analysis::{CctMethod, CctResult};
use crate::error::{Error, Result};
use crate::network::FaultState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CctSearchOptions {
    /// Width of the final bracket (s); at least one integration step.
    pub tol: f64,
    /// Longest fault duration tried (s).
    pub horizon_cap: f64,
    /// Simulated time after clearing for each trial (s).
    pub settle: f64,
    /// Extra trials below the result used to detect non-monotone stability.
    pub monotone_probes: usize,
}

impl Default for CctSearchOptions {
    fn default() -> Self {
        Self { tol: 1e-4, horizon_cap: 1.0, settle: 3.0, monotone_probes: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CctOutcome {
    Found(CctResult),
    /// Still stable with the fault held for the whole cap.
    ExceedsHorizon { cap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CctSearch {
    pub outcome: CctOutcome,
    /// Shortest duration seen to lose stability (s), if any.
    pub first_unstable: Option<f64>,
    pub runs: usize,
    pub warnings: Vec<String>,
}

impl CctSearch {
    /// The CCT in seconds, `+∞` when it exceeds the cap.
    pub fn seconds(&self) -> f64 {
        match self.outcome {
            CctOutcome::Found(r) => r.t_cc,
            CctOutcome::ExceedsHorizon { .. } => f64::INFINITY,
        }
    }
}

struct Trial {
    trace: SimTrace,
    verdict: StabilityVerdict,
}

fn run_trial(cfg: &SimConfig, warnings: &mut Vec<String>, what: &str) -> Result<Trial> {
    let trace = run_scenario(cfg)?;
    let eq = trace.post_equilibrium.ok_or_else(|| {
        Error::Setup(format!("no post-fault equilibrium for the {} strategy", cfg.strategy.label()))
    })?;
    let verdict = classify_stability(&trace, eq);
    if verdict.status == VerdictStatus::Inconclusive {
        warnings.push(format!("{what}: inconclusive verdict counted as unstable"));
    }
    Ok(Trial { trace, verdict })
}

/// Largest stable fault duration, bisected on the integration grid.
///
/// Fault times are snapped to multiples of `dt`, so the bracket never gets
/// narrower than one step. Stability is assumed monotone in the duration;
/// evidence to the contrary is reported as a warning.
pub fn find_cct(template: &SimConfig, opts: &CctSearchOptions) -> Result<CctSearch> {
    let dt = template.dt;
    if !(opts.tol >= dt * (1.0 - 1e-9)) {
        return Err(Error::Usage(format!("tolerance {} is below the step {dt}", opts.tol)));
    }
    if !(opts.horizon_cap > 0.0 && opts.horizon_cap.is_finite()) {
        return Err(Error::Usage(format!("horizon cap must be > 0, got {}", opts.horizon_cap)));
    }
    if !(opts.settle >= super::MIN_POST_CLEAR) {
        return Err(Error::Usage(format!(
            "settle time must be >= {} s, got {}",
            super::MIN_POST_CLEAR,
            opts.settle
        )));
    }
    let mut warnings = Vec::new();
    let mut runs = 0;
    let start = template.scenario.start;
    let mut trial = |steps: usize, warnings: &mut Vec<String>| -> Result<Trial> {
        let mut cfg = *template;
        cfg.scenario.duration = steps as f64 * dt;
        cfg.scenario.clear_at_angle = None;
        cfg.horizon = start + cfg.scenario.duration + opts.settle;
        runs += 1;
        run_trial(&cfg, warnings, &format!("duration {:.6} s", cfg.scenario.duration))
    };

    let cap_steps = to_steps(opts.horizon_cap, dt).max(1);
    let at_cap = trial(cap_steps, &mut warnings)?;
    if at_cap.verdict.is_stable() || template.scenario.fault == FaultState::None {
        return Ok(CctSearch {
            outcome: CctOutcome::ExceedsHorizon { cap: cap_steps as f64 * dt },
            first_unstable: None,
            runs,
            warnings,
        });
    }

    let tol_steps = ((opts.tol / dt) * (1.0 + 1e-9)).floor().max(1.0) as usize;
    let (mut lo, mut hi) = (0usize, cap_steps);
    let mut lo_trial: Option<Trial> = None;
    while hi - lo > tol_steps {
        let mid = lo + (hi - lo) / 2;
        let t = trial(mid, &mut warnings)?;
        if t.verdict.is_stable() {
            lo = mid;
            lo_trial = Some(t);
        } else {
            hi = mid;
        }
    }

    for k in 1..=opts.monotone_probes {
        let probe = lo * k / (opts.monotone_probes + 1);
        if probe == 0 || lo_trial.is_none() {
            continue;
        }
        let t = trial(probe, &mut warnings)?;
        if !t.verdict.is_stable() {
            warnings.push(format!(
                "non-monotone stability: duration {:.6} s is unstable below the stable {:.6} s",
                probe as f64 * dt,
                lo as f64 * dt
            ));
        }
    }

    let delta_0 = at_cap.trace.delta_0;
    let delta_cca = lo_trial.as_ref().and_then(|t| t.trace.clearing_angle).unwrap_or(delta_0);
    Ok(CctSearch {
        outcome: CctOutcome::Found(CctResult {
            delta_0,
            delta_cca,
            t_cc: lo as f64 * dt,
            method: CctMethod::Simulated,
        }),
        first_unstable: Some(hi as f64 * dt),
        runs,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalAngleSearch {
    /// Midpoint of the final bracket (rad).
    pub angle: f64,
    pub stable_below: f64,
    pub unstable_above: f64,
    pub runs: usize,
    pub warnings: Vec<String>,
}

/// Bisect the angle at which the fault is cleared, between a stable `lo`
/// and an unstable `hi`, until the bracket is narrower than `tol` rad.
///
/// Each trial runs `template` with `clear_at_angle` set and its own horizon.
pub fn find_critical_angle(template: &SimConfig, lo: f64, hi: f64, tol: f64) -> Result<CriticalAngleSearch> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("angle tolerance must be > 0, got {tol}")));
    }
    let mut warnings = Vec::new();
    let mut runs = 0;
    let mut stable_at = |angle: f64, warnings: &mut Vec<String>| -> Result<bool> {
        let mut cfg = *template;
        cfg.scenario.clear_at_angle = Some(angle);
        runs += 1;
        Ok(run_trial(&cfg, warnings, &format!("clearing angle {angle:.6} rad"))?.verdict.is_stable())
    };
    if !stable_at(lo, &mut warnings)? {
        return Err(Error::Setup(format!("clearing at {lo} rad is already unstable")));
    }
    if stable_at(hi, &mut warnings)? {
        return Err(Error::Setup(format!("clearing at {hi} rad is still stable")));
    }
    let (mut a, mut b) = (lo, hi);
    while (b - a).abs() > tol {
        let mid = 0.5 * (a + b);
        if stable_at(mid, &mut warnings)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(CriticalAngleSearch { angle: 0.5 * (a + b), stable_below: a, unstable_above: b, runs, warnings })
}

/// Run [`find_cct`] on every configuration concurrently. Results keep the
/// input order and errors stay per item.
pub fn sweep(configs: &[SimConfig], opts: &CctSearchOptions) -> Vec<Result<CctSearch>> {
    configs.par_iter().map(|c| find_cct(c, opts)).collect()
}
