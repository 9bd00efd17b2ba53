//! Power–angle curves, equilibria, critical clearing angle and clearing time.
//!
//! The angle loop is first order, `dδ/dt = m_p ω_b (P* − P(δ))`, so the time
//! to travel from the pre-fault equilibrium to the critical angle is the
//! integral of `dδ / rate(δ)` along the faulted curve.

pub mod equilibria;
pub mod quadrature;
pub mod surface;

use std::cell::Cell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{apply_fault, solve_faulted, FaultState};
use crate::params::EffectiveNetwork;
use crate::plant::Plant;

pub use equilibria::{find_equilibria, wrap, Equilibria, EquilibriumSearch};
use quadrature::{integrate, QuadOptions, QuadResult};

/// One point of a power–angle curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub p: f64,
    pub limiter_active: bool,
    pub phi: f64,
}

/// Delivered active power as a function of the internal angle.
pub trait PowerAngle {
    fn power(&self, delta: f64) -> Result<PowerPoint>;
}

/// Curve obtained by solving the limited network at each angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkCurve {
    pub net: EffectiveNetwork,
    pub e_mag: f64,
    pub i_max: f64,
}

impl NetworkCurve {
    pub fn new(net: &EffectiveNetwork, fault: FaultState, e_mag: f64, i_max: f64) -> Self {
        Self {
            net: apply_fault(net, fault),
            e_mag,
            i_max,
        }
    }
}

impl PowerAngle for NetworkCurve {
    fn power(&self, delta: f64) -> Result<PowerPoint> {
        let sol = solve_faulted(self.e_mag, delta, &self.net, self.i_max)?;
        Ok(PowerPoint {
            p: sol.p,
            limiter_active: sol.limiter_active,
            phi: sol.phi,
        })
    }
}

/// Closed-form curve, mostly for tests and what-if studies.
pub struct FnCurve<F>(pub F);

impl<F: Fn(f64) -> f64> PowerAngle for FnCurve<F> {
    fn power(&self, delta: f64) -> Result<PowerPoint> {
        Ok(PowerPoint {
            p: (self.0)(delta),
            limiter_active: false,
            phi: 0.0,
        })
    }
}

pub fn power_angle<C: PowerAngle + ?Sized>(delta: f64, curve: &C) -> Result<PowerPoint> {
    curve.power(delta)
}

/// Stable/unstable roots of `P(δ) = p_ref`.
pub fn equilibria<C: PowerAngle + ?Sized>(p_ref: f64, curve: &C) -> Result<Equilibria> {
    match find_equilibria(|d| Ok(curve.power(d)?.p - p_ref))? {
        EquilibriumSearch::Found(eq) => Ok(eq),
        EquilibriumSearch::NeverRestoring { max } => Err(Error::NoEquilibrium {
            p_ref,
            peak: p_ref + max,
        }),
        EquilibriumSearch::AlwaysRestoring => Err(Error::Setup(format!(
            "reference {p_ref} lies below the whole power-angle curve"
        ))),
    }
}

/// How the clearing angle is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CcaMode {
    /// Post-fault unstable equilibrium (exact for the first-order loop).
    #[default]
    FirstOrder,
    /// Equal accelerating and decelerating areas (second-order dynamics).
    EqualArea,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClearingAngle {
    Angle(f64),
    /// The fault does not accelerate the angle at all; clearing time is unbounded.
    NoAcceleration,
    /// The post-fault system cannot absorb any acceleration.
    AlwaysUnstable,
}

/// Integrate a fallible integrand, surfacing the first evaluation error.
fn integrate_fallible<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let r = integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        a,
        b,
        opts,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

fn definite(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let opts = QuadOptions { rel_tol: 1e-11, abs_tol: 1e-13, ..QuadOptions::default() };
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    match integrate_fallible(f, lo, hi, &opts)? {
        QuadResult::Converged { value, .. } => Ok(sign * value),
        QuadResult::Divergent { .. } => Err(Error::Network("area integral did not converge".into())),
    }
}

/// The branch of the unstable root `delta_u (mod 2π)` reached first when the
/// angle leaves `delta_0` in direction `dir` (±1).
pub fn unstable_branch(delta_u: f64, delta_0: f64, dir: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = delta_u;
    if dir >= 0.0 {
        while d <= delta_0 {
            d += two_pi;
        }
        while d - two_pi > delta_0 {
            d -= two_pi;
        }
    } else {
        while d >= delta_0 {
            d -= two_pi;
        }
        while d + two_pi < delta_0 {
            d += two_pi;
        }
    }
    d
}

/// Curve seen through the reflection `δ → −δ`, `P → −P`.
struct Mirrored<'a, C: ?Sized>(&'a C);

impl<C: PowerAngle + ?Sized> PowerAngle for Mirrored<'_, C> {
    fn power(&self, delta: f64) -> Result<PowerPoint> {
        let pt = self.0.power(-delta)?;
        Ok(PowerPoint { p: -pt.p, limiter_active: pt.limiter_active, phi: -pt.phi })
    }
}

/// Critical clearing angle for a fault starting at the pre-fault equilibrium `delta_0`.
///
/// The angle drifts upward when `p_ref` exceeds the faulted power at
/// `delta_0` and downward otherwise; the returned angle lies on that side.
pub fn critical_clearing_angle<F, P>(
    fault_curve: &F,
    post_curve: &P,
    p_ref: f64,
    delta_0: f64,
    mode: CcaMode,
) -> Result<ClearingAngle>
where
    F: PowerAngle + ?Sized,
    P: PowerAngle + ?Sized,
{
    let mismatch = p_ref - fault_curve.power(delta_0)?.p;
    if mismatch == 0.0 {
        return Ok(ClearingAngle::NoAcceleration);
    }
    if mismatch < 0.0 {
        let r = cca_upward(&Mirrored(fault_curve), &Mirrored(post_curve), -p_ref, -delta_0, mode)?;
        return Ok(match r {
            ClearingAngle::Angle(a) => ClearingAngle::Angle(-a),
            other => other,
        });
    }
    cca_upward(fault_curve, post_curve, p_ref, delta_0, mode)
}

fn cca_upward<F, P>(fault_curve: &F, post_curve: &P, p_ref: f64, delta_0: f64, mode: CcaMode) -> Result<ClearingAngle>
where
    F: PowerAngle + ?Sized,
    P: PowerAngle + ?Sized,
{
    let post = match find_equilibria(|d| Ok(post_curve.power(d)?.p - p_ref))? {
        EquilibriumSearch::Found(eq) => eq,
        EquilibriumSearch::NeverRestoring { max } => {
            return Err(Error::NoEquilibrium { p_ref, peak: p_ref + max })
        }
        EquilibriumSearch::AlwaysRestoring => return Ok(ClearingAngle::NoAcceleration),
    };
    if post.stable == post.unstable {
        return Ok(ClearingAngle::AlwaysUnstable);
    }
    let delta_u = unstable_branch(post.unstable, delta_0, 1.0);
    match mode {
        CcaMode::FirstOrder => Ok(ClearingAngle::Angle(delta_u)),
        CcaMode::EqualArea => {
            let acc = |d: f64| Ok(p_ref - fault_curve.power(d)?.p);
            let dec = |d: f64| Ok(post_curve.power(d)?.p - p_ref);
            let g = |c: f64| -> Result<f64> { Ok(definite(acc, delta_0, c)? - definite(dec, c, delta_u)?) };
            if g(delta_0)? >= 0.0 {
                return Ok(ClearingAngle::AlwaysUnstable);
            }
            if g(delta_u)? <= 0.0 {
                // Even clearing at the boundary leaves enough decelerating area.
                return Ok(ClearingAngle::Angle(delta_u));
            }
            let (mut lo, mut hi) = (delta_0, delta_u);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if g(mid)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(ClearingAngle::Angle(0.5 * (lo + hi)))
        }
    }
}

/// Outcome of a clearing-time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearingTime {
    /// Seconds, or `+∞` when the angle stalls before the target.
    pub seconds: f64,
    /// Where the angle rate first vanishes or reverses, if it does.
    pub stall_angle: Option<f64>,
    pub evals: usize,
}

impl ClearingTime {
    fn stalled(at: f64, evals: usize) -> Self {
        Self {
            seconds: f64::INFINITY,
            stall_angle: Some(at),
            evals,
        }
    }
}

const STALL_SCAN: usize = 512;

/// Time for the angle to travel from `delta_0` to `target` under `dδ/dt = rate(δ)`.
///
/// Travel may be in either direction. If the rate vanishes or points back
/// before the target is reached the result is `+∞` with the stall angle.
pub fn clearing_time<R>(delta_0: f64, target: f64, rate: R) -> Result<ClearingTime>
where
    R: Fn(f64) -> Result<f64>,
{
    if !(delta_0.is_finite() && target.is_finite()) {
        return Err(Error::Parameter(format!("non-finite clearing interval [{delta_0}, {target}]")));
    }
    if delta_0 == target {
        return Ok(ClearingTime { seconds: 0.0, stall_angle: None, evals: 0 });
    }
    let dir = (target - delta_0).signum();
    let speed = |d: f64| -> Result<f64> { Ok(dir * rate(d)?) };

    let step = (target - delta_0) / STALL_SCAN as f64;
    if speed(delta_0)? <= 0.0 {
        return Ok(ClearingTime::stalled(delta_0, 1));
    }
    let mut prev = delta_0;
    for k in 1..=STALL_SCAN {
        let x = if k == STALL_SCAN { target } else { delta_0 + k as f64 * step };
        if speed(x)? <= 0.0 {
            let (mut moving, mut stopped) = (prev, x);
            while (stopped - moving).abs() > 1e-12 {
                let mid = 0.5 * (moving + stopped);
                if mid == moving || mid == stopped {
                    break;
                }
                if speed(mid)? > 0.0 {
                    moving = mid;
                } else {
                    stopped = mid;
                }
            }
            return Ok(ClearingTime::stalled(stopped, k + 1));
        }
        prev = x;
    }

    let stall: Cell<Option<f64>> = Cell::new(None);
    let (lo, hi) = if dir > 0.0 { (delta_0, target) } else { (target, delta_0) };
    let r = integrate_fallible(
        |d| {
            let v = speed(d)?;
            if v <= 0.0 {
                let nearer = stall.get().map_or(true, |s| dir * (d - s) < 0.0);
                if nearer {
                    stall.set(Some(d));
                }
                return Ok(f64::INFINITY);
            }
            Ok(1.0 / v)
        },
        lo,
        hi,
        &QuadOptions::default(),
    )?;
    let evals = r.evals() + STALL_SCAN + 1;
    Ok(match (r, stall.get()) {
        (_, Some(at)) => ClearingTime::stalled(at, evals),
        (QuadResult::Converged { value, .. }, None) => ClearingTime { seconds: value, stall_angle: None, evals },
        (QuadResult::Divergent { .. }, None) => ClearingTime { seconds: f64::INFINITY, stall_angle: None, evals },
    })
}

/// Clearing time for the droop loop on a fixed fault curve:
/// `∫ dδ / (m_p ω_b (p_ref − P_fault(δ)))` from `delta_0` to `delta_cca`.
pub fn cct_integral<F: PowerAngle + ?Sized>(
    delta_0: f64,
    delta_cca: f64,
    fault_curve: &F,
    m_p: f64,
    omega_b: f64,
    p_ref: f64,
) -> Result<ClearingTime> {
    clearing_time(delta_0, delta_cca, |d| Ok(m_p * omega_b * (p_ref - fault_curve.power(d)?.p)))
}

/// Closed form of [`cct_integral`] for a fault curve identically zero.
pub fn cct_closed_form_bolted(delta_0: f64, delta_cca: f64, m_p: f64, omega_b: f64, p_ref: f64) -> f64 {
    if p_ref <= 0.0 {
        return f64::INFINITY;
    }
    (delta_cca - delta_0) / (m_p * omega_b * p_ref)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CctMethod {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CctResult {
    pub delta_0: f64,
    pub delta_cca: f64,
    /// Seconds; `+∞` when the fault never drives the angle past `delta_cca`.
    pub t_cc: f64,
    pub method: CctMethod,
}

/// Analytic CCT of the closed loop: pre-fault equilibrium to post-fault
/// unstable equilibrium, integrating the strategy's angle rate on the
/// faulted network. For the conventional law this is exactly [`cct_integral`].
pub fn analytic_cct(plant: &Plant, fault: FaultState) -> Result<CctResult> {
    let eq = plant.equilibria(FaultState::None)?;
    let faulted = plant.network(fault);
    let dir = plant.angle_rate(eq.stable, &faulted)?;
    if dir == 0.0 {
        return Ok(CctResult {
            delta_0: eq.stable,
            delta_cca: eq.unstable,
            t_cc: f64::INFINITY,
            method: CctMethod::Analytic,
        });
    }
    let delta_cca = unstable_branch(eq.unstable, eq.stable, dir);
    let t = clearing_time(eq.stable, delta_cca, |d| plant.angle_rate(d, &faulted))?;
    Ok(CctResult {
        delta_0: eq.stable,
        delta_cca,
        t_cc: t.seconds,
        method: CctMethod::Analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Strategy;
    use crate::params::SystemParameters;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const OMEGA_B: f64 = 100.0 * PI;

    #[test]
    fn power_angle_examples() {
        let mut p = SystemParameters::nominal();
        p.inverter.filter_r = 0.0;
        p.mv_hv.r_winding = 0.0;
        p.lv_mv.r_winding = 0.0;
        p.grid.r_g = 0.0;
        p.grid.load_s = 0.0;
        let plant = Plant::new(p, Strategy::Conventional).unwrap();
        // Internal voltage aligned with and equal to the grid source.
        let at_zero = power_angle(0.0, &plant.power_curve(FaultState::None)).unwrap();
        assert!(at_zero.p.abs() < 1e-14);
        let bolted = plant.power_curve(FaultState::Bolted);
        for k in 0..12 {
            assert!(power_angle(-PI + k as f64 * 0.5, &bolted).unwrap().p.abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_equilibria() {
        let eq = equilibria(1.0, &FnCurve(|d: f64| 2.0 * d.sin())).unwrap();
        assert_relative_eq!(eq.stable, PI / 6.0, epsilon = 1e-10);
        assert_relative_eq!(eq.unstable, 5.0 * PI / 6.0, epsilon = 1e-10);
        assert!(matches!(
            equilibria(2.5, &FnCurve(|d: f64| 2.0 * d.sin())),
            Err(Error::NoEquilibrium { .. })
        ));
    }

    #[test]
    fn first_order_cca_is_post_fault_unstable_root() {
        let post = FnCurve(|d: f64| 2.0 * d.sin());
        let fault = FnCurve(|_| 0.0);
        let c = critical_clearing_angle(&fault, &post, 1.0, PI / 6.0, CcaMode::FirstOrder).unwrap();
        let ClearingAngle::Angle(a) = c else { panic!("{c:?}") };
        assert_relative_eq!(a, 5.0 * PI / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_accelerating_power_gives_infinite_marker() {
        let post = FnCurve(|d: f64| 2.0 * d.sin());
        let fault = FnCurve(|_| 1.0);
        for mode in [CcaMode::FirstOrder, CcaMode::EqualArea] {
            let c = critical_clearing_angle(&fault, &post, 1.0, PI / 6.0, mode).unwrap();
            assert_eq!(c, ClearingAngle::NoAcceleration);
        }
    }

    #[test]
    fn equal_area_matches_fine_grid_oracle() {
        // Independent oracle: trapezoid areas on a fine grid, then a scan for the sign change.
        let d0 = PI / 6.0;
        let du = 5.0 * PI / 6.0;
        let n = 200_000;
        let h = (du - d0) / n as f64;
        let grid: Vec<f64> = (0..=n).map(|k| d0 + k as f64 * h).collect();
        let dec_tail: Vec<f64> = {
            let mut acc = vec![0.0; n + 1];
            for k in (0..n).rev() {
                let f = |d: f64| 2.0 * d.sin() - 1.0;
                acc[k] = acc[k + 1] + 0.5 * h * (f(grid[k]) + f(grid[k + 1]));
            }
            acc
        };
        let oracle = (0..=n)
            .find(|&k| (grid[k] - d0) >= dec_tail[k])
            .map(|k| grid[k])
            .unwrap();
        let c = critical_clearing_angle(
            &FnCurve(|_| 0.0),
            &FnCurve(|d: f64| 2.0 * d.sin()),
            1.0,
            d0,
            CcaMode::EqualArea,
        )
        .unwrap();
        let ClearingAngle::Angle(a) = c else { panic!("{c:?}") };
        assert!((a - oracle).abs() < 2.0 * h, "{a} vs {oracle}");
        // Frozen value from the oracle grid.
        assert!((a - 1.388_58).abs() < 1e-4, "{a}");
    }

    #[test]
    fn cct_integral_closed_form_example() {
        let t = cct_integral(0.1, 2.0, &FnCurve(|_| 0.0), 0.05, OMEGA_B, 1.0).unwrap();
        assert_relative_eq!(t.seconds, 1.9 / (0.05 * OMEGA_B), max_relative = 1e-10);
        assert_relative_eq!(t.seconds, 0.12096, epsilon = 1e-5);
        assert_relative_eq!(cct_closed_form_bolted(0.1, 2.0, 0.05, OMEGA_B, 1.0), 0.120_957_7, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_edges() {
        assert_eq!(cct_closed_form_bolted(0.4, 0.4, 0.05, OMEGA_B, 1.0), 0.0);
        assert_eq!(cct_closed_form_bolted(0.1, 1.0, 0.05, OMEGA_B, 0.0), f64::INFINITY);
    }

    #[test]
    fn stall_returns_infinity() {
        let t = cct_integral(0.1, 2.0, &FnCurve(|_| 1.0), 0.05, OMEGA_B, 1.0).unwrap();
        assert_eq!(t.seconds, f64::INFINITY);
        assert_eq!(t.stall_angle, Some(0.1));

        // Fault curve crosses the reference inside the interval at δ = 1.0.
        let t = cct_integral(0.1, 2.0, &FnCurve(|d: f64| d), 0.05, OMEGA_B, 1.0).unwrap();
        assert_eq!(t.seconds, f64::INFINITY);
        assert!((t.stall_angle.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn endpoint_zero_diverges() {
        let t = cct_integral(0.0, 1.0, &FnCurve(|d: f64| d), 0.05, OMEGA_B, 1.0).unwrap();
        assert_eq!(t.seconds, f64::INFINITY);
    }

    #[test]
    fn smooth_fault_curve_against_antiderivative() {
        // ∫ dδ / (k (1 - 0.5 sin δ)) has a closed form; compare numerically.
        let k = 0.05 * OMEGA_B;
        let t = cct_integral(0.2, 1.4, &FnCurve(|d: f64| 0.5 * d.sin()), 0.05, OMEGA_B, 1.0).unwrap();
        let anti = |d: f64| {
            // 2/sqrt(a²-b²) atan((a tan(d/2) - b)/sqrt(a²-b²)) with a = 1, b = 0.5
            let s = (1.0f64 - 0.25).sqrt();
            2.0 / s * (((d / 2.0).tan() - 0.5) / s).atan()
        };
        assert_relative_eq!(t.seconds, (anti(1.4) - anti(0.2)) / k, max_relative = 1e-8);
    }

    #[test]
    fn analytic_cct_conventional_matches_cct_integral() {
        let plant = Plant::new(SystemParameters::nominal(), Strategy::Conventional).unwrap();
        let r = analytic_cct(&plant, FaultState::Bolted).unwrap();
        let inv = plant.system.inverter;
        let t = cct_integral(
            r.delta_0,
            r.delta_cca,
            &plant.power_curve(FaultState::Bolted),
            inv.m_p,
            plant.system.base.omega_base,
            inv.p_ref,
        )
        .unwrap();
        assert_relative_eq!(r.t_cc, t.seconds, max_relative = 1e-9);
        assert!(r.t_cc > 0.010 && r.t_cc < 0.040, "{}", r.t_cc);
    }

    #[test]
    fn adaptive_bolted_is_unbounded() {
        let plant = Plant::new(SystemParameters::nominal(), Strategy::from_name("adaptive").unwrap()).unwrap();
        assert_eq!(analytic_cct(&plant, FaultState::Bolted).unwrap().t_cc, f64::INFINITY);
    }

    #[test]
    fn sign_flip_symmetry() {
        let post = FnCurve(|d: f64| 2.0 * d.sin());
        let fault = FnCurve(|d: f64| 0.4 * d.sin());
        for mode in [CcaMode::FirstOrder, CcaMode::EqualArea] {
            let up = critical_clearing_angle(&fault, &post, 1.0, PI / 6.0, mode).unwrap();
            let down = critical_clearing_angle(&fault, &post, -1.0, -PI / 6.0, mode).unwrap();
            let (ClearingAngle::Angle(a), ClearingAngle::Angle(b)) = (up, down) else { panic!() };
            assert_relative_eq!(a, -b, epsilon = 1e-12);
            let t_up = cct_integral(PI / 6.0, a, &fault, 0.05, OMEGA_B, 1.0).unwrap();
            let t_down = cct_integral(-PI / 6.0, b, &fault, 0.05, OMEGA_B, -1.0).unwrap();
            assert_relative_eq!(t_up.seconds, t_down.seconds, max_relative = 1e-12);
        }
    }
}
