//! Algebraic network solution with circular current limiting.
//!
//! The inverter is a voltage source `e∠δ` behind the filter. Seen from the
//! inverter, the PCC is a Thevenin equivalent built from the grid branch and
//! the load. When the unconstrained current exceeds `i_max` the inverter turns
//! into a current source whose phasor keeps the unconstrained direction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::EffectiveNetwork;

/// Fault applied at the PCC.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultState {
    #[default]
    None,
    /// Zero-impedance three-phase short at the PCC.
    Bolted,
    /// Grid source reduced to `(1 - depth)` of its nominal magnitude.
    Sag { depth: f64 },
}

impl FaultState {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FaultState::Sag { depth } if !(depth > 0.0 && depth < 1.0) => Err(Error::Parameter(
                format!("sag depth must be in (0, 1), got {depth}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FaultState::None => "none".into(),
            FaultState::Bolted => "bolted".into(),
            FaultState::Sag { depth } => format!("sag{:.0}", depth * 100.0),
        }
    }
}

/// One solution of the algebraic network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSolution {
    pub i_inj: Complex64,
    pub v_pcc: Complex64,
    /// Phasor at the inverter LV terminal (after the filter).
    pub v_terminal: Complex64,
    /// `|v_terminal|`, the voltage the adaptive law sees.
    pub v_t: f64,
    /// Converter output voltage `v_pcc + i·z_inv_pcc`; equals `e∠δ` when not limiting.
    pub v_conv: Complex64,
    /// Active and reactive power at the LV terminal.
    pub p: f64,
    pub q: f64,
    /// Active and reactive power delivered into the PCC.
    pub p_pcc: f64,
    pub q_pcc: f64,
    pub limiter_active: bool,
    /// `arg(i_inj)`.
    pub phi: f64,
}

impl NetworkSolution {
    pub fn i_mag(&self) -> f64 {
        self.i_inj.norm()
    }
}

/// Scale `i_ref` radially onto the circle of radius `i_max` if it lies outside.
pub fn circular_limit(i_ref: Complex64, i_max: f64) -> Complex64 {
    let mag = i_ref.norm();
    if mag <= i_max {
        i_ref
    } else {
        i_ref * (i_max / mag)
    }
}

/// Active power of the current-limited source: `v_g · i_max · cos(δ − φ)`.
pub fn saturated_power(v_g: f64, i_max: f64, delta: f64, phi: f64) -> f64 {
    v_g * i_max * (delta - phi).cos()
}

/// Network as seen during `fault`.
pub fn apply_fault(net: &EffectiveNetwork, fault: FaultState) -> EffectiveNetwork {
    let mut out = *net;
    match fault {
        FaultState::None => {}
        FaultState::Bolted => out.pcc_shorted = true,
        FaultState::Sag { depth } => out.v_source = net.v_source * (1.0 - depth),
    }
    out
}

/// Thevenin source and impedance of the PCC node seen from the inverter side.
fn pcc_thevenin(net: &EffectiveNetwork) -> Result<(Complex64, Complex64)> {
    if net.pcc_shorted {
        return Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
    }
    let source = Complex64::new(net.v_source, 0.0);
    if net.z_grid.norm() == 0.0 {
        // Stiff grid holds the PCC regardless of load.
        return Ok((source, Complex64::new(0.0, 0.0)));
    }
    let y_g = net.z_grid.inv();
    let y_sum = y_g + net.y_load;
    if y_sum.norm() < 1e-12 {
        return Err(Error::Network("PCC node has no path to ground".into()));
    }
    Ok((source * y_g / y_sum, y_sum.inv()))
}

/// Solve a network that already carries its fault state.
pub fn solve_faulted(e_mag: f64, delta: f64, net: &EffectiveNetwork, i_max: f64) -> Result<NetworkSolution> {
    let (v_th, z_th) = pcc_thevenin(net)?;
    let z_loop = net.z_inv_pcc + z_th;
    if z_loop.norm() == 0.0 {
        return Err(Error::Network("zero loop impedance between inverter and PCC".into()));
    }
    let e = Complex64::from_polar(e_mag, delta);
    let i_unc = (e - v_th) / z_loop;
    let limiter_active = i_unc.norm() > i_max;
    let i_inj = circular_limit(i_unc, i_max);
    let v_pcc = v_th + i_inj * z_th;
    let v_terminal = v_pcc + i_inj * net.z_transformers;
    let v_conv = v_pcc + i_inj * net.z_inv_pcc;
    let s_t = v_terminal * i_inj.conj();
    let s_pcc = v_pcc * i_inj.conj();
    Ok(NetworkSolution {
        i_inj,
        v_pcc,
        v_terminal,
        v_t: v_terminal.norm(),
        v_conv,
        p: s_t.re,
        q: s_t.im,
        p_pcc: s_pcc.re,
        q_pcc: s_pcc.im,
        limiter_active,
        phi: i_inj.arg(),
    })
}

/// Solve the network for internal voltage `e_mag∠delta` under `fault`.
pub fn solve_network(
    e_mag: f64,
    delta: f64,
    net: &EffectiveNetwork,
    fault: FaultState,
    i_max: f64,
) -> Result<NetworkSolution> {
    if !(e_mag >= 0.0) {
        return Err(Error::Network(format!("internal voltage must be >= 0, got {e_mag}")));
    }
    solve_faulted(e_mag, delta, &apply_fault(net, fault), i_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_effective_network, SystemParameters};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn table_net() -> (SystemParameters, EffectiveNetwork) {
        let p = SystemParameters::nominal();
        (p, build_effective_network(&p).unwrap())
    }

    fn lossless_net() -> EffectiveNetwork {
        let mut p = SystemParameters::nominal();
        p.inverter.filter_r = 0.0;
        p.mv_hv.r_winding = 0.0;
        p.lv_mv.r_winding = 0.0;
        p.grid.r_g = 0.0;
        build_effective_network(&p).unwrap()
    }

    #[test]
    fn circular_limit_examples() {
        let deg = PI / 180.0;
        let out = circular_limit(Complex64::from_polar(1.5, 30.0 * deg), 1.2);
        assert_relative_eq!(out.norm(), 1.2, epsilon = 1e-15);
        assert_relative_eq!(out.arg(), 30.0 * deg, epsilon = 1e-15);
        let below = Complex64::from_polar(0.8, -15.0 * deg);
        assert_eq!(circular_limit(below, 1.2), below);
        let edge = Complex64::new(1.2, 0.0);
        assert_eq!(circular_limit(edge, 1.2), edge);
    }

    #[test]
    fn saturated_power_examples() {
        assert_eq!(saturated_power(1.0, 1.2, 0.3, 0.3), 1.2);
        assert_relative_eq!(saturated_power(0.6, 1.2, PI / 3.0, 0.0), 0.36, epsilon = 1e-15);
        assert_eq!(saturated_power(0.0, 1.2, 0.7, -0.2), 0.0);
    }

    #[test]
    fn apply_fault_variants() {
        let (_, net) = table_net();
        assert_eq!(apply_fault(&net, FaultState::None), net);
        let sag = apply_fault(&net, FaultState::Sag { depth: 0.4 });
        assert_relative_eq!(sag.v_source, 0.6, epsilon = 1e-15);
        let bolted = apply_fault(&net, FaultState::Bolted);
        let sol = solve_faulted(1.0, 0.3, &bolted, 1.2).unwrap();
        assert_eq!(sol.v_pcc, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sag_depth_validated() {
        assert!(FaultState::Sag { depth: 0.0 }.validate().is_err());
        assert!(FaultState::Sag { depth: 1.0 }.validate().is_err());
        assert!(FaultState::Sag { depth: 0.4 }.validate().is_ok());
    }

    #[test]
    fn open_circuit_voltage_gives_zero_current() {
        let (_, net) = table_net();
        // Find the open-circuit PCC voltage with a zero-magnitude probe.
        let (v_th, _) = pcc_thevenin(&net).unwrap();
        let sol = solve_network(v_th.norm(), v_th.arg(), &net, FaultState::None, 1.2).unwrap();
        assert!(sol.i_mag() < 1e-14);
        assert!(sol.p.abs() < 1e-14);
    }

    #[test]
    fn bolted_fault_identities() {
        let net = lossless_net();
        for k in 0..16 {
            let delta = -PI + k as f64 * PI / 8.0;
            let sol = solve_network(1.0, delta, &net, FaultState::Bolted, 1.2).unwrap();
            assert!(sol.limiter_active);
            assert!(sol.p_pcc.abs() < 1e-12);
            assert!(sol.p.abs() < 1e-12);
            assert_relative_eq!(sol.v_conv.norm(), net.z_inv_pcc.norm() * sol.i_mag(), epsilon = 1e-10);
            assert_relative_eq!(sol.v_t, net.z_transformers.norm() * sol.i_mag(), epsilon = 1e-10);
        }
    }

    #[test]
    fn sag_puts_terminal_voltage_in_middle_band() {
        let (p, net) = table_net();
        let eq = crate::analysis::equilibria(
            p.inverter.p_ref,
            &crate::analysis::NetworkCurve::new(&net, FaultState::None, p.inverter.e_ref, p.inverter.i_max),
        )
        .unwrap();
        let sol = solve_network(1.0, eq.stable, &net, FaultState::Sag { depth: 0.4 }, 1.2).unwrap();
        assert!(sol.v_t > 0.5 && sol.v_t <= 0.9, "v_t = {}", sol.v_t);
    }

    #[test]
    fn singular_pcc_rejected() {
        let (_, mut net) = table_net();
        net.y_load = -net.z_grid.inv();
        assert!(matches!(solve_network(1.0, 0.0, &net, FaultState::None, 1.2), Err(Error::Network(_))));
    }

    fn fault_strategy() -> impl Strategy<Value = FaultState> {
        prop_oneof![
            Just(FaultState::None),
            Just(FaultState::Bolted),
            (0.05f64..0.95).prop_map(|depth| FaultState::Sag { depth }),
        ]
    }

    proptest! {
        #[test]
        fn current_never_exceeds_limit(delta in -7.0f64..7.0, e in 0.0f64..1.5, fault in fault_strategy(), i_max in 0.2f64..2.0) {
            let (_, net) = table_net();
            let sol = solve_network(e, delta, &net, fault, i_max).unwrap();
            prop_assert!(sol.i_mag() <= i_max + 1e-9);
        }

        #[test]
        fn kirchhoff_holds_when_unlimited(delta in -3.2f64..3.2, e in 0.8f64..1.2, depth in 0.0f64..0.9) {
            let (_, net) = table_net();
            let fault = if depth > 0.0 { FaultState::Sag { depth } } else { FaultState::None };
            let faulted = apply_fault(&net, fault);
            let sol = solve_faulted(e, delta, &faulted, 1e6).unwrap();
            prop_assert!(!sol.limiter_active);
            let e_ph = Complex64::from_polar(e, delta);
            let branch = e_ph - sol.i_inj * net.z_inv_pcc - sol.v_pcc;
            let node = sol.i_inj + (Complex64::new(faulted.v_source, 0.0) - sol.v_pcc) / net.z_grid
                - sol.v_pcc * net.y_load;
            prop_assert!(branch.norm() < 1e-10);
            prop_assert!(node.norm() < 1e-10);
        }

        #[test]
        fn limited_power_matches_saturated_curve(delta in -3.2f64..3.2, fault in fault_strategy()) {
            let (_, net) = table_net();
            let sol = solve_network(1.0, delta, &net, fault, 1.2).unwrap();
            if sol.limiter_active {
                let from_curve = saturated_power(sol.v_pcc.norm(), 1.2, sol.v_pcc.arg(), sol.phi);
                prop_assert!((from_curve - sol.p_pcc).abs() < 1e-9);
                let at_terminal = saturated_power(sol.v_t, 1.2, sol.v_terminal.arg(), sol.phi);
                prop_assert!((at_terminal - sol.p).abs() < 1e-9);
            }
        }
    }
}
