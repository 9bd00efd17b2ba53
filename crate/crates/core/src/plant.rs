//! Closed-loop plant: network solution followed by the control law.
//!
//! Shared by the analytic machinery and the time-domain engine so both
//! evaluate exactly the same first-order angle dynamics.

use crate::analysis::equilibria::{find_equilibria, EquilibriumSearch};
use crate::analysis::{Equilibria, NetworkCurve};
use crate::control::{control_step, ControlOutput, Measurements, Strategy};
use crate::error::{Error, Result};
use crate::network::{apply_fault, solve_faulted, FaultState, NetworkSolution};
use crate::params::{build_effective_network, EffectiveNetwork, SystemParameters};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub system: SystemParameters,
    pub strategy: Strategy,
    pub healthy: EffectiveNetwork,
}

impl Plant {
    pub fn new(system: SystemParameters, strategy: Strategy) -> Result<Self> {
        strategy.validate()?;
        let healthy = build_effective_network(&system)?;
        Ok(Self { system, strategy, healthy })
    }

    pub fn network(&self, fault: FaultState) -> EffectiveNetwork {
        apply_fault(&self.healthy, fault)
    }

    pub fn power_curve(&self, fault: FaultState) -> NetworkCurve {
        NetworkCurve::new(
            &self.healthy,
            fault,
            self.system.inverter.e_ref,
            self.system.inverter.i_max,
        )
    }

    pub fn solve(&self, delta: f64, net: &EffectiveNetwork) -> Result<NetworkSolution> {
        solve_faulted(self.system.inverter.e_ref, delta, net, self.system.inverter.i_max)
    }

    /// Network solution and control output at `delta`. `p_measured`
    /// overrides the instantaneous power fed to the droop (filtered loop).
    pub fn evaluate(
        &self,
        delta: f64,
        net: &EffectiveNetwork,
        p_measured: Option<f64>,
    ) -> Result<(NetworkSolution, ControlOutput)> {
        let sol = self.solve(delta, net)?;
        let m = Measurements {
            p: p_measured.unwrap_or(sol.p),
            v_t: sol.v_t,
            i_mag: sol.i_mag(),
        };
        Ok((sol, control_step(&self.strategy, &self.system.inverter, &m)))
    }

    /// `dδ/dt = ω_b (ω − ω*)` with the power measured instantaneously.
    pub fn angle_rate(&self, delta: f64, net: &EffectiveNetwork) -> Result<f64> {
        let (_, out) = self.evaluate(delta, net, None)?;
        Ok(self.system.base.omega_base * (out.omega - self.system.inverter.omega_ref))
    }

    /// Stable and unstable closed-loop equilibria under `fault`.
    pub fn equilibria(&self, fault: FaultState) -> Result<Equilibria> {
        let net = self.network(fault);
        match find_equilibria(|d| self.angle_rate(d, &net).map(|r| -r))? {
            EquilibriumSearch::Found(eq) => Ok(eq),
            EquilibriumSearch::NeverRestoring { max } => Err(Error::Setup(format!(
                "{} strategy has no equilibrium under {} (largest restoring rate {max:.3e} rad/s < 0)",
                self.strategy.label(),
                fault.label(),
            ))),
            EquilibriumSearch::AlwaysRestoring => Err(Error::Setup(format!(
                "{} strategy has no accelerating region under {}",
                self.strategy.label(),
                fault.label(),
            ))),
        }
    }
}
