//! CCT surfaces over a terminal-voltage grid and a second parameter axis.
//!
//! Each cell freezes the strategy's effective droop gain and reference at
//! the given terminal voltage and evaluates the clearing-time integral on
//! the faulted curve, from the nominal pre-fault equilibrium to the healthy
//! unstable equilibrium.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cct_integral, equilibria, NetworkCurve};
use crate::control::{control_step, Measurements, Strategy};
use crate::error::{Error, Result};
use crate::network::FaultState;
use crate::params::{build_effective_network, SystemParameters};

/// Meaning of the second surface axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceAxis {
    /// Sag depth of the fault applied during the clearing interval.
    #[default]
    SagDepth,
    /// Droop gain `m_p`; the fault is the configured base fault.
    DroopGain,
    /// Active power reference `P*`; the fault is the configured base fault.
    PowerRef,
}

impl SurfaceAxis {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceAxis::SagDepth => "sag_depth",
            SurfaceAxis::DroopGain => "m_p",
            SurfaceAxis::PowerRef => "p_ref",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub v_grid: Vec<f64>,
    pub axis: SurfaceAxis,
    pub values: Vec<f64>,
    /// Fault used when the second axis is not the sag depth.
    pub base_fault: FaultState,
}

impl SurfaceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.v_grid.is_empty() || self.values.is_empty() {
            return Err(Error::Usage("surface grids must be non-empty".into()));
        }
        if let Some(v) = self.v_grid.iter().find(|v| !(**v > 0.0 && **v <= 1.1)) {
            return Err(Error::Usage(format!("terminal voltage {v} outside (0, 1.1]")));
        }
        let bad = match self.axis {
            SurfaceAxis::SagDepth => self.values.iter().find(|d| !(**d > 0.0 && **d < 1.0)),
            SurfaceAxis::DroopGain => self.values.iter().find(|m| !(**m > 0.0 && m.is_finite())),
            SurfaceAxis::PowerRef => self.values.iter().find(|p| !(**p >= 0.0 && p.is_finite())),
        };
        if let Some(x) = bad {
            return Err(Error::Usage(format!("{} value {x} out of range", self.axis.name())));
        }
        self.base_fault.validate()
    }
}

/// Rectangular table, rows indexed by voltage and columns by the second axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub spec: SurfaceSpec,
    pub strategy: Strategy,
    /// `cct[i][j]` for `v_grid[i]`, `values[j]`. `+∞` when the angle never
    /// reaches the boundary, NaN when the operating point has no equilibrium.
    pub cct: Vec<Vec<f64>>,
}

impl Surface {
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.spec.v_grid.iter().enumerate().flat_map(move |(i, &v)| {
            self.spec.values.iter().enumerate().map(move |(j, &y)| (v, y, self.cct[i][j]))
        })
    }

    /// CSV with columns `axis1, axis2, cct_seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["axis1", "axis2", "cct_seconds"])?;
        for (v, y, t) in self.cells() {
            w.write_record([fmt_num(v), fmt_num(y), fmt_num(t)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting with `inf` and `nan` sentinels.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// One surface cell.
pub fn surface_cell(system: &SystemParameters, strategy: &Strategy, spec: &SurfaceSpec, v: f64, y: f64) -> f64 {
    let mut sys = *system;
    let fault = match spec.axis {
        SurfaceAxis::SagDepth => FaultState::Sag { depth: y },
        SurfaceAxis::DroopGain => {
            sys.inverter.m_p = y;
            spec.base_fault
        }
        SurfaceAxis::PowerRef => {
            sys.inverter.p_ref = y;
            spec.base_fault
        }
    };
    let inv = sys.inverter;
    let out = control_step(
        strategy,
        &inv,
        &Measurements { p: 0.0, v_t: v, i_mag: inv.i_max },
    );
    if out.fx == 0.0 || out.m_p_eff == 0.0 {
        return f64::INFINITY;
    }
    let Ok(net) = build_effective_network(&sys) else {
        return f64::NAN;
    };
    let healthy = NetworkCurve::new(&net, FaultState::None, inv.e_ref, inv.i_max);
    let Ok(eq) = equilibria(inv.p_ref, &healthy) else {
        return f64::NAN;
    };
    let faulted = NetworkCurve::new(&net, fault, inv.e_ref, inv.i_max);
    match cct_integral(eq.stable, eq.unstable, &faulted, out.m_p_eff, sys.base.omega_base, out.p_ref_eff) {
        Ok(t) => t.seconds,
        Err(_) => f64::NAN,
    }
}

fn assemble(spec: &SurfaceSpec, strategy: Strategy, flat: Vec<f64>) -> Surface {
    let cols = spec.values.len();
    let cct = flat.chunks(cols).map(<[f64]>::to_vec).collect();
    Surface { spec: spec.clone(), strategy, cct }
}

/// Evaluate the surface with cells distributed over the rayon pool.
pub fn cct_surface(system: &SystemParameters, strategy: &Strategy, spec: &SurfaceSpec) -> Result<Surface> {
    spec.validate()?;
    strategy.validate()?;
    let cols = spec.values.len();
    let flat: Vec<f64> = (0..spec.v_grid.len() * cols)
        .into_par_iter()
        .map(|k| surface_cell(system, strategy, spec, spec.v_grid[k / cols], spec.values[k % cols]))
        .collect();
    Ok(assemble(spec, *strategy, flat))
}

/// Same as [`cct_surface`] on the calling thread.
pub fn cct_surface_serial(system: &SystemParameters, strategy: &Strategy, spec: &SurfaceSpec) -> Result<Surface> {
    spec.validate()?;
    strategy.validate()?;
    let flat = spec
        .v_grid
        .iter()
        .flat_map(|&v| spec.values.iter().map(move |&y| (v, y)))
        .map(|(v, y)| surface_cell(system, strategy, spec, v, y))
        .collect();
    Ok(assemble(spec, *strategy, flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v_grid: Vec<f64>, values: Vec<f64>) -> SurfaceSpec {
        SurfaceSpec { v_grid, axis: SurfaceAxis::SagDepth, values, base_fault: FaultState::Bolted }
    }

    fn adaptive() -> Strategy {
        Strategy::from_name("adaptive").unwrap()
    }

    #[test]
    fn unit_voltage_row_matches_conventional() {
        let sys = SystemParameters::nominal();
        let s = spec(vec![1.0], vec![0.5, 0.7, 0.9, 0.95]);
        let a = cct_surface(&sys, &adaptive(), &s).unwrap();
        let c = cct_surface(&sys, &Strategy::Conventional, &s).unwrap();
        assert_eq!(a.cct, c.cct);
    }

    #[test]
    fn low_voltage_rows_are_infinite() {
        let sys = SystemParameters::nominal();
        let s = spec(vec![0.2, 0.45, 0.5], vec![0.6, 0.95]);
        let a = cct_surface(&sys, &adaptive(), &s).unwrap();
        assert!(a.cct.iter().flatten().all(|t| *t == f64::INFINITY));
    }

    #[test]
    fn adaptive_dominates_and_conventional_ignores_voltage() {
        let sys = SystemParameters::nominal();
        let v: Vec<f64> = (0..8).map(|k| 0.55 + 0.05 * k as f64).collect();
        let s = spec(v, vec![0.3, 0.5, 0.7, 0.9, 0.95]);
        let a = cct_surface(&sys, &adaptive(), &s).unwrap();
        let c = cct_surface(&sys, &Strategy::Conventional, &s).unwrap();
        for (ra, rc) in a.cct.iter().zip(&c.cct) {
            for (ta, tc) in ra.iter().zip(rc) {
                assert!(ta >= tc, "{ta} < {tc}");
            }
            assert_eq!(rc, &c.cct[0]);
        }
    }

    #[test]
    fn parallel_equals_serial_bitwise() {
        let sys = SystemParameters::nominal();
        let s = SurfaceSpec {
            v_grid: vec![0.55, 0.7, 0.85, 1.0],
            axis: SurfaceAxis::DroopGain,
            values: vec![0.02, 0.05, 0.08],
            base_fault: FaultState::Bolted,
        };
        let par = cct_surface(&sys, &adaptive(), &s).unwrap();
        let ser = cct_surface_serial(&sys, &adaptive(), &s).unwrap();
        let bits = |x: &Surface| x.cells().map(|c| c.2.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&par), bits(&ser));
    }

    #[test]
    fn empty_or_out_of_range_grid_is_usage_error() {
        let sys = SystemParameters::nominal();
        assert!(matches!(cct_surface(&sys, &adaptive(), &spec(vec![], vec![0.5])), Err(Error::Usage(_))));
        assert!(matches!(cct_surface(&sys, &adaptive(), &spec(vec![1.2], vec![0.5])), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_uses_inf_sentinel() {
        let sys = SystemParameters::nominal();
        let a = cct_surface(&sys, &adaptive(), &spec(vec![0.4, 1.0], vec![0.5])).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("axis1,axis2,cct_seconds"));
        assert_eq!(lines.next(), Some("0.4,0.5,inf"));
        assert!(lines.next().unwrap().starts_with("1,0.5,"));
    }
}
