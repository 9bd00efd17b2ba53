//! Plant parameters, per-unit conversions and the lumped algebraic network.
//!
//! All quantities handed to the network solver are per unit on the system
//! base [`BaseQuantities`]. Transformer data is given per unit on the
//! transformer's own rating, the filter in SI units on the single-module base,
//! and both are rebased here.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// System base: power, voltage and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseQuantities {
    pub s_base: f64,
    pub v_base: f64,
    pub f_base: f64,
    pub omega_base: f64,
}

impl BaseQuantities {
    pub fn new(s_base: f64, v_base: f64, f_base: f64) -> Result<Self> {
        for (name, value) in [("s_base", s_base), ("v_base", v_base), ("f_base", f_base)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(Self {
            s_base,
            v_base,
            f_base,
            omega_base: 2.0 * PI * f_base,
        })
    }

    /// 100 MVA, 230 kV, 50 Hz.
    pub fn nominal() -> Self {
        Self::new(100e6, 230e3, 50.0).expect("table values are positive")
    }
}

/// Two-winding transformer, per unit on its own rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerParams {
    pub s_rated: f64,
    /// Per-winding resistance.
    pub r_winding: f64,
    /// Per-winding leakage inductance (equal to reactance at rated frequency).
    pub l_winding: f64,
    /// Magnetizing branch `(r_m, l_m)`. Stored only; the reduced network ignores it.
    pub magnetizing: Option<(f64, f64)>,
}

impl TransformerParams {
    /// Series impedance of both windings on the transformer's own rating.
    pub fn series_impedance(&self) -> Complex64 {
        Complex64::new(2.0 * self.r_winding, 2.0 * self.l_winding)
    }

    pub fn mv_hv() -> Self {
        Self {
            s_rated: 210e6,
            r_winding: 0.0027,
            l_winding: 0.08,
            magnetizing: Some((500.0, 500.0)),
        }
    }

    pub fn lv_mv() -> Self {
        Self {
            s_rated: 1.6e6,
            r_winding: 0.0073,
            l_winding: 0.018,
            magnetizing: Some((347.0, 156.0)),
        }
    }
}

/// Aggregated inverter plant and its droop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterParams {
    /// Rating of one inverter module (VA).
    pub s_rated_unit: f64,
    /// Line-to-line rms AC voltage of one module (V); the filter's impedance base.
    pub v_ac: f64,
    pub filter_r: f64,
    pub filter_l: f64,
    /// Stored only.
    pub filter_c: f64,
    pub n_modules: u32,
    /// Stored only.
    pub v_dc: f64,
    /// Droop coefficient, pu frequency per pu power.
    pub m_p: f64,
    /// Active power reference P*, pu on the system base.
    pub p_ref: f64,
    /// Current limit, pu on the system base.
    pub i_max: f64,
    /// Nominal frequency ω*, pu.
    pub omega_ref: f64,
    /// Magnitude of the internal voltage behind the filter, pu.
    pub e_ref: f64,
}

impl InverterParams {
    /// Nominal module data with the default operating point (P* = 1, I_max = 1.2).
    pub fn nominal() -> Self {
        Self {
            s_rated_unit: 500e3,
            v_ac: 1e3,
            filter_r: 0.001,
            filter_l: 200e-6,
            filter_c: 300e-6,
            n_modules: 200,
            v_dc: 2.44e3,
            m_p: 0.05,
            p_ref: 1.0,
            i_max: 1.2,
            omega_ref: 1.0,
            e_ref: 1.0,
        }
    }

    /// Aggregate rating of all modules (VA).
    pub fn s_rated_total(&self) -> f64 {
        self.s_rated_unit * f64::from(self.n_modules)
    }

    /// Filter impedance per unit on one module's base. Identical on the
    /// aggregate base, since `n` parallel modules scale both impedance and
    /// base impedance by `1/n`.
    pub fn filter_impedance_pu(&self, f_base: f64) -> Complex64 {
        let z_base = self.v_ac * self.v_ac / self.s_rated_unit;
        Complex64::new(self.filter_r, 2.0 * PI * f_base * self.filter_l) / z_base
    }
}

/// Grid Thevenin source and PCC load, per unit on the system base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub v_g: f64,
    pub r_g: f64,
    pub x_g: f64,
    /// Load apparent power at nominal voltage.
    pub load_s: f64,
    /// Lagging power factor of the load, in (0, 1].
    pub load_pf: f64,
}

pub const DEFAULT_SCR: f64 = 5.0;
pub const DEFAULT_X_OVER_R: f64 = 10.0;

impl GridParams {
    /// Grid impedance from a short-circuit ratio relative to `s_ref` (pu on
    /// the system base) and an X/R ratio.
    pub fn from_scr(v_g: f64, scr: f64, x_over_r: f64, s_ref: f64, load_s: f64, load_pf: f64) -> Result<Self> {
        if !(scr > 0.0 && s_ref > 0.0 && x_over_r >= 0.0) {
            return Err(Error::Parameter(format!(
                "short-circuit ratio {scr}, reference {s_ref} and X/R {x_over_r} must be positive"
            )));
        }
        let z = 1.0 / (scr * s_ref);
        let angle = x_over_r.atan();
        Ok(Self {
            v_g,
            r_g: z * angle.cos(),
            x_g: z * angle.sin(),
            load_s,
            load_pf,
        })
    }

    /// SCR 5, X/R 10 on a 1 pu inverter rating; 1 pu load at 0.8 pf.
    pub fn nominal() -> Self {
        Self::from_scr(1.0, DEFAULT_SCR, DEFAULT_X_OVER_R, 1.0, 1.0, 0.8)
            .expect("default grid is valid")
    }

    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_g, self.x_g)
    }

    /// Short-circuit ratio relative to `s_ref`.
    pub fn scr(&self, s_ref: f64) -> f64 {
        1.0 / (self.impedance().norm() * s_ref)
    }

    /// Constant-impedance load admittance at nominal voltage.
    pub fn load_admittance(&self) -> Complex64 {
        let p = self.load_s * self.load_pf;
        let q = self.load_s * (1.0 - self.load_pf * self.load_pf).max(0.0).sqrt();
        Complex64::new(p, -q)
    }
}

/// Everything needed to build the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParameters {
    pub base: BaseQuantities,
    pub mv_hv: TransformerParams,
    pub lv_mv: TransformerParams,
    pub inverter: InverterParams,
    pub grid: GridParams,
}

impl SystemParameters {
    pub fn nominal() -> Self {
        Self {
            base: BaseQuantities::nominal(),
            mv_hv: TransformerParams::mv_hv(),
            lv_mv: TransformerParams::lv_mv(),
            inverter: InverterParams::nominal(),
            grid: GridParams::nominal(),
        }
    }

    /// Aggregate inverter rating in pu of the system base.
    pub fn inverter_rating_pu(&self) -> f64 {
        self.inverter.s_rated_total() / self.base.s_base
    }

    /// Short-circuit ratio at the PCC relative to the inverter rating.
    pub fn scr(&self) -> f64 {
        self.grid.scr(self.inverter_rating_pu())
    }
}

/// A single invariant violation found by [`validate_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Change the power base of a per-unit impedance.
pub fn rebase_impedance(z: Complex64, s_from: f64, s_to: f64) -> Result<Complex64> {
    if !(s_from > 0.0 && s_to > 0.0) || !s_from.is_finite() || !s_to.is_finite() {
        return Err(Error::Parameter(format!(
            "bases must be positive, got {s_from} -> {s_to}"
        )));
    }
    Ok(z * (s_to / s_from))
}

/// Check every parameter invariant and collect the violations.
pub fn validate_params(params: &SystemParameters) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &str, message: String| {
        if !ok {
            out.push(Violation { field: field.to_string(), message });
        }
    };
    let pos = |x: f64| x.is_finite() && x > 0.0;
    let nonneg = |x: f64| x.is_finite() && x >= 0.0;

    let b = &params.base;
    check(pos(b.s_base), "base.s_base", format!("must be > 0, got {}", b.s_base));
    check(pos(b.v_base), "base.v_base", format!("must be > 0, got {}", b.v_base));
    check(pos(b.f_base), "base.f_base", format!("must be > 0, got {}", b.f_base));
    check(
        b.omega_base == 2.0 * PI * b.f_base,
        "base.omega_base",
        format!("must equal 2π·f_base, got {}", b.omega_base),
    );

    for (name, t) in [("mv_hv", &params.mv_hv), ("lv_mv", &params.lv_mv)] {
        let field = |suffix: &str| format!("transformer.{name}.{suffix}");
        check(pos(t.s_rated), &field("s_rated"), format!("must be > 0, got {}", t.s_rated));
        check(nonneg(t.r_winding), &field("r_winding"), format!("must be >= 0, got {}", t.r_winding));
        check(pos(t.l_winding), &field("l_winding"), format!("must be > 0, got {}", t.l_winding));
    }

    let inv = &params.inverter;
    check(pos(inv.s_rated_unit), "inverter.s_rated_unit", format!("must be > 0, got {}", inv.s_rated_unit));
    check(pos(inv.v_ac), "inverter.v_ac", format!("must be > 0, got {}", inv.v_ac));
    check(nonneg(inv.filter_r), "inverter.filter_r", format!("must be >= 0, got {}", inv.filter_r));
    check(nonneg(inv.filter_l), "inverter.filter_l", format!("must be >= 0, got {}", inv.filter_l));
    check(nonneg(inv.filter_c), "inverter.filter_c", format!("must be >= 0, got {}", inv.filter_c));
    check(inv.n_modules >= 1, "inverter.n_modules", "must be >= 1".to_string());
    check(pos(inv.m_p), "inverter.m_p", format!("must be > 0, got {}", inv.m_p));
    check(pos(inv.i_max), "inverter.i_max", format!("must be > 0, got {}", inv.i_max));
    check(nonneg(inv.p_ref), "inverter.p_ref", format!("must be >= 0, got {}", inv.p_ref));
    check(
        inv.p_ref <= inv.i_max,
        "inverter.p_ref",
        format!("must not exceed i_max ({} > {})", inv.p_ref, inv.i_max),
    );
    check(pos(inv.omega_ref), "inverter.omega_ref", format!("must be > 0, got {}", inv.omega_ref));
    check(pos(inv.e_ref), "inverter.e_ref", format!("must be > 0, got {}", inv.e_ref));

    let g = &params.grid;
    check(pos(g.v_g), "grid.v_g", format!("must be > 0, got {}", g.v_g));
    check(nonneg(g.x_g), "grid.x_g", format!("must be >= 0, got {}", g.x_g));
    check(nonneg(g.r_g), "grid.r_g", format!("must be >= 0, got {}", g.r_g));
    check(nonneg(g.load_s), "grid.load_s", format!("must be >= 0, got {}", g.load_s));
    check(
        g.load_pf > 0.0 && g.load_pf <= 1.0,
        "grid.load_pf",
        format!("must be in (0, 1], got {}", g.load_pf),
    );
    out
}

/// Lumped network: inverter internal source → filter → transformers → PCC,
/// with the grid Thevenin branch and the load at the PCC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveNetwork {
    pub z_filter: Complex64,
    pub z_transformers: Complex64,
    /// `z_filter + z_transformers`.
    pub z_inv_pcc: Complex64,
    pub z_grid: Complex64,
    pub y_load: Complex64,
    /// Grid source magnitude (angle 0), after any sag.
    pub v_source: f64,
    /// PCC clamped to zero by a bolted fault.
    pub pcc_shorted: bool,
}

/// Rebase and sum the series elements, and attach the grid and load.
pub fn build_effective_network(params: &SystemParameters) -> Result<EffectiveNetwork> {
    let violations = validate_params(params);
    if !violations.is_empty() {
        return Err(Error::Validation(violations.iter().map(|v| v.to_string()).collect()));
    }
    let s_b = params.base.s_base;
    let inv = &params.inverter;
    let z_filter = rebase_impedance(
        inv.filter_impedance_pu(params.base.f_base),
        inv.s_rated_total(),
        s_b,
    )?;
    let lv_mv_total = params.lv_mv.s_rated * f64::from(inv.n_modules);
    let z_lv = rebase_impedance(params.lv_mv.series_impedance(), lv_mv_total, s_b)?;
    let z_hv = rebase_impedance(params.mv_hv.series_impedance(), params.mv_hv.s_rated, s_b)?;
    let z_transformers = z_lv + z_hv;
    let z_inv_pcc = z_filter + z_transformers;
    if z_inv_pcc.norm() == 0.0 {
        return Err(Error::Parameter("inverter-to-PCC impedance is zero".into()));
    }
    Ok(EffectiveNetwork {
        z_filter,
        z_transformers,
        z_inv_pcc,
        z_grid: params.grid.impedance(),
        y_load: params.grid.load_admittance(),
        v_source: params.grid.v_g,
        pcc_shorted: false,
    })
}
