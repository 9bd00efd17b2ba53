//! Reduced-order phasor-domain transient stability toolkit for droop-controlled
//! grid-forming inverters.
//!
//! The crate covers the whole analysis chain:
//!
//! - [`params`]: plant parameters, per-unit rebasing and the lumped network.
//! - [`config`]: the TOML configuration schema.
//! - [`network`]: algebraic network solution with circular current limiting.
//! - [`control`]: the droop synchronization loop and the four control strategies.
//! - [`plant`]: network solution and control law composed into the angle dynamics.
//! - [`analysis`]: power–angle curves, equilibria, clearing angles and the CCT integral.
//! - [`sim`]: fixed-step RK4 time-domain simulation, stability verdicts and CCT search.
//! - [`experiments`]: presets that reproduce the case studies, and report writers.

pub mod analysis;
pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod network;
pub mod params;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use analysis::{CctMethod, CctResult, ClearingAngle, Equilibria};
pub use control::{AdaptiveFunctionConfig, ControlOutput, Measurements, Strategy};
pub use network::{FaultState, NetworkSolution};
pub use params::{
    BaseQuantities, EffectiveNetwork, GridParams, InverterParams, SystemParameters,
    TransformerParams,
};
pub use sim::{FaultScenario, SimConfig, SimTrace, StabilityVerdict, VerdictStatus};
