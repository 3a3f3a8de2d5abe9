//! Optimal decoherence control of a driven two-level system coupled to a
//! non-Markovian Ohmic (Lorentz-Drude) reservoir.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] – Gauss hypergeometric series and Pochhammer symbols.
//! * [`quadrature`] – adaptive Gauss–Kronrod integration used by the
//!   coefficient oracle.
//! * [`reservoir`] – spectral density, bath kernels and the time-dependent
//!   diffusion Δ(t) / dissipation γ(t) coefficients.
//! * [`bloch`] – Bloch-vector state, equations of motion and the RK4
//!   integrator.
//! * [`pmp`] – cost functional, costate dynamics, control law and the
//!   forward–backward sweep solver.
//! * [`analysis`] – coherence, decoherence time, power spectra and the
//!   controllability table.
//! * [`config`] – scenario files consumed by the `tclctl` command line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod config;
pub mod error;
pub mod pmp;
pub mod quadrature;
pub mod reservoir;
pub mod special;

pub use error::{Error, Result};

pub use analysis::{
    bandwidth, coherence, controllability_table, decoherence_time, power_spectrum,
    CellOutcome, ControllabilityCell, ControllabilityLabel, LabelThresholds, Spectrum,
};
pub use bloch::{
    density_from_bloch, drift_matrix, integrate, target_trajectory, BlochVector, ControlField,
    DensityMatrix2, TimeGrid, Trajectory,
};
pub use config::{parse_config, Scenario};
pub use pmp::{
    control_update, cost, costate_rhs, markovian_control, solve_fbsm, CostWeights, SweepConfig,
    SweepResult,
};
pub use reservoir::{
    coefficient_trace, markovian_limits, CoefficientMethod, CoefficientTrace, MarkovianLimits,
    ReservoirParams,
};
