//! Stochastic work, heat and efficiency statistics of quantum Otto engines.
//!
//! The generic machinery in [`spectra`] enumerates the two-point-measurement
//! paths of a single Otto cycle for any finite-dimensional working medium.
//! [`twolevel`] provides the closed forms for the driven spin-1/2 engine,
//! [`propagator`] integrates driving protocols numerically, and [`sampler`]
//! draws single-cycle trajectories for Monte Carlo estimates.

pub mod error;
pub mod extended;
pub mod linalg;
pub mod numeric;
pub mod propagator;
pub mod sampler;
pub mod spectra;
pub mod twolevel;

pub use error::{CoreError, CoreResult};
pub use extended::ExtendedReal;
pub use linalg::CMatrix;
pub use spectra::{
    EfficiencyDistribution, EnergySpectrum, EngineSpec, JointAtom, JointDistribution, MomentReport, ThermalState,
    Unitary,
};

/// Default absolute tolerance for merging atoms (energies and efficiencies).
pub const DEFAULT_GROUPING_TOL: f64 = 1e-9;
