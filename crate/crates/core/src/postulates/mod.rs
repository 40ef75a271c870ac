//! The weakly coupled detector: a free particle, a two-state detector
//! switched on inside a spacetime region `R`, and three ways of assigning a
//! probability to the detector firing.

mod born;
mod cqi;
mod experiment;
mod region;

use thiserror::Error;

use crate::contspace::ContError;
use crate::hilbert::HilbertError;

pub use born::{
    born_probability, region_integral, rr_probability, shrinking_sequence, two_point, BornReport, ShrinkStep,
    TwoPointReport, SEPARATION_TOL,
};
pub use cqi::{
    covariant_partial_trace, cqi_probability, detector_joint_state, CovariantReducedState, CqiReport, JointState,
    ReadoutRegion, SCHMIDT_TOL,
};
pub use experiment::{
    evolved_wavefunction, first_order_amplitude, first_order_amplitudes, DetectorExperiment, InitialState, Prepared,
    Readout, DEFAULT_OFFDIAG_TOL, DEFAULT_PERT_TOL, DEFAULT_XCHECK_TOL, NORM_TOL,
};
pub use region::{Rect, Region, SnappedRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostulateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("coupling too strong for first order: estimate {estimate:.3e} exceeds {tol:.3e}")]
    Perturbativity { estimate: f64, tol: f64 },
    #[error("t = {t} precedes the preparation time {t0}")]
    BeforePreparation { t: f64, t0: f64 },
    #[error("readout time {t} lies inside the coupling region")]
    ReadoutInsideRegion { t: f64 },
    #[error("region has zero measure on the lattice")]
    ZeroMeasure,
    #[error("squares are not separated: kernel overlap {overlap:.3e}")]
    NotSeparated { overlap: f64 },
    #[error("joint state has support outside the readout region")]
    SupportLeak,
    #[error("reduced state has trace {0}")]
    NotNormalized(f64),
    #[error(transparent)]
    Cont(#[from] ContError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}
