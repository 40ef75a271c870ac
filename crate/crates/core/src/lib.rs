//! Numerical toolkit for unitary measurement models in covariant quantum
//! theory.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: finite-dimensional states, density operators, partial
//!   traces, Schmidt decomposition, entropies and the preferred (diagonal)
//!   basis of an observer's reduced state.
//! * [`chain`]: sequential measurement chains in which every observer is a
//!   quantum system entangled by a copy interaction.
//! * [`contspace`]: the extended configuration space `(x, t)` of a free
//!   particle, its Schrödinger propagator, the physical projector and the
//!   physical inner product.
//! * [`postulates`]: the weakly coupled detector experiment evaluated with
//!   the Born rule, the Reisenberger–Rovelli postulate and the covariant
//!   partial trace.
//! * [`zeno`], [`epr`], [`realism`]: small closed qubit pipelines.
//!
//! Everything is dense and double precision; dimensions stay in the
//! hundreds.

pub mod chain;
pub mod contspace;
pub mod epr;
pub mod hilbert;
pub mod postulates;
pub mod quadrature;
pub mod random;
pub mod realism;
pub mod zeno;

pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
