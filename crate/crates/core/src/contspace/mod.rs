//! Discretized `(x, t)` configuration space of one free particle: grid
//! states, the Schrödinger kernel, the physical projector and inner
//! product.

mod direct;
mod gaussian;
mod grid;
mod kernel;
mod spectral;

use thiserror::Error;

pub use direct::{physical_inner_product_direct, project_kernel, project_kernel_at};
pub use gaussian::{localized_state, GaussianPacket};
pub use grid::{runs_of, Grid, GridFunction, Run, Sampling, Support, SUPPORT_EPS};
pub use kernel::PropagatorKernel;
pub use spectral::{
    evaluate_at, evolve_row, forward_row, inverse_row, physical_inner_product, physical_inner_product_extended,
    physical_norm_sqr, physical_state, project, split_step, wavenumbers,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("grid values must be finite")]
    NonFinite,
    #[error("kernel evaluated at equal times")]
    EqualTime,
    #[error("state has empty support")]
    EmptySupport,
    #[error("states live on different grids")]
    GridMismatch,
    #[error("wavenumber sum did not converge")]
    NotConverged,
}
