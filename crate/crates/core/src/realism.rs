//! One global state read on three successive slices: before any
//! measurement, after Bob's measurement, and after Alice has also
//! correlated with the system.
//!
//! Factor order is `Q, B, A`.

use serde::Serialize;
use thiserror::Error;

use crate::hilbert::{conditional_entropy, von_neumann_entropy, DensityOp, HilbertError, Ket};
use crate::C64;

const Q: usize = 0;
const BOB: usize = 1;
const ALICE: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealismError {
    #[error("amplitudes have norm {0}")]
    NotNormalized(f64),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceReport {
    pub label: String,
    pub rho_a: [[(f64, f64); 2]; 2],
    pub rho_b: [[(f64, f64); 2]; 2],
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
    pub s_a_given_b: f64,
    pub purity_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealismReport {
    pub slices: Vec<SliceReport>,
    /// `ρ_A` pure on the slice after Bob's measurement.
    pub alice_ready_pure: bool,
    /// `ρ_B = diag(|α|², |β|²)` on that slice.
    pub bob_mixture_matches: bool,
    /// `S(A|B) = 0` on the last slice.
    pub correlated: bool,
    pub global_norm_defect: f64,
}

fn entries(rho: &DensityOp) -> [[(f64, f64); 2]; 2] {
    let m = rho.matrix();
    let e = |i, j| (m[(i, j)].re, m[(i, j)].im);
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn slice(label: &str, psi: &Ket) -> Result<SliceReport, RealismError> {
    let rho_a = psi.reduced(&[ALICE])?;
    let rho_b = psi.reduced(&[BOB])?;
    let rho_ab = psi.reduced(&[BOB, ALICE])?;
    Ok(SliceReport {
        label: label.to_string(),
        rho_a: entries(&rho_a),
        rho_b: entries(&rho_b),
        s_a: von_neumann_entropy(&rho_a),
        s_b: von_neumann_entropy(&rho_b),
        s_ab: von_neumann_entropy(&rho_ab),
        // within ρ_AB the factors are (B, A); condition on B
        s_a_given_b: conditional_entropy(&rho_ab, &[0])?,
        purity_a: rho_a.purity(),
    })
}

pub fn realism_scenario(alpha: C64, beta: C64) -> Result<RealismReport, RealismError> {
    let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(RealismError::NotNormalized(n));
    }
    let q = Ket::from_amplitudes(vec![alpha, beta]);
    let t0 = q.tensor(&Ket::basis(&[2, 2], &[0, 0]));
    let t1 = t0.controlled_shift(Q, BOB)?;
    let t2 = t1.controlled_shift(Q, ALICE)?;
    let slices = vec![slice("t0", &t0)?, slice("t1", &t1)?, slice("t2", &t2)?];
    let rho_b1 = t1.reduced(&[BOB])?;
    let want = DensityOp::diagonal(&[alpha.norm_sqr(), beta.norm_sqr()]);
    Ok(RealismReport {
        alice_ready_pure: (slices[1].purity_a - 1.0).abs() < 1e-12,
        bob_mixture_matches: (rho_b1.matrix() - want.matrix()).camax() < 1e-12,
        correlated: slices[2].s_a_given_b.abs() < 1e-9,
        global_norm_defect: (t2.norm() - 1.0).abs(),
        slices,
    })
}
