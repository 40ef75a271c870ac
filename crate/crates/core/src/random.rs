//! Random states and unitaries for property sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hilbert::{DensityOp, Ket};
use crate::C64;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state on the given factors.
pub fn random_ket<R: Rng + ?Sized>(rng: &mut R, factor_dims: &[usize]) -> Ket {
    let n: usize = factor_dims.iter().product();
    let v = DVector::from_fn(n, |_, _| gaussian(rng));
    Ket::from_vector(v.normalize(), factor_dims.to_vec()).expect("dims match")
}

/// Full-rank random density operator `GG† / Tr GG†` (Ginibre ensemble).
pub fn random_mixed<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOp {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOp::from_matrix_unchecked(m.unscale(tr), vec![d])
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random normalized amplitude vector of length `d`.
pub fn random_amplitudes<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    random_ket(rng, &[d]).amplitudes().iter().copied().collect()
}
