use nalgebra::{DMatrix, DVector};

use super::{DensityOp, ProbDist, Result, DEGENERACY_TOL};
use crate::C64;

/// Shannon entropy in bits, with `0 log 0 = 0`. Tiny negative round-off is
/// treated as zero.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// `-Tr ρ log₂ ρ`.
pub fn von_neumann_entropy(rho: &DensityOp) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// `S(AB) − S(B)` where `B` is the factor subset `conditioning` of a
/// bipartite (or larger) operator.
pub fn conditional_entropy(rho_ab: &DensityOp, conditioning: &[usize]) -> Result<f64> {
    let rho_b = rho_ab.partial_trace(conditioning)?;
    Ok(von_neumann_entropy(rho_ab) - von_neumann_entropy(&rho_b))
}

/// `S(A) + S(B) − S(AB)` for the split `a` / rest.
pub fn mutual_information(rho_ab: &DensityOp, a: &[usize]) -> Result<f64> {
    let rest: Vec<usize> = (0..rho_ab.factor_dims().len()).filter(|k| !a.contains(k)).collect();
    let rho_a = rho_ab.partial_trace(a)?;
    let rho_b = rho_ab.partial_trace(&rest)?;
    Ok(von_neumann_entropy(&rho_a) + von_neumann_entropy(&rho_b) - von_neumann_entropy(rho_ab))
}

/// Eigenbasis of an observer's reduced state.
#[derive(Debug, Clone)]
pub struct PreferredBasis {
    /// Eigenvalues, descending.
    pub dist: ProbDist,
    /// Orthonormal eigenvectors matching `dist`.
    pub basis: Vec<DVector<C64>>,
    pub degenerate: bool,
}

impl PreferredBasis {
    /// `Σ p_k |e_k⟩⟨e_k|`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.basis.first().map_or(0, |v| v.len());
        let mut m = DMatrix::zeros(n, n);
        for (p, v) in self.dist.probs.iter().zip(&self.basis) {
            m += (v * v.adjoint()).scale(*p);
        }
        m
    }

    /// Index of the basis vector with the largest overlap with `|index⟩`.
    pub fn closest_to_basis_state(&self, index: usize) -> usize {
        let mut best = 0;
        let mut best_w = -1.0;
        for (k, v) in self.basis.iter().enumerate() {
            let w = v[index].norm_sqr();
            if w > best_w {
                best_w = w;
                best = k;
            }
        }
        best
    }
}

fn fix_phase(v: &mut DVector<C64>) {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Diagonalizes `rho`. Eigenvalues within `DEGENERACY_TOL` of a neighbour
/// are grouped; inside each group the basis is rebuilt by Gram–Schmidt on
/// the projected computational basis vectors taken in index order, so the
/// result does not depend on the eigensolver's arbitrary choice.
pub fn preferred_basis(rho: &DensityOp) -> PreferredBasis {
    preferred_basis_with_tol(rho, DEGENERACY_TOL)
}

pub fn preferred_basis_with_tol(rho: &DensityOp, tol: f64) -> PreferredBasis {
    let (vals, vecs) = rho.eigen();
    let n = vals.len();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(n);
    let mut degenerate = false;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end - 1] - vals[end]).abs() < tol {
            end += 1;
        }
        if end - start == 1 {
            let mut v = vecs.column(start).into_owned();
            fix_phase(&mut v);
            basis.push(v);
        } else {
            degenerate = true;
            let block = vecs.columns(start, end - start).into_owned();
            let proj = &block * block.adjoint();
            let mut group: Vec<DVector<C64>> = Vec::new();
            for i in 0..n {
                if group.len() == end - start {
                    break;
                }
                let mut v = proj.column(i).into_owned();
                for g in &group {
                    let c = g.dotc(&v);
                    v -= g * c;
                }
                let norm = v.norm();
                if norm > 1e-8 {
                    v.unscale_mut(norm);
                    fix_phase(&mut v);
                    group.push(v);
                }
            }
            basis.extend(group);
        }
        start = end;
    }
    PreferredBasis { dist: ProbDist::indexed(vals), basis, degenerate }
}
