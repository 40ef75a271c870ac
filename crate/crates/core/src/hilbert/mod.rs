//! Dense finite-dimensional Hilbert-space algebra.
//!
//! Composite systems carry an ordered list of factor dimensions. Basis
//! indices are row-major over the factors: factor 0 is the most significant
//! digit, so `|i⟩ ⊗ |j⟩` sits at `i * d_1 + j`.

mod entropy;
mod schmidt;

pub use entropy::{
    conditional_entropy, mutual_information, preferred_basis, preferred_basis_with_tol, shannon_entropy,
    von_neumann_entropy, PreferredBasis,
};
pub use schmidt::{schmidt_decompose, schmidt_reconstruct, SchmidtTerm};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::C64;

/// Default tolerance on the L² norm of states used for probability extraction.
pub const NORM_TOL: f64 = 1e-12;
/// Default tolerance for Hermiticity and unit trace of density operators.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default lower bound allowed for eigenvalues of a density operator.
pub const PSD_TOL: f64 = 1e-10;
/// Default reconstruction tolerance for Schmidt decompositions.
pub const RECON_TOL: f64 = 1e-10;
/// Default eigenvalue gap below which a spectrum is flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("factor dimensions {dims:?} do not multiply to {len}")]
    DimensionMismatch { dims: Vec<usize>, len: usize },
    #[error("factor index {index} out of range for {count} factors")]
    InvalidFactor { index: usize, count: usize },
    #[error("factor selection must be nonempty")]
    EmptySelection,
    #[error("factor {0} selected twice")]
    DuplicateFactor(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("eigenvalue {0:e} is negative")]
    NotPositive(f64),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("probabilities do not form a distribution: {0}")]
    BadDistribution(String),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) || dims.iter().product::<usize>() != len {
        return Err(HilbertError::DimensionMismatch { dims: dims.to_vec(), len });
    }
    Ok(())
}

/// Validates a factor selection and returns it sorted.
fn check_selection(sel: &[usize], count: usize) -> Result<Vec<usize>> {
    if sel.is_empty() {
        return Err(HilbertError::EmptySelection);
    }
    let mut sorted = sel.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(HilbertError::DuplicateFactor(w[0]));
        }
    }
    if let Some(&bad) = sorted.iter().find(|&&i| i >= count) {
        return Err(HilbertError::InvalidFactor { index: bad, count });
    }
    Ok(sorted)
}

/// Splits a flat basis index into per-factor digits.
pub fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (k, &d) in dims.iter().enumerate().rev() {
        digits[k] = index % d;
        index /= d;
    }
    digits
}

/// Inverse of [`unflatten`].
pub fn flatten(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Lookup table `table[a][t]` giving the full basis index for kept
/// multi-index `a` and traced multi-index `t` (both row-major in factor
/// order).
fn split_table(dims: &[usize], keep: &[usize]) -> (usize, usize, Vec<Vec<usize>>) {
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = keep_dims.iter().product();
    let dt: usize = traced_dims.iter().product();
    let mut table = vec![vec![0; dt]; dk];
    let mut digits = vec![0; dims.len()];
    for (a, row) in table.iter_mut().enumerate() {
        let ka = unflatten(a, &keep_dims);
        for (t, slot) in row.iter_mut().enumerate() {
            let kt = unflatten(t, &traced_dims);
            for (pos, &f) in keep.iter().enumerate() {
                digits[f] = ka[pos];
            }
            for (pos, &f) in traced.iter().enumerate() {
                digits[f] = kt[pos];
            }
            *slot = flatten(&digits, dims);
        }
    }
    (dk, dt, table)
}

/// Pure state with tensor-factor structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: DVector<C64>,
    factor_dims: Vec<usize>,
}

impl Ket {
    pub fn new(amplitudes: Vec<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        check_dims(&factor_dims, amplitudes.len())?;
        Ok(Self { amplitudes: DVector::from_vec(amplitudes), factor_dims })
    }

    /// Single-factor state.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        let n = amplitudes.len();
        Self { amplitudes: DVector::from_vec(amplitudes), factor_dims: vec![n] }
    }

    pub fn from_vector(amplitudes: DVector<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        check_dims(&factor_dims, amplitudes.len())?;
        Ok(Self { amplitudes, factor_dims })
    }

    /// Computational basis state `|digits⟩`.
    pub fn basis(factor_dims: &[usize], digits: &[usize]) -> Self {
        let n: usize = factor_dims.iter().product();
        let mut v = DVector::zeros(n);
        v[flatten(digits, factor_dims)] = C64::new(1.0, 0.0);
        Self { amplitudes: v, factor_dims: factor_dims.to_vec() }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn require_normalized(&self, tol: f64) -> Result<()> {
        if self.is_normalized(tol) {
            Ok(())
        } else {
            Err(HilbertError::NotNormalized(self.norm()))
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { amplitudes: self.amplitudes.unscale(n), factor_dims: self.factor_dims.clone() }
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn tensor(&self, other: &Ket) -> Ket {
        tensor(self, other)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityOp {
        DensityOp { matrix: &self.amplitudes * self.amplitudes.adjoint(), factor_dims: self.factor_dims.clone() }
    }

    /// Reduced state on `keep`, computed directly from the amplitudes
    /// without forming the full projector.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityOp> {
        let keep = check_selection(keep, self.factor_dims.len())?;
        let (dk, dt, table) = split_table(&self.factor_dims, &keep);
        let m = DMatrix::from_fn(dk, dt, |a, t| self.amplitudes[table[a][t]]);
        Ok(DensityOp { matrix: &m * m.adjoint(), factor_dims: keep.iter().map(|&k| self.factor_dims[k]).collect() })
    }

    /// Applies `op` to one tensor factor.
    pub fn apply_local(&self, factor: usize, op: &DMatrix<C64>) -> Result<Ket> {
        let count = self.factor_dims.len();
        if factor >= count {
            return Err(HilbertError::InvalidFactor { index: factor, count });
        }
        let d = self.factor_dims[factor];
        if op.nrows() != d || op.ncols() != d {
            return Err(HilbertError::DimensionMismatch { dims: vec![op.nrows(), op.ncols()], len: d });
        }
        let inner: usize = self.factor_dims[factor + 1..].iter().product();
        let outer: usize = self.factor_dims[..factor].iter().product();
        let mut out = DVector::zeros(self.dim());
        for o in 0..outer {
            for i in 0..inner {
                for r in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for c in 0..d {
                        acc += op[(r, c)] * self.amplitudes[(o * d + c) * inner + i];
                    }
                    out[(o * d + r) * inner + i] = acc;
                }
            }
        }
        Ok(Ket { amplitudes: out, factor_dims: self.factor_dims.clone() })
    }

    /// Applies an operator on the whole space.
    pub fn apply(&self, op: &DMatrix<C64>) -> Ket {
        Ket { amplitudes: op * &self.amplitudes, factor_dims: self.factor_dims.clone() }
    }

    /// Generalized CNOT: the target factor is shifted by the control digit,
    /// `|c⟩|t⟩ → |c⟩|t + c mod d_t⟩`. This is the copy interaction used for
    /// every ideal measurement in the crate.
    pub fn controlled_shift(&self, control: usize, target: usize) -> Result<Ket> {
        let count = self.factor_dims.len();
        for f in [control, target] {
            if f >= count {
                return Err(HilbertError::InvalidFactor { index: f, count });
            }
        }
        if control == target {
            return Err(HilbertError::DuplicateFactor(control));
        }
        let dt = self.factor_dims[target];
        let mut out = DVector::zeros(self.dim());
        for idx in 0..self.dim() {
            let mut digits = unflatten(idx, &self.factor_dims);
            digits[target] = (digits[target] + digits[control]) % dt;
            out[flatten(&digits, &self.factor_dims)] = self.amplitudes[idx];
        }
        Ok(Ket { amplitudes: out, factor_dims: self.factor_dims.clone() })
    }

    /// Inverse of [`Ket::controlled_shift`].
    pub fn controlled_unshift(&self, control: usize, target: usize) -> Result<Ket> {
        let count = self.factor_dims.len();
        for f in [control, target] {
            if f >= count {
                return Err(HilbertError::InvalidFactor { index: f, count });
            }
        }
        let dt = self.factor_dims[target];
        let mut out = DVector::zeros(self.dim());
        for idx in 0..self.dim() {
            let mut digits = unflatten(idx, &self.factor_dims);
            digits[target] = (digits[target] + dt - digits[control] % dt) % dt;
            out[flatten(&digits, &self.factor_dims)] = self.amplitudes[idx];
        }
        Ok(Ket { amplitudes: out, factor_dims: self.factor_dims.clone() })
    }

    /// Reorders the tensor factors; `order[k]` is the old index of new factor `k`.
    pub fn permute_factors(&self, order: &[usize]) -> Result<Ket> {
        let count = self.factor_dims.len();
        let sorted = check_selection(order, count)?;
        if sorted.len() != count {
            return Err(HilbertError::InvalidFactor { index: count, count });
        }
        let new_dims: Vec<usize> = order.iter().map(|&k| self.factor_dims[k]).collect();
        let mut out = DVector::zeros(self.dim());
        let mut new_digits = vec![0; count];
        for idx in 0..self.dim() {
            let digits = unflatten(idx, &self.factor_dims);
            for (k, &old) in order.iter().enumerate() {
                new_digits[k] = digits[old];
            }
            out[flatten(&new_digits, &new_dims)] = self.amplitudes[idx];
        }
        Ok(Ket { amplitudes: out, factor_dims: new_dims })
    }
}

/// Kronecker product; factor dimensions are concatenated.
pub fn tensor(a: &Ket, b: &Ket) -> Ket {
    Ket {
        amplitudes: a.amplitudes.kronecker(&b.amplitudes),
        factor_dims: a.factor_dims.iter().chain(&b.factor_dims).copied().collect(),
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    matrix: DMatrix<C64>,
    factor_dims: Vec<usize>,
}

impl DensityOp {
    /// Validated constructor using the default tolerances.
    pub fn new(matrix: DMatrix<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        Self::with_tolerance(matrix, factor_dims, HERMITIAN_TOL, PSD_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<C64>, factor_dims: Vec<usize>, herm_tol: f64, psd_tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(HilbertError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        check_dims(&factor_dims, matrix.nrows())?;
        let dev = (&matrix - matrix.adjoint()).camax();
        if dev > herm_tol {
            return Err(HilbertError::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > herm_tol || tr.im.abs() > herm_tol {
            return Err(HilbertError::BadTrace(tr.re));
        }
        let rho = Self { matrix, factor_dims };
        let min = rho.eigenvalues().last().copied().unwrap_or(0.0);
        if min < -psd_tol {
            return Err(HilbertError::NotPositive(min));
        }
        Ok(rho)
    }

    /// Skips validation; used internally where the construction guarantees
    /// the invariants up to round-off.
    pub fn from_matrix_unchecked(matrix: DMatrix<C64>, factor_dims: Vec<usize>) -> Self {
        Self { matrix, factor_dims }
    }

    /// Diagonal operator on a single factor.
    pub fn diagonal(probs: &[f64]) -> Self {
        let n = probs.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(probs[i], 0.0) } else { C64::new(0.0, 0.0) });
        Self { matrix: m, factor_dims: vec![n] }
    }

    /// Maximally mixed state `I/d` over the given factors.
    pub fn maximally_mixed(factor_dims: &[usize]) -> Self {
        let n: usize = factor_dims.iter().product();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(1.0 / n as f64, 0.0) } else { C64::new(0.0, 0.0) });
        Self { matrix: m, factor_dims: factor_dims.to_vec() }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &DensityOp) -> DensityOp {
        DensityOp {
            matrix: self.matrix.kronecker(&other.matrix),
            factor_dims: self.factor_dims.iter().chain(&other.factor_dims).copied().collect(),
        }
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    /// Hermitian eigendecomposition with eigenvalues sorted descending and
    /// eigenvectors as matching columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (vals, vecs)
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOp> {
        partial_trace(self, keep)
    }

    /// Probabilities of the computational basis outcomes.
    pub fn diagonal_probs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Largest absolute off-diagonal entry.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.matrix[(i, j)].norm());
                }
            }
        }
        m
    }

    /// Returns a copy with off-diagonal entries below `tol` set to zero.
    pub fn clean_offdiag(&self, tol: f64) -> DensityOp {
        let mut m = self.matrix.clone();
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j && m[(i, j)].norm() < tol {
                    m[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        DensityOp { matrix: m, factor_dims: self.factor_dims.clone() }
    }
}

/// Traces out every factor not listed in `keep`. Kept factors retain their
/// original relative order.
pub fn partial_trace(rho: &DensityOp, keep: &[usize]) -> Result<DensityOp> {
    let keep = check_selection(keep, rho.factor_dims.len())?;
    let (dk, dt, table) = split_table(&rho.factor_dims, &keep);
    let m = DMatrix::from_fn(dk, dk, |a, b| (0..dt).map(|t| rho.matrix[(table[a][t], table[b][t])]).sum::<C64>());
    Ok(DensityOp { matrix: m, factor_dims: keep.iter().map(|&k| rho.factor_dims[k]).collect() })
}

/// Trace distance `½‖ρ − σ‖₁`.
pub fn trace_distance(a: &DensityOp, b: &DensityOp) -> f64 {
    let diff = DensityOp::from_matrix_unchecked(&a.matrix - &b.matrix, a.factor_dims.clone());
    0.5 * diff.eigenvalues().iter().map(|l| l.abs()).sum::<f64>()
}

/// Outcome distribution with labels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbDist {
    pub probs: Vec<f64>,
    pub labels: Vec<String>,
}

impl ProbDist {
    /// Validated constructor; entries must lie in `[0, 1]` and sum to one
    /// within `tol`.
    pub fn new(probs: Vec<f64>, labels: Vec<String>, tol: f64) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(HilbertError::BadDistribution(format!(
                "{} probabilities for {} labels",
                probs.len(),
                labels.len()
            )));
        }
        if let Some(p) = probs.iter().find(|&&p| !(-tol..=1.0 + tol).contains(&p)) {
            return Err(HilbertError::BadDistribution(format!("entry {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(HilbertError::BadDistribution(format!("sum {sum}")));
        }
        Ok(Self { probs, labels })
    }

    /// Labels the entries `0, 1, …` without validation.
    pub fn indexed(probs: Vec<f64>) -> Self {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Self { probs, labels }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &ProbDist) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Dense CNOT-style helpers shared by the qubit pipelines.
pub mod gates {
    use nalgebra::DMatrix;

    use crate::C64;

    pub fn identity(d: usize) -> DMatrix<C64> {
        DMatrix::identity(d, d)
    }

    pub fn hadamard() -> DMatrix<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])
    }

    pub fn pauli_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
    }

    /// Largest entry of `U†U − I`.
    pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
        if u.nrows() != u.ncols() {
            return f64::INFINITY;
        }
        (u.adjoint() * u - DMatrix::<C64>::identity(u.nrows(), u.ncols())).camax()
    }
}
