//! Sequential measurement chains with quantized observers.
//!
//! The system `Q` starts in `Σ α_i |a_i⟩`. Observer 1 is copied from `Q` in
//! the `a` basis. Every later stage first rewrites `Q` in the next measured
//! basis and then copies it onto a fresh observer prepared in `|0⟩`. The
//! global state stays pure; each observer's statistics come from its
//! reduced density operator.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::hilbert::{
    gates::unitarity_defect, shannon_entropy, von_neumann_entropy, DensityOp, HilbertError, Ket, ProbDist,
};
use crate::C64;

pub const UNITARY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
/// Slack allowed in entropy comparisons (bits).
pub const ENTROPY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("overlap matrix {stage} is not unitary (defect {defect:e})")]
    NotUnitary { stage: usize, defect: f64 },
    #[error("overlap matrix {stage} has shape {rows}x{cols}, expected {d}x{d}")]
    Shape { stage: usize, rows: usize, cols: usize, d: usize },
    #[error("initial amplitudes have norm {0}")]
    NotNormalized(f64),
    #[error("initial amplitude vector is empty")]
    Empty,
    #[error("comparison needs at least two observers")]
    TooShort,
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Measurement chain. `overlaps[k]` holds `U_ij = ⟨b_j|a_i⟩` between the
/// basis of observer `k + 1` (`a`) and observer `k + 2` (`b`), so a chain
/// of `N` observers has `N − 1` overlap matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub initial: Vec<C64>,
    pub overlaps: Vec<DMatrix<C64>>,
}

impl ChainSpec {
    pub fn new(initial: Vec<C64>, overlaps: Vec<DMatrix<C64>>) -> Result<Self, ChainError> {
        let spec = Self { initial, overlaps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn observers(&self) -> usize {
        self.overlaps.len() + 1
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let d = self.dim();
        if d == 0 {
            return Err(ChainError::Empty);
        }
        let norm = self.initial.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(ChainError::NotNormalized(norm));
        }
        for (k, u) in self.overlaps.iter().enumerate() {
            let stage = k + 2;
            if u.nrows() != d || u.ncols() != d {
                return Err(ChainError::Shape { stage, rows: u.nrows(), cols: u.ncols(), d });
            }
            let defect = unitarity_defect(u);
            if defect > UNITARY_TOL {
                return Err(ChainError::NotUnitary { stage, defect });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    /// Factors: `Q, O_1, …, O_N`.
    pub global_state: Ket,
    pub observer_states: Vec<DensityOp>,
    pub distributions: Vec<ProbDist>,
    pub entropies: Vec<f64>,
    /// Entropy of the system's own reduced state after the last stage.
    pub system_entropy: f64,
}

fn labels(d: usize) -> Vec<String> {
    (0..d).map(|i| i.to_string()).collect()
}

/// Builds the global state stage by stage and reads off every observer.
pub fn run_chain(spec: &ChainSpec) -> Result<ChainResult, ChainError> {
    spec.validate()?;
    let d = spec.dim();
    let n = spec.observers();
    let mut state = Ket::new(spec.initial.clone(), vec![d])?;
    let ready = Ket::basis(&[d], &[0]);
    for stage in 0..n {
        if stage > 0 {
            // |a_i⟩ = Σ_j U_ij |b_j⟩, so b-basis coefficients are Uᵀ c.
            state = state.apply_local(0, &spec.overlaps[stage - 1].transpose())?;
        }
        state = state.tensor(&ready);
        state = state.controlled_shift(0, stage + 1)?;
    }
    let mut observer_states = Vec::with_capacity(n);
    let mut distributions = Vec::with_capacity(n);
    let mut entropies = Vec::with_capacity(n);
    for k in 1..=n {
        let rho = state.reduced(&[k])?;
        let probs = rho.diagonal_probs();
        distributions.push(ProbDist::new(probs, labels(d), 1e-10)?);
        entropies.push(von_neumann_entropy(&rho));
        observer_states.push(rho);
    }
    let system_entropy = von_neumann_entropy(&state.reduced(&[0])?);
    Ok(ChainResult { global_state: state, observer_states, distributions, entropies, system_entropy })
}

/// Probability chain `p_n(l) = Σ p_1(i) p_2(ij) … p_n(kl)` with
/// `p_n(kl) = |U⁽ⁿ⁾_kl|²`, evaluated as a product of transition matrices.
pub fn chain_rule_distributions(spec: &ChainSpec) -> Result<Vec<ProbDist>, ChainError> {
    spec.validate()?;
    let d = spec.dim();
    let mut p: Vec<f64> = spec.initial.iter().map(|a| a.norm_sqr()).collect();
    let mut out = vec![ProbDist::new(p.clone(), labels(d), 1e-10)?];
    for u in &spec.overlaps {
        p = (0..d).map(|j| (0..d).map(|i| p[i] * u[(i, j)].norm_sqr()).sum()).collect();
        out.push(ProbDist::new(p.clone(), labels(d), 1e-10)?);
    }
    Ok(out)
}

/// Observer 2's distribution had observer 1 never interacted:
/// `p_B(j) = |Σ_i α_i U_ij|²`.
pub fn unmeasured_comparison(spec: &ChainSpec) -> Result<ProbDist, ChainError> {
    spec.validate()?;
    let u = spec.overlaps.first().ok_or(ChainError::TooShort)?;
    let d = spec.dim();
    let probs = (0..d).map(|j| (0..d).map(|i| spec.initial[i] * u[(i, j)]).sum::<C64>().norm_sqr()).collect();
    Ok(ProbDist::new(probs, labels(d), 1e-10)?)
}

/// Entropies of successive observers together with the two arrow checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyArrow {
    pub entropies: Vec<f64>,
    pub system_entropy: f64,
    /// Largest decrease `S_n − S_{n+1}` found (≤ 0 for a clean arrow).
    pub worst_decrease: f64,
    pub monotone: bool,
    pub system_matches_last: bool,
}

pub fn entropy_sequence(result: &ChainResult) -> EntropyArrow {
    let entropies = result.entropies.clone();
    let worst_decrease = entropies.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let last = *entropies.last().unwrap_or(&0.0);
    EntropyArrow {
        monotone: worst_decrease <= ENTROPY_TOL,
        system_matches_last: (result.system_entropy - last).abs() <= ENTROPY_TOL,
        worst_decrease: if entropies.len() < 2 { 0.0 } else { worst_decrease },
        system_entropy: result.system_entropy,
        entropies,
    }
}

/// Shannon entropy of each distribution, for comparison with the von
/// Neumann entropies of the observers.
pub fn distribution_entropies(dists: &[ProbDist]) -> Vec<f64> {
    dists.iter().map(|p| shannon_entropy(&p.probs)).collect()
}

/// Observer states for a detector that misses the `|1⟩` transition with
/// amplitude `γ`: first with detector and observer lumped into one system
/// (`α|00⟩ + γ|10⟩ + δ|11⟩`), then with the detector as a separate factor
/// (`α|000⟩ + γ|100⟩ + δ|111⟩`).
pub fn inefficient_detector(alpha: C64, gamma: C64, delta: C64) -> Result<(DensityOp, DensityOp), ChainError> {
    let norm = (alpha.norm_sqr() + gamma.norm_sqr() + delta.norm_sqr()).sqrt();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(ChainError::NotNormalized(norm));
    }
    let z = C64::new(0.0, 0.0);
    let qa = Ket::new(vec![alpha, z, gamma, delta], vec![2, 2])?;
    let mut qda = vec![z; 8];
    qda[0] = alpha;
    qda[4] = gamma;
    qda[7] = delta;
    let qda = Ket::new(qda, vec![2, 2, 2])?;
    Ok((qa.reduced(&[1])?, qda.reduced(&[2])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::preferred_basis;
    use crate::random::{random_amplitudes, random_unitary};
    use rand::SeedableRng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn hadamard() -> DMatrix<C64> {
        crate::hilbert::gates::hadamard()
    }

    /// Exhaustive sum over all index tuples of the chain rule.
    fn index_sum_oracle(spec: &ChainSpec) -> Vec<f64> {
        let d = spec.dim();
        let n = spec.observers();
        let mut out = vec![0.0; d];
        let total = d.pow(n as u32);
        for t in 0..total {
            let idx = crate::hilbert::unflatten(t, &vec![d; n]);
            let mut p = spec.initial[idx[0]].norm_sqr();
            for s in 1..n {
                p *= spec.overlaps[s - 1][(idx[s - 1], idx[s])].norm_sqr();
            }
            out[idx[n - 1]] += p;
        }
        out
    }

    #[test]
    fn two_observers_follow_overlap_squares() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let alpha = random_amplitudes(&mut rng, 3);
        let u = random_unitary(&mut rng, 3);
        let spec = ChainSpec::new(alpha.clone(), vec![u.clone()]).unwrap();
        let res = run_chain(&spec).unwrap();
        for i in 0..3 {
            assert!((res.distributions[0].probs[i] - alpha[i].norm_sqr()).abs() < 1e-12);
            let pb: f64 = (0..3).map(|k| alpha[k].norm_sqr() * u[(k, i)].norm_sqr()).sum();
            assert!((res.distributions[1].probs[i] - pb).abs() < 1e-12);
        }
        // observer states are diagonal in their computational basis
        for rho in &res.observer_states {
            assert!(rho.max_offdiag() < 1e-12);
        }
    }

    #[test]
    fn identity_overlap_repeats_first_observer() {
        let spec = ChainSpec::new(vec![c(0.6), c(0.8)], vec![DMatrix::identity(2, 2)]).unwrap();
        let res = run_chain(&spec).unwrap();
        assert!(res.distributions[0].max_abs_diff(&res.distributions[1]) < 1e-14);
        assert!((res.entropies[0] - res.entropies[1]).abs() < 1e-12);
    }

    #[test]
    fn qutrit_chain_matches_index_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let spec = ChainSpec::new(
            random_amplitudes(&mut rng, 3),
            vec![random_unitary(&mut rng, 3), random_unitary(&mut rng, 3)],
        )
        .unwrap();
        let res = run_chain(&spec).unwrap();
        let oracle = index_sum_oracle(&spec);
        for (a, b) in res.distributions[2].probs.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        let rule = chain_rule_distributions(&spec).unwrap();
        assert!(rule[2].max_abs_diff(&res.distributions[2]) < 1e-12);
    }

    #[test]
    fn global_state_stays_pure() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec = ChainSpec::new(random_amplitudes(&mut rng, 2), vec![random_unitary(&mut rng, 2); 2]).unwrap();
        let res = run_chain(&spec).unwrap();
        assert_eq!(res.global_state.factor_dims(), &[2, 2, 2, 2]);
        assert!(res.global_state.is_normalized(1e-12));
        assert!(von_neumann_entropy(&res.global_state.density()).abs() < 1e-9);
    }

    #[test]
    fn effective_collapse_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = ChainSpec::new(vec![c(1.0), c(0.0)], vec![hadamard()]).unwrap();
        let with = run_chain(&basis).unwrap().distributions[1].clone();
        let without = unmeasured_comparison(&basis).unwrap();
        for p in with.probs.iter().chain(&without.probs) {
            assert!((p - 0.5).abs() < 1e-14);
        }

        let sup = ChainSpec::new(vec![c(s), c(s)], vec![hadamard()]).unwrap();
        let with = run_chain(&sup).unwrap().distributions[1].clone();
        let without = unmeasured_comparison(&sup).unwrap();
        assert!((without.probs[0] - 1.0).abs() < 1e-14 && without.probs[1].abs() < 1e-14);
        assert!((with.probs[0] - 0.5).abs() < 1e-14 && (with.probs[1] - 0.5).abs() < 1e-14);

        let id = ChainSpec::new(vec![c(0.6), c(0.8)], vec![DMatrix::identity(2, 2)]).unwrap();
        let with = run_chain(&id).unwrap().distributions[1].clone();
        assert!(with.max_abs_diff(&unmeasured_comparison(&id).unwrap()) < 1e-14);
    }

    #[test]
    fn qubit_entropy_arrow_values() {
        let spec = ChainSpec::new(vec![c(0.6), c(0.8)], vec![hadamard()]).unwrap();
        let arrow = entropy_sequence(&run_chain(&spec).unwrap());
        let h = -0.36 * 0.36f64.log2() - 0.64 * 0.64f64.log2();
        assert!((arrow.entropies[0] - h).abs() < 1e-12);
        assert!((arrow.entropies[1] - 1.0).abs() < 1e-12);
        assert!(arrow.monotone && arrow.system_matches_last);
    }

    #[test]
    fn identity_chain_has_constant_entropy() {
        let spec = ChainSpec::new(vec![c(0.6), c(0.8)], vec![DMatrix::identity(2, 2); 3]).unwrap();
        let arrow = entropy_sequence(&run_chain(&spec).unwrap());
        for e in &arrow.entropies {
            assert!((e - arrow.entropies[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_errors() {
        let bad = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            ChainSpec::new(vec![c(1.0), c(0.0)], vec![bad]),
            Err(ChainError::NotUnitary { stage: 2, .. })
        ));
        assert!(matches!(ChainSpec::new(vec![c(1.0), c(1.0)], vec![]), Err(ChainError::NotNormalized(_))));
        let short = ChainSpec::new(vec![c(1.0), c(0.0)], vec![]).unwrap();
        assert_eq!(unmeasured_comparison(&short), Err(ChainError::TooShort));
    }

    #[test]
    fn inefficient_detector_models() {
        let t = 1.0 / 3f64.sqrt();
        let (qa, qda) = inefficient_detector(c(t), c(t), c(t)).unwrap();
        assert!((qa.matrix()[(0, 1)].norm() - 1.0 / 3.0).abs() < 1e-14);
        assert!(qda.max_offdiag() < 1e-15);
        assert!((qda.matrix()[(0, 0)].re - 2.0 / 3.0).abs() < 1e-14);
        assert!((qda.matrix()[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
        let pb = preferred_basis(&qda);
        assert!(!pb.degenerate);
        assert!((pb.basis[0][0] - c(1.0)).norm() < 1e-12);
        assert!((pb.basis[1][1] - c(1.0)).norm() < 1e-12);

        let (qa, qda) = inefficient_detector(c(0.6), c(0.0), c(0.8)).unwrap();
        for rho in [&qa, &qda] {
            assert!(rho.max_offdiag() < 1e-15);
            assert!((rho.matrix()[(0, 0)].re - 0.36).abs() < 1e-14);
        }
        assert!(inefficient_detector(c(1.0), c(1.0), c(0.0)).is_err());
    }
}
