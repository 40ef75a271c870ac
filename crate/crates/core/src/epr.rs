//! Entangled pair measured locally by two quantized observers.
//!
//! Factor order is `Q1, A, Q2, B`: Alice's qubit, Alice, Bob's qubit, Bob.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::hilbert::{
    conditional_entropy, gates::unitarity_defect, mutual_information, preferred_basis, trace_distance,
    von_neumann_entropy, DensityOp, HilbertError, Ket,
};
use crate::C64;

pub const Q1: usize = 0;
pub const ALICE: usize = 1;
pub const Q2: usize = 2;
pub const BOB: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EprError {
    #[error("pair amplitudes have norm {0}")]
    NotNormalized(f64),
    #[error("local operation is not a 2x2 unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("no local operation supplied")]
    MissingUnitary,
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EprConfig {
    pub alpha: C64,
    pub beta: C64,
    pub alice_unitary: Option<DMatrix<C64>>,
}

impl EprConfig {
    pub fn new(alpha: C64, beta: C64) -> Self {
        Self { alpha, beta, alice_unitary: None }
    }

    pub fn validate(&self) -> Result<(), EprError> {
        let n = (self.alpha.norm_sqr() + self.beta.norm_sqr()).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(EprError::NotNormalized(n));
        }
        if let Some(u) = &self.alice_unitary {
            let defect = if u.nrows() == 2 { unitarity_defect(u) } else { f64::INFINITY };
            if defect > 1e-10 {
                return Err(EprError::NotUnitary(defect));
            }
        }
        Ok(())
    }
}

/// Order in which the two local measurement interactions are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    AliceFirst,
    BobFirst,
}

fn initial_state(cfg: &EprConfig) -> Result<Ket, EprError> {
    let mut amps = vec![C64::new(0.0, 0.0); 16];
    amps[0] = cfg.alpha;
    // |1⟩|0⟩|1⟩|0⟩
    amps[0b1010] = cfg.beta;
    Ok(Ket::new(amps, vec![2; 4])?)
}

pub fn epr_final_state_ordered(cfg: &EprConfig, order: Ordering) -> Result<Ket, EprError> {
    cfg.validate()?;
    let psi = initial_state(cfg)?;
    let out = match order {
        Ordering::AliceFirst => psi.controlled_shift(Q1, ALICE)?.controlled_shift(Q2, BOB)?,
        Ordering::BobFirst => psi.controlled_shift(Q2, BOB)?.controlled_shift(Q1, ALICE)?,
    };
    Ok(out)
}

/// `α|0⟩|A₀⟩|0⟩|B₀⟩ + β|1⟩|A₁⟩|1⟩|B₁⟩` built from the ready observers by
/// two local CNOTs.
pub fn epr_final_state(cfg: &EprConfig) -> Result<Ket, EprError> {
    epr_final_state_ordered(cfg, Ordering::AliceFirst)
}

/// `(ρ_A, ρ_B, ρ_AB)`.
pub fn epr_reduced(cfg: &EprConfig) -> Result<(DensityOp, DensityOp, DensityOp), EprError> {
    let psi = epr_final_state(cfg)?;
    Ok((psi.reduced(&[ALICE])?, psi.reduced(&[BOB])?, psi.reduced(&[ALICE, BOB])?))
}

/// Trace distance between Bob's state with and without Alice's local
/// unitary on her qubit.
pub fn no_communication_check(cfg: &EprConfig) -> Result<f64, EprError> {
    let u = cfg.alice_unitary.as_ref().ok_or(EprError::MissingUnitary)?;
    let psi = epr_final_state(cfg)?;
    let before = psi.reduced(&[BOB])?;
    let after = psi.apply_local(Q1, u)?.reduced(&[BOB])?;
    Ok(trace_distance(&before, &after))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EprReport {
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
    pub s_a_given_b: f64,
    pub s_b_given_a: f64,
    pub mutual_information: f64,
    /// Probability mass on outcomes where Alice and Bob disagree.
    pub cross_outcome: f64,
    pub global_entropy: f64,
    /// Largest entry of the difference between the two orderings.
    pub order_difference: f64,
    pub no_communication: Option<f64>,
}

pub fn epr_report(cfg: &EprConfig) -> Result<EprReport, EprError> {
    let psi = epr_final_state(cfg)?;
    let other = epr_final_state_ordered(cfg, Ordering::BobFirst)?;
    let (rho_a, rho_b, rho_ab) = epr_reduced(cfg)?;
    let pb = preferred_basis(&rho_ab);
    // weight of |01⟩ and |10⟩ in the preferred basis of ρ_AB
    let cross_outcome = pb.dist.probs.iter().zip(&pb.basis).map(|(p, v)| p * (v[1].norm_sqr() + v[2].norm_sqr())).sum();
    let no_communication = match cfg.alice_unitary {
        Some(_) => Some(no_communication_check(cfg)?),
        None => None,
    };
    Ok(EprReport {
        s_a: von_neumann_entropy(&rho_a),
        s_b: von_neumann_entropy(&rho_b),
        s_ab: von_neumann_entropy(&rho_ab),
        s_a_given_b: conditional_entropy(&rho_ab, &[1])?,
        s_b_given_a: conditional_entropy(&rho_ab, &[0])?,
        mutual_information: mutual_information(&rho_ab, &[0])?,
        cross_outcome,
        global_entropy: von_neumann_entropy(&psi.density()),
        order_difference: (psi.amplitudes() - other.amplitudes()).camax(),
        no_communication,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::schmidt_decompose;
    use crate::random::{random_amplitudes, random_unitary};
    use rand::SeedableRng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn product_case() {
        let cfg = EprConfig::new(c(1.0), c(0.0));
        let psi = epr_final_state(&cfg).unwrap();
        assert_eq!(psi, Ket::basis(&[2; 4], &[0; 4]));
        let r = epr_report(&cfg).unwrap();
        for s in [r.s_a, r.s_b, r.s_ab] {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn bell_pair_schmidt_and_entropies() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cfg = EprConfig::new(c(s), c(s));
        let terms = schmidt_decompose(&epr_final_state(&cfg).unwrap(), &[Q1, ALICE]).unwrap();
        assert_eq!(terms.len(), 2);
        assert!(terms.iter().all(|t| (t.coefficient - s).abs() < 1e-14));
        let r = epr_report(&cfg).unwrap();
        assert!((r.s_a - 1.0).abs() < 1e-12 && (r.s_b - 1.0).abs() < 1e-12 && (r.s_ab - 1.0).abs() < 1e-12);
        assert!(r.s_a_given_b.abs() < 1e-12);
        assert!(r.global_entropy.abs() < 1e-9);
    }

    #[test]
    fn reduced_states_are_diagonal() {
        let cfg = EprConfig::new(c(0.6), c(0.8));
        let (a, b, ab) = epr_reduced(&cfg).unwrap();
        for rho in [&a, &b] {
            assert!((rho.matrix()[(0, 0)].re - 0.36).abs() < 1e-15);
            assert!((rho.matrix()[(1, 1)].re - 0.64).abs() < 1e-15);
            assert!(rho.max_offdiag() < 1e-15);
        }
        assert!((ab.matrix()[(0, 0)].re - 0.36).abs() < 1e-15);
        assert!((ab.matrix()[(3, 3)].re - 0.64).abs() < 1e-15);
        assert!(ab.max_offdiag() < 1e-15);
    }

    #[test]
    fn orderings_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let amps = random_amplitudes(&mut rng, 2);
        let r = epr_report(&EprConfig::new(amps[0], amps[1])).unwrap();
        assert_eq!(r.order_difference, 0.0);
        assert!(r.cross_outcome < 1e-12);
        assert!((r.mutual_information - r.s_a).abs() < 1e-9);
        assert!(r.s_b_given_a.abs() < 1e-9);
    }

    #[test]
    fn no_communication_cases() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut cfg = EprConfig::new(c(s), c(s));
        cfg.alice_unitary = Some(DMatrix::identity(2, 2));
        assert_eq!(no_communication_check(&cfg).unwrap(), 0.0);
        cfg.alice_unitary = Some(crate::hilbert::gates::hadamard());
        assert!(no_communication_check(&cfg).unwrap() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        cfg.alice_unitary = Some(random_unitary(&mut rng, 2));
        assert!(no_communication_check(&cfg).unwrap() < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(matches!(EprConfig::new(c(1.0), c(1.0)).validate(), Err(EprError::NotNormalized(_))));
        let mut cfg = EprConfig::new(c(1.0), c(0.0));
        assert_eq!(no_communication_check(&cfg), Err(EprError::MissingUnitary));
        cfg.alice_unitary = Some(DMatrix::from_element(2, 2, c(1.0)));
        assert!(matches!(cfg.validate(), Err(EprError::NotUnitary(_))));
    }
}
