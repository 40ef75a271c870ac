//! Zeno slowdown by entangling a qubit with ancillas, and its time reverse.
//!
//! `Q` evolves as `|Q(t)⟩ = cos ωt |0⟩ + i sin ωt |1⟩`, i.e. under
//! `U(t) = exp(iωtX)`. Every interaction is a CNOT with `Q` as control.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{trace_distance, DensityOp, HilbertError, Ket};
use crate::{C64, I};

/// Above this `ωε` the leading-order statements no longer apply.
pub const LEADING_ORDER_LIMIT: f64 = 0.3;
/// Largest number of ancillas simulated densely.
pub const MAX_ANCILLAS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZenoError {
    #[error("omega must be positive, got {0}")]
    Omega(f64),
    #[error("epsilon must be nonnegative, got {0}")]
    Epsilon(f64),
    #[error("{0} ancillas exceed the dense limit of {MAX_ANCILLAS}")]
    TooManyAncillas(usize),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZenoConfig {
    pub omega: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub n_ancillas: usize,
}

impl ZenoConfig {
    pub fn new(omega: f64, epsilon: f64) -> Self {
        Self { omega, epsilon, theta: 0.0, n_ancillas: 0 }
    }

    pub fn validate(&self) -> Result<(), ZenoError> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(ZenoError::Omega(self.omega));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ZenoError::Epsilon(self.epsilon));
        }
        if self.n_ancillas > MAX_ANCILLAS {
            return Err(ZenoError::TooManyAncillas(self.n_ancillas));
        }
        Ok(())
    }

    /// True when `ωε` is too large for the leading-order picture.
    pub fn beyond_leading_order(&self) -> bool {
        self.omega * self.epsilon > LEADING_ORDER_LIMIT
    }
}

/// `exp(iωtX)`.
pub fn evolution(t: f64, omega: f64) -> DMatrix<C64> {
    let (s, c) = (omega * t).sin_cos();
    DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), I * s, I * s, C64::new(c, 0.0)])
}

pub fn free_qubit(t: f64, omega: f64) -> Ket {
    let (s, c) = (omega * t).sin_cos();
    Ket::from_amplitudes(vec![C64::new(c, 0.0), I * s])
}

/// Register of qubits stored MSB-first, matching the `hilbert` convention.
struct Register {
    n: usize,
    amps: Vec<C64>,
}

impl Register {
    fn new(n: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    fn bit(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    fn apply(&mut self, q: usize, u: &DMatrix<C64>) {
        let b = self.bit(q);
        for i in 0..self.amps.len() {
            if i & b == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | b]);
                self.amps[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                self.amps[i | b] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
            }
        }
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let (bc, bt) = (self.bit(control), self.bit(target));
        for i in 0..self.amps.len() {
            if i & bc != 0 && i & bt == 0 {
                self.amps.swap(i, i | bt);
            }
        }
    }

    fn prob_one(&self, q: usize) -> f64 {
        let b = self.bit(q);
        self.amps.iter().enumerate().filter(|(i, _)| i & b != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    fn into_ket(self) -> Ket {
        Ket::new(self.amps, vec![2; self.n]).expect("qubit register")
    }
}

/// Explicit `Q, A_1..A_n, B` evolution: `n` ancilla CNOTs at equal spacing
/// inside `[0, total]`, Bob's CNOT at `total`. Returns the final global
/// state and Bob's probability of reading `1`.
fn ancilla_pipeline(omega: f64, total: f64, n: usize) -> (Ket, f64) {
    let bob = n + 1;
    let mut reg = Register::new(n + 2);
    let step = evolution(total / (n + 1) as f64, omega);
    for a in 1..=n {
        reg.apply(0, &step);
        reg.cnot(0, a);
    }
    reg.apply(0, &step);
    reg.cnot(0, bob);
    let p = reg.prob_one(bob);
    (reg.into_ket(), p)
}

/// Bob's transition probability at `t = 2ε` without and with an ancilla
/// CNOT at `t = ε`, both by explicit state evolution.
pub fn zeno_pair(cfg: &ZenoConfig) -> Result<(f64, f64), ZenoError> {
    cfg.validate()?;
    let (_, without) = ancilla_pipeline(cfg.omega, 2.0 * cfg.epsilon, 0);
    let (_, with) = ancilla_pipeline(cfg.omega, 2.0 * cfg.epsilon, 1);
    Ok((without, with))
}

/// Bob's transition probability after `n_ancillas` intermediate CNOTs at
/// equal spacing within the fixed total time `2ε`.
pub fn iterated_zeno(cfg: &ZenoConfig) -> Result<f64, ZenoError> {
    cfg.validate()?;
    Ok(ancilla_pipeline(cfg.omega, 2.0 * cfg.epsilon, cfg.n_ancillas).1)
}

/// Same as [`iterated_zeno`] but also returns the global state, for purity
/// checks.
pub fn iterated_zeno_state(cfg: &ZenoConfig) -> Result<(Ket, f64), ZenoError> {
    cfg.validate()?;
    Ok(ancilla_pipeline(cfg.omega, 2.0 * cfg.epsilon, cfg.n_ancillas))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub amp0: (f64, f64),
    pub amp1: (f64, f64),
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeReversedZeno {
    pub trajectory: Vec<TrajectoryPoint>,
    /// Shift recovered at the two sample times.
    pub shift_samples: (f64, f64),
    pub shift: f64,
    /// Largest amplitude left on `A = 1` after the CNOT (zero when the
    /// disentanglement is complete).
    pub residual_entanglement: f64,
}

/// Amplitude `β` on the `|1⟩|1⟩` branch. `Forward` is the branch produced
/// by the Zeno CNOT under `exp(iωtX)`; `Mirrored` flips its sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchPhase {
    Forward,
    Mirrored,
}

/// Starts from `cos θ |0⟩|0⟩ + β |1⟩|1⟩` with `β = ±i sin θ`, disentangles
/// with a CNOT at `t = 0`, evolves `Q` and recovers the time shift of its
/// trajectory by exact inversion at two sample times.
pub fn time_reversed_zeno(cfg: &ZenoConfig) -> Result<TimeReversedZeno, ZenoError> {
    time_reversed_zeno_with(cfg, BranchPhase::Forward)
}

pub fn time_reversed_zeno_with(cfg: &ZenoConfig, phase: BranchPhase) -> Result<TimeReversedZeno, ZenoError> {
    cfg.validate()?;
    let (s, c) = cfg.theta.sin_cos();
    let beta = match phase {
        BranchPhase::Forward => I * s,
        BranchPhase::Mirrored => -I * s,
    };
    let z = C64::new(0.0, 0.0);
    let qa = Ket::new(vec![C64::new(c, 0.0), z, z, beta], vec![2, 2])?;
    let disentangled = qa.controlled_unshift(0, 1)?;
    let residual_entanglement = disentangled.amplitudes()[1].norm().max(disentangled.amplitudes()[3].norm());
    let q0 = Ket::from_amplitudes(vec![disentangled.amplitudes()[0], disentangled.amplitudes()[2]]);

    let period = std::f64::consts::PI / cfg.omega;
    let samples = 33;
    let trajectory: Vec<TrajectoryPoint> = (0..samples)
        .map(|k| {
            let t = period * k as f64 / (samples - 1) as f64;
            let q = q0.apply(&evolution(t, cfg.omega));
            let (a0, a1) = (q.amplitudes()[0], q.amplitudes()[1]);
            TrajectoryPoint { t, amp0: (a0.re, a0.im), amp1: (a1.re, a1.im), p1: a1.norm_sqr() }
        })
        .collect();

    let shift_at = |t: f64| -> f64 {
        let q = q0.apply(&evolution(t, cfg.omega));
        // q = cos ω(t+δ) |0⟩ + i sin ω(t+δ) |1⟩
        let phase = q.amplitudes()[1].im.atan2(q.amplitudes()[0].re);
        phase / cfg.omega - t
    };
    // Sample near the start so the recovered phase stays on the principal branch.
    let t1 = 0.0;
    let t2 = 0.1 / cfg.omega;
    let shift_samples = (shift_at(t1), shift_at(t2));
    Ok(TimeReversedZeno {
        trajectory,
        shift: 0.5 * (shift_samples.0 + shift_samples.1),
        shift_samples,
        residual_entanglement,
    })
}

/// Entangling CNOT at `t_on`, inverse CNOT at `t_off ≥ t_on`, then free
/// evolution. Returns the largest trace distance between `ρ_Q` and the
/// freely evolved state over `[t_off, t_off + 2ε]`.
pub fn zeno_cancellation_at(cfg: &ZenoConfig, t_on: f64, t_off: f64) -> Result<f64, ZenoError> {
    cfg.validate()?;
    let ready = Ket::basis(&[2], &[0]);
    let q = free_qubit(t_on, cfg.omega);
    let mut qa = q.tensor(&ready).controlled_shift(0, 1)?;
    qa = qa.apply_local(0, &evolution(t_off - t_on, cfg.omega))?;
    qa = qa.controlled_unshift(0, 1)?;
    let samples = 17;
    let mut worst = 0.0f64;
    for k in 0..samples {
        let dt = 2.0 * cfg.epsilon * k as f64 / (samples - 1) as f64;
        let evolved = qa.apply_local(0, &evolution(dt, cfg.omega))?;
        let rho_q: DensityOp = evolved.reduced(&[0])?;
        let free = free_qubit(t_off + dt, cfg.omega).density();
        worst = worst.max(trace_distance(&rho_q, &free));
    }
    Ok(worst)
}

/// Same-slice cancellation: CNOT and inverse CNOT both at `t = ε`.
pub fn zeno_cancellation(cfg: &ZenoConfig) -> Result<f64, ZenoError> {
    zeno_cancellation_at(cfg, cfg.epsilon, cfg.epsilon)
}
