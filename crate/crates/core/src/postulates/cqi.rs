use nalgebra::DMatrix;
use serde::Serialize;

use super::experiment::DetectorExperiment;
use super::PostulateError;
use crate::contspace::{physical_inner_product, physical_norm_sqr, project, GridFunction, PropagatorKernel, Sampling};
use crate::hilbert::{preferred_basis, DensityOp};
use crate::{C64, I};

/// Eigenvalues of the observer Gram matrix above this count towards the
/// Schmidt rank.
pub const SCHMIDT_TOL: f64 = 1e-12;

/// `Σ_a |a⟩ ⊗ ψ_a(x, t)`: one field on extended configuration space per
/// observer basis state, in flattened observer order.
#[derive(Debug, Clone)]
pub struct JointState {
    pub components: Vec<GridFunction>,
    pub observer_dims: Vec<usize>,
}

/// Box `[x_min, x_max] × [t_min, t_max]` holding the kinematical data of a
/// readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone)]
pub struct CovariantReducedState {
    /// Reduced state of the kept observer factors.
    pub rho: DensityOp,
    pub region_s: ReadoutRegion,
    /// Number of nonzero Schmidt coefficients across the particle/observer
    /// cut.
    pub schmidt_rank: usize,
}

/// `ρ_ab = ⟨ψ_b|P|ψ_a⟩` over all observer states, then traced down to
/// `keep`. Every component must live inside `s` and the physical norm of
/// the joint state must be 1 within `norm_tol`.
pub fn covariant_partial_trace(
    joint: &JointState,
    kernel: &PropagatorKernel,
    s: &ReadoutRegion,
    keep: &[usize],
    norm_tol: f64,
) -> Result<CovariantReducedState, PostulateError> {
    let n = joint.components.len();
    if n == 0 || joint.observer_dims.iter().product::<usize>() != n {
        return Err(PostulateError::Config(format!(
            "{n} components do not match observer dimensions {:?}",
            joint.observer_dims
        )));
    }
    for c in &joint.components {
        if !c.grid.same_x(&joint.components[0].grid) {
            return Err(PostulateError::Cont(crate::contspace::ContError::GridMismatch));
        }
        if let Some(sup) = c.support() {
            let g = c.grid;
            let tol = 1e-9 * g.dx();
            let inside = g.t(sup.t.0) >= s.t_min - tol
                && g.t(sup.t.1) <= s.t_max + tol
                && g.x(sup.x.0) >= s.x_min - tol
                && g.x(sup.x.1) <= s.x_max + tol;
            if !inside {
                return Err(PostulateError::SupportLeak);
            }
        }
    }
    let mut gram = DMatrix::<C64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = if joint.components[a].support().is_none() || joint.components[b].support().is_none() {
                C64::new(0.0, 0.0)
            } else {
                physical_inner_product(&joint.components[b], &joint.components[a], kernel)?
            };
            gram[(a, b)] = v;
            gram[(b, a)] = v.conj();
        }
    }
    let tr = gram.trace().re;
    if (tr - 1.0).abs() > norm_tol {
        return Err(PostulateError::NotNormalized(tr));
    }
    let gram = (&gram + gram.adjoint()).scale(0.5);
    let full = DensityOp::new(gram, joint.observer_dims.clone())?;
    let schmidt_rank = full.eigenvalues().iter().filter(|&&e| e > SCHMIDT_TOL).count();
    let rho = if keep.len() == joint.observer_dims.len() { full } else { full.partial_trace(keep)? };
    Ok(CovariantReducedState { rho, region_s: *s, schmidt_rank })
}

#[derive(Debug, Clone, Serialize)]
pub struct CqiReport {
    pub p_cqi: f64,
    /// `(α/ħ)² ⟨VΨ_R|P|VΨ_R⟩` from the spectral physical norm.
    pub p_norm: f64,
    /// Physical norm of the unnormalized joint state, `1 + p_norm` to first
    /// order.
    pub joint_norm: f64,
    /// Largest off-diagonal element of the apparatus state before cleaning.
    pub offdiag: f64,
    pub schmidt_rank: usize,
    pub region_s: ReadoutRegion,
}

/// Particle ⊗ detector ⊗ apparatus after the coupling and the copy into
/// the apparatus, sampled on the readout region. Components are indexed
/// `2d + a`; only `|00⟩` and `|11⟩` are populated. Returns the joint state
/// normalized in the physical norm together with `p_norm`.
pub fn detector_joint_state(exp: &DetectorExperiment) -> Result<(JointState, ReadoutRegion, f64), PostulateError> {
    exp.validate()?;
    let p = exp.prepare()?;
    let (g, window) = exp.readout.lattice(&exp.grid)?;
    let src = p.source(exp);
    let coupled = exp.coupling_alpha != 0.0 && src.support().is_some();
    let c = exp.coupling_alpha / (I * exp.kernel.hbar);
    let mut psi = GridFunction::zeros(g, Sampling::Smooth);
    let mut phi = GridFunction::zeros(g, Sampling::Smooth);
    for j in 0..g.nt {
        let t = g.t(j);
        for (d, v) in psi.row_mut(j).iter_mut().zip(p.evolved_row(exp, t)) {
            *d = v * window[j];
        }
        if coupled {
            for (d, v) in phi.row_mut(j).iter_mut().zip(project(&src, &exp.kernel, t)?) {
                *d = v * c * window[j];
            }
        }
    }
    let n_psi = physical_norm_sqr(&psi, &exp.kernel);
    let n_phi = if coupled { physical_norm_sqr(&phi, &exp.kernel) } else { 0.0 };
    let scale = C64::new(1.0 / (n_psi + n_phi).sqrt(), 0.0);
    psi.scale(scale);
    phi.scale(scale);
    let zero = GridFunction::zeros(g, Sampling::Smooth);
    let joint = JointState { components: vec![psi, zero.clone(), zero, phi], observer_dims: vec![2, 2] };
    let s = ReadoutRegion { x_min: g.x_min, x_max: g.x_max, t_min: g.t_min, t_max: g.t_max };
    Ok((joint, s, n_phi / n_psi))
}

/// Probability that the apparatus records a click: the weight of the
/// preferred-basis state closest to `|1⟩` in the covariant reduced state
/// of the apparatus.
pub fn cqi_probability(exp: &DetectorExperiment) -> Result<CqiReport, PostulateError> {
    let (joint, s, p_norm) = detector_joint_state(exp)?;
    let red = covariant_partial_trace(&joint, &exp.kernel, &s, &[1], super::NORM_TOL)?;
    let offdiag = red.rho.max_offdiag();
    let clean = red.rho.clean_offdiag(exp.offdiag_tol);
    let basis = preferred_basis(&clean);
    let k = basis.closest_to_basis_state(1);
    Ok(CqiReport {
        p_cqi: basis.dist.probs[k],
        p_norm,
        joint_norm: 1.0 + p_norm,
        offdiag,
        schmidt_rank: red.schmidt_rank,
        region_s: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contspace::{evolve_row, GaussianPacket, Grid};
    use crate::hilbert::Ket;
    use crate::postulates::{born_probability, Readout};

    fn packets(g: &Grid) -> Vec<Vec<C64>> {
        let a = GaussianPacket { x0: -3.0, sigma: 1.0, p0: 1.0, t0: 0.0 };
        let b = GaussianPacket { x0: 1.0, sigma: 0.7, p0: -0.5, t0: 0.0 };
        let k = PropagatorKernel::default();
        vec![a.row(&k, g, g.t_min), b.row(&k, g, g.t_min)]
    }

    /// Entangled `(|0⟩ψ_a + |1⟩ψ_b)/√2` with overlapping packets.
    fn slice_joint(t: f64) -> (JointState, Vec<Vec<C64>>) {
        let g = Grid::default_slice(t);
        let rows = packets(&Grid::default_slice(0.0));
        let k = PropagatorKernel::default();
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| evolve_row(&g, r, &k, t)).collect();
        let comps = rows
            .iter()
            .map(|r| GridFunction::new(g, r.iter().map(|v| v / 2f64.sqrt()).collect(), Sampling::Smooth).unwrap())
            .collect();
        (JointState { components: comps, observer_dims: vec![2] }, rows)
    }

    fn whole(g: &Grid) -> ReadoutRegion {
        ReadoutRegion { x_min: g.x_min, x_max: g.x_max, t_min: g.t_min, t_max: g.t_max }
    }

    /// Standard reduction of the discretized joint state.
    fn oracle(rows: &[Vec<C64>], dx: f64) -> DMatrix<C64> {
        let nx = rows[0].len();
        let mut amps = Vec::with_capacity(rows.len() * nx);
        for r in rows {
            amps.extend(r.iter().map(|v| v * (dx / 2.0).sqrt()));
        }
        let ket = Ket::new(amps, vec![rows.len(), nx]).unwrap();
        ket.reduced(&[0]).unwrap().matrix().clone()
    }

    #[test]
    fn slice_reduction_is_standard_partial_trace() {
        let (joint, rows) = slice_joint(0.7);
        let g = joint.components[0].grid;
        let red = covariant_partial_trace(&joint, &PropagatorKernel::default(), &whole(&g), &[0], 1e-6).unwrap();
        let want = oracle(&rows, g.dx());
        assert!((red.rho.matrix() - want).camax() < 1e-10);
        assert_eq!(red.schmidt_rank, 2);
    }

    #[test]
    fn smeared_reduction_matches_slice() {
        let (joint, rows) = slice_joint(0.0);
        let x = joint.components[0].grid;
        let want = oracle(&rows, x.dx());
        let k = PropagatorKernel::default();
        let (g, w) = Readout::Smeared { t_min: 1.0, t_max: 2.0, nt: 9 }.lattice(&x).unwrap();
        let mut comps: Vec<GridFunction> = rows
            .iter()
            .map(|r| {
                let mut f = GridFunction::zeros(g, Sampling::Smooth);
                for j in 0..g.nt {
                    let ev = evolve_row(&g, r, &k, g.t(j));
                    for (d, v) in f.row_mut(j).iter_mut().zip(ev) {
                        *d = v * w[j];
                    }
                }
                f
            })
            .collect();
        let n: f64 = comps.iter().map(|c| physical_norm_sqr(c, &k)).sum();
        for c in &mut comps {
            c.scale(C64::new(1.0 / n.sqrt(), 0.0));
        }
        let joint = JointState { components: comps, observer_dims: vec![2] };
        let red = covariant_partial_trace(&joint, &k, &whole(&g), &[0], 1e-6).unwrap();
        assert!((red.rho.matrix() - want).camax() < 1e-4);
    }

    #[test]
    fn separable_state_reduces_to_pure() {
        let (mut joint, _) = slice_joint(0.0);
        let first = joint.components[0].clone();
        joint.components[1] = first.clone();
        joint.components[1].scale(I);
        let red =
            covariant_partial_trace(&joint, &PropagatorKernel::default(), &whole(&first.grid), &[0], 1e-6).unwrap();
        assert!((red.rho.purity() - 1.0).abs() < 1e-10);
        assert_eq!(red.schmidt_rank, 1);
    }

    #[test]
    fn rejects_leaks_and_bad_norms() {
        let (joint, _) = slice_joint(0.0);
        let g = joint.components[0].grid;
        let k = PropagatorKernel::default();
        let narrow = ReadoutRegion { x_min: -1.0, ..whole(&g) };
        assert!(matches!(covariant_partial_trace(&joint, &k, &narrow, &[0], 1e-6), Err(PostulateError::SupportLeak)));
        let mut big = joint.clone();
        big.components[0].scale(C64::new(2.0, 0.0));
        assert!(matches!(
            covariant_partial_trace(&big, &k, &whole(&g), &[0], 1e-6),
            Err(PostulateError::NotNormalized(_))
        ));
        let bad = JointState { observer_dims: vec![3], ..joint };
        assert!(covariant_partial_trace(&bad, &k, &whole(&g), &[0], 1e-6).is_err());
    }

    #[test]
    fn benchmark_cqi_matches_born() {
        let e = DetectorExperiment::benchmark();
        let c = cqi_probability(&e).unwrap();
        let b = born_probability(&e).unwrap();
        assert!((c.p_cqi / b.p_born - 1.0).abs() < 1e-3, "{} vs {}", c.p_cqi, b.p_born);
        assert!(c.offdiag < 1e-12);
        assert_eq!(c.schmidt_rank, 2);
    }

    #[test]
    fn cqi_is_independent_of_readout_region() {
        let e = DetectorExperiment::benchmark();
        let p0 = cqi_probability(&e).unwrap().p_cqi;
        for r in [e.readout.shifted(1.5), e.readout.shifted(7.0), Readout::Smeared { t_min: 5.5, t_max: 6.5, nt: 11 }] {
            let p = cqi_probability(&e.with_readout(r)).unwrap().p_cqi;
            assert!((p / p0 - 1.0).abs() < 1e-10, "{r:?}: {p} vs {p0}");
        }
    }

    #[test]
    fn cqi_scales_with_alpha_squared() {
        let e = DetectorExperiment::benchmark();
        let p1 = cqi_probability(&e).unwrap().p_norm;
        let p2 = cqi_probability(&e.with_alpha(0.02)).unwrap().p_norm;
        assert!((p2 / p1 - 4.0).abs() < 1e-10);
        assert_eq!(cqi_probability(&e.with_alpha(0.0)).unwrap().p_cqi, 0.0);
    }

    #[test]
    fn readout_inside_region_is_rejected() {
        let e = DetectorExperiment::benchmark().with_readout(Readout::Slice { t: 4.1 });
        assert!(matches!(cqi_probability(&e), Err(PostulateError::Config(_))));
    }
}
