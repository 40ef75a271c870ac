use serde::Serialize;

use super::experiment::{evolved_wavefunction, DetectorExperiment, Prepared, Readout};
use super::region::{Rect, Region};
use super::PostulateError;
use crate::contspace::{physical_inner_product_extended, project_kernel, runs_of, GridFunction};
use crate::quadrature::trapezoid_weights;
use crate::C64;

#[derive(Debug, Clone, Serialize)]
pub struct BornReport {
    /// Double integral over `R × R` with the kernel.
    pub p_born: f64,
    /// `∫ |φ(X, T)|² dX` at the readout slice.
    pub late_slice: f64,
    pub relative_gap: f64,
    pub consistent: bool,
    pub snapped_region: Vec<Rect>,
}

fn coupling_sqr(exp: &DetectorExperiment) -> f64 {
    (exp.coupling_alpha / exp.kernel.hbar).powi(2)
}

/// `(α/ħ)² ⟨VΨ_R|P|VΨ_R⟩` with `VΨ_R` bilinear on the region cells.
pub(crate) fn born_exact(exp: &DetectorExperiment, p: &Prepared) -> Result<f64, PostulateError> {
    let src = p.source(exp);
    Ok(coupling_sqr(exp) * physical_inner_product_extended(&src, &src, &exp.kernel)?.re)
}

/// Probability that the detector fires, first order in `α`:
/// `(α/ħ)² ∫_R ∫_R Ψ*(x) V W(x;x') V Ψ(x')`. The late-slice norm of the
/// `|1⟩` branch (kernel projection at the readout time) is computed
/// alongside and compared against `xcheck_tol`.
pub fn born_probability(exp: &DetectorExperiment) -> Result<BornReport, PostulateError> {
    let p = exp.prepare()?;
    let snapped_region = p.region.rects.clone();
    if exp.coupling_alpha == 0.0 || exp.potential_v == 0.0 {
        return Ok(BornReport { p_born: 0.0, late_slice: 0.0, relative_gap: 0.0, consistent: true, snapped_region });
    }
    let p_born = born_exact(exp, &p)?;
    let src = p.source(exp);
    let phi = project_kernel(&src, &exp.kernel, exp.readout.t_min())?;
    let late_slice = coupling_sqr(exp) * phi.iter().map(|v| v.norm_sqr()).sum::<f64>() * exp.grid.dx();
    let relative_gap = (late_slice / p_born - 1.0).abs();
    Ok(BornReport { p_born, late_slice, relative_gap, consistent: relative_gap <= exp.xcheck_tol, snapped_region })
}

/// `∫ f dx dt` over the support of a region-restricted function:
/// trapezoid in `t` and the exact integral of the linear interpolant in
/// `x`.
pub fn region_integral(f: &GridFunction) -> C64 {
    let g = f.grid;
    let wt = trapezoid_weights(g.nt, g.dt());
    let dx = g.dx();
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..g.nt {
        let row = f.row(j);
        for r in runs_of(row) {
            let s: C64 = row[r.start..=r.end].iter().sum();
            acc += (s - (row[r.start] + row[r.end]) * 0.5) * dx * wt[j];
        }
    }
    acc
}

/// `|∫_R Ψ|² / |R|`: overlap with the normalized indicator of `R`.
pub fn rr_probability(exp: &DetectorExperiment) -> Result<f64, PostulateError> {
    let p = exp.prepare()?;
    rr_from(exp, &p)
}

fn rr_from(exp: &DetectorExperiment, p: &Prepared) -> Result<f64, PostulateError> {
    let measure = region_integral(&p.indicator()).re;
    if measure <= 0.0 {
        return Err(PostulateError::ZeroMeasure);
    }
    let psi = p.restricted(exp, |row| row.to_vec());
    Ok(region_integral(&psi).norm_sqr() / measure)
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPointReport {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub side: f64,
    /// `Ψ` at the centres.
    pub psi_a: (f64, f64),
    pub psi_b: (f64, f64),
    /// `Ψ` averaged over each square: the value the point stands for.
    pub mean_a: (f64, f64),
    pub mean_b: (f64, f64),
    pub p_rr: f64,
    pub p_born: f64,
    /// Same-square (incoherent) parts.
    pub p_rr_diag: f64,
    pub p_born_diag: f64,
    /// Apparatus factor `P_RR,diag / P_Born,diag`.
    pub kappa: f64,
    /// Kernel coupling between the squares relative to the diagonal.
    pub kernel_overlap: f64,
    pub measured_cross: f64,
    pub predicted_cross: f64,
    pub cross_relative_error: f64,
    /// `P_RR / (κ P_Born)`.
    pub ratio: f64,
    /// Covariant-trace probability for the two-square region.
    pub p_cqi: f64,
}

/// Maximum relative kernel coupling between the two squares for them to
/// count as separated points.
pub const SEPARATION_TOL: f64 = 1e-3;

/// `R` = two squares of side `side` centred on `a` and `b`. The Born
/// probability is brought to the RR scale with `κ` from the same-square
/// terms; the RR excess is compared with `2μ Re[Ψ̄*(a)Ψ̄(b)]`, `μ` being
/// half the square area and `Ψ̄` the square average.
pub fn two_point(
    exp: &DetectorExperiment,
    a: (f64, f64),
    b: (f64, f64),
    side: f64,
) -> Result<TwoPointReport, PostulateError> {
    let with = |rects: Vec<Rect>| DetectorExperiment { region_r: Region::new(rects), ..exp.clone() };
    let (sa, sb) = (Rect::square(a.0, a.1, side), Rect::square(b.0, b.1, side));
    let both = with(vec![sa, sb]);
    let pb = both.prepare()?;
    let area = pb.region.rects[0].area();
    if (pb.region.rects[1].area() - area).abs() > 1e-12 * area {
        return Err(PostulateError::Config("two-point squares snapped to different sizes".into()));
    }
    let p_rr = rr_from(&both, &pb)?;
    let p_born = born_exact(&both, &pb)?;
    let mut p_rr_diag = 0.0;
    let mut p_born_diag = 0.0;
    let mut means = [C64::new(0.0, 0.0); 2];
    for (m, sq) in means.iter_mut().zip([sa, sb]) {
        let e = with(vec![sq]);
        let p = e.prepare()?;
        let measure = region_integral(&p.indicator()).re;
        *m = region_integral(&p.restricted(&e, |row| row.to_vec())) / measure;
        // normalized over the union, so each square carries half the weight
        p_rr_diag += m.norm_sqr() * measure / 2.0;
        p_born_diag += born_exact(&e, &p)?;
    }
    let kernel_overlap = (p_born - p_born_diag).abs() / p_born_diag;
    if kernel_overlap > SEPARATION_TOL {
        return Err(PostulateError::NotSeparated { overlap: kernel_overlap });
    }
    let kappa = p_rr_diag / p_born_diag;
    let psi_a = evolved_wavefunction(exp, a.0, a.1)?;
    let psi_b = evolved_wavefunction(exp, b.0, b.1)?;
    let mu = area / 2.0;
    let predicted_cross = 2.0 * mu * (means[0].conj() * means[1]).re;
    let measured_cross = p_rr - kappa * p_born;
    Ok(TwoPointReport {
        a,
        b,
        side,
        psi_a: (psi_a.re, psi_a.im),
        psi_b: (psi_b.re, psi_b.im),
        mean_a: (means[0].re, means[0].im),
        mean_b: (means[1].re, means[1].im),
        p_rr,
        p_born,
        p_rr_diag,
        p_born_diag,
        kappa,
        kernel_overlap,
        measured_cross,
        predicted_cross,
        cross_relative_error: (measured_cross - predicted_cross).abs() / predicted_cross.abs(),
        ratio: p_rr / (kappa * p_born),
        p_cqi: super::cqi::cqi_probability(&both)?.p_cqi,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkStep {
    pub side: f64,
    pub p_rr: f64,
    pub p_born: f64,
    pub ratio: f64,
    /// `ratio` divided by the same ratio for `Ψ ≡ 1` on the same
    /// geometry, which removes the apparatus factor.
    pub normalized_ratio: f64,
}

/// `P_RR / P_Born` over squares of the given sides centred on `center`,
/// each with a time lattice of `side / 16`.
pub fn shrinking_sequence(
    exp: &DetectorExperiment,
    center: (f64, f64),
    sides: &[f64],
) -> Result<Vec<ShrinkStep>, PostulateError> {
    sides
        .iter()
        .map(|&side| {
            let e = DetectorExperiment {
                region_r: Region::new(vec![Rect::square(center.0, center.1, side)]),
                r_dt: side / 16.0,
                readout: Readout::Slice { t: center.1 + side },
                ..exp.clone()
            };
            let p = e.prepare()?;
            let p_rr = rr_from(&e, &p)?;
            let p_born = born_exact(&e, &p)?;
            let one = p.indicator();
            let measure = region_integral(&one).re;
            let born_one =
                coupling_sqr(&e) * e.potential_v.powi(2) * physical_inner_product_extended(&one, &one, &e.kernel)?.re;
            let ratio = p_rr / p_born;
            Ok(ShrinkStep { side, p_rr, p_born, ratio, normalized_ratio: ratio / (measure / born_one) })
        })
        .collect()
}
