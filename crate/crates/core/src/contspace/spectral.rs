//! Fourier route: rows are transformed to `F(k) = ∫ f(x) e^{−ikx} dx`
//! on the periodic wavenumber lattice and the physical projector acts as
//! a phase `e^{−iω(k)Δt}`.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use super::grid::runs_of;
use super::{ContError, Grid, GridFunction, PropagatorKernel, Sampling};
use crate::quadrature::trapezoid_weights;
use crate::C64;

/// `k_n = 2πn/L` in FFT order (`n = 0..N/2−1, −N/2..−1`).
pub fn wavenumbers(grid: &Grid) -> Vec<f64> {
    let n = grid.nx as i64;
    let dk = 2.0 * PI / grid.length();
    (0..n).map(|i| if i < (n + 1) / 2 { i } else { i - n }).map(|i| i as f64 * dk).collect()
}

fn fft(buf: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(buf.len()) } else { planner.plan_fft_forward(buf.len()) };
    plan.process(buf);
}

/// `∫_0^h e^{−iku} du` and `∫_0^h u e^{−iku} du`.
fn linear_moments(k: f64, h: f64) -> (C64, C64) {
    let kh = k * h;
    if kh.abs() < 0.1 {
        // Σ (−ikh)^n h^{m+1} / (n! (n+m+1))
        let z = C64::new(0.0, -kh);
        let (mut m0, mut m1) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut term = C64::new(1.0, 0.0);
        for n in 0..24 {
            m0 += term / (n + 1) as f64;
            m1 += term / (n + 2) as f64;
            term *= z / (n + 1) as f64;
        }
        (m0 * h, m1 * h * h)
    } else {
        let ik = C64::new(0.0, k);
        let e = C64::new(0.0, -kh).exp();
        let m0 = (C64::new(1.0, 0.0) - e) / ik;
        let m1 = -e * h / ik + m0 / ik;
        (m0, m1)
    }
}

/// Transform of one row on `grid`'s wavenumber lattice.
///
/// `Smooth` rows use the trigonometric interpolant, so this is the scaled
/// DFT. `Truncated` rows use the exact transform of the piecewise-linear
/// interpolant on each support run (zero outside), which keeps the
/// sharp edges of region-restricted data from aliasing.
pub fn forward_row(grid: &Grid, row: &[C64], sampling: Sampling) -> Vec<C64> {
    let ks = wavenumbers(grid);
    let dx = grid.dx();
    match sampling {
        Sampling::Smooth => {
            let mut buf = row.to_vec();
            fft(&mut buf, false);
            buf.iter().zip(&ks).map(|(f, &k)| f * C64::new(0.0, -k * grid.x_min).exp() * dx).collect()
        }
        Sampling::Truncated => {
            let runs = runs_of(row);
            ks.par_iter().map(|&k| filon_x(grid, row, &runs, k)).collect()
        }
    }
}

/// Exact transform at `k` of the piecewise-linear interpolant of `row` on
/// `runs`.
fn filon_x(grid: &Grid, row: &[C64], runs: &[super::Run], k: f64) -> C64 {
    let dx = grid.dx();
    let (m0, m1) = linear_moments(k, dx);
    let (w0, w1) = (m0 - m1 / dx, m1 / dx);
    let step = C64::new(0.0, -k * dx).exp();
    let mut acc = C64::new(0.0, 0.0);
    for r in runs {
        let mut ph = C64::new(0.0, -k * grid.x(r.start)).exp();
        for c in r.start..r.end {
            acc += ph * (w0 * row[c] + w1 * row[c + 1]);
            ph *= step;
        }
    }
    acc
}

/// Samples on the `x` nodes of the trigonometric series with
/// coefficients `F`.
pub fn inverse_row(grid: &Grid, spectrum: &[C64]) -> Vec<C64> {
    let ks = wavenumbers(grid);
    let mut buf: Vec<C64> = spectrum.iter().zip(&ks).map(|(f, &k)| f * C64::new(0.0, k * grid.x_min).exp()).collect();
    fft(&mut buf, true);
    let l = grid.length();
    buf.iter_mut().for_each(|v| *v /= l);
    buf
}

/// The same series at an arbitrary `x`.
pub fn evaluate_at(grid: &Grid, spectrum: &[C64], x: f64) -> C64 {
    let ks = wavenumbers(grid);
    spectrum.iter().zip(&ks).map(|(f, &k)| f * C64::new(0.0, k * x).exp()).sum::<C64>() / grid.length()
}

/// Free propagation of a smooth row by `dt`.
pub fn evolve_row(grid: &Grid, row: &[C64], kernel: &PropagatorKernel, dt: f64) -> Vec<C64> {
    let ks = wavenumbers(grid);
    let f: Vec<C64> = forward_row(grid, row, Sampling::Smooth)
        .iter()
        .zip(&ks)
        .map(|(f, &k)| f * C64::new(0.0, -kernel.omega(k) * dt).exp())
        .collect();
    inverse_row(grid, &f)
}

/// Spectrum at `t_ref` of the physical state `Pψ`, `∫ dt e^{−iω(k)(t_ref − t)} F_t(k)`.
///
/// `Smooth` data uses trapezoid weights over the rows (a single row has
/// weight 1). `Truncated` data on several rows is taken as bilinear on
/// every cell whose four corners lie in the support, and the time
/// integral is done exactly per wavenumber.
pub fn physical_state(psi: &GridFunction, kernel: &PropagatorKernel, t_ref: f64) -> Vec<C64> {
    let g = &psi.grid;
    if psi.sampling == Sampling::Truncated && g.nt > 1 {
        return bilinear_state(psi, kernel, t_ref);
    }
    let ks = wavenumbers(g);
    let wt = trapezoid_weights(g.nt, g.dt());
    let rows: Vec<Vec<C64>> = (0..g.nt)
        .into_par_iter()
        .filter(|&j| psi.row(j).iter().any(|v| v.norm() > super::SUPPORT_EPS))
        .map(|j| {
            let dt = t_ref - g.t(j);
            forward_row(g, psi.row(j), psi.sampling)
                .iter()
                .zip(&ks)
                .map(|(f, &k)| f * C64::new(0.0, -kernel.omega(k) * dt).exp() * wt[j])
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); g.nx];
    for r in &rows {
        out.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    out
}

/// One time interval of bilinear data: both rows masked to the cells
/// whose four corners lie in the support.
struct Slab {
    t: f64,
    lo: Vec<C64>,
    hi: Vec<C64>,
    runs: Vec<super::Run>,
}

fn slabs(psi: &GridFunction) -> Vec<Slab> {
    let g = &psi.grid;
    let inside = |v: &C64| v.norm() > super::SUPPORT_EPS;
    (0..g.nt.saturating_sub(1))
        .filter_map(|j| {
            let (lo, hi) = (psi.row(j), psi.row(j + 1));
            let pick = |row: &[C64]| -> Vec<C64> {
                row.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (a, b))| if inside(a) && inside(b) { *v } else { C64::new(0.0, 0.0) })
                    .collect()
            };
            let (lo, hi) = (pick(lo), pick(hi));
            let runs: Vec<_> = runs_of(&lo).into_iter().filter(|r| r.end > r.start).collect();
            (!runs.is_empty()).then(|| Slab { t: g.t(j), lo, hi, runs })
        })
        .collect()
}

/// `∫∫ f(x, t) e^{−ikx} e^{−iω(k)(t_ref − t)} dx dt` of the bilinear data.
fn slab_transform(g: &Grid, slabs: &[Slab], kernel: &PropagatorKernel, k: f64, t_ref: f64) -> C64 {
    let h = g.dt();
    let w = kernel.omega(k);
    let (m0, m1) = linear_moments(-w, h);
    let (w0, w1) = (m0 - m1 / h, m1 / h);
    slabs
        .iter()
        .map(|s| {
            let ph = C64::new(0.0, -w * (t_ref - s.t)).exp();
            ph * (w0 * filon_x(g, &s.lo, &s.runs, k) + w1 * filon_x(g, &s.hi, &s.runs, k))
        })
        .sum()
}

fn bilinear_state(psi: &GridFunction, kernel: &PropagatorKernel, t_ref: f64) -> Vec<C64> {
    let s = slabs(psi);
    wavenumbers(&psi.grid).par_iter().map(|&k| slab_transform(&psi.grid, &s, kernel, k, t_ref)).collect()
}

/// Relative size of the last wavenumber shell at which
/// [`physical_inner_product_extended`] stops.
pub const EXTENSION_TOL: f64 = 1e-11;
/// Largest extended band, in multiples of the lattice band.
pub const MAX_EXTENSION: usize = 512;

/// `⟨ψ|P|φ⟩` for region-restricted (`Truncated`, several rows) data,
/// exact for the bilinear interpolants up to the periodic wavenumber sum,
/// which is carried past the lattice band in doubling shells until a
/// shell adds less than [`EXTENSION_TOL`] of the total. Other data falls
/// back to [`physical_inner_product`].
pub fn physical_inner_product_extended(
    psi: &GridFunction,
    phi: &GridFunction,
    kernel: &PropagatorKernel,
) -> Result<C64, ContError> {
    if !psi.grid.same_x(&phi.grid) {
        return Err(ContError::GridMismatch);
    }
    let bilinear = |f: &GridFunction| f.sampling == Sampling::Truncated && f.grid.nt > 1;
    if !bilinear(psi) || !bilinear(phi) {
        return physical_inner_product(psi, phi, kernel);
    }
    let g = psi.grid;
    let (sa, sb) = (slabs(psi), slabs(phi));
    if sa.is_empty() || sb.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let t_ref = psi.grid.t_min;
    let dk = 2.0 * PI / g.length();
    let term = |n: i64| {
        let k = n as f64 * dk;
        slab_transform(&g, &sa, kernel, k, t_ref).conj() * slab_transform(&phi.grid, &sb, kernel, k, t_ref)
    };
    let shell = |lo: i64, hi: i64| -> C64 {
        let terms: Vec<C64> =
            (lo..hi).into_par_iter().map(|n| if n == 0 { term(0) } else { term(n) + term(-n) }).collect();
        terms.iter().sum()
    };
    let band = (g.nx / 2) as i64;
    let mut total = shell(0, band);
    let mut m = band;
    loop {
        let s = shell(m, 2 * m);
        total += s;
        m *= 2;
        if s.norm() <= EXTENSION_TOL * total.norm() {
            break;
        }
        if m > band * MAX_EXTENSION as i64 {
            return Err(ContError::NotConverged);
        }
    }
    Ok(total / g.length())
}

/// The physical solution generated by `psi`, sampled on the slice `t_out`.
pub fn project(psi: &GridFunction, kernel: &PropagatorKernel, t_out: f64) -> Result<Vec<C64>, ContError> {
    psi.support().ok_or(ContError::EmptySupport)?;
    Ok(inverse_row(&psi.grid, &physical_state(psi, kernel, t_out)))
}

/// `⟨ψ|P|φ⟩ = ∫∫ ψ*(x,t) W(x,t;x',t') φ(x',t')`, evaluated as
/// `(1/L) Σ_k F_ψ*(k) F_φ(k)` at a common reference time. Coincident
/// slices reduce to the ordinary `L²` product.
pub fn physical_inner_product(
    psi: &GridFunction,
    phi: &GridFunction,
    kernel: &PropagatorKernel,
) -> Result<C64, ContError> {
    if !psi.grid.same_x(&phi.grid) {
        return Err(ContError::GridMismatch);
    }
    let t_ref = psi.grid.t_min;
    let a = physical_state(psi, kernel, t_ref);
    let b = physical_state(phi, kernel, t_ref);
    Ok(a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<C64>() / psi.grid.length())
}

pub fn physical_norm_sqr(psi: &GridFunction, kernel: &PropagatorKernel) -> f64 {
    let f = physical_state(psi, kernel, psi.grid.t_min);
    f.iter().map(|v| v.norm_sqr()).sum::<f64>() / psi.grid.length()
}

/// Strang split-step integration of `iħ∂ψ = −ħ²/2m ∂²ψ + Vψ` over time
/// `t` in `steps` steps.
pub fn split_step(
    grid: &Grid,
    row: &[C64],
    kernel: &PropagatorKernel,
    potential: Option<&[f64]>,
    t: f64,
    steps: usize,
) -> Vec<C64> {
    let ks = wavenumbers(grid);
    let h = t / steps.max(1) as f64;
    let kinetic: Vec<C64> = ks.iter().map(|&k| C64::new(0.0, -kernel.omega(k) * h).exp()).collect();
    let half: Option<Vec<C64>> =
        potential.map(|v| v.iter().map(|&v| C64::new(0.0, -v * h / (2.0 * kernel.hbar)).exp()).collect());
    let n = grid.nx as f64;
    let mut psi = row.to_vec();
    for _ in 0..steps.max(1) {
        if let Some(p) = &half {
            psi.iter_mut().zip(p).for_each(|(a, b)| *a *= b);
        }
        fft(&mut psi, false);
        psi.iter_mut().zip(&kinetic).for_each(|(a, b)| *a *= b / n);
        fft(&mut psi, true);
        if let Some(p) = &half {
            psi.iter_mut().zip(p).for_each(|(a, b)| *a *= b);
        }
    }
    psi
}
