//! Kernel route: the projector and inner product evaluated directly in
//! `x`, integrating the exact kernel against piecewise-polynomial
//! interpolants of each support run.

use std::collections::HashMap;

use rayon::prelude::*;

use super::grid::runs_of;
use super::{ContError, GridFunction, PropagatorKernel, Run, Sampling};
use crate::quadrature::trapezoid_weights;
use crate::C64;

/// Interpolation stencil size: cubic for smooth rows, linear for
/// truncated ones.
fn stencil(sampling: Sampling) -> usize {
    match sampling {
        Sampling::Smooth => 4,
        Sampling::Truncated => 2,
    }
}

/// Node indices of the Lagrange stencil for cell `c` (nodes `c, c+1`) of
/// run `r`, one-sided near the run ends and shorter for short runs.
fn cell_stencil(c: usize, r: &Run, order: usize) -> (usize, usize) {
    let m = order.min(r.len());
    let lo = c as isize - ((m - 1) / 2) as isize;
    let start = lo.clamp(r.start as isize, (r.end + 1 - m) as isize) as usize;
    (start, m)
}

/// `ℓ_q(s)` for nodes at integer offsets `p` (in cell units) from the
/// cell's left node.
fn lagrange(p: &[f64], s: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for q in 0..p.len() {
        let mut v = 1.0;
        for r in 0..p.len() {
            if r != q {
                v *= (s - p[r]) / (p[q] - p[r]);
            }
        }
        out[q] = v;
    }
    out
}

fn interpolate(row: &[C64], runs: &[Run], order: usize, x_rel: f64) -> C64 {
    // x_rel in cell units from x_min
    let c = x_rel.floor();
    if c < 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ci = c as usize;
    for r in runs {
        if ci == r.end && (x_rel - c).abs() < 1e-12 {
            return row[ci];
        }
        if ci >= r.start && ci < r.end {
            let (start, m) = cell_stencil(ci, r, order);
            let p: Vec<f64> = (0..m).map(|q| (start + q) as f64 - c).collect();
            let l = lagrange(&p, x_rel - c);
            return (0..m).map(|q| row[start + q] * l[q]).sum();
        }
    }
    C64::new(0.0, 0.0)
}

/// The physical solution generated by `psi` at the points `(x, t_out)`:
/// `Σ_j w_j ∫ W(x, t_out; x', t_j) ψ(x', t_j) dx'`, with equal-time rows
/// entering as a delta (the interpolant itself).
pub fn project_kernel_at(
    psi: &GridFunction,
    kernel: &PropagatorKernel,
    t_out: f64,
    xs: &[f64],
) -> Result<Vec<C64>, ContError> {
    psi.support().ok_or(ContError::EmptySupport)?;
    let g = psi.grid;
    let h = g.dx();
    let order = stencil(psi.sampling);
    let wt = trapezoid_weights(g.nt, g.dt());
    let rows: Vec<(usize, Vec<Run>)> =
        (0..g.nt).map(|j| (j, runs_of(psi.row(j)))).filter(|(_, r)| !r.is_empty()).collect();
    Ok(xs
        .par_iter()
        .map(|&x| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, runs) in &rows {
                let row = psi.row(*j);
                let dt = t_out - g.t(*j);
                if dt == 0.0 {
                    acc += interpolate(row, runs, order, (x - g.x_min) / h) * wt[*j];
                    continue;
                }
                for r in runs {
                    for c in r.start..r.end {
                        let (start, m) = cell_stencil(c, r, order);
                        let p: Vec<f64> = (0..m).map(|q| (start + q) as f64 - c as f64).collect();
                        let d = x - g.x(c);
                        // y = x − x_c − u, u ∈ [0, h]
                        let w = kernel.integrate_against(dt, d - h, d, |y| lagrange(&p, (d - y) / h));
                        for q in 0..m {
                            acc += w[q] * row[start + q] * wt[*j];
                        }
                    }
                }
            }
            acc
        })
        .collect())
}

/// [`project_kernel_at`] on every `x` node of the grid.
pub fn project_kernel(psi: &GridFunction, kernel: &PropagatorKernel, t_out: f64) -> Result<Vec<C64>, ContError> {
    project_kernel_at(psi, kernel, t_out, &psi.grid.xs())
}

fn cells(row: &[C64]) -> Vec<usize> {
    runs_of(row).iter().flat_map(|r| r.start..r.end).collect()
}

/// `⟨ψ|P|φ⟩` as a direct double integral over both supports. Rows are
/// taken as piecewise-linear in `x` and combined with trapezoid weights
/// in `t`; each cell pair uses the exact kernel
/// [`PropagatorKernel::linear_pair_kernel`], and equal-time pairs the
/// delta channel `∫ ψ* φ dx`. Both functions must share one grid.
pub fn physical_inner_product_direct(
    psi: &GridFunction,
    phi: &GridFunction,
    kernel: &PropagatorKernel,
) -> Result<C64, ContError> {
    if psi.grid != phi.grid {
        return Err(ContError::GridMismatch);
    }
    let g = psi.grid;
    let h = g.dx();
    let wt = trapezoid_weights(g.nt, g.dt());
    let cp: Vec<Vec<usize>> = (0..g.nt).map(|j| cells(psi.row(j))).collect();
    let cq: Vec<Vec<usize>> = (0..g.nt).map(|j| cells(phi.row(j))).collect();
    let all = cp.iter().chain(&cq).flatten();
    let (lo, hi) = match (all.clone().min(), all.max()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Ok(C64::new(0.0, 0.0)),
    };
    let span = (hi - lo) as isize;
    let mut lags: Vec<usize> = Vec::new();
    for i in 0..g.nt {
        for j in 0..g.nt {
            if !cp[i].is_empty() && !cq[j].is_empty() && i != j {
                lags.push(i.abs_diff(j));
            }
        }
    }
    lags.sort_unstable();
    lags.dedup();
    let tables: HashMap<usize, Vec<[C64; 4]>> = lags
        .par_iter()
        .map(|&n| {
            let dt = n as f64 * g.dt();
            let t: Vec<[C64; 4]> = (-span..=span).map(|o| kernel.linear_pair_kernel(dt, h, o)).collect();
            (n, t)
        })
        .collect();
    let parts: Vec<C64> = (0..g.nt)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            if cp[i].is_empty() {
                return acc;
            }
            let a = psi.row(i);
            for j in 0..g.nt {
                if cq[j].is_empty() {
                    continue;
                }
                let b = phi.row(j);
                let mut v = C64::new(0.0, 0.0);
                if i == j {
                    for &c in cp[i].iter().filter(|c| cq[j].binary_search(c).is_ok()) {
                        let (a0, a1, b0, b1) = (a[c].conj(), a[c + 1].conj(), b[c], b[c + 1]);
                        v += (a0 * b0 * 2.0 + a0 * b1 + a1 * b0 + a1 * b1 * 2.0) * (h / 6.0);
                    }
                } else {
                    let table = &tables[&i.abs_diff(j)];
                    let forward = i > j;
                    for &ci in &cp[i] {
                        let (a0, a1) = (a[ci].conj(), a[ci + 1].conj());
                        for &cj in &cq[j] {
                            let mut k = table[(ci as isize - cj as isize + span) as usize];
                            if !forward {
                                k.iter_mut().for_each(|z| *z = z.conj());
                            }
                            v += a0 * (k[0] * b[cj] + k[1] * b[cj + 1]) + a1 * (k[2] * b[cj] + k[3] * b[cj + 1]);
                        }
                    }
                }
                acc += v * (wt[i] * wt[j]);
            }
            acc
        })
        .collect();
    Ok(parts.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contspace::{
        evaluate_at, evolve_row, physical_inner_product_extended, physical_state, split_step, Grid,
    };

    fn packet(x: f64) -> C64 {
        C64::new((-(x + 2.0).powi(2) / 4.0).exp(), 0.0) * C64::new(0.0, 0.5 * x).exp()
    }

    fn l2_diff(a: &[C64], b: &[C64], dx: f64) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx).sqrt()
    }

    #[test]
    fn stencils_are_one_sided_at_run_ends() {
        let r = Run { start: 3, end: 9 };
        assert_eq!(cell_stencil(3, &r, 4), (3, 4));
        assert_eq!(cell_stencil(5, &r, 4), (4, 4));
        assert_eq!(cell_stencil(8, &r, 4), (6, 4));
        assert_eq!(cell_stencil(3, &Run { start: 3, end: 5 }, 4), (3, 3));
        assert_eq!(cell_stencil(7, &r, 2), (7, 2));
        let l = lagrange(&[-1.0, 0.0, 1.0, 2.0], 0.0);
        assert_eq!(l, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn kernel_projection_matches_split_step() {
        let k = PropagatorKernel::default();
        let g = Grid::default_slice(0.0);
        let row: Vec<C64> = g.xs().iter().map(|&x| packet(x)).collect();
        let psi = GridFunction::slice(g, row.clone()).unwrap();
        let got = project_kernel(&psi, &k, 1.0).unwrap();
        let want = split_step(&g, &row, &k, None, 1.0, 50);
        let err = l2_diff(&got, &want, g.dx());
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn kernel_projection_backwards_in_time() {
        let k = PropagatorKernel::default();
        let g = Grid::default_slice(0.0);
        let row: Vec<C64> = g.xs().iter().map(|&x| packet(x)).collect();
        let psi = GridFunction::slice(g, row.clone()).unwrap();
        let got = project_kernel(&psi, &k, -0.8).unwrap();
        let want = evolve_row(&g, &row, &k, -0.8);
        assert!(l2_diff(&got, &want, g.dx()) < 1e-4);
    }

    #[test]
    fn delta_limit_reproduces_wide_gaussian() {
        let k = PropagatorKernel::default();
        let g = Grid::default_slice(0.0);
        let psi = GridFunction::from_fn(g, Sampling::Smooth, |x, _| C64::new((-x * x / 32.0).exp(), 0.0));
        let xs = [-3.0, -0.7, 0.0, 1.3, 4.1];
        let dt = 1e-3;
        let got = project_kernel_at(&psi, &k, dt, &xs).unwrap();
        let spectrum = physical_state(&psi, &k, dt);
        let want: Vec<C64> = xs.iter().map(|&x| evaluate_at(&g, &spectrum, x)).collect();
        let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = want.iter().map(|v| v.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());
        // and the packet has barely moved
        let drift: f64 = xs.iter().zip(&want).map(|(&x, v)| (v - (-x * x / 32.0).exp()).norm_sqr()).sum();
        assert!((drift / den).sqrt() < 1e-4);
    }

    #[test]
    fn direct_inner_product_converges_to_bilinear_route() {
        let k = PropagatorKernel::default();
        // vanishes smoothly at the edges of its support
        let bump = |x: f64, t: f64| {
            let u = x / 1.5;
            if u.abs() < 1.0 {
                C64::new((1.0 - u * u).powi(3), 0.4 * x) * (1.0 + t)
            } else {
                C64::new(0.0, 0.0)
            }
        };
        let mut gaps = Vec::new();
        for nt in [7, 13, 25] {
            let g = Grid::new(-20.0, 20.0, 512, 0.0, 0.3, nt).unwrap();
            let a = GridFunction::from_fn(g, Sampling::Truncated, bump);
            let b = GridFunction::from_fn(g, Sampling::Truncated, |x, t| bump(x - 0.3, t) * C64::new(0.0, t).exp());
            let direct = physical_inner_product_direct(&a, &b, &k).unwrap();
            let exact = physical_inner_product_extended(&a, &b, &k).unwrap();
            gaps.push((direct - exact).norm() / exact.norm());
            let na = physical_inner_product_direct(&a, &a, &k).unwrap();
            assert!(na.im.abs() < 1e-12 * na.re);
        }
        // trapezoid weights in t against the 1/√Δt kernel converge slowly
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1] && gaps[2] < 3e-4, "{gaps:?}");
    }

    #[test]
    fn direct_rejects_mismatched_grids() {
        let k = PropagatorKernel::default();
        let a = GridFunction::zeros(Grid::default_slice(0.0), Sampling::Truncated);
        let b = GridFunction::zeros(Grid::default_slice(1.0), Sampling::Truncated);
        assert_eq!(physical_inner_product_direct(&a, &b, &k), Err(ContError::GridMismatch));
        assert_eq!(physical_inner_product_direct(&a, &a, &k), Ok(C64::new(0.0, 0.0)));
    }
}
