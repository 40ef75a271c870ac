use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Grid, GridFunction, PropagatorKernel, Sampling};
use crate::C64;

/// Free Gaussian wavepacket `(2πσ²)^{-1/4} exp(−(x−x0)²/4σ² + ip0(x−x0)/ħ)`
/// prepared at `t0`, with its closed-form free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub x0: f64,
    pub sigma: f64,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub t0: f64,
}

impl GaussianPacket {
    pub fn value(&self, kernel: &PropagatorKernel, x: f64, t: f64) -> C64 {
        let (m, hbar) = (kernel.mass, kernel.hbar);
        let tau = t - self.t0;
        let k0 = self.p0 / hbar;
        let v = hbar * k0 / m;
        let s = C64::new(1.0, hbar * tau / (2.0 * m * self.sigma * self.sigma));
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.25);
        let y = x - self.x0 - v * tau;
        let phase = C64::new(0.0, k0 * (x - self.x0) - kernel.omega(k0) * tau);
        norm / s.sqrt() * (-(y * y) / (s * 4.0 * self.sigma * self.sigma) + phase).exp()
    }

    /// Samples at `t` on `grid`'s `x` axis.
    pub fn row(&self, kernel: &PropagatorKernel, grid: &Grid, t: f64) -> Vec<C64> {
        grid.xs().iter().map(|&x| self.value(kernel, x, t)).collect()
    }

    /// The packet evaluated on every node of `grid`.
    pub fn sample(&self, kernel: &PropagatorKernel, grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, Sampling::Smooth, |x, t| self.value(kernel, x, t))
    }

    /// `a(t)²` for the width `a = √2 σ` of `exp(−x²/2a²)`:
    /// `a² + (ħ(t−t0)/(m a))²`.
    pub fn width_sqr(&self, kernel: &PropagatorKernel, t: f64) -> f64 {
        let a2 = 2.0 * self.sigma * self.sigma;
        a2 + (kernel.hbar * (t - self.t0)).powi(2) / (kernel.mass * kernel.mass * a2)
    }
}

/// `exp(−(x−x0)²/a² − (t−t0)²/b²)/(2πab)`: a kinematical state localized
/// by finite-resolution position and time readings.
pub fn localized_state(grid: Grid, x0: f64, t0: f64, a: f64, b: f64) -> GridFunction {
    GridFunction::from_fn(grid, Sampling::Smooth, |x, t| {
        C64::new((-(x - x0).powi(2) / (a * a) - (t - t0).powi(2) / (b * b)).exp() / (2.0 * PI * a * b), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contspace::{evolve_row, physical_inner_product, physical_norm_sqr, project, project_kernel};

    fn width_sqr_of(row: &[C64], grid: &Grid) -> f64 {
        let xs = grid.xs();
        let n: f64 = row.iter().map(|v| v.norm_sqr()).sum();
        let mean: f64 = row.iter().zip(&xs).map(|(v, x)| v.norm_sqr() * x).sum::<f64>() / n;
        let var: f64 = row.iter().zip(&xs).map(|(v, x)| v.norm_sqr() * (x - mean).powi(2)).sum::<f64>() / n;
        2.0 * var
    }

    #[test]
    fn closed_form_matches_spectral_evolution() {
        let k = PropagatorKernel::new(1.7, 0.9).unwrap();
        let g = Grid::default_slice(0.0);
        let p = GaussianPacket { x0: -4.0, sigma: 0.9, p0: 1.1, t0: 0.0 };
        let row0 = p.row(&k, &g, 0.0);
        let norm: f64 = row0.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dx();
        assert!((norm - 1.0).abs() < 1e-12);
        let ev = evolve_row(&g, &row0, &k, 2.5);
        let want = p.row(&k, &g, 2.5);
        let err = ev.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn spreading_law_through_kernel_route() {
        let k = PropagatorKernel::default();
        let g = Grid::default_slice(0.0);
        let p = GaussianPacket { x0: 0.0, sigma: 0.8, p0: 0.0, t0: 0.0 };
        let psi = p.sample(&k, g);
        for &t in &[0.5, 1.5, 3.0] {
            let out = project_kernel(&psi, &k, t).unwrap();
            let got = width_sqr_of(&out, &g);
            let want = p.width_sqr(&k, t);
            assert!((got - want).abs() < 1e-4 * want, "{t}: {got} vs {want}");
        }
    }

    #[test]
    fn localized_state_normalizes_and_narrows_to_a_slice() {
        let k = PropagatorKernel::default();
        let (x0, t0, a) = (1.0, 0.5, 1.0);
        let slice = localized_state(Grid::default_slice(t0), x0, t0, a, 1.0);
        let n_slice = physical_norm_sqr(&slice, &k);
        let reference = project(&slice, &k, t0).unwrap();
        let mut errs = Vec::new();
        for &b in &[0.2, 0.1, 0.05, 0.025] {
            let g = Grid::new(-20.0, 20.0, 512, t0 - 5.0 * b, t0 + 5.0 * b, 41).unwrap();
            let mut psi = localized_state(g, x0, t0, a, b);
            let n = physical_norm_sqr(&psi, &k);
            psi.scale(C64::new(1.0 / n.sqrt(), 0.0));
            let pn = physical_inner_product(&psi, &psi, &k).unwrap();
            assert!((pn.re - 1.0).abs() < 1e-12 && pn.im.abs() < 1e-12);
            let out = project(&psi, &k, t0).unwrap();
            let s = 1.0 / n_slice.sqrt();
            let err: f64 = out.iter().zip(&reference).map(|(u, v)| (u - v * s).norm_sqr()).sum::<f64>() * g.dx();
            errs.push(err.sqrt());
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
        assert!(errs[3] < 1e-2, "{errs:?}");
    }
}
