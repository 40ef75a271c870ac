//! Quadrature rules and special functions used by the oscillatory integrals.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::C64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f` with the rule mapped onto `nsub` equal panels.
    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, nsub: usize, mut f: F) -> C64 {
        let h = (b - a) / nsub as f64;
        let mut acc = C64::new(0.0, 0.0);
        for s in 0..nsub {
            let mid = a + (s as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += f(mid + 0.5 * h * x) * (w * 0.5 * h);
            }
        }
        acc
    }
}

/// Composite trapezoid weights for `n` equally spaced nodes of spacing `h`.
/// A single node gets weight 1 (a delta slice).
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![1.0],
        _ => (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect(),
    }
}

/// Fresnel integrals `(C(x), S(x))` with the `π t² / 2` normalization.
pub fn fresnel(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax < 1e-300 {
        (0.0, 0.0)
    } else if ax < 1.8 {
        fresnel_series(ax)
    } else {
        fresnel_cf(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn fresnel_series(x: f64) -> (f64, f64) {
    // C = Σ (-1)^k (π/2)^{2k} x^{4k+1} / ((2k)! (4k+1)),
    // S = Σ (-1)^k (π/2)^{2k+1} x^{4k+3} / ((2k+1)! (4k+3))
    let t = FRAC_PI_2 * x * x;
    let (mut c, mut s) = (0.0, 0.0);
    let mut term = x; // t^n x / n!
    let mut n = 0usize;
    loop {
        let contrib = term / (2 * n + 1) as f64;
        match n % 4 {
            0 => c += contrib,
            1 => s += contrib,
            2 => c -= contrib,
            _ => s -= contrib,
        }
        if contrib.abs() < 1e-17 * (c.abs() + s.abs()) && n > 2 {
            break;
        }
        n += 1;
        term *= t / n as f64;
        if n > 200 {
            break;
        }
    }
    (c, s)
}

/// Modified Lentz continued fraction for the complementary error function
/// representation of `C + iS` at large argument.
fn fresnel_cf(x: f64) -> (f64, f64) {
    let pix2 = PI * x * x;
    let tiny = 1e-300;
    let mut b = C64::new(1.0, -pix2);
    let mut cc = C64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1.0;
    for k in 2..1000 {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += C64::new(4.0, 0.0);
        d = (d * a + b).inv();
        cc = b + C64::new(a, 0.0) / cc;
        let del = cc * d;
        h *= del;
        if (del - C64::new(1.0, 0.0)).norm() < 1e-16 || k > 998 {
            break;
        }
    }
    h *= C64::new(x, -x);
    let cs = C64::new(0.5, 0.5) * (C64::new(1.0, 0.0) - C64::new((0.5 * pix2).cos(), (0.5 * pix2).sin()) * h);
    (cs.re, cs.im)
}

/// `∫_{y1}^{y2} exp(i β y²) dy` in closed form through the Fresnel integrals.
pub fn fresnel_phase_integral(beta: f64, y1: f64, y2: f64) -> C64 {
    let s = (2.0 * beta / PI).sqrt();
    let (c1, s1) = fresnel(s * y1);
    let (c2, s2) = fresnel(s * y2);
    C64::new(c2 - c1, s2 - s1) / s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(16);
        let sum: f64 = gl.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        // degree 31 is the exactness limit
        let v = gl.integrate(0.0, 1.0, 1, |x| C64::new(x.powi(31), 0.0));
        assert!((v.re - 1.0 / 32.0).abs() < 1e-15);
        let odd = GaussLegendre::new(5);
        assert_eq!(odd.nodes[2], 0.0);
    }

    #[test]
    fn fresnel_reference_values() {
        // Abramowitz & Stegun table values
        let (c, s) = fresnel(1.0);
        assert!((c - 0.779_893_400_376_822_8).abs() < 1e-14);
        assert!((s - 0.438_259_147_390_354_8).abs() < 1e-14);
        let (c, s) = fresnel(3.0);
        assert!((c - 0.605_720_789_297_686_7).abs() < 1e-13);
        assert!((s - 0.496_312_998_967_375_6).abs() < 1e-13);
        let (c, s) = fresnel(1e4);
        assert!((c - 0.5).abs() < 1e-4 && (s - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fresnel_branches_are_continuous() {
        let (c1, s1) = fresnel(1.8 - 1e-14);
        let (c2, s2) = fresnel(1.8 + 1e-14);
        assert!((c1 - c2).abs() < 1e-13 && (s1 - s2).abs() < 1e-13);
    }

    #[test]
    fn phase_integral_matches_quadrature() {
        let gl = GaussLegendre::new(16);
        for &(beta, y1, y2) in &[(0.7, -1.0, 2.0), (40.0, 0.3, 0.9), (5.0, -3.0, -2.5)] {
            let want = gl.integrate(y1, y2, 200, |y| C64::new(0.0, beta * y * y).exp());
            let got = fresnel_phase_integral(beta, y1, y2);
            assert!((got - want).norm() < 1e-12, "{beta}: {got} vs {want}");
        }
    }
}
