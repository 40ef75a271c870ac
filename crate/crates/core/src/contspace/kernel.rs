use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ContError;
use crate::quadrature::{fresnel_phase_integral, GaussLegendre};
use crate::{C64, I};

fn gl16() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(16))
}

/// Free-particle two-point amplitude
/// `W(x,t;x',t') = √(m/(2πiħΔt)) exp(im(x−x')²/(2ħΔt))`, `Δt = t − t'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorKernel {
    pub mass: f64,
    pub hbar: f64,
    /// Imaginary-time damping for point evaluation: `|Δt| → |Δt| − iη`.
    #[serde(default)]
    pub regularization_eta: Option<f64>,
}

impl Default for PropagatorKernel {
    fn default() -> Self {
        Self { mass: 1.0, hbar: 1.0, regularization_eta: None }
    }
}

impl PropagatorKernel {
    pub fn new(mass: f64, hbar: f64) -> Result<Self, ContError> {
        let k = Self { mass, hbar, regularization_eta: None };
        k.validate()?;
        Ok(k)
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { regularization_eta: Some(eta), ..self }
    }

    pub fn validate(&self) -> Result<(), ContError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(ContError::InvalidKernel(format!("mass = {}", self.mass)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(ContError::InvalidKernel(format!("hbar = {}", self.hbar)));
        }
        if let Some(eta) = self.regularization_eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(ContError::InvalidKernel(format!("eta = {eta}")));
            }
        }
        Ok(())
    }

    /// Free dispersion `ω(k) = ħk²/2m`.
    pub fn omega(&self, k: f64) -> f64 {
        self.hbar * k * k / (2.0 * self.mass)
    }

    /// `m / (2ħ|Δt|)`, the coefficient of `y²` in the phase.
    pub fn beta(&self, dt: f64) -> f64 {
        self.mass / (2.0 * self.hbar * dt.abs())
    }

    /// `W` at separation `y = x − x'` and `Δt = t − t'`. For `Δt < 0` this
    /// is the complex conjugate of the forward kernel.
    pub fn w(&self, y: f64, dt: f64) -> Result<C64, ContError> {
        if dt == 0.0 {
            return Err(ContError::EqualTime);
        }
        let eta = self.regularization_eta.unwrap_or(0.0);
        let tau = C64::new(dt.abs(), -eta);
        let pref = (C64::new(self.mass, 0.0) / (I * 2.0 * PI * self.hbar * tau)).sqrt();
        let val = pref * (I * self.mass * y * y / (2.0 * self.hbar * tau)).exp();
        Ok(if dt < 0.0 { val.conj() } else { val })
    }

    pub fn propagate_point(&self, x: f64, t: f64, xp: f64, tp: f64) -> Result<C64, ContError> {
        self.w(x - xp, t - tp)
    }

    /// Unregularized prefactor `√(m/(2πiħ|Δt|))` of the forward kernel.
    fn prefactor(&self, dt: f64) -> C64 {
        (C64::new(self.beta(dt) / PI, 0.0) / I).sqrt()
    }

    /// `∫_{lo}^{hi} W(y, Δt) f_k(y) dy` for four smooth weights at once,
    /// using composite Gauss–Legendre with panels sized to the phase
    /// variation of `W` (no regularization needed).
    pub fn integrate_against<F: Fn(f64) -> [f64; 4]>(&self, dt: f64, lo: f64, hi: f64, f: F) -> [C64; 4] {
        let beta = self.beta(dt);
        let (a2, b2) = (lo * lo, hi * hi);
        let theta = if lo * hi >= 0.0 { beta * (b2 - a2).abs() } else { beta * a2.max(b2) };
        let nsub = ((theta / 2.0).ceil() as usize).max(1);
        let gl = gl16();
        let h = (hi - lo) / nsub as f64;
        let mut acc = [C64::new(0.0, 0.0); 4];
        for s in 0..nsub {
            let mid = lo + (s as f64 + 0.5) * h;
            for (xn, wn) in gl.nodes.iter().zip(&gl.weights) {
                let y = mid + 0.5 * h * xn;
                let (sn, cs) = (beta * y * y).sin_cos();
                let ph = C64::new(cs, sn) * (wn * 0.5 * h);
                let fv = f(y);
                for k in 0..4 {
                    acc[k] += ph * fv[k];
                }
            }
        }
        let pref = self.prefactor(dt);
        for a in acc.iter_mut() {
            *a *= pref;
            if dt < 0.0 {
                *a = a.conj();
            }
        }
        acc
    }

    /// Exact kernel between two piecewise-linear cells of width `h` whose
    /// left nodes are `D = offset·h` apart:
    /// `I_ab = ∫_cell ∫_cell' L_a(x) W(x − x', Δt) L_b(x') dx dx'`, with
    /// `L_0`, `L_1` the left and right hat pieces. Returned as
    /// `[I_00, I_01, I_10, I_11]`.
    pub fn linear_pair_kernel(&self, dt: f64, h: f64, offset: isize) -> [C64; 4] {
        // G_ab(v) = h·g_ab(v/h), v = x − x' − D, ascending powers of v/h
        const POS: [[f64; 4]; 4] = [
            [1.0 / 3.0, -0.5, 0.0, 1.0 / 6.0],
            [1.0 / 6.0, -0.5, 0.5, -1.0 / 6.0],
            [1.0 / 6.0, 0.5, -0.5, -1.0 / 6.0],
            [1.0 / 3.0, -0.5, 0.0, 1.0 / 6.0],
        ];
        const NEG: [[f64; 4]; 4] = [
            [1.0 / 3.0, 0.5, 0.0, -1.0 / 6.0],
            [1.0 / 6.0, -0.5, -0.5, 1.0 / 6.0],
            [1.0 / 6.0, 0.5, 0.5, 1.0 / 6.0],
            [1.0 / 3.0, 0.5, 0.0, -1.0 / 6.0],
        ];
        let d = offset as f64 * h;
        let eval = |c: &[[f64; 4]; 4], y: f64| {
            let u = (y - d) / h;
            let mut out = [0.0; 4];
            for k in 0..4 {
                out[k] = h * (c[k][0] + u * (c[k][1] + u * (c[k][2] + u * c[k][3])));
            }
            out
        };
        let right = self.integrate_against(dt, d, d + h, |y| eval(&POS, y));
        let left = self.integrate_against(dt, d - h, d, |y| eval(&NEG, y));
        [right[0] + left[0], right[1] + left[1], right[2] + left[2], right[3] + left[3]]
    }

    /// `∫ W(x, t2; y, t1) W(y, t1; x', t0) dy` by quadrature over `y`, for
    /// forward times and a positive `regularization_eta` on both factors
    /// (which makes the integrand decay). Equals `W(x, t2; x', t0)` with
    /// damping `2η`.
    pub fn compose_numerically(&self, x: f64, t2: f64, t1: f64, xp: f64, t0: f64) -> Result<C64, ContError> {
        let eta = match self.regularization_eta {
            Some(e) if e > 0.0 => e,
            _ => return Err(ContError::InvalidKernel("composition needs eta > 0".into())),
        };
        if !(t2 > t1 && t1 > t0) {
            return Err(ContError::EqualTime);
        }
        let rate = |dt: f64| eta / (dt * dt + eta * eta) * self.mass / (2.0 * self.hbar);
        let slow = rate(t2 - t1).min(rate(t1 - t0));
        let reach = (40.0 / slow).sqrt();
        let (lo, hi) = (x.min(xp) - reach, x.max(xp) + reach);
        let freq = self.mass * (hi - lo) / (self.hbar * (t2 - t1).min(t1 - t0));
        let nsub = ((freq * (hi - lo) / 2.0).ceil() as usize).max(8);
        let mut err = None;
        let v = gl16().integrate(lo, hi, nsub, |y| match (self.w(x - y, t2 - t1), self.w(y - xp, t1 - t0)) {
            (Ok(a), Ok(b)) => a * b,
            (Err(e), _) | (_, Err(e)) => {
                err = Some(e);
                C64::new(0.0, 0.0)
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Closed form of `∫_cell ∫_cell' W(x − x') dx dx'` for two constant
    /// cells of width `h` at left-node separation `D`, via Fresnel
    /// integrals. Independent check of [`Self::linear_pair_kernel`]
    /// (whose four entries sum to this).
    pub fn constant_pair_fresnel(&self, dt: f64, h: f64, d: f64) -> C64 {
        let beta = self.beta(dt);
        let e = |y: f64| C64::new(0.0, beta * y * y).exp();
        // ∫ y e^{iβy²} dy = e^{iβy²} / (2iβ)
        let first = |lo: f64, hi: f64| (e(hi) - e(lo)) / (I * 2.0 * beta);
        let zeroth = |lo: f64, hi: f64| fresnel_phase_integral(beta, lo, hi);
        let right = zeroth(d, d + h) * (h + d) - first(d, d + h);
        let left = zeroth(d - h, d) * (h - d) + first(d - h, d);
        let v = self.prefactor(dt) * (right + left);
        if dt < 0.0 {
            v.conj()
        } else {
            v
        }
    }
}
