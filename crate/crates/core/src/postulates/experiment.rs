use serde::{Deserialize, Serialize};

use super::region::{Rect, Region, SnappedRegion};
use super::PostulateError;
use crate::contspace::{
    evaluate_at, forward_row, inverse_row, project_kernel_at, wavenumbers, GaussianPacket, Grid, GridFunction,
    PropagatorKernel, Sampling,
};
use crate::{C64, I};

pub const DEFAULT_PERT_TOL: f64 = 0.05;
pub const DEFAULT_XCHECK_TOL: f64 = 1e-3;
pub const DEFAULT_OFFDIAG_TOL: f64 = 1e-8;
pub const NORM_TOL: f64 = 1e-6;

/// Wavefunction prepared on the slice `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialState {
    Gaussian(GaussianPacket),
    /// Samples on the experiment's `x` nodes, `[re, im]` pairs.
    Samples {
        values: Vec<[f64; 2]>,
    },
}

/// Where the detector is read out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Readout {
    /// Constant-time slice.
    Slice { t: f64 },
    /// Kinematical data spread over `nt` slices in `[t_min, t_max]` with a
    /// `sin²` time window.
    Smeared { t_min: f64, t_max: f64, nt: usize },
}

impl Readout {
    pub fn t_min(&self) -> f64 {
        match *self {
            Readout::Slice { t } => t,
            Readout::Smeared { t_min, .. } => t_min,
        }
    }

    pub fn t_max(&self) -> f64 {
        match *self {
            Readout::Slice { t } => t,
            Readout::Smeared { t_max, .. } => t_max,
        }
    }

    /// Time lattice of the readout region and its window weights.
    pub fn lattice(&self, x_grid: &Grid) -> Result<(Grid, Vec<f64>), PostulateError> {
        let bad = |e| PostulateError::Config(format!("readout: {e}"));
        match *self {
            Readout::Slice { t } => {
                Ok((Grid::slice(x_grid.x_min, x_grid.x_max, x_grid.nx, t).map_err(bad)?, vec![1.0]))
            }
            Readout::Smeared { t_min, t_max, nt } => {
                if nt < 3 {
                    return Err(PostulateError::Config("readout.nt must be at least 3".into()));
                }
                let g = Grid::new(x_grid.x_min, x_grid.x_max, x_grid.nx, t_min, t_max, nt).map_err(bad)?;
                let w = (0..nt).map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / nt as f64).sin().powi(2)).collect();
                Ok((g, w))
            }
        }
    }

    /// The same readout moved later by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        match *self {
            Readout::Slice { t } => Readout::Slice { t: t + dt },
            Readout::Smeared { t_min, t_max, nt } => Readout::Smeared { t_min: t_min + dt, t_max: t_max + dt, nt },
        }
    }
}

/// A free particle prepared at `t0`, a two-state detector coupled by
/// `αV(|1⟩⟨0| + |0⟩⟨1|)` inside the region `R`, and a later readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorExperiment {
    /// The `x` axis (its time fields are ignored).
    pub grid: Grid,
    #[serde(default)]
    pub kernel: PropagatorKernel,
    pub psi0: InitialState,
    pub t0: f64,
    pub region_r: Region,
    /// Time-lattice spacing inside `R`.
    pub r_dt: f64,
    pub coupling_alpha: f64,
    pub potential_v: f64,
    pub readout: Readout,
    #[serde(default = "default_pert_tol")]
    pub pert_tol: f64,
    #[serde(default = "default_xcheck_tol")]
    pub xcheck_tol: f64,
    #[serde(default = "default_offdiag_tol")]
    pub offdiag_tol: f64,
}

fn default_pert_tol() -> f64 {
    DEFAULT_PERT_TOL
}

fn default_xcheck_tol() -> f64 {
    DEFAULT_XCHECK_TOL
}

fn default_offdiag_tol() -> f64 {
    DEFAULT_OFFDIAG_TOL
}

/// Geometry and time ordering of an experiment after snapping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub region: SnappedRegion,
    pub psi0: Vec<C64>,
    /// Spectrum of `psi0`.
    pub spectrum0: Vec<C64>,
}

impl DetectorExperiment {
    /// Gaussian at `x = −5` (`σ = 1`, at rest), `R = [−0.5, 0.5] × [4, 4.2]`,
    /// `α = 0.01`, `V = 1`, readout slice `T = 5.2`, `ħ = m = 1`.
    pub fn benchmark() -> Self {
        Self {
            grid: Grid::default_slice(0.0),
            kernel: PropagatorKernel::default(),
            psi0: InitialState::Gaussian(GaussianPacket { x0: -5.0, sigma: 1.0, p0: 0.0, t0: 0.0 }),
            t0: 0.0,
            region_r: Region::new(vec![Rect::new(-0.5, 0.5, 4.0, 4.2)]),
            r_dt: 0.005,
            coupling_alpha: 0.01,
            potential_v: 1.0,
            readout: Readout::Slice { t: 5.2 },
            pert_tol: DEFAULT_PERT_TOL,
            xcheck_tol: DEFAULT_XCHECK_TOL,
            offdiag_tol: DEFAULT_OFFDIAG_TOL,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { coupling_alpha: alpha, ..self.clone() }
    }

    pub fn with_readout(&self, readout: Readout) -> Self {
        Self { readout, ..self.clone() }
    }

    /// `(α|V|/ħ)·(time extent of R)`: the ratio of the second-order to the
    /// first-order amplitude, up to O(1).
    pub fn perturbativity(&self) -> f64 {
        self.coupling_alpha * self.potential_v.abs() / self.kernel.hbar * self.region_r.time_extent()
    }

    /// Structural checks only (no perturbativity).
    pub fn validate_config(&self) -> Result<(), PostulateError> {
        let cfg = |s: String| Err(PostulateError::Config(s));
        self.grid.validate().map_err(|e| PostulateError::Config(format!("grid: {e}")))?;
        self.kernel.validate().map_err(|e| PostulateError::Config(format!("kernel: {e}")))?;
        if !(self.coupling_alpha >= 0.0 && self.coupling_alpha.is_finite()) {
            return cfg(format!("coupling_alpha = {} must be finite and non-negative", self.coupling_alpha));
        }
        if !self.potential_v.is_finite() {
            return cfg("potential_v must be finite".into());
        }
        if !self.t0.is_finite() {
            return cfg("t0 must be finite".into());
        }
        if !(self.r_dt > 0.0 && self.r_dt.is_finite()) {
            return cfg("r_dt must be positive".into());
        }
        for (name, v) in
            [("pert_tol", self.pert_tol), ("xcheck_tol", self.xcheck_tol), ("offdiag_tol", self.offdiag_tol)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return cfg(format!("{name} must be positive"));
            }
        }
        self.region_r.validate()?;
        for (i, r) in self.region_r.rects.iter().enumerate() {
            if r.x_min < self.grid.x_min || r.x_max > self.grid.x_max {
                return cfg(format!("region_R[{i}] leaves the x grid"));
            }
        }
        let (r_lo, r_hi) = self.region_r.t_range();
        if r_lo <= self.t0 {
            return cfg("region_R must start after t0".into());
        }
        if self.readout.t_min() <= r_hi {
            return cfg("readout must lie after region_R".into());
        }
        if let Readout::Smeared { t_min, t_max, .. } = self.readout {
            if t_max <= t_min {
                return cfg("readout.t_max must exceed readout.t_min".into());
            }
        }
        self.initial_row()?;
        Ok(())
    }

    /// Full validation including the first-order check.
    pub fn validate(&self) -> Result<(), PostulateError> {
        self.validate_config()?;
        let p = self.perturbativity();
        if p > self.pert_tol {
            return Err(PostulateError::Perturbativity { estimate: p, tol: self.pert_tol });
        }
        Ok(())
    }

    fn initial_row(&self) -> Result<Vec<C64>, PostulateError> {
        let row: Vec<C64> = match &self.psi0 {
            InitialState::Gaussian(p) => {
                let p = GaussianPacket { t0: self.t0, ..*p };
                p.row(&self.kernel, &self.grid, self.t0)
            }
            InitialState::Samples { values } => {
                if values.len() != self.grid.nx {
                    return Err(PostulateError::Config(format!(
                        "psi0: {} samples for nx = {}",
                        values.len(),
                        self.grid.nx
                    )));
                }
                values.iter().map(|v| C64::new(v[0], v[1])).collect()
            }
        };
        if row.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(PostulateError::Config("psi0: non-finite value".into()));
        }
        let norm: f64 = row.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(PostulateError::Config(format!("psi0: norm² = {norm}, expected 1")));
        }
        Ok(row)
    }

    /// Snapped geometry and the sampled initial state.
    pub fn prepare(&self) -> Result<Prepared, PostulateError> {
        self.validate()?;
        let region = self.region_r.snap(&self.grid, self.r_dt)?;
        let psi0 = self.initial_row()?;
        let spectrum0 = forward_row(&self.grid, &psi0, Sampling::Smooth);
        Ok(Prepared { region, psi0, spectrum0 })
    }

    /// Grid and `R` time lattice halved `k` times. `R` is snapped on the
    /// unrefined grid first so every level integrates the same region;
    /// sampled initial states are refined by spectral interpolation.
    pub fn refined(&self, k: u32) -> Result<Self, PostulateError> {
        if k == 0 {
            return Ok(self.clone());
        }
        let snapped = self.region_r.snap(&self.grid, self.r_dt)?;
        let grid = self.grid.refined(k);
        let psi0 = match &self.psi0 {
            InitialState::Gaussian(p) => InitialState::Gaussian(*p),
            InitialState::Samples { .. } => {
                let row = self.initial_row()?;
                let f = forward_row(&self.grid, &row, Sampling::Smooth);
                let fine_ks = wavenumbers(&grid);
                let coarse_ks = wavenumbers(&self.grid);
                let dk = 2.0 * std::f64::consts::PI / grid.length();
                let mut padded = vec![C64::new(0.0, 0.0); grid.nx];
                for (v, &kc) in f.iter().zip(&coarse_ks) {
                    let n = (kc / dk).round() as i64;
                    let idx = if n >= 0 { n as usize } else { (grid.nx as i64 + n) as usize };
                    debug_assert!((fine_ks[idx] - kc).abs() < 1e-9);
                    padded[idx] = *v;
                }
                let values = inverse_row(&grid, &padded).iter().map(|v| [v.re, v.im]).collect();
                InitialState::Samples { values }
            }
        };
        Ok(Self {
            grid,
            psi0,
            region_r: Region::new(snapped.rects),
            r_dt: self.r_dt / f64::from(1u32 << k),
            ..self.clone()
        })
    }
}

impl Prepared {
    /// `Ψ` on the slice `t` (spectral free evolution of `psi0`).
    pub fn evolved_row(&self, exp: &DetectorExperiment, t: f64) -> Vec<C64> {
        let ks = wavenumbers(&exp.grid);
        let f: Vec<C64> = self
            .spectrum0
            .iter()
            .zip(&ks)
            .map(|(f, &k)| f * C64::new(0.0, -exp.kernel.omega(k) * (t - exp.t0)).exp())
            .collect();
        inverse_row(&exp.grid, &f)
    }

    /// `VΨ` restricted to `R`, on the `R` lattice.
    pub fn source(&self, exp: &DetectorExperiment) -> GridFunction {
        self.restricted(exp, |row| row.iter().map(|v| v * exp.potential_v).collect())
    }

    /// Any slice-wise field restricted to `R` with the region's per-node
    /// time factors.
    pub fn restricted<F: Fn(&[C64]) -> Vec<C64>>(&self, exp: &DetectorExperiment, field: F) -> GridFunction {
        let g = self.region.grid;
        let w = self.region.weights();
        let mut out = GridFunction::zeros(g, Sampling::Truncated);
        for j in 0..g.nt {
            let row = field(&self.evolved_row(exp, g.t(j)));
            let dst = out.row_mut(j);
            for i in 0..g.nx {
                dst[i] = row[i] * w[j * g.nx + i];
            }
        }
        out
    }

    /// The indicator of `R` with the same quadrature weights.
    pub fn indicator(&self) -> GridFunction {
        let g = self.region.grid;
        let values = self.region.weights().iter().map(|&w| C64::new(w, 0.0)).collect();
        GridFunction { grid: g, values, sampling: Sampling::Truncated }
    }
}

/// `Ψ(x, t)`: free evolution of the prepared state.
pub fn evolved_wavefunction(exp: &DetectorExperiment, x: f64, t: f64) -> Result<C64, PostulateError> {
    if t < exp.t0 {
        return Err(PostulateError::BeforePreparation { t, t0: exp.t0 });
    }
    let p = exp.prepare()?;
    let ks = wavenumbers(&exp.grid);
    let f: Vec<C64> = p
        .spectrum0
        .iter()
        .zip(&ks)
        .map(|(f, &k)| f * C64::new(0.0, -exp.kernel.omega(k) * (t - exp.t0)).exp())
        .collect();
    Ok(evaluate_at(&exp.grid, &f, x))
}

/// The `|1⟩`-branch amplitude at `(x, t)`:
/// `(α/iħ) ∫_R W(x,t;x',t') V Ψ(x',t') dx' dt'`, through the kernel route.
pub fn first_order_amplitudes(exp: &DetectorExperiment, xs: &[f64], t: f64) -> Result<Vec<C64>, PostulateError> {
    let p = exp.prepare()?;
    let (_, r_hi) = p.region.t_range();
    if t <= r_hi {
        return Err(PostulateError::ReadoutInsideRegion { t });
    }
    let scale = exp.coupling_alpha / (I * exp.kernel.hbar);
    if exp.coupling_alpha == 0.0 || exp.potential_v == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); xs.len()]);
    }
    let src = p.source(exp);
    Ok(project_kernel_at(&src, &exp.kernel, t, xs)?.into_iter().map(|v| v * scale).collect())
}

pub fn first_order_amplitude(exp: &DetectorExperiment, x: f64, t: f64) -> Result<C64, PostulateError> {
    Ok(first_order_amplitudes(exp, &[x], t)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contspace::split_step;

    #[test]
    fn benchmark_is_valid_and_perturbative() {
        let e = DetectorExperiment::benchmark();
        e.validate().unwrap();
        assert!((e.perturbativity() - 0.002).abs() < 1e-15);
        let strong = e.with_alpha(1.0);
        assert!(matches!(strong.validate(), Err(PostulateError::Perturbativity { .. })));
        strong.validate_config().unwrap();
    }

    #[test]
    fn ordering_is_enforced() {
        let mut e = DetectorExperiment::benchmark();
        e.readout = Readout::Slice { t: 4.1 };
        assert!(matches!(e.validate(), Err(PostulateError::Config(_))));
        let mut e = DetectorExperiment::benchmark();
        e.t0 = 4.5;
        assert!(e.validate().is_err());
        let mut e = DetectorExperiment::benchmark();
        e.psi0 = InitialState::Samples { values: vec![[1.0, 0.0]; 3] };
        assert!(e.validate().is_err());
    }

    #[test]
    fn evolution_identity_and_gaussian() {
        let e = DetectorExperiment::benchmark();
        let p = e.prepare().unwrap();
        let x = e.grid.x(200);
        assert!((evolved_wavefunction(&e, x, 0.0).unwrap() - p.psi0[200]).norm() < 1e-14);
        let packet = GaussianPacket { x0: -5.0, sigma: 1.0, p0: 0.0, t0: 0.0 };
        for &(x, t) in &[(-4.3, 1.0), (0.1, 4.0), (2.7, 6.5)] {
            let want = packet.value(&e.kernel, x, t);
            // periodic images of the spreading packet enter at the 1e-11 level by t = 6.5
            assert!((evolved_wavefunction(&e, x, t).unwrap() - want).norm() < 1e-10);
        }
        assert!(matches!(evolved_wavefunction(&e, 0.0, -1.0), Err(PostulateError::BeforePreparation { .. })));
    }

    #[test]
    fn evolution_matches_split_step() {
        let mut e = DetectorExperiment::benchmark();
        // a non-Gaussian initial state
        let g = e.grid;
        let raw: Vec<C64> = g
            .xs()
            .iter()
            .map(|&x| {
                C64::new((-(x + 3.0).powi(2)).exp() + 0.5 * (-(x - 2.0).powi(2) / 2.0).exp(), 0.3 * (-x * x).exp())
            })
            .collect();
        let n = (raw.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dx()).sqrt();
        e.psi0 = InitialState::Samples { values: raw.iter().map(|v| [v.re / n, v.im / n]).collect() };
        let p = e.prepare().unwrap();
        let got = p.evolved_row(&e, 1.7);
        let want = split_step(&g, &p.psi0, &e.kernel, None, 1.7, 40);
        let err = (got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * g.dx()).sqrt();
        assert!(err < 1e-4);
    }

    #[test]
    fn first_order_amplitude_cases() {
        let e = DetectorExperiment::benchmark();
        assert_eq!(first_order_amplitude(&e.with_alpha(0.0), 0.0, 5.2).unwrap(), C64::new(0.0, 0.0));
        assert!(matches!(first_order_amplitude(&e, 0.0, 4.1), Err(PostulateError::ReadoutInsideRegion { .. })));
        // linearity: two slabs add
        let mut a = e.clone();
        a.region_r = Region::new(vec![Rect::new(-0.5, 0.0, 4.0, 4.2)]);
        let mut b = e.clone();
        b.region_r = Region::new(vec![Rect::new(1.0, 1.5, 4.0, 4.2)]);
        let mut ab = e.clone();
        ab.region_r = Region::new(vec![a.region_r.rects[0], b.region_r.rects[0]]);
        let xs = [-1.0, 0.3, 2.0];
        let fa = first_order_amplitudes(&a, &xs, 5.2).unwrap();
        let fb = first_order_amplitudes(&b, &xs, 5.2).unwrap();
        let fab = first_order_amplitudes(&ab, &xs, 5.2).unwrap();
        for i in 0..3 {
            assert!((fa[i] + fb[i] - fab[i]).norm() < 1e-14 * fab[i].norm().max(1e-300) + 1e-20);
        }
    }

    #[test]
    fn refinement_preserves_the_snapped_region_and_state() {
        let e = DetectorExperiment::benchmark();
        let r = e.refined(1).unwrap();
        assert_eq!(r.grid.nx, 1024);
        assert_eq!(r.region_r.rects[0].x_min, -0.46875);
        let mut s = e.clone();
        let row = e.prepare().unwrap().psi0;
        s.psi0 = InitialState::Samples { values: row.iter().map(|v| [v.re, v.im]).collect() };
        let rs = s.refined(1).unwrap();
        let fine = rs.prepare().unwrap().psi0;
        let exact = r.prepare().unwrap().psi0;
        let err = fine.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
