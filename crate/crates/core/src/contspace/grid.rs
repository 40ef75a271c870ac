use serde::{Deserialize, Serialize};

use super::ContError;
use crate::C64;

/// Default threshold below which grid values count as outside the support.
pub const SUPPORT_EPS: f64 = 1e-14;

/// Rectangular sampling of the `(x, t)` plane.
///
/// The `x` axis is periodic: `nx` nodes `x_min + i·dx` with
/// `dx = (x_max − x_min)/nx`, so `x_max` itself is not a node. The `t`
/// axis is a closed lattice of `nt` nodes from `t_min` to `t_max`;
/// `nt = 1` is a single slice at `t_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_min: f64, t_max: f64, nt: usize) -> Result<Self, ContError> {
        let g = Self { x_min, x_max, nx, t_min, t_max, nt };
        g.validate()?;
        Ok(g)
    }

    /// Single time slice at `t`.
    pub fn slice(x_min: f64, x_max: f64, nx: usize, t: f64) -> Result<Self, ContError> {
        Self::new(x_min, x_max, nx, t, t, 1)
    }

    /// The default `x ∈ [−20, 20)`, 512-point slice at `t`.
    pub fn default_slice(t: f64) -> Self {
        Self { x_min: -20.0, x_max: 20.0, nx: 512, t_min: t, t_max: t, nt: 1 }
    }

    pub fn validate(&self) -> Result<(), ContError> {
        let finite = [self.x_min, self.x_max, self.t_min, self.t_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err(ContError::InvalidGrid("non-finite bounds".into()));
        }
        if self.nx < 2 {
            return Err(ContError::InvalidGrid(format!("nx = {} must be at least 2", self.nx)));
        }
        if self.x_max <= self.x_min {
            return Err(ContError::InvalidGrid("x_max must exceed x_min".into()));
        }
        if self.nt == 0 {
            return Err(ContError::InvalidGrid("nt must be at least 1".into()));
        }
        if self.nt == 1 && self.t_max != self.t_min {
            return Err(ContError::InvalidGrid("a single slice needs t_min == t_max".into()));
        }
        if self.nt >= 2 && self.t_max <= self.t_min {
            return Err(ContError::InvalidGrid("t_max must exceed t_min".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    /// Zero for a single slice.
    pub fn dt(&self) -> f64 {
        if self.nt < 2 {
            0.0
        } else {
            (self.t_max - self.t_min) / (self.nt - 1) as f64
        }
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|j| self.t(j)).collect()
    }

    /// Nearest `x` node (not wrapped).
    pub fn nearest_x(&self, x: f64) -> usize {
        (((x - self.x_min) / self.dx()).round().max(0.0) as usize).min(self.nx - 1)
    }

    /// Same extent with the same time row structure at another slice.
    pub fn with_slice(&self, t: f64) -> Self {
        Self { t_min: t, t_max: t, nt: 1, ..*self }
    }

    /// Halves both spacings `k` times.
    pub fn refined(&self, k: u32) -> Self {
        let f = 1usize << k;
        Self { nx: self.nx * f, nt: if self.nt < 2 { self.nt } else { (self.nt - 1) * f + 1 }, ..*self }
    }

    /// Same `x` axis.
    pub fn same_x(&self, other: &Grid) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.nx == other.nx
    }
}

/// How a row of samples is continued between nodes when transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Smooth periodic data: trigonometric interpolation.
    Smooth,
    /// Data cut off at the edges of its support (e.g. restricted to a
    /// region): piecewise-cubic interpolation on each support run, zero
    /// outside.
    Truncated,
}

/// Contiguous support range of a row, `start..=end` node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Sampled kinematical amplitude. `values[j * nx + i]` is the value at
/// `(x_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<C64>,
    pub sampling: Sampling,
}

/// Bounding box of the support in node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    pub x: (usize, usize),
    pub t: (usize, usize),
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<C64>, sampling: Sampling) -> Result<Self, ContError> {
        grid.validate()?;
        if values.len() != grid.nx * grid.nt {
            return Err(ContError::InvalidGrid(format!("{} values for a {}x{} grid", values.len(), grid.nx, grid.nt)));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(ContError::NonFinite);
        }
        Ok(Self { grid, values, sampling })
    }

    pub fn zeros(grid: Grid, sampling: Sampling) -> Self {
        Self { values: vec![C64::new(0.0, 0.0); grid.nx * grid.nt], grid, sampling }
    }

    pub fn from_fn<F: Fn(f64, f64) -> C64>(grid: Grid, sampling: Sampling, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.nt);
        for j in 0..grid.nt {
            let t = grid.t(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), t));
            }
        }
        Self { grid, values, sampling }
    }

    /// Single-slice state from samples on `grid`'s `x` axis.
    pub fn slice(grid: Grid, row: Vec<C64>) -> Result<Self, ContError> {
        Self::new(grid, row, Sampling::Smooth)
    }

    pub fn row(&self, j: usize) -> &[C64] {
        &self.values[j * self.grid.nx..(j + 1) * self.grid.nx]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [C64] {
        let nx = self.grid.nx;
        &mut self.values[j * nx..(j + 1) * nx]
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn support(&self) -> Option<Support> {
        self.support_with(SUPPORT_EPS)
    }

    pub fn support_with(&self, eps: f64) -> Option<Support> {
        let mut sup: Option<Support> = None;
        for j in 0..self.grid.nt {
            for (i, v) in self.row(j).iter().enumerate() {
                if v.norm() > eps {
                    sup = Some(match sup {
                        None => Support { x: (i, i), t: (j, j) },
                        Some(s) => Support { x: (s.x.0.min(i), s.x.1.max(i)), t: (s.t.0.min(j), s.t.1.max(j)) },
                    });
                }
            }
        }
        sup
    }

    /// Contiguous support runs of row `j`.
    pub fn runs(&self, j: usize) -> Vec<Run> {
        runs_of(self.row(j))
    }

    pub fn scale(&mut self, s: C64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Ordinary `L²(dx dt)` norm with trapezoid weights in `t` (and unit
    /// weight for a single slice).
    pub fn kinematical_norm_sqr(&self) -> f64 {
        let wt = crate::quadrature::trapezoid_weights(self.grid.nt, self.grid.dt());
        let dx = self.grid.dx();
        (0..self.grid.nt).map(|j| wt[j] * dx * self.row(j).iter().map(|v| v.norm_sqr()).sum::<f64>()).sum()
    }

    /// Rows as `(x, t, re, im)` records.
    pub fn records(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for j in 0..self.grid.nt {
            for i in 0..self.grid.nx {
                let v = self.at(i, j);
                out.push((self.grid.x(i), self.grid.t(j), v.re, v.im));
            }
        }
        out
    }
}

/// Contiguous ranges of `row` where `|value| > SUPPORT_EPS`.
pub fn runs_of(row: &[C64]) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, v) in row.iter().enumerate() {
        let inside = v.norm() > SUPPORT_EPS;
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(Run { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Run { start: s, end: row.len() - 1 });
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spacing() {
        let g = Grid::default_slice(0.0);
        assert_eq!(g.dx(), 0.078125);
        assert_eq!(g.x(256), 0.0);
        assert_eq!(g.dt(), 0.0);
        let r = Grid::new(-20.0, 20.0, 512, 0.0, 1.0, 11).unwrap().refined(2);
        assert_eq!(r.nx, 2048);
        assert_eq!(r.nt, 41);
        assert!((r.dt() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn invalid_grids() {
        assert!(Grid::new(0.0, 1.0, 1, 0.0, 0.0, 1).is_err());
        assert!(Grid::new(1.0, 0.0, 8, 0.0, 0.0, 1).is_err());
        assert!(Grid::new(0.0, 1.0, 8, 0.0, 1.0, 1).is_err());
        assert!(Grid::new(0.0, 1.0, 8, 1.0, 0.0, 3).is_err());
    }

    #[test]
    fn support_and_runs() {
        let g = Grid::new(0.0, 10.0, 10, 0.0, 1.0, 3).unwrap();
        let f = GridFunction::from_fn(g, Sampling::Truncated, |x, t| {
            if (2.0..=4.0).contains(&x) && t > 0.2 || x == 7.0 && t > 0.2 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let s = f.support().unwrap();
        assert_eq!(s.x, (2, 7));
        assert_eq!(s.t, (1, 2));
        assert_eq!(f.runs(2), vec![Run { start: 2, end: 4 }, Run { start: 7, end: 7 }]);
        assert!(f.runs(0).is_empty());
        assert!(GridFunction::zeros(g, Sampling::Smooth).support().is_none());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = Grid::slice(0.0, 1.0, 4, 0.0).unwrap();
        let v = vec![C64::new(f64::NAN, 0.0); 4];
        assert_eq!(GridFunction::new(g, v, Sampling::Smooth), Err(ContError::NonFinite));
    }
}
