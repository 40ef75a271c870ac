use serde::{Deserialize, Serialize};

use super::PostulateError;
use crate::contspace::Grid;

/// Axis-aligned rectangle `[x_min, x_max] × [t_min, t_max]` in `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, t_min: f64, t_max: f64) -> Self {
        Self { x_min, x_max, t_min, t_max }
    }

    /// Square of side `side` centred on `(x, t)`.
    pub fn square(x: f64, t: f64, side: f64) -> Self {
        Self::new(x - side / 2.0, x + side / 2.0, t - side / 2.0, t + side / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.t_max - self.t_min)
    }

    fn contains(&self, x: f64, t: f64, tol: f64) -> bool {
        x >= self.x_min - tol && x <= self.x_max + tol && t >= self.t_min - tol && t <= self.t_max + tol
    }
}

/// Union of rectangles, sampled on an `x` grid and a time lattice of
/// spacing `dt` anchored at the earliest `t_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub rects: Vec<Rect>,
}

/// A region whose corners sit on lattice nodes, together with the grid
/// of its bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct SnappedRegion {
    pub rects: Vec<Rect>,
    pub grid: Grid,
}

impl Region {
    pub fn new(rects: Vec<Rect>) -> Self {
        Self { rects }
    }

    pub fn validate(&self) -> Result<(), PostulateError> {
        if self.rects.is_empty() {
            return Err(PostulateError::Config("region_R: no rectangles".into()));
        }
        for (i, r) in self.rects.iter().enumerate() {
            let finite = [r.x_min, r.x_max, r.t_min, r.t_max].iter().all(|v| v.is_finite());
            if !finite || r.x_max <= r.x_min || r.t_max <= r.t_min {
                return Err(PostulateError::Config(format!("region_R[{i}]: empty or non-finite rectangle")));
            }
        }
        Ok(())
    }

    pub fn t_range(&self) -> (f64, f64) {
        let lo = self.rects.iter().map(|r| r.t_min).fold(f64::INFINITY, f64::min);
        let hi = self.rects.iter().map(|r| r.t_max).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Total time during which some rectangle is active (overlaps counted
    /// once).
    pub fn time_extent(&self) -> f64 {
        let mut spans: Vec<(f64, f64)> = self.rects.iter().map(|r| (r.t_min, r.t_max)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (a, b) in spans {
            cur = match cur {
                Some((c0, c1)) if a <= c1 => Some((c0, c1.max(b))),
                Some((c0, c1)) => {
                    total += c1 - c0;
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        total + cur.map_or(0.0, |(a, b)| b - a)
    }

    /// Moves every corner to the nearest `x` node of `x_grid` and the
    /// nearest point of the time lattice. Rectangles that collapse are
    /// rejected.
    pub fn snap(&self, x_grid: &Grid, dt: f64) -> Result<SnappedRegion, PostulateError> {
        self.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PostulateError::Config("r_dt must be positive".into()));
        }
        let (t0, _) = self.t_range();
        let snap_t = |t: f64| t0 + ((t - t0) / dt).round() * dt;
        let snap_x = |x: f64| x_grid.x(x_grid.nearest_x(x));
        let mut rects = Vec::with_capacity(self.rects.len());
        for (i, r) in self.rects.iter().enumerate() {
            let s = Rect::new(snap_x(r.x_min), snap_x(r.x_max), snap_t(r.t_min), snap_t(r.t_max));
            if s.x_max <= s.x_min || s.t_max <= s.t_min {
                return Err(PostulateError::Config(format!("region_R[{i}]: smaller than one grid cell")));
            }
            rects.push(s);
        }
        let t_hi = rects.iter().map(|r| r.t_max).fold(f64::NEG_INFINITY, f64::max);
        let nt = ((t_hi - t0) / dt).round() as usize + 1;
        let grid = Grid::new(x_grid.x_min, x_grid.x_max, x_grid.nx, t0, t_hi, nt)
            .map_err(|e| PostulateError::Config(format!("region_R: {e}")))?;
        Ok(SnappedRegion { rects, grid })
    }
}

impl SnappedRegion {
    fn tol(&self) -> f64 {
        1e-9 * self.grid.dx().min(self.grid.dt())
    }

    pub fn contains_node(&self, i: usize, j: usize) -> bool {
        let (x, t) = (self.grid.x(i), self.grid.t(j));
        self.rects.iter().any(|r| r.contains(x, t, self.tol()))
    }

    /// Correction to the row trapezoid weight so that every `x` node gets
    /// its own trapezoid rule in `t`: `1/2` where a rectangle starts or
    /// ends strictly inside the lattice, else `1`.
    pub fn time_factor(&self, i: usize, j: usize) -> f64 {
        if !self.contains_node(i, j) {
            return 0.0;
        }
        let interior = j > 0 && j + 1 < self.grid.nt;
        if !interior {
            return 1.0;
        }
        let inside_before = self.contains_node(i, j - 1);
        let inside_after = self.contains_node(i, j + 1);
        match (inside_before, inside_after) {
            (true, true) => 1.0,
            (false, false) => 0.0,
            _ => 0.5,
        }
    }

    /// Sampling mask including time factors, `values[j * nx + i]`.
    pub fn weights(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut w = Vec::with_capacity(g.nx * g.nt);
        for j in 0..g.nt {
            for i in 0..g.nx {
                w.push(self.time_factor(i, j));
            }
        }
        w
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.grid.t_min, self.grid.t_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_region_snaps_to_nodes() {
        let g = Grid::default_slice(0.0);
        let r = Region::new(vec![Rect::new(-0.5, 0.5, 4.0, 4.2)]);
        let s = r.snap(&g, 0.005).unwrap();
        assert_eq!(s.rects[0].x_min, -0.46875);
        assert_eq!(s.rects[0].x_max, 0.46875);
        assert_eq!(s.grid.nt, 41);
        assert!((s.grid.t_max - 4.2).abs() < 1e-12);
        let refined = Region::new(s.rects.clone()).snap(&g.refined(2), 0.005 / 4.0).unwrap();
        assert_eq!(refined.rects[0].x_min, -0.46875);
        assert_eq!(refined.grid.nt, 161);
    }

    #[test]
    fn time_factors_follow_each_column() {
        let g = Grid::slice(0.0, 10.0, 10, 0.0).unwrap();
        let r = Region::new(vec![Rect::new(1.0, 2.0, 0.0, 4.0), Rect::new(5.0, 6.0, 1.0, 3.0)]);
        let s = r.snap(&g, 1.0).unwrap();
        assert_eq!(s.grid.nt, 5);
        assert_eq!(s.time_factor(1, 0), 1.0);
        assert_eq!(s.time_factor(1, 2), 1.0);
        assert_eq!(s.time_factor(5, 0), 0.0);
        assert_eq!(s.time_factor(5, 1), 0.5);
        assert_eq!(s.time_factor(5, 2), 1.0);
        assert_eq!(s.time_factor(5, 3), 0.5);
        assert_eq!(s.time_factor(3, 2), 0.0);
        assert!((r.time_extent() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_regions() {
        let g = Grid::default_slice(0.0);
        assert!(Region::new(vec![]).snap(&g, 0.01).is_err());
        assert!(Region::new(vec![Rect::new(0.0, 0.01, 0.0, 1.0)]).snap(&g, 0.01).is_err());
        assert!(Region::new(vec![Rect::new(0.0, 1.0, 1.0, 1.0)]).snap(&g, 0.01).is_err());
    }
}
