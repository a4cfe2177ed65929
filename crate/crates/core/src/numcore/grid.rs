use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the ends of the domain are closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Node `nh` coincides with node 0; stencils wrap around.
    Periodic,
    /// Left value is held by a lift; ghosts are extrapolated on both ends.
    DirichletLeftLifted,
    /// Ghost values copy the nearest boundary node.
    Extrapolated,
}

/// Uniform 1D mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x0: f64,
    pub x1: f64,
    pub nh: usize,
    pub dx: f64,
    pub bc: BoundaryKind,
}

impl Grid1D {
    pub fn new(x0: f64, x1: f64, nh: usize, bc: BoundaryKind) -> Result<Self> {
        if nh < 5 {
            return Err(Error::config(format!("grid needs at least 5 nodes, got {nh}")));
        }
        if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(Error::config(format!("invalid domain [{x0}, {x1}]")));
        }
        let dx = match bc {
            BoundaryKind::Periodic => (x1 - x0) / nh as f64,
            _ => (x1 - x0) / (nh - 1) as f64,
        };
        Ok(Self { x0, x1, nh, dx, bc })
    }

    pub fn periodic(x0: f64, x1: f64, nh: usize) -> Result<Self> {
        Self::new(x0, x1, nh, BoundaryKind::Periodic)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nh).map(|i| self.x(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == BoundaryKind::Periodic
    }

    /// Maps a possibly out-of-range node offset onto a stored node: wraps on
    /// periodic grids, clamps (constant extrapolation) otherwise.
    #[inline]
    pub fn resolve(&self, i: isize) -> usize {
        let n = self.nh as isize;
        if self.bc == BoundaryKind::Periodic {
            i.rem_euclid(n) as usize
        } else {
            i.clamp(0, n - 1) as usize
        }
    }

    /// Signed shortest distance from `a` to `x` honoring periodicity.
    pub fn signed_distance(&self, x: f64, a: f64) -> f64 {
        let d = x - a;
        if self.is_periodic() {
            let l = self.length();
            d - l * (d / l).round()
        } else {
            d
        }
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let raw = ((x - self.x0) / self.dx).round() as isize;
        self.resolve(raw)
    }

    /// Gathers the five values `v[i-2..=i+2]` with boundary handling.
    #[inline]
    pub fn window5(&self, v: &[f64], i: usize) -> [f64; 5] {
        if i >= 2 && i + 2 < self.nh {
            [v[i - 2], v[i - 1], v[i], v[i + 1], v[i + 2]]
        } else {
            let ii = i as isize;
            [
                v[self.resolve(ii - 2)],
                v[self.resolve(ii - 1)],
                v[i],
                v[self.resolve(ii + 1)],
                v[self.resolve(ii + 2)],
            ]
        }
    }

    /// Gathers `v[i-1..=i+1]` with boundary handling.
    #[inline]
    pub fn window3(&self, v: &[f64], i: usize) -> [f64; 3] {
        if i >= 1 && i + 1 < self.nh {
            [v[i - 1], v[i], v[i + 1]]
        } else {
            let ii = i as isize;
            [v[self.resolve(ii - 1)], v[i], v[self.resolve(ii + 1)]]
        }
    }

    /// Node indices covered by a stencil of half-width `half` around `i`,
    /// deduplicated and sorted.
    pub fn stencil_nodes(&self, i: usize, half: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (-(half as isize)..=half as isize)
            .map(|k| self.resolve(i as isize + k))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
