//! Centered finite-difference operators and the interior-penalty term.
//!
//! Ghost nodes follow [`Grid1D::resolve`]: periodic wrap, or constant
//! extrapolation of the boundary node.

use crate::error::{check_len, Result};
use crate::numcore::Grid1D;

/// Which centered difference to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdOperator {
    /// `(u[i+1] - u[i-1]) / 2dx`
    D,
    /// `(u[i+1] - 2u[i] + u[i-1]) / dx^2`
    D2,
    /// `(u[i+2] - 2u[i+1] + 2u[i-1] - u[i-2]) / 2dx^3`
    D3,
}

impl FdOperator {
    /// Stencil offsets and weights, already divided by the matching power of dx.
    pub fn weights(self, dx: f64) -> Vec<(isize, f64)> {
        match self {
            FdOperator::D => {
                let c = 1.0 / (2.0 * dx);
                vec![(-1, -c), (1, c)]
            }
            FdOperator::D2 => {
                let c = 1.0 / (dx * dx);
                vec![(-1, c), (0, -2.0 * c), (1, c)]
            }
            FdOperator::D3 => {
                let c = 1.0 / (2.0 * dx * dx * dx);
                vec![(-2, -c), (-1, 2.0 * c), (1, -2.0 * c), (2, c)]
            }
        }
    }
}

#[inline]
pub(crate) fn d1_w(w: &[f64; 5], dx: f64) -> f64 {
    (w[3] - w[1]) / (2.0 * dx)
}

#[inline]
pub(crate) fn d2_at(wm: f64, w0: f64, wp: f64, dx: f64) -> f64 {
    (wp - 2.0 * w0 + wm) / (dx * dx)
}

#[inline]
pub(crate) fn d3_w(w: &[f64; 5], dx: f64) -> f64 {
    (w[4] - 2.0 * w[3] + 2.0 * w[1] - w[0]) / (2.0 * dx * dx * dx)
}

/// Interior-penalty contribution at the window centre.
///
/// `v` holds the five values around node j, `lam` the wave speeds at
/// `j-1, j, j+1`.
#[inline]
pub(crate) fn cip_w(v: &[f64; 5], lam: &[f64; 3], d: f64, dx: f64) -> f64 {
    let gm = lam[0] * d2_at(v[0], v[1], v[2], dx);
    let g0 = lam[1] * d2_at(v[1], v[2], v[3], dx);
    let gp = lam[2] * d2_at(v[2], v[3], v[4], dx);
    d * dx * dx * dx * (gp - 2.0 * g0 + gm)
}

/// Applies `op` to `v` on `grid`.
pub fn fd_apply(op: FdOperator, v: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.nh];
    fd_apply_into(op, v, grid, &mut out)?;
    Ok(out)
}

pub fn fd_apply_into(op: FdOperator, v: &[f64], grid: &Grid1D, out: &mut [f64]) -> Result<()> {
    check_len("fd_apply input", v.len(), grid.nh)?;
    check_len("fd_apply output", out.len(), grid.nh)?;
    let dx = grid.dx;
    for (i, o) in out.iter_mut().enumerate() {
        let w = grid.window5(v, i);
        *o = match op {
            FdOperator::D => d1_w(&w, dx),
            FdOperator::D2 => d2_at(w[1], w[2], w[3], dx),
            FdOperator::D3 => d3_w(&w, dx),
        };
    }
    Ok(())
}

/// `J(v, lambda)_j = d dx^3 { l_{j+1} (D2 v)_{j+1} - 2 l_j (D2 v)_j + l_{j-1} (D2 v)_{j-1} }`.
pub fn cip_apply(v: &[f64], lambda: &[f64], d: f64, grid: &Grid1D) -> Result<Vec<f64>> {
    check_len("cip_apply values", v.len(), grid.nh)?;
    check_len("cip_apply wave speeds", lambda.len(), grid.nh)?;
    let mut out = vec![0.0; grid.nh];
    if d == 0.0 {
        return Ok(out);
    }
    for (j, o) in out.iter_mut().enumerate() {
        let w = grid.window5(v, j);
        let lam = grid.window3(lambda, j);
        *o = cip_w(&w, &lam, d, grid.dx);
    }
    Ok(out)
}

/// Sparse row representation of a stencil operator with ghosts folded in.
#[derive(Clone, Debug)]
pub struct StencilMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl StencilMatrix {
    pub fn from_operator(op: FdOperator, grid: &Grid1D) -> Self {
        let weights = op.weights(grid.dx);
        let rows = (0..grid.nh)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
                for &(k, w) in &weights {
                    let col = grid.resolve(i as isize + k);
                    match row.iter_mut().find(|(c, _)| *c == col) {
                        Some(entry) => entry.1 += w,
                        None => row.push((col, w)),
                    }
                }
                row.retain(|(_, w)| *w != 0.0);
                row
            })
            .collect();
        Self { n: grid.nh, rows }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, w)| w * v[c]).sum())
            .collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                out[c] += w * v[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                m[(i, c)] += w;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::BoundaryKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Dense convolution straight from the stencil definition, ghosts built
    /// by explicit padding.
    fn dense_stencil_oracle(op: FdOperator, v: &[f64], grid: &Grid1D) -> Vec<f64> {
        let n = v.len();
        let pad = |k: isize| -> f64 {
            if grid.is_periodic() {
                v[k.rem_euclid(n as isize) as usize]
            } else if k < 0 {
                v[0]
            } else if k >= n as isize {
                v[n - 1]
            } else {
                v[k as usize]
            }
        };
        let h = grid.dx;
        (0..n as isize)
            .map(|i| match op {
                FdOperator::D => (pad(i + 1) - pad(i - 1)) / (2.0 * h),
                FdOperator::D2 => (pad(i + 1) - 2.0 * pad(i) + pad(i - 1)) / (h * h),
                FdOperator::D3 => {
                    (pad(i + 2) - 2.0 * pad(i + 1) + 2.0 * pad(i - 1) - pad(i - 2)) / (2.0 * h * h * h)
                }
            })
            .collect()
    }

    #[test]
    fn derivative_of_linear_data_is_exact_in_the_interior() {
        let grid = Grid1D::periodic(0.0, 10.0, 50).unwrap();
        let v: Vec<f64> = grid.nodes();
        let d = fd_apply(FdOperator::D, &v, &grid).unwrap();
        for &di in &d[1..49] {
            assert!((di - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_difference_of_constant_vanishes() {
        for bc in [BoundaryKind::Periodic, BoundaryKind::Extrapolated] {
            let grid = Grid1D::new(0.0, 1.0, 20, bc).unwrap();
            let d2 = fd_apply(FdOperator::D2, &vec![3.5; 20], &grid).unwrap();
            assert!(d2.iter().all(|x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn second_difference_of_square_is_two() {
        let grid = Grid1D::new(0.0, 2.0, 41, BoundaryKind::Extrapolated).unwrap();
        let v: Vec<f64> = grid.nodes().iter().map(|x| x * x).collect();
        let d2 = fd_apply(FdOperator::D2, &v, &grid).unwrap();
        for &x in &d2[1..40] {
            assert!((x - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn third_difference_matches_dense_oracle() {
        for bc in [BoundaryKind::Periodic, BoundaryKind::Extrapolated] {
            let grid = Grid1D::new(0.0, 3.0, 64, bc).unwrap();
            let v = random_vec(64, 7);
            for op in [FdOperator::D, FdOperator::D2, FdOperator::D3] {
                let got = fd_apply(op, &v, &grid).unwrap();
                let want = dense_stencil_oracle(op, &v, &grid);
                let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-13 * scale, "{op:?} {bc:?}");
                }
                let mat = StencilMatrix::from_operator(op, &grid).apply(&v);
                for (g, w) in mat.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-13 * scale);
                }
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_argument_error() {
        let grid = Grid1D::periodic(0.0, 1.0, 10).unwrap();
        assert!(fd_apply(FdOperator::D, &[1.0; 9], &grid).is_err());
        assert!(cip_apply(&[1.0; 10], &[1.0; 9], 1.0, &grid).is_err());
    }

    #[test]
    fn cip_annihilates_quadratics_with_constant_speed() {
        let grid = Grid1D::new(0.0, 1.0, 30, BoundaryKind::Extrapolated).unwrap();
        let v: Vec<f64> = grid.nodes().iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let j = cip_apply(&v, &vec![2.0; 30], 1.0, &grid).unwrap();
        let scale = grid.dx.powi(3) * 2.0 * 6.0 / grid.dx.powi(2);
        for &x in &j[3..27] {
            assert!(x.abs() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn cip_with_zero_coefficient_is_zero() {
        let grid = Grid1D::periodic(0.0, 1.0, 16).unwrap();
        let v = random_vec(16, 1);
        let j = cip_apply(&v, &vec![1.0; 16], 0.0, &grid).unwrap();
        assert!(j.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cip_matches_direct_three_term_formula() {
        let grid = Grid1D::periodic(0.0, 2.0, 40).unwrap();
        let v = random_vec(40, 3);
        let lam: Vec<f64> = random_vec(40, 4).iter().map(|x| 1.0 + x.abs()).collect();
        let got = cip_apply(&v, &lam, 1.3, &grid).unwrap();
        let n = 40usize;
        let h = grid.dx;
        let d2: Vec<f64> = (0..n)
            .map(|i| (v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / (h * h))
            .collect();
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            let want = 1.3 * h.powi(3) * (lam[jp] * d2[jp] - 2.0 * lam[j] * d2[j] + lam[jm] * d2[jm]);
            assert!((got[j] - want).abs() <= 1e-13 * want.abs().max(1e-3));
        }
    }

    #[test]
    fn periodic_derivative_matrix_is_skew() {
        let grid = Grid1D::periodic(0.0, 1.0, 12).unwrap();
        let d = StencilMatrix::from_operator(FdOperator::D, &grid).to_dense();
        let s = &d + d.transpose();
        assert!(s.amax() < 1e-12);
    }
}
