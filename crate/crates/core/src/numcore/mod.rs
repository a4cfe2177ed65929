//! Grids, stencils, linear solvers and SVD shared by both models.

mod dense;
mod grid;
mod stencil;
mod svd;
mod time;
mod tridiag;

pub use dense::{dense_solve, dot, matvec_into, tr_matvec_into, DenseLu};
pub use grid::{BoundaryKind, Grid1D};
pub(crate) use stencil::{cip_w, d1_w, d3_w};
pub use stencil::{cip_apply, fd_apply, fd_apply_into, FdOperator, StencilMatrix};
pub use svd::{thin_svd, thin_svd_full, ThinSvd};
pub use time::TimeScheme;
pub use tridiag::{
    cyclic_solve, thomas_solve, Banded, BandedLu, CyclicLu, CyclicTriDiag, TriDiag, TriDiagLu, PIVOT_TOL,
};

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Builds the three-point operator with rows `(a_i, b_i, c_i)` acting on
/// `(v_{i-1}, v_i, v_{i+1})`, folding ghosts per the grid closure.
pub fn banded_from_rows(grid: &Grid1D, rows: impl Fn(usize) -> [f64; 3]) -> Banded {
    let n = grid.nh;
    let mut lower = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n - 1];
    let (mut ll, mut ur) = (0.0, 0.0);
    for i in 0..n {
        let [a, b, c] = rows(i);
        diag[i] += b;
        if i > 0 {
            lower[i - 1] += a;
        } else if grid.is_periodic() {
            ur += a;
        } else {
            diag[0] += a;
        }
        if i + 1 < n {
            upper[i] += c;
        } else if grid.is_periodic() {
            ll += c;
        } else {
            diag[n - 1] += c;
        }
    }
    let core = TriDiag { lower, diag, upper };
    if grid.is_periodic() {
        Banded::Cyclic(CyclicTriDiag { core, corner_lowleft: ll, corner_upright: ur })
    } else {
        Banded::Plain(core)
    }
}
