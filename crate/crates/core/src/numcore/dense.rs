use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Partial-pivot LU of a dense square matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::arg(format!("dense LU needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        let scale = a.amax();
        let lu = a.clone().lu();
        let u = lu.u();
        for i in 0..u.nrows() {
            let p = u[(i, i)];
            if !p.is_finite() || p.abs() <= 1e-14 * scale || scale == 0.0 {
                return Err(Error::Singular(format!("dense pivot {p:.3e} at row {i}")));
            }
        }
        Ok(Self { lu })
    }

    pub fn n(&self) -> usize {
        self.lu.l().nrows()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("dense solve rhs", rhs.len(), self.n())?;
        let x = self
            .lu
            .solve(&DVector::from_column_slice(rhs))
            .ok_or_else(|| Error::Singular("dense back substitution failed".into()))?;
        Ok(x.as_slice().to_vec())
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::Singular("dense back substitution failed".into()))
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.solve_matrix(&DMatrix::identity(self.n(), self.n()))
    }
}

/// One-shot dense solve with partial pivoting.
pub fn dense_solve(a: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    DenseLu::new(a)?.solve(rhs)
}

/// `y = beta y + A x` for column-major `A`.
pub fn matvec_into(a: &DMatrix<f64>, x: &[f64], beta: f64, y: &mut [f64]) {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), x.len());
    debug_assert_eq!(y.len(), n);
    if beta == 0.0 {
        y.iter_mut().for_each(|v| *v = 0.0);
    } else if beta != 1.0 {
        y.iter_mut().for_each(|v| *v *= beta);
    }
    for (col, &xj) in a.as_slice().chunks_exact(n.max(1)).zip(x) {
        for (yi, ci) in y.iter_mut().zip(col) {
            *yi += xj * ci;
        }
    }
}

/// Unrolled dot product; eight partial sums keep the FMA pipes busy.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (p, q) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += p[k] * q[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `out = A^T f` for column-major `A`.
pub fn tr_matvec_into(a: &DMatrix<f64>, f: &[f64], out: &mut [f64]) {
    let n = a.nrows();
    debug_assert_eq!(f.len(), n);
    for (o, col) in out.iter_mut().zip(a.as_slice().chunks_exact(n.max(1))) {
        *o = dot(col, f);
    }
}
