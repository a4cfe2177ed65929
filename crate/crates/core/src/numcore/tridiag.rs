//! Tridiagonal and periodic (cyclic) tridiagonal solvers.

use crate::error::{check_len, Error, Result};

/// Pivots at or below this magnitude are treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Banded matrix with `lower[i] = A[i+1][i]`, `upper[i] = A[i][i+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriDiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TriDiag {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::arg("tridiagonal matrix must be non-empty"));
        }
        check_len("tridiagonal lower band", lower.len(), n - 1)?;
        check_len("tridiagonal upper band", upper.len(), n - 1)?;
        Ok(Self { lower, diag, upper })
    }

    pub fn identity(n: usize) -> Self {
        Self { lower: vec![0.0; n.saturating_sub(1)], diag: vec![1.0; n], upper: vec![0.0; n.saturating_sub(1)] }
    }

    /// Constant-coefficient matrix `tridiag(a, b, c)`.
    pub fn constant(n: usize, a: f64, b: f64, c: f64) -> Self {
        Self { lower: vec![a; n - 1], diag: vec![b; n], upper: vec![c; n - 1] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// `self + s * other`, band by band.
    pub fn add_scaled(&self, s: f64, other: &TriDiag) -> TriDiag {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        TriDiag {
            lower: zip(&self.lower, &other.lower),
            diag: zip(&self.diag, &other.diag),
            upper: zip(&self.upper, &other.upper),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.lower[i];
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.lower.iter().chain(&self.diag).chain(&self.upper).all(|&v| v == 0.0)
    }
}

/// Periodic closure of a three-point stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicTriDiag {
    pub core: TriDiag,
    /// `A[n-1][0]`
    pub corner_lowleft: f64,
    /// `A[0][n-1]`
    pub corner_upright: f64,
}

impl CyclicTriDiag {
    pub fn n(&self) -> usize {
        self.core.n()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = self.core.matvec(x);
        y[0] += self.corner_upright * x[n - 1];
        y[n - 1] += self.corner_lowleft * x[0];
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = self.core.to_dense();
        m[(0, n - 1)] += self.corner_upright;
        m[(n - 1, 0)] += self.corner_lowleft;
        m
    }
}

/// Either closure of a three-point operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Banded {
    Plain(TriDiag),
    Cyclic(CyclicTriDiag),
}

impl Banded {
    pub fn n(&self) -> usize {
        match self {
            Banded::Plain(m) => m.n(),
            Banded::Cyclic(m) => m.n(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Banded::Plain(m) => m.matvec(x),
            Banded::Cyclic(m) => m.matvec(x),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Banded::Plain(m) => thomas_solve(m, rhs),
            Banded::Cyclic(m) => cyclic_solve(m, rhs),
        }
    }

    pub fn factor(&self) -> Result<BandedLu> {
        Ok(match self {
            Banded::Plain(m) => BandedLu::Plain(TriDiagLu::new(m)?),
            Banded::Cyclic(m) => BandedLu::Cyclic(CyclicLu::new(m)?),
        })
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        match self {
            Banded::Plain(m) => m.to_dense(),
            Banded::Cyclic(m) => m.to_dense(),
        }
    }

    pub fn core(&self) -> &TriDiag {
        match self {
            Banded::Plain(m) => m,
            Banded::Cyclic(m) => &m.core,
        }
    }

    /// `self + s * other`; both must share the same closure.
    pub fn add_scaled(&self, s: f64, other: &Banded) -> Result<Banded> {
        match (self, other) {
            (Banded::Plain(a), Banded::Plain(b)) => Ok(Banded::Plain(a.add_scaled(s, b))),
            (Banded::Cyclic(a), Banded::Cyclic(b)) => Ok(Banded::Cyclic(CyclicTriDiag {
                core: a.core.add_scaled(s, &b.core),
                corner_lowleft: a.corner_lowleft + s * b.corner_lowleft,
                corner_upright: a.corner_upright + s * b.corner_upright,
            })),
            _ => Err(Error::arg("cannot combine periodic and non-periodic operators")),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Banded::Plain(m) => m.is_zero(),
            Banded::Cyclic(m) => m.core.is_zero() && m.corner_lowleft == 0.0 && m.corner_upright == 0.0,
        }
    }
}

fn thomas_core(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() <= PIVOT_TOL {
        return Err(Error::Singular(format!("pivot {beta:.3e} at row 0")));
    }
    out[0] = rhs[0] / beta;
    for i in 1..n {
        cp[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i - 1] * cp[i - 1];
        if beta.abs() <= PIVOT_TOL || !beta.is_finite() {
            return Err(Error::Singular(format!("pivot {beta:.3e} at row {i}")));
        }
        out[i] = (rhs[i] - lower[i - 1] * out[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        out[i] -= cp[i] * out[i + 1];
    }
    Ok(())
}

/// Solves `m x = rhs` by the Thomas algorithm.
pub fn thomas_solve(m: &TriDiag, rhs: &[f64]) -> Result<Vec<f64>> {
    check_len("thomas_solve rhs", rhs.len(), m.n())?;
    let mut x = vec![0.0; m.n()];
    thomas_core(&m.lower, &m.diag, &m.upper, rhs, &mut x)?;
    Ok(x)
}

/// Solves the periodic system by a Sherman–Morrison correction over two
/// Thomas sweeps.
pub fn cyclic_solve(m: &CyclicTriDiag, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.n();
    check_len("cyclic_solve rhs", rhs.len(), n)?;
    let (a, c) = (m.corner_lowleft, m.corner_upright);
    if a == 0.0 && c == 0.0 {
        return thomas_solve(&m.core, rhs);
    }
    if n < 3 {
        return crate::numcore::dense_solve(&m.to_dense(), rhs);
    }
    let gamma = -m.core.diag[0];
    let mut diag = m.core.diag.clone();
    diag[0] -= gamma;
    diag[n - 1] -= a * c / gamma;
    let mut y = vec![0.0; n];
    thomas_core(&m.core.lower, &diag, &m.core.upper, rhs, &mut y)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let mut z = vec![0.0; n];
    thomas_core(&m.core.lower, &diag, &m.core.upper, &u, &mut z)?;
    let vn = c / gamma;
    let denom = 1.0 + z[0] + vn * z[n - 1];
    if denom.abs() < PIVOT_TOL {
        return Err(Error::Singular(format!("cyclic correction denominator {denom:.3e}")));
    }
    let f = (y[0] + vn * y[n - 1]) / denom;
    for (yi, zi) in y.iter_mut().zip(&z) {
        *yi -= f * zi;
    }
    Ok(y)
}

/// Stored LU factors of a tridiagonal matrix for repeated solves.
#[derive(Clone, Debug)]
pub struct TriDiagLu {
    lower: Vec<f64>,
    inv_beta: Vec<f64>,
    cp: Vec<f64>,
}

impl TriDiagLu {
    pub fn new(m: &TriDiag) -> Result<Self> {
        let n = m.n();
        let mut inv_beta = vec![0.0; n];
        let mut cp = vec![0.0; n.saturating_sub(1)];
        let mut beta = m.diag[0];
        for i in 0..n {
            if i > 0 {
                cp[i - 1] = m.upper[i - 1] * inv_beta[i - 1];
                beta = m.diag[i] - m.lower[i - 1] * cp[i - 1];
            }
            if beta.abs() <= PIVOT_TOL || !beta.is_finite() {
                return Err(Error::Singular(format!("pivot {beta:.3e} at row {i}")));
            }
            inv_beta[i] = 1.0 / beta;
        }
        Ok(Self { lower: m.lower.clone(), inv_beta, cp })
    }

    pub fn n(&self) -> usize {
        self.inv_beta.len()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n();
        x[0] *= self.inv_beta[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_beta[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }
}

/// Stored factors for the periodic system, including the correction vector.
#[derive(Clone, Debug)]
pub struct CyclicLu {
    inner: TriDiagLu,
    z: Vec<f64>,
    vn: f64,
    inv_denom: f64,
}

impl CyclicLu {
    pub fn new(m: &CyclicTriDiag) -> Result<Self> {
        let n = m.n();
        let (a, c) = (m.corner_lowleft, m.corner_upright);
        if a == 0.0 && c == 0.0 {
            return Ok(Self { inner: TriDiagLu::new(&m.core)?, z: vec![0.0; n], vn: 0.0, inv_denom: 1.0 });
        }
        let gamma = -m.core.diag[0];
        let mut core = m.core.clone();
        core.diag[0] -= gamma;
        core.diag[n - 1] -= a * c / gamma;
        let inner = TriDiagLu::new(&core)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = a;
        inner.solve_in_place(&mut z);
        let vn = c / gamma;
        let denom = 1.0 + z[0] + vn * z[n - 1];
        if denom.abs() < PIVOT_TOL {
            return Err(Error::Singular(format!("cyclic correction denominator {denom:.3e}")));
        }
        Ok(Self { inner, z, vn, inv_denom: 1.0 / denom })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.inner.solve_in_place(x);
        if self.vn == 0.0 && self.z.iter().all(|&v| v == 0.0) {
            return;
        }
        let n = x.len();
        let f = (x[0] + self.vn * x[n - 1]) * self.inv_denom;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= f * zi;
        }
    }
}

#[derive(Clone, Debug)]
pub enum BandedLu {
    Plain(TriDiagLu),
    Cyclic(CyclicLu),
}

impl BandedLu {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            BandedLu::Plain(f) => f.solve_in_place(x),
            BandedLu::Cyclic(f) => f.solve_in_place(x),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }

    fn random_dd(n: usize, rng: &mut ChaCha8Rng) -> CyclicTriDiag {
        let lower: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(2.1..4.0) * if rng.gen() { 1.0 } else { -1.0 }).collect();
        CyclicTriDiag {
            core: TriDiag { lower, diag, upper },
            corner_lowleft: rng.gen_range(-1.0..1.0),
            corner_upright: rng.gen_range(-1.0..1.0),
        }
    }

    #[test]
    fn identity_returns_rhs() {
        let rhs = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(thomas_solve(&TriDiag::identity(5), &rhs).unwrap(), rhs);
    }

    #[test]
    fn laplacian_recovers_true_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200;
        let m = TriDiag::constant(n, -1.0, 2.0, -1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = thomas_solve(&m, &m.matvec(&x)).unwrap();
        assert!(rel_err(&got, &x) < 1e-10);
    }

    #[test]
    fn zero_corners_match_thomas() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = random_dd(30, &mut rng);
        c.corner_lowleft = 0.0;
        c.corner_upright = 0.0;
        let rhs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(cyclic_solve(&c, &rhs).unwrap(), thomas_solve(&c.core, &rhs).unwrap());
    }

    #[test]
    fn scaled_identity_cyclic() {
        let c = CyclicTriDiag { core: TriDiag::constant(6, 0.0, 4.0, 0.0), corner_lowleft: 0.0, corner_upright: 0.0 };
        let got = cyclic_solve(&c, &[4.0, 8.0, 12.0, 0.0, -4.0, 2.0]).unwrap();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 0.0, -1.0, 0.5]);
    }

    #[test]
    fn periodic_shifted_laplacian_vs_dense() {
        let n = 64;
        let c = CyclicTriDiag { core: TriDiag::constant(n, -1.0, 2.1, -1.0), corner_lowleft: -1.0, corner_upright: -1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = cyclic_solve(&c, &rhs).unwrap();
        let want = c.to_dense().lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        assert!(rel_err(&got, want.as_slice()) < 1e-12);
    }

    #[test]
    fn singular_pivot_detected() {
        let m = TriDiag::new(vec![1.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(thomas_solve(&m, &[1.0, 1.0, 1.0]), Err(Error::Singular(_))));
        // Periodic Laplacian annihilates constants.
        let c = CyclicTriDiag { core: TriDiag::constant(8, -1.0, 2.0, -1.0), corner_lowleft: -1.0, corner_upright: -1.0 };
        assert!(matches!(cyclic_solve(&c, &[1.0; 8]), Err(Error::Singular(_))));
    }

    #[test]
    fn band_length_checked() {
        assert!(TriDiag::new(vec![1.0], vec![1.0; 3], vec![1.0; 2]).is_err());
        assert!(thomas_solve(&TriDiag::identity(3), &[1.0; 4]).is_err());
    }

    #[test]
    fn prefactored_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_dd(50, &mut rng);
        let rhs: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direct = cyclic_solve(&c, &rhs).unwrap();
        let lu = Banded::Cyclic(c.clone()).factor().unwrap();
        assert!(rel_err(&lu.solve(&rhs), &direct) < 1e-14);
        let direct = thomas_solve(&c.core, &rhs).unwrap();
        let lu = Banded::Plain(c.core).factor().unwrap();
        assert!(rel_err(&lu.solve(&rhs), &direct) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn solve_then_multiply_reproduces_rhs(n in 5usize..3000, seed in any::<u64>(), periodic in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_dd(n, &mut rng);
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = if periodic {
                c.matvec(&cyclic_solve(&c, &rhs).unwrap())
            } else {
                c.core.matvec(&thomas_solve(&c.core, &rhs).unwrap())
            };
            prop_assert!(rel_err(&back, &rhs) < 1e-12);
        }
    }
}
