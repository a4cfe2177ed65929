use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::thin_svd;

/// Test-space choice for the projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    /// `W = V`
    Galerkin,
    /// `W = Theta V`
    Energy,
}

/// Either a discarded-energy tolerance or an explicit size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodSize {
    Tol(f64),
    Count(usize),
}

/// POD trial basis and test matrix.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// All singular values, retained and discarded.
    pub sigma: Vec<f64>,
    pub mode: BasisMode,
    pub size: PodSize,
}

impl ReducedBasis {
    pub fn n_rb(&self) -> usize {
        self.v.ncols()
    }

    pub fn dof(&self) -> usize {
        self.v.nrows()
    }

    /// Builds a basis from given trial vectors, computing `W` per `mode`.
    pub fn from_trial(
        v: DMatrix<f64>,
        sigma: Vec<f64>,
        mode: BasisMode,
        theta: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    ) -> Result<Self> {
        let w = match mode {
            BasisMode::Galerkin => v.clone(),
            BasisMode::Energy => {
                let theta = theta.ok_or_else(|| Error::arg("energy test space needs the Theta product"))?;
                let mut w = DMatrix::zeros(v.nrows(), v.ncols());
                for (j, col) in v.column_iter().enumerate() {
                    let tc = theta(col.as_slice());
                    w.column_mut(j).copy_from_slice(&tc);
                }
                w
            }
        };
        let n = v.ncols();
        Ok(Self { v, w, sigma, mode, size: PodSize::Count(n) })
    }

    /// Identity trial space of dimension `n`.
    pub fn identity(n: usize, mode: BasisMode, theta: Option<&dyn Fn(&[f64]) -> Vec<f64>>) -> Result<Self> {
        Self::from_trial(DMatrix::identity(n, n), vec![1.0; n], mode, theta)
    }

    /// Keeps only the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_rb() {
            return Err(Error::arg(format!("cannot truncate {} modes to {n}", self.n_rb())));
        }
        Ok(Self {
            v: self.v.columns(0, n).into_owned(),
            w: self.w.columns(0, n).into_owned(),
            sigma: self.sigma.clone(),
            mode: self.mode,
            size: PodSize::Count(n),
        })
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        (&self.v * nalgebra::DVector::from_column_slice(coeffs)).as_slice().to_vec()
    }
}

/// Smallest `N` whose retained fraction `sum_{i<=N} sigma_i / sum sigma_i` reaches `1 - tol`.
pub fn pod_size_for_tol(sigma: &[f64], tol: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let mut acc = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        acc += s;
        if acc / total >= 1.0 - tol {
            return i + 1;
        }
    }
    sigma.len()
}

/// Left singular vectors of `states` truncated by `size`, with test space per `mode`.
pub fn pod_basis(
    states: &DMatrix<f64>,
    size: PodSize,
    mode: BasisMode,
    theta: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
) -> Result<ReducedBasis> {
    if states.ncols() == 0 || states.nrows() == 0 {
        return Err(Error::arg("empty snapshot set"));
    }
    let svd = thin_svd(states);
    let n = match size {
        PodSize::Tol(tol) => {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::arg(format!("POD tolerance {tol} outside (0, 1)")));
            }
            pod_size_for_tol(&svd.sigma, tol)
        }
        PodSize::Count(n) => {
            if n == 0 || n > svd.sigma.len() {
                return Err(Error::arg(format!("requested {n} modes, only {} available", svd.sigma.len())));
            }
            n
        }
    };
    let v = svd.u.columns(0, n).into_owned();
    let mut basis = ReducedBasis::from_trial(v, svd.sigma, mode, theta)?;
    basis.size = size;
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tolerance_rule_on_hand_values() {
        assert_eq!(pod_size_for_tol(&[10.0, 3.0, 0.5, 0.01], 0.05), 2);
        assert_eq!(pod_size_for_tol(&[10.0, 3.0, 0.5, 0.01], 0.01), 3);
        assert_eq!(pod_size_for_tol(&[5.0, 0.0, 0.0], 0.5), 1);
    }

    #[test]
    fn rank_one_snapshots_give_one_mode() {
        let col: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let s = DMatrix::from_fn(30, 8, |i, j| col[i] * (j as f64 + 1.0));
        for tol in [1e-1, 1e-6, 1e-12] {
            assert_eq!(pod_basis(&s, PodSize::Tol(tol), BasisMode::Galerkin, None).unwrap().n_rb(), 1);
        }
    }

    #[test]
    fn full_size_is_square_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DMatrix::from_fn(12, 20, |_, _| rng.gen_range(-1.0..1.0));
        let b = pod_basis(&s, PodSize::Count(12), BasisMode::Galerkin, None).unwrap();
        let vtv = b.v.transpose() * &b.v;
        assert!((vtv - DMatrix::<f64>::identity(12, 12)).amax() < 1e-12);
        assert!((b.v.clone() * b.v.transpose() - DMatrix::<f64>::identity(12, 12)).amax() < 1e-12);
    }

    #[test]
    fn projection_error_matches_discarded_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = DMatrix::from_fn(60, 25, |i, j| ((i * j) as f64 * 0.01).cos() + 1e-3 * rng.gen_range(-1.0..1.0));
        let b = pod_basis(&s, PodSize::Count(5), BasisMode::Galerkin, None).unwrap();
        let r = &s - &b.v * (b.v.transpose() * &s);
        let want: f64 = b.sigma[5..].iter().map(|x| x * x).sum();
        assert!((r.norm_squared() - want).abs() <= 1e-8 * want);
    }

    #[test]
    fn energy_mode_applies_theta() {
        let s = DMatrix::from_fn(10, 4, |i, j| (i + j) as f64);
        let theta = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
        let b = pod_basis(&s, PodSize::Count(2), BasisMode::Energy, Some(&theta)).unwrap();
        assert!((&b.w - &b.v * 2.0).amax() < 1e-15);
        assert!(pod_basis(&s, PodSize::Count(2), BasisMode::Energy, None).is_err());
    }

    #[test]
    fn bad_requests_rejected() {
        let s = DMatrix::from_fn(5, 3, |i, j| (i * j) as f64);
        assert!(pod_basis(&DMatrix::zeros(5, 0), PodSize::Count(1), BasisMode::Galerkin, None).is_err());
        assert!(pod_basis(&s, PodSize::Count(4), BasisMode::Galerkin, None).is_err());
        assert!(pod_basis(&s, PodSize::Tol(1.5), BasisMode::Galerkin, None).is_err());
    }
}
