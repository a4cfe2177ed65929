use nalgebra::DMatrix;

/// Thin SVD factors, singular values sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    /// n x r
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// r x k, present only when requested
    pub v_t: Option<DMatrix<f64>>,
}

fn sorted(u: DMatrix<f64>, sigma: Vec<f64>, v_t: Option<DMatrix<f64>>) -> ThinSvd {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    if order.iter().enumerate().all(|(i, &j)| i == j) {
        return ThinSvd { u, sigma, v_t };
    }
    let u = u.select_columns(order.iter());
    let v_t = v_t.map(|v| v.select_rows(order.iter()));
    let sigma = order.iter().map(|&i| sigma[i]).collect();
    ThinSvd { u, sigma, v_t }
}

/// Left singular vectors and singular values of `s` (Golub–Kahan bidiagonalization).
pub fn thin_svd(s: &DMatrix<f64>) -> ThinSvd {
    let svd = s.clone().svd(true, false);
    sorted(svd.u.expect("requested U"), svd.singular_values.as_slice().to_vec(), None)
}

/// As [`thin_svd`] but also returns the right factor.
pub fn thin_svd_full(s: &DMatrix<f64>) -> ThinSvd {
    let svd = s.clone().svd(true, true);
    sorted(
        svd.u.expect("requested U"),
        svd.singular_values.as_slice().to_vec(),
        Some(svd.v_t.expect("requested V")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn repeated_column_is_rank_one() {
        let col = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5]);
        let s = DMatrix::from_fn(6, 4, |i, _| col[i]);
        let f = thin_svd(&s);
        assert!((f.sigma[0] - col.norm() * 2.0).abs() < 1e-12 * f.sigma[0]);
        assert!(f.sigma[1..].iter().all(|&x| x <= 1e-12 * f.sigma[0]));
    }

    #[test]
    fn identity_has_unit_values() {
        let f = thin_svd(&DMatrix::identity(7, 7));
        assert!(f.sigma.iter().all(|&s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn matches_gram_eigenvalues() {
        let s = random(40, 25, 1);
        let f = thin_svd(&s);
        let gram = s.transpose() * &s;
        let mut ev: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in f.sigma.iter().zip(&ev) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn orthonormal_sorted_and_reconstructs() {
        for (n, k) in [(30, 12), (12, 30)] {
            let s = random(n, k, 4);
            let f = thin_svd_full(&s);
            let r = n.min(k);
            assert_eq!(f.sigma.len(), r);
            assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
            let utu = f.u.transpose() * &f.u;
            assert!((utu - DMatrix::<f64>::identity(r, r)).amax() <= 1e-10);
            let rec = &f.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.sigma.clone())) * f.v_t.unwrap();
            assert!((rec - &s).norm() <= 1e-9 * s.norm());
        }
    }
}
