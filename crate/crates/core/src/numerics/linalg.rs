use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest element-wise deviation |M - M^dagger|.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Frobenius norm of U^dagger U - I.
pub fn unitary_deviation(u: &CMatrix) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

fn check_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order (ties keep the solver's
/// order, which is deterministic for a given input). The input is
/// symmetrized before decomposition; a deviation from Hermiticity larger
/// than `1e-9 * max(1, ||H||)` is rejected.
pub fn eig_hermitian(h: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    if h.nrows() != h.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            got: h.ncols(),
        });
    }
    check_finite(h, "eig_hermitian input")?;
    let scale = h.norm().max(1.0);
    let dev = hermitian_deviation(h);
    if dev > 1e-9 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok((values, vectors))
}

/// exp(-i H t) for Hermitian H, through the eigendecomposition.
pub fn unitary_from_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let (vals, vecs) = eig_hermitian(h)?;
    Ok(apply_spectral(&vecs, vals.iter().map(|&l| C64::from_polar(1.0, -l * t))))
}

fn apply_spectral<I: Iterator<Item = C64>>(vecs: &CMatrix, f: I) -> CMatrix {
    let mut scaled = vecs.clone();
    for (k, fk) in f.enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= fk;
        }
    }
    scaled * vecs.adjoint()
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential.
///
/// Hermitian and anti-Hermitian inputs go through the eigendecomposition;
/// everything else uses scaling and squaring with a degree-13 Pade
/// approximant.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let scale = m.norm().max(1e-300);
    if hermitian_deviation(m) <= 1e-13 * scale {
        if let Ok((vals, vecs)) = eig_hermitian(m) {
            return apply_spectral(&vecs, vals.iter().map(|&l| C64::new(l.exp(), 0.0)));
        }
    }
    let im = m * C64::i();
    if hermitian_deviation(&im) <= 1e-13 * scale {
        // m = -i (i m), with i m Hermitian
        if let Ok((vals, vecs)) = eig_hermitian(&im) {
            return apply_spectral(&vecs, vals.iter().map(|&l| C64::from_polar(1.0, -l)));
        }
    }
    let norm = one_norm(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(0.5_f64.powi(s));
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| CMatrix::identity(n, n));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Real-matrix exponential (via the complex kernel).
pub fn expm_real(m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = m.map(|x| C64::new(x, 0.0));
    expm(&c).map(|z| z.re)
}

/// M^{-1/2} for a Hermitian positive-definite matrix.
///
/// Fails when the smallest eigenvalue does not exceed `eps`.
pub fn inv_sqrt_psd(m: &CMatrix, eps: f64) -> Result<CMatrix> {
    let (vals, vecs) = eig_hermitian(m)?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > eps) {
        return Err(Error::Singular(min));
    }
    Ok(apply_spectral(
        &vecs,
        vals.iter().map(|&l| C64::new(1.0 / l.sqrt(), 0.0)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn eig_of_diagonal_is_sorted_permutation() {
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(3.0, 0.0),
            C64::new(-1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let (vals, vecs) = eig_hermitian(&h).unwrap();
        assert_eq!(vals.as_slice(), &[-1.0, 2.0, 3.0]);
        assert!((vecs[(1, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((vecs[(2, 1)].norm() - 1.0).abs() < 1e-14);
        assert!((vecs[(0, 2)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_pauli_x() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        );
        let (vals, _) = eig_hermitian(&h).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(64, &mut rng);
        let (vals, v) = eig_hermitian(&h).unwrap();
        let lam = CMatrix::from_diagonal(&vals.map(|x| C64::new(x, 0.0)));
        let rec = &v * lam * v.adjoint();
        assert!((rec - &h).norm() < 1e-10 * h.norm());
        assert!(unitary_deviation(&v) < 1e-11);
        let resid = &h * &v - &v * CMatrix::from_diagonal(&vals.map(|x| C64::new(x, 0.0)));
        assert!(resid.norm() < 1e-10 * h.norm());
    }

    #[test]
    fn eig_rejects_non_hermitian_and_nan() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(eig_hermitian(&h), Err(Error::NotHermitian(_))));
        h[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(eig_hermitian(&h), Err(Error::NonFinite(_))));
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = CMatrix::zeros(5, 5);
        assert!((expm(&z) - CMatrix::identity(5, 5)).norm() < 1e-15);
    }

    #[test]
    fn expm_general_inverse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = CMatrix::from_fn(6, 6, |_, _| {
                C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            });
            let prod = expm(&m) * expm(&(-&m));
            assert!((prod - CMatrix::identity(6, 6)).norm() < 1e-10);
        }
    }

    #[test]
    fn expm_rotates_bloch_vector() {
        // exp(-i pi sigma_y / 2) maps |0> to |1> (up to phase)
        let sy = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        );
        let u = expm(&(sy * C64::new(0.0, -std::f64::consts::FRAC_PI_2)));
        assert!(u[(0, 0)].norm() < 1e-14);
        assert!((u[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expm_pade_matches_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(8, &mut rng).scale(3.0);
        let spectral = unitary_from_hermitian(&h, 1.3).unwrap();
        // perturb away from anti-Hermitian by a tiny non-normal piece to force the Pade path
        let mut m = &h * C64::new(0.0, -1.3);
        m[(0, 1)] += C64::new(1e-9, 0.0);
        let pade = expm(&m);
        assert!((pade - spectral).norm() < 1e-7);
    }

    #[test]
    fn expm_real_antisymmetric_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (a, b, c): (f64, f64, f64) = (
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let g = DMatrix::from_row_slice(3, 3, &[0.0, a, b, -a, 0.0, -c, -b, c, 0.0]);
            let r = expm_real(&g);
            let dev = (r.transpose() * &r - DMatrix::identity(3, 3)).norm();
            assert!(dev < 1e-11);
            assert!((r.determinant() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn inv_sqrt_known_values() {
        let id = CMatrix::identity(3, 3);
        assert!((inv_sqrt_psd(&id, 1e-12).unwrap() - &id).norm() < 1e-14);
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(4.0, 0.0),
            C64::new(9.0, 0.0),
        ]));
        let r = inv_sqrt_psd(&d, 1e-12).unwrap();
        assert!((r[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((r[(1, 1)].re - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn inv_sqrt_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = CMatrix::from_fn(8, 8, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = &a * a.adjoint() + CMatrix::identity(8, 8).scale(0.1);
        let r = inv_sqrt_psd(&m, 1e-12).unwrap();
        assert!(hermitian_deviation(&r) < 1e-12);
        assert!((&r * &m * &r - CMatrix::identity(8, 8)).norm() < 1e-9);
        assert!((&m * &r * &r - CMatrix::identity(8, 8)).norm() < 1e-9);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        assert!(matches!(inv_sqrt_psd(&d, 1e-12), Err(Error::Singular(_))));
    }
}
