//! Cyclic Jacobi eigensolver for small dense Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` with a diagonal
//! unitary, then applies the classic real Jacobi rotation to the resulting
//! real symmetric 2x2 block. Sweeps continue until the off-diagonal Frobenius
//! norm drops below `OFF_DIAGONAL_TOL * ‖m‖_F`.

use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::Result;

/// Convergence target on the off-diagonal mass, relative to `‖m‖_F`.
pub const OFF_DIAGONAL_TOL: f64 = 1e-13;
/// Eigenvalues in `[-CLAMP_TOL, 0)` are treated as round-off and set to zero.
pub const CLAMP_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

pub(crate) struct Eigen {
    pub values: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub vectors: ComplexMatrix,
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Full decomposition with eigenvectors as columns, ascending eigenvalues.
/// The caller is responsible for Hermiticity; only the Hermitian part is used.
pub(crate) fn jacobi_eigen(m: &ComplexMatrix) -> Eigen {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    Eigen {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors,
    }
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // e^{-i phi} with a_pq = r e^{i phi}
    let phase_conj = apq.conj() / r;

    let theta = (aqq - app) / (2.0 * r);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + theta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    // U = diag(1, e^{-i phi}) * [[c, s], [-s, c]]
    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = phase_conj * (-s);
    let u_qq = phase_conj * c;

    let n = a.dim();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// All eigenvalues of a Hermitian matrix, ascending.
///
/// Values in `[-1e-10, 0)` are clamped to zero; anything more negative is
/// returned as is so callers can reject it.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    m.check_hermitian()?;
    let mut values = jacobi_eigen(m).values;
    for x in values.iter_mut() {
        if *x < 0.0 && *x >= -CLAMP_TOL {
            *x = 0.0;
        }
    }
    Ok(values)
}

/// Max over eigenpairs of `‖m v - λ v‖`.
#[cfg(test)]
pub(crate) fn max_residual(m: &ComplexMatrix, eig: &Eigen) -> f64 {
    let n = m.dim();
    let mut worst = 0.0f64;
    for k in 0..n {
        let col: Vec<Complex64> = (0..n).map(|i| eig.vectors[(i, k)]).collect();
        let mv = m.mul_vec(&col);
        let res: f64 = mv
            .iter()
            .zip(&col)
            .map(|(x, y)| (x - y * eig.values[k]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn scaled_identity() {
        let m = ComplexMatrix::identity(4).scale(0.25);
        let ev = hermitian_eigenvalues(&m).unwrap();
        for x in ev {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let m = ComplexMatrix::from_diagonal(&[0.7, 0.1, 0.2]);
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert_eq!(ev, vec![0.1, 0.2, 0.7]);
    }

    #[test]
    fn rank_one_two_by_two() {
        // characteristic polynomial l^2 - l = 0
        let h = Complex64::new(0.5, 0.0);
        let m = ComplexMatrix::from_rows(&[vec![h, h], vec![h, h]]).unwrap();
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert_abs_diff_eq!(ev[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ev[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn complex_two_by_two_closed_form() {
        // [[a, z], [conj z, b]]: eigenvalues (a+b)/2 ± sqrt(((a-b)/2)^2 + |z|^2)
        let (a, b) = (0.3, -1.1);
        let z = Complex64::new(0.4, -0.9);
        let m = ComplexMatrix::from_rows(&[
            vec![Complex64::new(a, 0.0), z],
            vec![z.conj(), Complex64::new(b, 0.0)],
        ])
        .unwrap();
        let ev = hermitian_eigenvalues(&m).unwrap();
        let mid = (a + b) / 2.0;
        let rad = (((a - b) / 2.0f64).powi(2) + z.norm_sqr()).sqrt();
        assert_abs_diff_eq!(ev[0], mid - rad, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], mid + rad, epsilon = 1e-14);
    }

    #[test]
    fn residuals_and_trace_on_random_matrices() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 30);
            let m = random_hermitian(n, seed);
            let eig = jacobi_eigen(&m);
            let norm = m.frobenius_norm();
            assert!(max_residual(&m, &eig) <= 1e-9 * norm, "seed {seed}");
            let tr: f64 = eig.values.iter().sum();
            assert_abs_diff_eq!(tr, m.trace().re, epsilon = 1e-11 * norm.max(1.0));
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn agrees_with_nalgebra_on_random_matrices() {
        for seed in 100..110 {
            let n = 6;
            let m = random_hermitian(n, seed);
            let na_m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                nalgebra::Complex::new(m[(i, j)].re, m[(i, j)].im)
            });
            let mut reference: Vec<f64> = na_m.symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            let ours = hermitian_eigenvalues(&m).unwrap();
            for (x, y) in ours.iter().zip(&reference) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian_with_diagnostic() {
        let mut m = ComplexMatrix::identity(3);
        m[(0, 2)] = Complex64::new(1e-6, 0.0);
        match hermitian_eigenvalues(&m) {
            Err(Error::NotHermitian { max_asymmetry }) => {
                assert_abs_diff_eq!(max_asymmetry, 1e-6, epsilon = 1e-18)
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn tiny_negative_eigenvalues_clamped_larger_kept() {
        let m = ComplexMatrix::from_diagonal(&[-1e-12, 0.5, 0.5]);
        assert_eq!(hermitian_eigenvalues(&m).unwrap()[0], 0.0);
        let m = ComplexMatrix::from_diagonal(&[-1e-6, 0.5, 0.5]);
        assert_eq!(hermitian_eigenvalues(&m).unwrap()[0], -1e-6);
    }
}
