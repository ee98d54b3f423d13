use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance on `|m_ij - conj(m_ji)|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries; the length must be a perfect square.
    pub fn from_row_major(entries: Vec<Complex64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim * dim != entries.len() || dim == 0 {
            return Err(Error::NotSquare {
                rows: entries.len(),
                cols: 1,
            });
        }
        Ok(ComplexMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::NotSquare {
                rows: dim,
                cols: bad.len(),
            });
        }
        Ok(ComplexMatrix {
            dim,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    /// Rank-one projector `|v><v|` (not normalized).
    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    /// Largest `|m_ij - conj(m_ji)|` over all index pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let max_asymmetry = self.max_asymmetry();
        if max_asymmetry > HERMITIAN_TOL {
            return Err(Error::NotHermitian { max_asymmetry });
        }
        Ok(())
    }

    /// `(m + m^†) / 2`, which removes round-off asymmetry.
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        out
    }

    /// Kronecker product with `self` as the slower (outer) factor.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        let n = self.dim * other.dim;
        let mut out = Self::zeros(n);
        for i1 in 0..self.dim {
            for j1 in 0..self.dim {
                let a = self[(i1, j1)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..other.dim {
                    for j2 in 0..other.dim {
                        out[(i1 * other.dim + i2, j1 * other.dim + j2)] = a * other[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.entries[i * n + j] += a * rhs.entries[k * n + j];
                }
            }
        }
        out
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = ComplexMatrix::identity(2).kron(&ComplexMatrix::identity(3));
        assert_eq!(k, ComplexMatrix::identity(6));
    }

    #[test]
    fn kron_index_convention_outer_is_slow() {
        let a = ComplexMatrix::from_diagonal(&[1.0, 2.0]);
        let b = ComplexMatrix::from_diagonal(&[10.0, 20.0, 30.0]);
        let k = a.kron(&b);
        // index = a_index * 3 + b_index
        assert_eq!(k[(4, 4)], c(2.0 * 20.0, 0.0));
        assert_eq!(k[(2, 2)], c(30.0, 0.0));
    }

    #[test]
    fn asymmetry_reports_worst_pair() {
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(1.0, 0.0)]])
            .unwrap();
        assert!((m.max_asymmetry() - 2.0).abs() < 1e-15);
        assert!(matches!(m.check_hermitian(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn non_square_rejected() {
        assert!(ComplexMatrix::from_row_major(vec![c(1.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_rows(&[vec![c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).is_err());
    }
}
