//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, stored by `nalgebra` in column-major order.
pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvalues below this fraction of the largest eigenvalue count as zero.
pub const RANK_TOL_REL: f64 = 1e-8;

/// Tolerances used by structural and spectral checks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Structural invariants: normalization, hermiticity, partial traces.
    pub structural: f64,
    /// Checks that go through an eigendecomposition.
    pub spectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-10,
            spectral: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            structural: tol,
            spectral: tol,
        }
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(n: usize, m: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(n, m)
}

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<ComplexMatrix> {
    if rows * cols != entries.len() {
        return Err(Error::Shape {
            rows,
            cols,
            expected: format!("consistent with {} entries", entries.len()),
        });
    }
    Ok(ComplexMatrix::from_row_slice(rows, cols, entries))
}

/// Largest absolute entry.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn hermitian_residual(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && hermitian_residual(m) <= tol
}

pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - identity(n)))
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && unitarity_residual(m) <= tol
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::Shape {
            rows: m.nrows(),
            cols: m.ncols(),
            expected: "square".into(),
        });
    }
    Ok(m.nrows())
}

/// `(m + m†)/2`.
pub fn symmetrize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Hermitian eigendecomposition of the symmetrized input, eigenvalues ascending.
pub fn eigh(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of the symmetrized input, ascending.
pub fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of eigenvalues above `rel_tol * max(λ_max, 0)`.
pub fn numerical_rank(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let top = eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&l| l > rel_tol * top).count()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &ComplexMatrix) -> f64 {
    eigvalsh(m).iter().map(|l| l.abs()).sum()
}

/// Principal square root of a PSD matrix; negative round-off eigenvalues are clipped.
pub fn psd_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let roots = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    );
    &vecs * ComplexMatrix::from_diagonal(&roots) * vecs.adjoint()
}

/// Orthonormal basis (columns) of the eigenspace with eigenvalue above `threshold`.
pub fn support_basis(m: &ComplexMatrix, threshold: f64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > threshold).collect();
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |r, c| vecs[(r, cols[c])])
}

/// Moore-Penrose inverse of `sqrt(m)` for PSD `m`, with eigenvalues at or
/// below `threshold` treated as zero.
pub fn pinv_sqrt(m: &ComplexMatrix, threshold: f64) -> ComplexMatrix {
    let (vals, vecs) = eigh(m);
    let inv = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| {
            if l > threshold {
                Complex64::new(1.0 / l.sqrt(), 0.0)
            } else {
                ZERO
            }
        }),
    );
    &vecs * ComplexMatrix::from_diagonal(&inv) * vecs.adjoint()
}

/// `e^{iφ}`.
pub fn phase(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m =
            from_row_major(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]).unwrap();
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(
            2,
            vals.iter().map(|&v| c(v, 0.0)),
        ));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &m)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a =
            from_row_major(2, 2, &[c(1.0, 0.5), c(0.3, 0.0), c(-0.2, 0.1), c(0.7, 0.0)]).unwrap();
        let m = &a * a.adjoint();
        let s = psd_sqrt(&m);
        assert!(max_abs(&(&s * &s - &m)) < 1e-12);
    }

    #[test]
    fn rank_is_relative() {
        assert_eq!(numerical_rank(&[1e-12, 0.5, 2.0], 1e-8), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-8), 0);
    }

    #[test]
    fn row_major_shape_is_checked() {
        assert!(from_row_major(2, 2, &[ONE; 3]).is_err());
    }
}
