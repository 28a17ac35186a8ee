//! Small dense complex linear algebra used throughout: Hermitian spectra,
//! partial traces and the Pauli basis in (z, x, y) order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[cfg(test)]
pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity2() -> CMatrix {
    CMatrix::identity(2, 2)
}

/// Pauli matrices ordered (σ_z, σ_x, σ_y).
pub fn paulis() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
    ]
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = hermitian_part(m);
    let eig = SymmetricEigen::new(sym);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace out the second factor of a `dim_a ⊗ dim_b` operator.
pub fn partial_trace_second(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    CMatrix::from_fn(dim_a, dim_a, |i, j| {
        (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()
    })
}

/// Trace out the first factor of a `dim_a ⊗ dim_b` operator.
pub fn partial_trace_first(m: &CMatrix, dim_a: usize, dim_b: usize) -> CMatrix {
    CMatrix::from_fn(dim_b, dim_b, |i, j| {
        (0..dim_a).map(|k| m[(k * dim_b + i, k * dim_b + j)]).sum()
    })
}

pub fn outer(u: &DVector<Complex64>, v: &DVector<Complex64>) -> CMatrix {
    u * v.adjoint()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let [z, x, y] = paulis();
        // σ_z σ_x = i σ_y
        assert!(max_abs_diff(&(&z * &x), &y.scale(1.0).map(|e| e * I)) < 1e-15);
        for p in [&z, &x, &y] {
            assert!(max_abs_diff(&(p * p), &identity2()) < 1e-15);
        }
    }

    #[test]
    fn partial_traces_of_product() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.25), c(0.0), c(0.0), c(0.75)]);
        let b = CMatrix::from_row_slice(2, 2, &[c(0.5), I * 0.5, -I * 0.5, c(0.5)]);
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace_second(&ab, 2, 2), &a) < 1e-15);
        assert!(max_abs_diff(&partial_trace_first(&ab, 2, 2), &b) < 1e-15);
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0), I, -I, c(2.0)]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(2, vals.iter().map(|&v| c(v))));
        let back = &vecs * diag * vecs.adjoint();
        assert!(max_abs_diff(&back, &m) < 1e-13);
    }
}
