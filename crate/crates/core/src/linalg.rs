//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative Frobenius asymmetry `‖M − Mᵀ‖ / ‖M‖` (zero for the zero matrix).
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending
/// order. Each eigenvector is normalised so that its largest-magnitude
/// component is positive, which makes the basis reproducible.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let pivot = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(m);
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| vectors[(i, j)] * f(values[j]));
    symmetrize(&(scaled * vectors.transpose()))
}

/// Symmetric square root and inverse square root of a positive-definite matrix.
pub fn sqrt_and_inv_sqrt(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (values, vectors) = sym_eigen(m);
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Model(format!("{what} must be positive definite")));
    }
    let n = m.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * values[j].sqrt());
    let b = DMatrix::from_fn(n, n, |i, j| vectors[(i, j)] / values[j].sqrt());
    Ok((
        symmetrize(&(a * vectors.transpose())),
        symmetrize(&(b * vectors.transpose())),
    ))
}

/// Checks symmetric positive-definiteness through the eigenvalues.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let (values, _) = sym_eigen(m);
    values.iter().all(|&v| v > 0.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Canonical symplectic form `σ = [[0, I], [−I, 0]]` for `n` modes with the
/// ordering `(X₁..X_N, P₁..P_N)`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = 1.0;
        s[(n + i, i)] = -1.0;
    }
    s
}

/// `‖Uᵀ σ U − σ‖` in the spectral norm.
pub fn symplectic_defect(u: &DMatrix<f64>) -> f64 {
    let n = u.nrows() / 2;
    let s = symplectic_form(n);
    spectral_norm(&(u.transpose() * &s * u - s))
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

pub fn from_diagonal(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

/// Largest absolute off-diagonal entry.
pub fn max_off_diagonal(m: &DMatrix<f64>) -> f64 {
    let mut out: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                out = out.max(m[(i, j)].abs());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_is_sorted_and_sign_fixed() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        for j in 0..2 {
            let col = vecs.column(j);
            let pivot = col.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn square_roots_invert_each_other() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (s, si) = sqrt_and_inv_sqrt(&m, "m").unwrap();
        assert!((&s * &s - &m).norm() < 1e-13);
        assert!((&s * &si - DMatrix::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn non_pd_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(sqrt_and_inv_sqrt(&m, "capacitance").is_err());
    }

    #[test]
    fn symplectic_form_squares_to_minus_identity() {
        let s = symplectic_form(3);
        assert_eq!(&s * &s, -DMatrix::<f64>::identity(6, 6));
        assert_eq!(symplectic_defect(&DMatrix::identity(6, 6)), 0.0);
    }
}
