//! Dense linear-algebra helpers shared by the information-matrix code.

use nalgebra::{Cholesky, DMatrix, Dyn, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Replaces `m` by `(m + m^T) / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

/// `tr(M^{-1})` of a symmetric positive definite matrix via its Cholesky
/// factor: `tr(M^{-1}) = ||L^{-1}||_F^2`.
pub fn trace_inverse(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(m, "trace_inverse")?;
    let n = m.nrows();
    let mut linv = DMatrix::<f64>::identity(n, n);
    // The triangular solve only reads the lower part of the factor.
    chol.l_dirty().solve_lower_triangular_mut(&mut linv);
    Ok(linv.norm_squared())
}

/// Inverse of a symmetric positive definite matrix, resymmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m, "spd_inverse")?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Singular values; symmetric input uses `|eigenvalues|`, which resolves
/// small values better than a Gram-matrix route.
fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let symmetric = m.is_square() && (m - m.transpose()).norm() <= 1e-12 * m.norm();
    if symmetric {
        SymmetricEigen::new(m.clone()).eigenvalues.iter().map(|l| l.abs()).collect()
    } else {
        m.clone().svd(true, true).singular_values.iter().copied().collect()
    }
}

/// Number of singular values above `rel_tol * max(sigma_max, scale)`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64, scale: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_values(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(scale);
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Extreme eigenvalues of a symmetric matrix as `(min, max)`.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = SymmetricEigen::new(m.clone()).eigenvalues;
    (ev.min(), ev.max())
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = eigen_extremes(m);
    lo.abs().max(hi.abs())
}

/// Low-rank factor `G` (rows = retained rank) with `G^T G = A` for a
/// symmetric PSD matrix `A`. Eigen-directions below `rel_tol * lambda_max`
/// are dropped.
pub fn psd_factor(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(a.clone());
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 {
        return DMatrix::zeros(0, n);
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > rel_tol * lmax)
        .collect();
    let mut g = DMatrix::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for j in 0..n {
            g[(row, j)] = s * eig.eigenvectors[(j, i)];
        }
    }
    g
}

/// Compresses a factor `G` (r x n) to `G'` with `G'^T G' = G^T G` and only
/// the singular directions above `abs_tol` retained. Works on the r x r Gram
/// matrix `G G^T = W L W^T`, so `G' = W_k^T G`.
pub fn compress_factor(g: &DMatrix<f64>, abs_tol: f64) -> DMatrix<f64> {
    let n = g.ncols();
    if g.nrows() == 0 {
        return DMatrix::zeros(0, n);
    }
    let eig = SymmetricEigen::new(g * g.transpose());
    let cut = abs_tol * abs_tol;
    let keep: Vec<usize> = (0..g.nrows()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let w = DMatrix::from_fn(g.nrows(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    w.transpose() * g
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}
