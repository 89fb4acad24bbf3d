//! Sherman-Morrison-Woodbury machinery for low-rank increments.
//!
//! With `Delta = G^T G` the update reads
//! `(A + G^T G)^{-1} = A^{-1} - A^{-1} G^T (I + G A^{-1} G^T)^{-1} G A^{-1}`,
//! so only an `r x r` system is solved per candidate.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;

/// `B = A^{-1} G^T` and the Cholesky factor of `W = I + G B`.
fn middle(omega_inv: &DMatrix<f64>, g: &DMatrix<f64>) -> Option<(DMatrix<f64>, Cholesky<f64, nalgebra::Dyn>)> {
    let b = omega_inv * g.transpose();
    let mut w = g * &b;
    for i in 0..w.nrows() {
        w[(i, i)] += 1.0;
    }
    linalg::symmetrize(&mut w);
    Cholesky::new(w).map(|c| (b, c))
}

/// Trace reduction `tr(A^{-1}) - tr((A + G^T G)^{-1})`, i.e.
/// `tr(W^{-1} B^T B)`.
pub fn marginal_gain_smw(omega_inv: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 0.0;
    }
    let Some((b, chol)) = middle(omega_inv, g) else {
        return f64::NAN;
    };
    let btb = b.transpose() * &b;
    chol.solve(&btb).trace()
}

pub fn apply_smw_update(omega_inv: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() == 0 {
        return Ok(omega_inv.clone());
    }
    let (b, chol) = middle(omega_inv, g)
        .ok_or_else(|| Error::NotPositiveDefinite("SMW middle matrix".into()))?;
    let wb = chol.solve(&b.transpose());
    let mut out = omega_inv - &b * wb;
    linalg::symmetrize(&mut out);
    Ok(out)
}
