//! Bearing factors and their Schur-complement increment.
//!
//! For a landmark seen at frame `h` with unit bearing `u` the constraint
//! `[u]x R_cam^T (p_l - t(h) - R(h) t_ext) = 0` is linear in the landmark
//! position `p_l` and the frame position `t(h)`. Stacking the visible frames
//! gives `F x + E p_l = rhs`; eliminating `p_l` leaves
//! `Delta = F^T F - F^T E (E^T E)^+ E^T F = F^T Q F`.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use super::FRAME_DIM;
use crate::error::{invalid, Result};
use crate::linalg;
use crate::scenario::{project_to_camera, Landmark, Scenario};

/// Relative cutoff applied to the eigenvalues of `E^T E`.
pub const PINV_CUTOFF: f64 = 1e-10;
/// Singular values of the low-rank factor below this fraction of `||F||_F`
/// are treated as zero.
pub const FACTOR_CUTOFF: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFactors {
    pub id: usize,
    /// (3 n_obs) x n coefficients on the stacked state.
    pub f: DMatrix<f64>,
    /// (3 n_obs) x 3 coefficients on the landmark position.
    pub e: DMatrix<f64>,
    /// Known right-hand side of the stacked rows.
    pub rhs: DVector<f64>,
    pub frames: Vec<usize>,
}

impl LandmarkFactors {
    pub fn n_obs(&self) -> usize {
        self.frames.len()
    }

    pub fn state_dim(&self) -> usize {
        self.f.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkIncrement {
    pub id: usize,
    pub n_obs: usize,
    /// n x n PSD information added by the landmark.
    pub delta: DMatrix<f64>,
    /// r x n factor with `G^T G = delta`.
    pub g: DMatrix<f64>,
    pub trace: f64,
}

impl LandmarkIncrement {
    pub fn zero(id: usize, n: usize, n_obs: usize) -> Self {
        Self { id, n_obs, delta: DMatrix::zeros(n, n), g: DMatrix::zeros(0, n), trace: 0.0 }
    }

    /// Builds an increment from a dense PSD matrix, deriving the factor.
    pub fn from_dense(id: usize, n_obs: usize, mut delta: DMatrix<f64>) -> Self {
        linalg::symmetrize(&mut delta);
        let g = linalg::psd_factor(&delta, 1e-12);
        let trace = delta.trace();
        Self { id, n_obs, delta, g, trace }
    }

    /// Builds an increment from a factor, `delta = G^T G`.
    pub fn from_factor(id: usize, n_obs: usize, g: DMatrix<f64>) -> Self {
        let mut delta = g.transpose() * &g;
        linalg::symmetrize(&mut delta);
        let trace = delta.trace();
        Self { id, n_obs, delta, g, trace }
    }

    pub fn rank(&self) -> usize {
        self.g.nrows()
    }
}

pub fn build_landmark_factors(
    scenario: &Scenario,
    landmark: &Landmark,
    mask: &[bool],
    sigma_bearing: f64,
) -> Result<LandmarkFactors> {
    if mask.len() != scenario.poses.len() {
        return Err(invalid("visibility mask length differs from pose count"));
    }
    if !(sigma_bearing > 0.0) {
        return Err(invalid("sigma_bearing must be positive"));
    }
    let n = FRAME_DIM * scenario.poses.len();
    let frames: Vec<usize> = (0..mask.len()).filter(|&h| mask[h]).collect();
    let rows = 3 * frames.len();
    let mut f = DMatrix::zeros(rows, n);
    let mut e = DMatrix::zeros(rows, 3);
    let mut rhs = DVector::zeros(rows);
    let w = 1.0 / sigma_bearing;
    for (k, &h) in frames.iter().enumerate() {
        let pose = &scenario.poses[h];
        let proj = project_to_camera(pose, &scenario.camera, &landmark.p).ok_or_else(|| {
            invalid(format!("landmark {} marked visible at frame {h} but does not project", landmark.id))
        })?;
        let (_, r_cam) = scenario.camera.camera_pose(pose);
        let a: Matrix3<f64> = linalg::skew(&proj.bearing) * r_cam.transpose() * w;
        e.fixed_view_mut::<3, 3>(3 * k, 0).copy_from(&a);
        f.fixed_view_mut::<3, 3>(3 * k, FRAME_DIM * h).copy_from(&(-a));
        rhs.fixed_rows_mut::<3>(3 * k)
            .copy_from(&(a * pose.rot * scenario.camera.t_ext));
    }
    Ok(LandmarkFactors { id: landmark.id, f, e, rhs, frames })
}

/// Pseudo-inverse of the 3x3 normal matrix with a relative eigenvalue cutoff.
fn normal_pinv(e: &DMatrix<f64>) -> DMatrix<f64> {
    let ete = e.transpose() * e;
    let eig = SymmetricEigen::new(ete);
    let lmax = eig.eigenvalues.max();
    let mut inv = DMatrix::zeros(3, 3);
    if lmax <= 0.0 {
        return inv;
    }
    for i in 0..3 {
        let l = eig.eigenvalues[i];
        if l > PINV_CUTOFF * lmax {
            let v = eig.eigenvectors.column(i);
            inv += (v * v.transpose()) / l;
        }
    }
    inv
}

/// Orthonormal basis of the range of an orthogonal projector.
fn projector_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(q.clone());
    let cols: Vec<usize> = (0..q.nrows()).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_fn(q.nrows(), cols.len(), |i, j| eig.eigenvectors[(i, cols[j])])
}

pub fn schur_increment(factors: &LandmarkFactors) -> LandmarkIncrement {
    let n = factors.state_dim();
    let f = &factors.f;
    let f_norm = f.norm();
    if factors.n_obs() == 0 || f_norm == 0.0 {
        return LandmarkIncrement::zero(factors.id, n, factors.n_obs());
    }
    let e = &factors.e;
    let pinv = normal_pinv(e);
    let fte = f.transpose() * e;
    let mut delta = f.transpose() * f - &fte * &pinv * fte.transpose();
    linalg::symmetrize(&mut delta);

    let rows = e.nrows();
    let q = DMatrix::identity(rows, rows) - e * &pinv * e.transpose();
    let basis = projector_basis(&q);
    let g = linalg::compress_factor(&(basis.transpose() * f), FACTOR_CUTOFF * f_norm);
    if g.nrows() == 0 {
        return LandmarkIncrement::zero(factors.id, n, factors.n_obs());
    }
    let trace = delta.trace();
    LandmarkIncrement { id: factors.id, n_obs: factors.n_obs(), delta, g, trace }
}
