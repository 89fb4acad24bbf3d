//! Base information matrix from the known-rotation accelerometer chain.
//!
//! Each frame carries nine states `[p, v, b]` (position, velocity and
//! accelerometer bias, world frame for `p` and `v`). Between frames `h` and
//! `h+1` three whitened linear factors are stacked:
//!
//! ```text
//! p(h+1) - p(h) - dt v(h) + dt^2/2 R(h) b(h) = dt^2/2 (R(h) a~(h) + g)
//! v(h+1) - v(h)           + dt     R(h) b(h) = dt     (R(h) a~(h) + g)
//! b(h+1) - b(h)                              = 0
//! ```
//!
//! The right-hand sides never enter the information matrix. A prior on the
//! first frame anchors the chain.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::InfoMatrix;
use crate::error::{invalid, Result};
use crate::linalg;
use crate::scenario::Scenario;
use crate::serde_mat;

pub const FRAME_DIM: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuConfig {
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub sigma_b: f64,
    pub sigma_prior: f64,
    #[serde(with = "serde_mat::vector3")]
    pub gravity: Vector3<f64>,
    #[serde(with = "serde_mat::vec_vector3", default)]
    pub accel_readings: Vec<Vector3<f64>>,
    /// Full 9x9 prior information block on the first frame. Replaces
    /// `sigma_prior^-2 I` when present.
    #[serde(
        with = "serde_mat::opt_dmatrix",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub prior_information: Option<DMatrix<f64>>,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            sigma_p: 0.02,
            sigma_v: 0.05,
            sigma_b: 0.01,
            sigma_prior: 0.05,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            accel_readings: Vec::new(),
            prior_information: None,
        }
    }
}

impl ImuConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("sigma_p", self.sigma_p),
            ("sigma_v", self.sigma_v),
            ("sigma_b", self.sigma_b),
            ("sigma_prior", self.sigma_prior),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {s}")));
            }
        }
        if let Some(p) = &self.prior_information {
            if p.nrows() != FRAME_DIM || p.ncols() != FRAME_DIM {
                return Err(invalid("prior_information must be 9x9"));
            }
        }
        Ok(())
    }

    fn prior_block(&self) -> DMatrix<f64> {
        match &self.prior_information {
            Some(p) => p.clone(),
            None => DMatrix::identity(FRAME_DIM, FRAME_DIM) / (self.sigma_prior * self.sigma_prior),
        }
    }
}

/// Whitened Jacobian of the three factors between frames `h` and `h+1`,
/// restricted to the 18 columns `[x(h), x(h+1)]`.
pub fn imu_factor_jacobian(rot: &Matrix3<f64>, dt: f64, imu: &ImuConfig) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(FRAME_DIM, 2 * FRAME_DIM);
    let i3 = Matrix3::<f64>::identity();
    let put = |j: &mut DMatrix<f64>, r: usize, c: usize, blk: &Matrix3<f64>, w: f64| {
        j.fixed_view_mut::<3, 3>(r, c).copy_from(&(blk * w));
    };
    let wp = 1.0 / imu.sigma_p;
    let wv = 1.0 / imu.sigma_v;
    let wb = 1.0 / imu.sigma_b;
    // position rows
    put(&mut j, 0, 0, &(-i3), wp);
    put(&mut j, 0, 3, &(-dt * i3), wp);
    put(&mut j, 0, 6, &(0.5 * dt * dt * rot), wp);
    put(&mut j, 0, 9, &i3, wp);
    // velocity rows
    put(&mut j, 3, 3, &(-i3), wv);
    put(&mut j, 3, 6, &(dt * rot), wv);
    put(&mut j, 3, 12, &i3, wv);
    // bias rows
    put(&mut j, 6, 6, &(-i3), wb);
    put(&mut j, 6, 15, &i3, wb);
    j
}

pub fn build_base_information(scenario: &Scenario) -> Result<InfoMatrix> {
    scenario.imu.validate()?;
    let horizon = scenario.horizon();
    let n = FRAME_DIM * (horizon + 1);
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (FRAME_DIM, FRAME_DIM))
        .copy_from(&scenario.imu.prior_block());
    for h in 0..horizon {
        let j = imu_factor_jacobian(&scenario.poses[h].rot, scenario.dt, &scenario.imu);
        let jtj = j.transpose() * &j;
        let off = FRAME_DIM * h;
        let mut win = m.view_mut((off, off), (2 * FRAME_DIM, 2 * FRAME_DIM));
        win += &jtj;
    }
    linalg::symmetrize(&mut m);
    linalg::cholesky(&m, "base information (check IMU noise configuration)")?;
    Ok(InfoMatrix::new(m))
}
