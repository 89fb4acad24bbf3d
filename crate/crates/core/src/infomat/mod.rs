//! Information matrices: the IMU base matrix, per-landmark Schur
//! increments, the trace-of-inverse objective and low-rank updates.

mod imu;
mod problem;
mod smw;
mod vision;

pub use imu::{build_base_information, imu_factor_jacobian, ImuConfig, FRAME_DIM};
pub use problem::{
    objective_value, BuildOptions, LandmarkMeta, ProblemInstance, IncrementDoc, GRID_COLS, GRID_ROWS,
};
pub use smw::{apply_smw_update, marginal_gain_smw};
pub use vision::{build_landmark_factors, schur_increment, LandmarkFactors, LandmarkIncrement};

use nalgebra::DMatrix;

/// Symmetric Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub matrix: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}
