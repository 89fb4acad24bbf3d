use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::vision::{build_landmark_factors, schur_increment, LandmarkIncrement};
use super::{build_base_information, InfoMatrix, FRAME_DIM};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::scenario::{project_to_camera, Scenario};
use crate::serde_mat;

/// Image grid used by the spatial baseline: 15 columns by 12 rows.
pub const GRID_COLS: usize = 15;
pub const GRID_ROWS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildOptions {
    /// Bearing noise used to whiten every vision row.
    pub sigma_bearing: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { sigma_bearing: 0.01 }
    }
}

/// Per-landmark data the non-informational baselines need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LandmarkMeta {
    pub id: usize,
    pub quality: f64,
    pub n_obs: usize,
    pub first_visible: bool,
    /// Row-major cell of the first-frame bearing in the baseline grid.
    pub grid_cell: Option<usize>,
}

/// Ground set of candidate features over one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub horizon: usize,
    pub omega0: InfoMatrix,
    pub increments: Vec<LandmarkIncrement>,
    pub meta: Vec<LandmarkMeta>,
    base_trace_inv: f64,
}

/// Serialized increment: either or both of `delta` and `G` may be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementDoc {
    pub id: usize,
    #[serde(default)]
    pub n_obs: usize,
    #[serde(with = "serde_mat::opt_dmatrix", default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DMatrix<f64>>,
    #[serde(rename = "G", with = "serde_mat::opt_dmatrix", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemDoc {
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(with = "serde_mat::dmatrix")]
    omega0: DMatrix<f64>,
    increments: Vec<IncrementDoc>,
    #[serde(default)]
    meta: Vec<LandmarkMeta>,
}

fn grid_cell(bearing: &nalgebra::Vector3<f64>, half_h: f64, half_v: f64) -> usize {
    let az = bearing.x.atan2(bearing.z);
    let el = bearing.y.atan2(bearing.z);
    let bin = |a: f64, half: f64, count: usize| {
        let t = ((a + half) / (2.0 * half) * count as f64).floor();
        (t.max(0.0) as usize).min(count - 1)
    };
    bin(el, half_v, GRID_ROWS) * GRID_COLS + bin(az, half_h, GRID_COLS)
}

impl ProblemInstance {
    pub fn new(
        horizon: usize,
        omega0: InfoMatrix,
        increments: Vec<LandmarkIncrement>,
        meta: Vec<LandmarkMeta>,
    ) -> Result<Self> {
        let n = omega0.dim();
        if omega0.matrix.ncols() != n {
            return Err(invalid("omega0 must be square"));
        }
        if increments.is_empty() {
            return Err(invalid("ground set must contain at least one feature"));
        }
        for inc in &increments {
            if inc.delta.nrows() != n || inc.delta.ncols() != n || inc.g.ncols() != n {
                return Err(invalid(format!("increment {} has wrong dimension", inc.id)));
            }
        }
        if meta.len() != increments.len() {
            return Err(invalid("metadata length differs from ground-set size"));
        }
        let base_trace_inv = linalg::trace_inverse(&omega0.matrix)?;
        Ok(Self { horizon, omega0, increments, meta, base_trace_inv })
    }

    /// Generic instance from dense matrices; factors are derived by
    /// eigendecomposition. Frames are taken as `ceil(n / 9)`.
    pub fn from_dense(omega0: DMatrix<f64>, deltas: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = omega0.nrows();
        let horizon = n.div_ceil(FRAME_DIM).saturating_sub(1);
        let increments: Vec<_> = deltas
            .into_iter()
            .enumerate()
            .map(|(id, d)| LandmarkIncrement::from_dense(id, 0, d))
            .collect();
        let meta = (0..increments.len())
            .map(|id| LandmarkMeta { id, ..Default::default() })
            .collect();
        let mut m = omega0;
        linalg::symmetrize(&mut m);
        Self::new(horizon, InfoMatrix::new(m), increments, meta)
    }

    /// Generic instance from low-rank factors, `Delta_l = G_l^T G_l`.
    pub fn from_factors(omega0: DMatrix<f64>, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = omega0.nrows();
        let horizon = n.div_ceil(FRAME_DIM).saturating_sub(1);
        let increments: Vec<_> = factors
            .into_iter()
            .enumerate()
            .map(|(id, g)| LandmarkIncrement::from_factor(id, 0, g))
            .collect();
        let meta = (0..increments.len())
            .map(|id| LandmarkMeta { id, ..Default::default() })
            .collect();
        let mut m = omega0;
        linalg::symmetrize(&mut m);
        Self::new(horizon, InfoMatrix::new(m), increments, meta)
    }

    pub fn build(scenario: &Scenario, opts: &BuildOptions) -> Result<Self> {
        scenario.validate()?;
        let omega0 = build_base_information(scenario)?;
        let mut increments = Vec::with_capacity(scenario.landmarks.len());
        let mut meta = Vec::with_capacity(scenario.landmarks.len());
        let cam = &scenario.camera;
        for lm in &scenario.landmarks {
            let mask = scenario.visibility(lm);
            let factors = build_landmark_factors(scenario, lm, &mask, opts.sigma_bearing)?;
            let first = project_to_camera(&scenario.poses[0], cam, &lm.p);
            meta.push(LandmarkMeta {
                id: lm.id,
                quality: lm.quality,
                n_obs: factors.n_obs(),
                first_visible: first.is_some(),
                grid_cell: first.map(|p| grid_cell(&p.bearing, cam.half_fov_h, cam.half_fov_v)),
            });
            increments.push(schur_increment(&factors));
        }
        Self::new(scenario.horizon(), omega0, increments, meta)
    }

    /// Ground-set size N.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// State dimension n.
    pub fn dim(&self) -> usize {
        self.omega0.dim()
    }

    pub fn base_trace_inverse(&self) -> f64 {
        self.base_trace_inv
    }

    pub fn check_ids(&self, ids: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for &i in ids {
            if i >= self.len() {
                return Err(invalid(format!("feature index {i} outside ground set of {}", self.len())));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("duplicate feature index {i}")));
            }
        }
        Ok(())
    }

    /// `Omega_S = Omega_0 + sum_{l in S} Delta_l`, accumulated in the given order.
    pub fn omega_of(&self, ids: &[usize]) -> DMatrix<f64> {
        let mut m = self.omega0.matrix.clone();
        for &i in ids {
            m += &self.increments[i].delta;
        }
        m
    }

    pub fn omega_all(&self) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.omega_of(&all)
    }

    /// `tr(Omega_S^{-1}) / (T + 1)`.
    pub fn scaled_mse(&self, ids: &[usize]) -> Result<f64> {
        Ok(linalg::trace_inverse(&self.omega_of(ids))? / (self.horizon + 1) as f64)
    }

    /// Instance restricted to the listed features (new indices follow `ids`).
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        self.check_ids(ids)?;
        Self::new(
            self.horizon,
            self.omega0.clone(),
            ids.iter().map(|&i| self.increments[i].clone()).collect(),
            ids.iter().map(|&i| self.meta[i].clone()).collect(),
        )
    }

    /// Folds the `fixed` features into the base matrix. Returns the reduced
    /// instance and, for each of its features, the original index.
    pub fn condition_on(&self, fixed: &[usize]) -> Result<(Self, Vec<usize>)> {
        self.check_ids(fixed)?;
        let rest: Vec<usize> = (0..self.len()).filter(|i| !fixed.contains(i)).collect();
        if rest.is_empty() {
            return Err(invalid("conditioning leaves an empty ground set"));
        }
        let mut base = self.omega_of(fixed);
        linalg::symmetrize(&mut base);
        let reduced = Self::new(
            self.horizon,
            InfoMatrix::new(base),
            rest.iter().map(|&i| self.increments[i].clone()).collect(),
            rest.iter().map(|&i| self.meta[i].clone()).collect(),
        )?;
        Ok((reduced, rest))
    }

    /// Serializes with factored increments, or dense ones when `dense`.
    pub fn to_json(&self, dense: bool) -> Result<String> {
        let doc = ProblemDoc {
            horizon: self.horizon,
            omega0: self.omega0.matrix.clone(),
            increments: self
                .increments
                .iter()
                .map(|inc| IncrementDoc {
                    id: inc.id,
                    n_obs: inc.n_obs,
                    delta: dense.then(|| inc.delta.clone()),
                    g: (!dense).then(|| inc.g.clone()),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(s)?;
        let n = doc.omega0.nrows();
        let mut increments = Vec::with_capacity(doc.increments.len());
        for inc in doc.increments {
            let built = match (inc.delta, inc.g) {
                (Some(delta), Some(g)) if g.ncols() == n || g.nrows() == 0 => {
                    let g = if g.nrows() == 0 { DMatrix::zeros(0, n) } else { g };
                    let mut delta = delta;
                    linalg::symmetrize(&mut delta);
                    let trace = delta.trace();
                    LandmarkIncrement { id: inc.id, n_obs: inc.n_obs, delta, g, trace }
                }
                (Some(delta), _) => LandmarkIncrement::from_dense(inc.id, inc.n_obs, delta),
                (None, Some(g)) => {
                    let g = if g.nrows() == 0 { DMatrix::zeros(0, n) } else { g };
                    LandmarkIncrement::from_factor(inc.id, inc.n_obs, g)
                }
                (None, None) => return Err(invalid(format!("increment {} has neither delta nor G", inc.id))),
            };
            increments.push(built);
        }
        let meta = if doc.meta.is_empty() {
            increments
                .iter()
                .map(|inc| LandmarkMeta { id: inc.id, n_obs: inc.n_obs, ..Default::default() })
                .collect()
        } else {
            doc.meta
        };
        let mut omega0 = doc.omega0;
        linalg::symmetrize(&mut omega0);
        Self::new(doc.horizon, InfoMatrix::new(omega0), increments, meta)
    }

    /// SHA-256 of the factored serialization, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        let json = self.to_json(false)?;
        Ok(hex::encode(Sha256::digest(json.as_bytes())))
    }
}

/// `f(S) = tr(Omega_0^{-1}) - tr(Omega_S^{-1})`.
pub fn objective_value(problem: &ProblemInstance, ids: &[usize]) -> Result<f64> {
    problem.check_ids(ids)?;
    if ids.is_empty() {
        return Ok(0.0);
    }
    let trace = linalg::trace_inverse(&problem.omega_of(ids))?;
    Ok(problem.base_trace_inverse() - trace)
}
