//! Synthetic visual-inertial worlds: bicycle-model horizon prediction,
//! pinhole frustum projection and per-frame landmark visibility.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::infomat::ImuConfig;
use crate::rng::SplitMix64;
use crate::serde_mat;

/// Below this camera-to-point distance a projection is undefined.
const MIN_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub t: Vector3<f64>,
    /// Body-to-world rotation.
    pub rot: Matrix3<f64>,
    pub psi: f64,
}

impl Pose {
    /// Planar pose: rotation about world z by `psi`.
    pub fn planar(t: Vector3<f64>, psi: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), psi).into_inner();
        Self { t, rot, psi }
    }

    pub fn identity() -> Self {
        Self::planar(Vector3::zeros(), 0.0)
    }
}

#[derive(Serialize, Deserialize)]
struct PoseDoc {
    #[serde(with = "serde_mat::vector3")]
    t: Vector3<f64>,
    psi: f64,
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseDoc { t: self.t, psi: self.psi }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = PoseDoc::deserialize(d)?;
        Ok(Pose::planar(doc.t, doc.psi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear speed (m/s).
    pub u: f64,
    /// Steering angle (rad).
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub half_fov_h: f64,
    pub half_fov_v: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// IMU-to-camera translation, body frame.
    #[serde(with = "serde_mat::vector3")]
    pub t_ext: Vector3<f64>,
    /// Camera-to-body rotation: `R_cam = R_body * R_ext`.
    #[serde(rename = "R_ext", with = "serde_mat::matrix3")]
    pub r_ext: Matrix3<f64>,
}

impl CameraModel {
    /// Optical axis along body +x, image x along body -y, image y along body -z.
    pub fn forward_looking() -> Self {
        let r_ext = Matrix3::from_columns(&[
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
        ]);
        Self {
            half_fov_h: 0.7,
            half_fov_v: 0.5,
            z_min: 0.2,
            z_max: 10.0,
            t_ext: Vector3::new(0.1, 0.0, 0.05),
            r_ext,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (name, a) in [("half_fov_h", self.half_fov_h), ("half_fov_v", self.half_fov_v)] {
            if !(a > 0.0 && a < half_pi) {
                return Err(invalid(format!("{name} must lie in (0, pi/2)")));
            }
        }
        if !(self.z_min > 0.0 && self.z_min < self.z_max) {
            return Err(invalid("camera depth range must satisfy 0 < z_min < z_max"));
        }
        Ok(())
    }

    /// Camera center and camera-to-world rotation at a body pose.
    pub fn camera_pose(&self, pose: &Pose) -> (Vector3<f64>, Matrix3<f64>) {
        (pose.t + pose.rot * self.t_ext, pose.rot * self.r_ext)
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::forward_looking()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    #[serde(with = "serde_mat::vector3")]
    pub p: Vector3<f64>,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub dt: f64,
    pub wheelbase: f64,
    pub camera: CameraModel,
    pub poses: Vec<Pose>,
    pub controls: Vec<ControlInput>,
    pub landmarks: Vec<Landmark>,
    pub imu: ImuConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub bearing: Vector3<f64>,
    pub depth: f64,
}

pub fn simulate_bicycle_horizon(
    start: &Pose,
    controls: &[ControlInput],
    dt: f64,
    wheelbase: f64,
) -> Result<Vec<Pose>> {
    rollout(start, controls, dt, wheelbase, &[])
}

fn rollout(
    start: &Pose,
    controls: &[ControlInput],
    dt: f64,
    wheelbase: f64,
    heading_noise: &[f64],
) -> Result<Vec<Pose>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if !(wheelbase.is_finite() && wheelbase > 0.0) {
        return Err(invalid(format!("wheelbase must be positive, got {wheelbase}")));
    }
    let mut poses = Vec::with_capacity(controls.len() + 1);
    poses.push(start.clone());
    let (mut t, mut psi) = (start.t, start.psi);
    for (h, c) in controls.iter().enumerate() {
        if !(c.u.is_finite() && c.delta.is_finite()) {
            return Err(invalid(format!("non-finite control at step {h}")));
        }
        if c.delta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(invalid(format!("steering angle {} at step {h} is not below pi/2", c.delta)));
        }
        t += c.u * Vector3::new(psi.cos(), psi.sin(), 0.0) * dt;
        psi += c.u / wheelbase * c.delta.tan() * dt + heading_noise.get(h).copied().unwrap_or(0.0);
        poses.push(Pose::planar(t, psi));
    }
    Ok(poses)
}

pub fn project_to_camera(pose: &Pose, cam: &CameraModel, point: &Vector3<f64>) -> Option<Projection> {
    let (t_cam, r_cam) = cam.camera_pose(pose);
    let v = r_cam.transpose() * (point - t_cam);
    let range = v.norm();
    if !(range >= MIN_RANGE) {
        return None;
    }
    let z = v.z;
    if z < cam.z_min || z > cam.z_max {
        return None;
    }
    if v.x.atan2(z).abs() > cam.half_fov_h || v.y.atan2(z).abs() > cam.half_fov_v {
        return None;
    }
    Some(Projection { bearing: v / range, depth: z })
}

pub fn visibility_mask(poses: &[Pose], cam: &CameraModel, point: &Vector3<f64>) -> Vec<bool> {
    poses
        .iter()
        .map(|pose| project_to_camera(pose, cam, point).is_some())
        .collect()
}

impl Scenario {
    /// Number of predicted steps T; the horizon spans T+1 frames.
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses.len() != self.controls.len() + 1 {
            return Err(invalid(format!(
                "scenario has {} poses for {} controls",
                self.poses.len(),
                self.controls.len()
            )));
        }
        self.camera.validate()?;
        self.imu.validate()?;
        let mut ids: Vec<usize> = self.landmarks.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate landmark id"));
        }
        Ok(())
    }

    pub fn visibility(&self, landmark: &Landmark) -> Vec<bool> {
        visibility_mask(&self.poses, &self.camera, &landmark.p)
    }

    /// Sub-horizon of `horizon` steps starting at frame `start`, same world.
    pub fn window(&self, start: usize, horizon: usize) -> Result<Scenario> {
        if start + horizon > self.horizon() {
            return Err(invalid(format!(
                "window [{start}, {}] exceeds horizon {}",
                start + horizon,
                self.horizon()
            )));
        }
        let mut imu = self.imu.clone();
        if imu.accel_readings.len() >= start + horizon {
            imu.accel_readings = imu.accel_readings[start..start + horizon].to_vec();
        }
        Ok(Scenario {
            seed: self.seed,
            dt: self.dt,
            wheelbase: self.wheelbase,
            camera: self.camera.clone(),
            poses: self.poses[start..=start + horizon].to_vec(),
            controls: self.controls[start..start + horizon].to_vec(),
            landmarks: self.landmarks.clone(),
            imu,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Axis-aligned sampling box expressed in the start pose's body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for LandmarkBox {
    fn default() -> Self {
        Self { min: [1.0, -3.0, -0.5], max: [6.0, 3.0, 1.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub num_landmarks: usize,
    pub horizon: usize,
    pub dt: f64,
    pub wheelbase: f64,
    #[serde(with = "serde_mat::vector3")]
    pub start_t: Vector3<f64>,
    pub start_psi: f64,
    /// Either one control repeated over the horizon or exactly `horizon` entries.
    pub controls: Vec<ControlInput>,
    pub camera: CameraModel,
    pub imu: ImuConfig,
    pub landmark_box: LandmarkBox,
    pub max_attempts: usize,
    /// Standard deviation of per-step heading perturbations (rad); 0 disables.
    pub heading_noise: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_landmarks: 150,
            horizon: 13,
            dt: 0.1,
            wheelbase: 0.26,
            start_t: Vector3::zeros(),
            start_psi: 0.0,
            controls: vec![ControlInput { u: 1.0, delta: 0.1 }],
            camera: CameraModel::forward_looking(),
            imu: ImuConfig::default(),
            landmark_box: LandmarkBox::default(),
            max_attempts: 100,
            heading_noise: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn expanded_controls(&self) -> Result<Vec<ControlInput>> {
        match self.controls.len() {
            1 => Ok(vec![self.controls[0]; self.horizon]),
            n if n == self.horizon => Ok(self.controls.clone()),
            n => Err(invalid(format!(
                "expected 1 or {} controls, got {n}",
                self.horizon
            ))),
        }
    }
}

/// Noiseless accelerometer readings implied by the rollout, one per step.
fn accel_readings(poses: &[Pose], controls: &[ControlInput], dt: f64, gravity: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let vel = |h: usize| {
        let u = controls.get(h).or(controls.last()).map_or(0.0, |c| c.u);
        let psi = poses[h].psi;
        u * Vector3::new(psi.cos(), psi.sin(), 0.0)
    };
    (0..controls.len())
        .map(|h| {
            let a = (vel(h + 1) - vel(h)) / dt;
            poses[h].rot.transpose() * (a - gravity)
        })
        .collect()
}

pub fn generate_scenario(seed: u64, cfg: &ScenarioConfig) -> Result<Scenario> {
    if cfg.num_landmarks == 0 {
        return Err(invalid("num_landmarks must be at least 1"));
    }
    if cfg.horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    if cfg.max_attempts == 0 {
        return Err(invalid("max_attempts must be at least 1"));
    }
    cfg.camera.validate()?;
    cfg.imu.validate()?;
    let b = &cfg.landmark_box;
    if (0..3).any(|i| !(b.min[i] <= b.max[i])) {
        return Err(invalid("landmark_box min must not exceed max"));
    }

    let mut rng = SplitMix64::new(seed);
    let controls = cfg.expanded_controls()?;
    let start = Pose::planar(cfg.start_t, cfg.start_psi);
    let noise: Vec<f64> = if cfg.heading_noise > 0.0 {
        (0..controls.len()).map(|_| cfg.heading_noise * rng.normal()).collect()
    } else {
        Vec::new()
    };
    let poses = rollout(&start, &controls, cfg.dt, cfg.wheelbase, &noise)?;

    for _ in 0..cfg.max_attempts {
        let landmarks: Vec<Landmark> = (0..cfg.num_landmarks)
            .map(|id| {
                let local = Vector3::new(
                    rng.uniform(b.min[0], b.max[0]),
                    rng.uniform(b.min[1], b.max[1]),
                    rng.uniform(b.min[2], b.max[2]),
                );
                let quality = rng.next_f64();
                Landmark { id, p: start.t + start.rot * local, quality }
            })
            .collect();
        let triangulable = landmarks.iter().any(|l| {
            visibility_mask(&poses, &cfg.camera, &l.p)
                .iter()
                .filter(|&&v| v)
                .count()
                >= 2
        });
        if triangulable {
            let mut imu = cfg.imu.clone();
            imu.accel_readings = accel_readings(&poses, &controls, cfg.dt, &imu.gravity);
            return Ok(Scenario {
                seed,
                dt: cfg.dt,
                wheelbase: cfg.wheelbase,
                camera: cfg.camera.clone(),
                poses,
                controls,
                landmarks,
                imu,
            });
        }
    }
    Err(Error::NoTriangulableLandmark { attempts: cfg.max_attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, u: f64) -> Vec<ControlInput> {
        vec![ControlInput { u, delta: 0.0 }; n]
    }

    fn simple_cam() -> CameraModel {
        CameraModel {
            half_fov_h: std::f64::consts::FRAC_PI_4,
            half_fov_v: std::f64::consts::FRAC_PI_4,
            z_min: 0.1,
            z_max: 10.0,
            t_ext: Vector3::zeros(),
            r_ext: Matrix3::identity(),
        }
    }

    #[test]
    fn straight_rollout() {
        let poses = simulate_bicycle_horizon(&Pose::identity(), &straight(3, 1.0), 0.1, 0.26).unwrap();
        assert_eq!(poses.len(), 4);
        for (k, p) in poses.iter().enumerate() {
            assert!((p.t - Vector3::new(0.1 * k as f64, 0.0, 0.0)).norm() < 1e-12);
            assert_eq!(p.psi, 0.0);
        }
    }

    #[test]
    fn zero_speed_freezes() {
        let c = [ControlInput { u: 0.0, delta: 0.3 }];
        let poses = simulate_bicycle_horizon(&Pose::identity(), &c, 0.1, 0.26).unwrap();
        assert_eq!(poses[1], poses[0]);
    }

    #[test]
    fn rollout_rejects_bad_input() {
        let bad = [ControlInput { u: f64::NAN, delta: 0.0 }];
        assert!(simulate_bicycle_horizon(&Pose::identity(), &bad, 0.1, 0.26).is_err());
        assert!(simulate_bicycle_horizon(&Pose::identity(), &straight(1, 1.0), 0.0, 0.26).is_err());
        let steep = [ControlInput { u: 1.0, delta: 1.6 }];
        assert!(simulate_bicycle_horizon(&Pose::identity(), &steep, 0.1, 0.26).is_err());
    }

    #[test]
    fn projection_on_axis() {
        let p = project_to_camera(&Pose::identity(), &simple_cam(), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((p.bearing - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert!((p.depth - 1.0).abs() < 1e-15);
        assert!(project_to_camera(&Pose::identity(), &simple_cam(), &Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn projection_respects_half_fov() {
        let mut cam = simple_cam();
        cam.half_fov_h = 0.3;
        let outside = Vector3::new(0.31f64.tan(), 0.0, 1.0);
        assert!(project_to_camera(&Pose::identity(), &cam, &outside).is_none());
        let inside = Vector3::new(0.29f64.tan(), 0.0, 1.0);
        assert!(project_to_camera(&Pose::identity(), &cam, &inside).is_some());
    }

    #[test]
    fn projection_degenerate_range() {
        let cam = simple_cam();
        assert!(project_to_camera(&Pose::identity(), &cam, &Vector3::zeros()).is_none());
    }

    #[test]
    fn landmark_behind_is_never_visible() {
        let poses = simulate_bicycle_horizon(&Pose::identity(), &straight(10, 1.0), 0.1, 0.26).unwrap();
        let cam = CameraModel::forward_looking();
        let mask = visibility_mask(&poses, &cam, &Vector3::new(-2.0, 0.0, 0.0));
        assert!(mask.iter().all(|&v| !v));
    }

    #[test]
    fn window_keeps_world() {
        let cfg = ScenarioConfig { num_landmarks: 20, horizon: 8, ..Default::default() };
        let sc = generate_scenario(5, &cfg).unwrap();
        let w = sc.window(2, 4).unwrap();
        assert_eq!(w.horizon(), 4);
        assert_eq!(w.poses[0], sc.poses[2]);
        assert_eq!(w.landmarks, sc.landmarks);
        assert_eq!(w.imu.accel_readings.len(), 4);
        assert!(sc.window(6, 4).is_err());
    }

    #[test]
    fn scenario_round_trips() {
        let cfg = ScenarioConfig { num_landmarks: 5, horizon: 3, ..Default::default() };
        let sc = generate_scenario(11, &cfg).unwrap();
        let back = Scenario::from_json(&sc.to_json().unwrap()).unwrap();
        assert_eq!(back.to_json().unwrap(), sc.to_json().unwrap());
    }

    #[test]
    fn expanded_controls_lengths() {
        let mut cfg = ScenarioConfig { horizon: 4, ..Default::default() };
        assert_eq!(cfg.expanded_controls().unwrap().len(), 4);
        cfg.controls = vec![ControlInput { u: 1.0, delta: 0.0 }; 3];
        assert!(cfg.expanded_controls().is_err());
    }
}
