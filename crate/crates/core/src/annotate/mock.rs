use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    frontier_bands, AnnotateError, AnnotationOracle, AnnotationRequest, FrontierAnnotation, Result,
};
use crate::costmap::CameraModel;
use crate::kinematics::Pose2;
use crate::sim::{PedestrianState, ScenarioSpec, World, WorldState};

/// Ground truth the mock oracle reads instead of the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub robot: Pose2,
    pub pedestrians: Vec<PedestrianState>,
}

impl SceneTruth {
    pub fn from_state(state: &WorldState) -> Self {
        Self {
            robot: state.robot,
            pedestrians: state.pedestrians.clone(),
        }
    }

    pub fn from_world(world: &World, state: &WorldState) -> Self {
        Self {
            robot: state.robot,
            pedestrians: world.pedestrians_at(state.time),
        }
    }
}

/// Offline stand-in for a VLM: each pedestrian whose constant-velocity
/// extrapolation enters a frontier's ground wedge adds `weight` to that
/// frontier, clamped to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockOracle {
    pub camera: CameraModel,
    pub horizon_s: f64,
    pub step_s: f64,
    pub weight: f64,
    /// Wedges end this far from the robot.
    pub max_range_m: f64,
    /// Std of Gaussian noise added per frontier; 0 disables.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for MockOracle {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            horizon_s: 3.0,
            step_s: 0.25,
            weight: 0.5,
            max_range_m: 6.0,
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }
}

impl MockOracle {
    /// Default oracle with the scenario's noise level, keyed by its seed.
    pub fn for_scenario(spec: &ScenarioSpec) -> Self {
        Self {
            noise_sigma: spec.oracle_noise,
            noise_seed: spec.seed,
            ..Self::default()
        }
    }

    /// Which frontier wedges, if any, a robot-frame ground point falls in.
    fn wedge_of(&self, bands: &[super::FrontierBand; 3], x: f64, y: f64) -> Option<usize> {
        if x <= 0.0 || x.hypot(y) > self.max_range_m {
            return None;
        }
        let p = self.camera.project_ground_unclipped(x, y)?;
        if !(p.u >= 0.0 && p.u < self.camera.image_width as f64) {
            return None;
        }
        let col = p.u.floor() as usize;
        bands.iter().position(|b| b.contains_column(col))
    }

    /// Likelihoods for a scene. `sequence_id` only keys the noise stream.
    pub fn annotate_scene(
        &self,
        scene: &SceneTruth,
        sequence_id: u64,
    ) -> Result<FrontierAnnotation> {
        if !(self.step_s > 0.0) || !(self.horizon_s >= 0.0) {
            return Err(AnnotateError::Validation(
                "mock horizon and step must be positive".into(),
            ));
        }
        let bands = frontier_bands(
            self.camera.image_width as usize,
            self.camera.image_height as usize,
        )?;
        let steps = (self.horizon_s / self.step_s + 1e-9).floor() as usize;
        let mut p = [0.0f64; 3];
        for ped in &scene.pedestrians {
            let mut hit = [false; 3];
            for k in 0..=steps {
                let (wx, wy) = ped.extrapolate(k as f64 * self.step_s);
                let (x, y) = scene.robot.to_local(wx, wy);
                if let Some(b) = self.wedge_of(&bands, x, y) {
                    hit[b] = true;
                }
            }
            for (p, h) in p.iter_mut().zip(hit) {
                if h {
                    *p += self.weight;
                }
            }
        }
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                self.noise_seed ^ sequence_id.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let normal = Normal::new(0.0, self.noise_sigma)
                .map_err(|e| AnnotateError::Validation(format!("noise sigma: {e}")))?;
            for v in &mut p {
                *v += normal.sample(&mut rng);
            }
        }
        let [l, c, r] = p.map(|v| v.clamp(0.0, 1.0));
        FrontierAnnotation::new(l, c, r)
    }
}

impl AnnotationOracle for MockOracle {
    fn kind(&self) -> &'static str {
        "mock"
    }

    fn annotate(&mut self, request: &AnnotationRequest<'_>) -> Result<FrontierAnnotation> {
        let scene = request
            .scene
            .ok_or_else(|| AnnotateError::Source("mock oracle needs scene ground truth".into()))?;
        self.annotate_scene(scene, request.frame.sequence_id)
    }
}
