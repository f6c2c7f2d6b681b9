//! Randomized planning instances shared by the planner tests and the
//! acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vilad_core::costmap::{
    AttentionMap, CameraModel, GroundGrid, MapFrame, MapProjection, MapRole,
};
use vilad_core::kinematics::Pose2;
use vilad_core::occupancy::OccupancyGrid;
use vilad_core::planner::*;

pub fn cfg() -> PlannerConfig {
    PlannerConfig::default()
}

pub fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, frame: MapFrame) -> AttentionMap {
    let sparse = rng.random_bool(0.5);
    let v: Vec<f32> = (0..w * h)
        .map(|_| {
            if sparse && rng.random_bool(0.8) {
                0.0
            } else {
                rng.random::<f32>()
            }
        })
        .collect();
    AttentionMap::new(w, h, v, MapRole::Distilled, frame).unwrap()
}

pub fn random_command(rng: &mut ChaCha8Rng) -> VelocityCommand {
    VelocityCommand::new(rng.random_range(0.0..=0.8), rng.random_range(-1.2..=1.2))
}

pub struct World {
    pub occ: OccupancyGrid,
    pub pose: Pose2,
    pub current: VelocityCommand,
    pub goal: (f64, f64),
    pub map: AttentionMap,
    pub projection: MapProjection,
    pub cfg: PlannerConfig,
}

impl World {
    pub fn request(&self) -> PlanRequest<'_> {
        PlanRequest {
            pose: self.pose,
            current: self.current,
            goal: self.goal,
            occupancy: &self.occ,
            map: &self.map,
            projection: &self.projection,
        }
    }
}

pub fn ground_grid() -> GroundGrid {
    GroundGrid {
        resolution: 0.1,
        x_far: 3.0,
        y_left: 3.0,
    }
}

pub fn random_world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ = OccupancyGrid::covering(-6.0, -6.0, 6.0, 6.0, 0.1);
    for _ in 0..rng.random_range(0..5) {
        let (x, y): (f64, f64) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
        if x.hypot(y) < 0.6 {
            continue;
        }
        if rng.random_bool(0.5) {
            occ.fill_box(
                x,
                y,
                x + rng.random_range(0.1..1.5),
                y + rng.random_range(0.1..1.5),
            );
        } else {
            let b = (
                x + rng.random_range(-2.0..2.0),
                y + rng.random_range(-2.0..2.0),
            );
            occ.fill_segment((x, y), b, 0.05);
        }
    }
    let mut cfg = cfg();
    match rng.random_range(0..4) {
        0 => cfg.beta_social = 0.0,
        1 => cfg.beta_goal = rng.random_range(0.0..2.0),
        2 => cfg.beta_social = rng.random_range(0.0..5.0),
        _ => {}
    }
    let (map, projection) = if rng.random_bool(0.5) {
        (
            random_map(&mut rng, 32, 24, MapFrame::Image),
            MapProjection::Image(CameraModel::default()),
        )
    } else {
        (
            random_map(&mut rng, 60, 60, MapFrame::Ground),
            MapProjection::Ground(ground_grid()),
        )
    };
    World {
        occ,
        pose: Pose2::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-3.1..3.1),
        ),
        current: random_command(&mut rng),
        goal: (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        map,
        projection,
        cfg,
    }
}

pub fn rollout_collides(w: &World, cmd: VelocityCommand) -> bool {
    rollout(cmd, &w.cfg).poses.iter().any(|p| {
        let (x, y) = w.pose.to_world(p.pose.x, p.pose.y);
        w.occ.disc_collides_naive(x, y, w.cfg.robot_radius)
    })
}
