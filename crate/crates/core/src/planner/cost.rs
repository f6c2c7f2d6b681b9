use std::f64::consts::PI;

use super::{PlannerConfig, Trajectory, VelocityCommand};
use crate::costmap::{sample_max_along, AttentionMap, CostmapIndex, MapProjection};
use crate::kinematics::wrap_angle;

const AT_GOAL_EPS: f64 = 1e-9;

/// Goal term in `[0, 1]`: an even blend of the endpoint heading error
/// (relative to the bearing from the endpoint to the goal, over pi) and the
/// fraction of the initial goal distance still remaining.
pub fn goal_cost(
    _cmd: VelocityCommand,
    traj: &Trajectory,
    goal: (f64, f64),
    _cfg: &PlannerConfig,
) -> f64 {
    let start_dist = goal.0.hypot(goal.1);
    if start_dist <= AT_GOAL_EPS {
        return 0.0;
    }
    let end = traj.endpoint();
    let (dx, dy) = (goal.0 - end.x, goal.1 - end.y);
    let end_dist = dx.hypot(dy);
    let heading = if end_dist <= AT_GOAL_EPS {
        0.0
    } else {
        wrap_angle(dy.atan2(dx) - end.theta).abs() / PI
    };
    let progress = (end_dist / start_dist).clamp(0.0, 1.0);
    0.5 * heading + 0.5 * progress
}

/// Map cells under each in-view rollout pose (the projected trajectory).
pub fn project_trajectory(
    traj: &Trajectory,
    map: &AttentionMap,
    projection: &MapProjection,
) -> Vec<CostmapIndex> {
    traj.poses
        .iter()
        .filter_map(|p| projection.cell_of(p.pose.x, p.pose.y, map.width(), map.height()))
        .collect()
}

/// Maximum attention over the projected trajectory; 0 when no pose is in view.
pub fn social_cost(traj: &Trajectory, map: &AttentionMap, projection: &MapProjection) -> f64 {
    let cells = project_trajectory(traj, map, projection);
    if cells.is_empty() {
        return 0.0;
    }
    sample_max_along(map, &cells).expect("projected cells are in bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{CameraModel, MapFrame, MapRole};
    use crate::planner::rollout;

    fn cfg() -> PlannerConfig {
        PlannerConfig {
            horizon: 2.0,
            dt: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn goal_reached_costs_zero() {
        let c = cfg();
        let cmd = VelocityCommand::new(1.0, 0.0);
        let t = rollout(cmd, &c);
        assert_eq!(goal_cost(cmd, &t, (2.0, 0.0), &c), 0.0);
    }

    #[test]
    fn driving_away_costs_one() {
        let c = cfg();
        let cmd = VelocityCommand::new(0.5, 0.0);
        let t = rollout(cmd, &c);
        assert_eq!(goal_cost(cmd, &t, (-3.0, 0.0), &c), 1.0);
    }

    #[test]
    fn goal_at_origin_is_zero() {
        let c = cfg();
        let cmd = VelocityCommand::new(0.5, 0.3);
        assert_eq!(goal_cost(cmd, &rollout(cmd, &c), (0.0, 0.0), &c), 0.0);
    }

    #[test]
    fn turning_toward_left_goal_beats_straight_on_heading() {
        let c = cfg();
        let goal = (0.0, 3.0);
        let turn = VelocityCommand::new(0.0, 0.8);
        let straight = VelocityCommand::new(0.5, 0.0);
        let heading = |cmd: VelocityCommand| {
            let e = rollout(cmd, &c).endpoint();
            wrap_angle((goal.1 - e.y).atan2(goal.0 - e.x) - e.theta).abs() / PI
        };
        assert!(heading(turn) < heading(straight));
        // progress terms are equal-ish, so the heading gap shows in the cost too
        assert!(
            goal_cost(turn, &rollout(turn, &c), goal, &c)
                < goal_cost(straight, &rollout(straight, &c), goal, &c)
        );
    }

    #[test]
    fn zero_map_zero_social() {
        let cam = CameraModel::default();
        let map = AttentionMap::zeros(32, 24, MapRole::Distilled, MapFrame::Image).unwrap();
        let t = rollout(VelocityCommand::new(0.8, 0.2), &cfg());
        assert_eq!(social_cost(&t, &map, &MapProjection::Image(cam)), 0.0);
    }

    #[test]
    fn hot_cell_under_straight_rollout() {
        let cam = CameraModel::default();
        let proj = MapProjection::Image(cam);
        let t = rollout(VelocityCommand::new(1.0, 0.0), &cfg());
        let mut values = vec![0.0f32; 32 * 24];
        let cell = proj.cell_of(1.5, 0.0, 32, 24).unwrap();
        values[cell.i * 32 + cell.j] = 0.8;
        let map = AttentionMap::new(32, 24, values, MapRole::Distilled, MapFrame::Image).unwrap();
        assert_eq!(social_cost(&t, &map, &proj), 0.8f32 as f64);
    }

    #[test]
    fn all_out_of_view_is_zero() {
        let cam = CameraModel {
            focal_px: 60.0,
            pitch_rad: 0.45,
            ..CameraModel::default()
        };
        let map = AttentionMap::filled(32, 24, 1.0, MapRole::Distilled, MapFrame::Image).unwrap();
        // pure rotation stays at the origin, which is below the image
        let t = rollout(VelocityCommand::new(0.0, 1.0), &cfg());
        assert_eq!(social_cost(&t, &map, &MapProjection::Image(cam)), 0.0);
    }
}
