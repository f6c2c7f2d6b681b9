use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{
    admissible_window, goal_cost, rollout, social_cost, PlannerConfig, Trajectory, VelocityCommand,
    VelocityWindow,
};
use crate::costmap::{AttentionMap, MapProjection};
use crate::kinematics::Pose2;
use crate::occupancy::{point_rect_distance, OccupancyGrid};

/// Everything one planning tick looks at.
#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    /// Robot pose in the world (occupancy) frame.
    pub pose: Pose2,
    pub current: VelocityCommand,
    /// Goal point in the world frame.
    pub goal: (f64, f64),
    pub occupancy: &'a OccupancyGrid,
    pub map: &'a AttentionMap,
    pub projection: &'a MapProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cmd: VelocityCommand,
    pub goal_cost: f64,
    pub social_cost: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub window: VelocityWindow,
    pub sampled: usize,
    /// Feasible candidates in sampling order.
    pub candidates: Vec<Candidate>,
    pub recovery: bool,
}

impl PlanDiagnostics {
    /// The `k` best candidates, best first.
    pub fn top_k(&self, k: usize) -> Vec<Candidate> {
        let mut c = self.candidates.clone();
        c.sort_by(compare_candidates);
        c.truncate(k);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub command: VelocityCommand,
    pub chosen: Option<Candidate>,
    pub diagnostics: PlanDiagnostics,
}

/// Total order used for the argmin: lower `J`, then smaller `|omega|`, then
/// larger `v`, then smaller signed `omega`.
fn compare_candidates(a: &Candidate, b: &Candidate) -> Ordering {
    a.total
        .partial_cmp(&b.total)
        .unwrap_or(Ordering::Equal)
        .then(a.cmd.omega.abs().total_cmp(&b.cmd.omega.abs()))
        .then(b.cmd.v.total_cmp(&a.cmd.v))
        .then(a.cmd.omega.total_cmp(&b.cmd.omega))
}

fn trajectory_collides(
    traj: &Trajectory,
    pose: &Pose2,
    occupancy: &OccupancyGrid,
    radius: f64,
) -> bool {
    traj.poses.iter().any(|p| {
        let (wx, wy) = pose.to_world(p.pose.x, p.pose.y);
        occupancy.disc_collides(wx, wy, radius)
    })
}

/// Window samples whose rollouts keep the robot disc clear of every occupied
/// cell, in sampling order.
pub fn feasible_set(
    window: &VelocityWindow,
    occupancy: &OccupancyGrid,
    pose: &Pose2,
    cfg: &PlannerConfig,
) -> Vec<(VelocityCommand, Trajectory)> {
    window
        .samples()
        .into_iter()
        .filter_map(|cmd| {
            let traj = rollout(cmd, cfg);
            (!trajectory_collides(&traj, pose, occupancy, cfg.robot_radius)).then_some((cmd, traj))
        })
        .collect()
}

fn recovery_command(window: &VelocityWindow, goal_local: (f64, f64)) -> VelocityCommand {
    let omega = if goal_local.1.atan2(goal_local.0) >= 0.0 {
        window.omega_hi
    } else {
        window.omega_lo
    };
    VelocityCommand::new(window.v_lo, omega)
}

/// Picks the feasible command minimizing `J`. With no feasible command the
/// robot brakes as hard as the window allows and turns toward the goal.
pub fn plan(req: &PlanRequest<'_>, cfg: &PlannerConfig) -> PlanOutcome {
    let window = admissible_window(req.current, cfg);
    let goal_local = req.pose.to_local(req.goal.0, req.goal.1);
    let feasible = feasible_set(&window, req.occupancy, &req.pose, cfg);
    let candidates: Vec<Candidate> = feasible
        .iter()
        .map(|(cmd, traj)| {
            let g = goal_cost(*cmd, traj, goal_local, cfg);
            let s = social_cost(traj, req.map, req.projection);
            Candidate {
                cmd: *cmd,
                goal_cost: g,
                social_cost: s,
                total: cfg.beta_goal * g + cfg.beta_social * s,
            }
        })
        .collect();
    let chosen = candidates.iter().copied().reduce(|best, c| {
        if compare_candidates(&c, &best) == Ordering::Less {
            c
        } else {
            best
        }
    });
    let (command, recovery) = match chosen {
        Some(c) => (c.cmd, false),
        None => (recovery_command(&window, goal_local), true),
    };
    PlanOutcome {
        command,
        chosen,
        diagnostics: PlanDiagnostics {
            window,
            sampled: window.samples_v * window.samples_omega,
            candidates,
            recovery,
        },
    }
}

/// Exhaustive reference for [`plan`]: every sample is rolled out and checked
/// against every occupied cell, the social cost is a linear scan over the
/// projected cells, and the winner comes from a full sort.
pub fn plan_brute_oracle(req: &PlanRequest<'_>, cfg: &PlannerConfig) -> VelocityCommand {
    let window = admissible_window(req.current, cfg);
    let goal_local = req.pose.to_local(req.goal.0, req.goal.1);
    let occupied: Vec<(f64, f64, f64, f64)> = req
        .occupancy
        .occupied_cells()
        .map(|(c, r)| req.occupancy.cell_rect(c, r))
        .collect();
    let mut scored = Vec::new();
    for cmd in window.samples() {
        let traj = rollout(cmd, cfg);
        let blocked = traj.poses.iter().any(|p| {
            let (wx, wy) = req.pose.to_world(p.pose.x, p.pose.y);
            req.occupancy.disc_leaves_grid(wx, wy, cfg.robot_radius)
                || occupied.iter().any(|&(x0, y0, x1, y1)| {
                    point_rect_distance(wx, wy, x0, y0, x1, y1) < cfg.robot_radius
                })
        });
        if blocked {
            continue;
        }
        let mut soc = 0.0f32;
        for p in &traj.poses {
            if let Some(cell) =
                req.projection
                    .cell_of(p.pose.x, p.pose.y, req.map.width(), req.map.height())
            {
                soc = soc.max(req.map.values()[cell.i * req.map.width() + cell.j]);
            }
        }
        let g = goal_cost(cmd, &traj, goal_local, cfg);
        scored.push((cfg.beta_goal * g + cfg.beta_social * soc as f64, cmd));
    }
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.omega.abs().partial_cmp(&b.1.omega.abs()).unwrap())
            .then(b.1.v.partial_cmp(&a.1.v).unwrap())
            .then(a.1.omega.partial_cmp(&b.1.omega).unwrap())
    });
    match scored.first() {
        Some(&(_, cmd)) => cmd,
        None => {
            let bearing = goal_local.1.atan2(goal_local.0);
            VelocityCommand::new(
                window.v_lo,
                if bearing >= 0.0 {
                    window.omega_hi
                } else {
                    window.omega_lo
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{CameraModel, MapFrame, MapRole};

    fn open_world() -> OccupancyGrid {
        OccupancyGrid::covering(-10.0, -10.0, 10.0, 10.0, 0.1)
    }

    fn image_map(values: Vec<f32>) -> AttentionMap {
        AttentionMap::new(32, 24, values, MapRole::Distilled, MapFrame::Image).unwrap()
    }

    #[test]
    fn uniform_map_goal_ahead_goes_straight_at_full_window_speed() {
        let cfg = PlannerConfig::default();
        let occ = open_world();
        let map = image_map(vec![0.6; 32 * 24]);
        let proj = MapProjection::Image(CameraModel::default());
        let req = PlanRequest {
            pose: Pose2::default(),
            current: VelocityCommand::new(0.4, 0.0),
            goal: (6.0, 0.0),
            occupancy: &occ,
            map: &map,
            projection: &proj,
        };
        let out = plan(&req, &cfg);
        let win = admissible_window(req.current, &cfg);
        assert_eq!(out.command, VelocityCommand::new(win.v_hi, 0.0));
        assert!(!out.diagnostics.recovery);
        assert_eq!(out.diagnostics.candidates.len(), 231);
    }

    #[test]
    fn hot_right_half_never_steers_right() {
        let cfg = PlannerConfig::default();
        let occ = open_world();
        let mut values = vec![0.0f32; 32 * 24];
        for i in 0..24 {
            // column 16 holds the optical axis, so straight rollouts stay cold
            for j in 17..32 {
                values[i * 32 + j] = 1.0;
            }
        }
        let map = image_map(values);
        let proj = MapProjection::Image(CameraModel::default());
        for cur_w in [0.0, 0.15, 0.3] {
            let req = PlanRequest {
                pose: Pose2::default(),
                current: VelocityCommand::new(0.5, cur_w),
                goal: (6.0, 0.0),
                occupancy: &occ,
                map: &map,
                projection: &proj,
            };
            let cmd = plan(&req, &cfg).command;
            assert!(cmd.omega >= -1e-12, "current omega {cur_w} -> {cmd:?}");
            assert_eq!(cmd, plan_brute_oracle(&req, &cfg));
        }
    }

    #[test]
    fn enclosed_robot_recovers_in_place() {
        let cfg = PlannerConfig::default();
        let mut occ = open_world();
        occ.fill_segment((-0.4, -0.4), (0.4, -0.4), 0.02);
        occ.fill_segment((0.4, -0.4), (0.4, 0.4), 0.02);
        occ.fill_segment((0.4, 0.4), (-0.4, 0.4), 0.02);
        occ.fill_segment((-0.4, 0.4), (-0.4, -0.4), 0.02);
        let map = image_map(vec![0.0; 32 * 24]);
        let proj = MapProjection::Image(CameraModel::default());
        for (goal, sign) in [((0.0, 5.0), 1.0), ((0.0, -5.0), -1.0)] {
            let req = PlanRequest {
                pose: Pose2::default(),
                current: VelocityCommand::STOP,
                goal,
                occupancy: &occ,
                map: &map,
                projection: &proj,
            };
            let out = plan(&req, &cfg);
            assert!(out.diagnostics.recovery);
            assert!(out.diagnostics.candidates.is_empty());
            assert_eq!(out.command.v, 0.0);
            assert_eq!(out.command.omega, sign * cfg.accel_omega * cfg.dt);
            assert_eq!(out.command, plan_brute_oracle(&req, &cfg));
        }
    }

    #[test]
    fn wall_ahead_excludes_crossing_samples() {
        let cfg = PlannerConfig::default();
        let mut occ = open_world();
        occ.fill_segment((0.9, -3.0), (0.9, 3.0), 0.02);
        let win = admissible_window(VelocityCommand::new(0.5, 0.0), &cfg);
        let feasible = feasible_set(&win, &occ, &Pose2::default(), &cfg);
        assert!(feasible.len() < 231);
        for (_, traj) in &feasible {
            // geometric oracle: robot disc never reaches the wall face at x = 0.88
            for p in &traj.poses {
                assert!(p.pose.x + cfg.robot_radius <= 0.9);
            }
        }
    }
}
