use serde::{Deserialize, Serialize};

use super::{PlannerConfig, VelocityCommand};
use crate::kinematics::{integrate_arc, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub pose: Pose2,
    pub t: f64,
}

/// Robot-frame rollout starting at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<TimedPose>,
}

impl Trajectory {
    pub fn endpoint(&self) -> Pose2 {
        self.poses.last().map(|p| p.pose).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Holds `cmd` for the horizon, sampling every `dt`. Each pose is evaluated
/// in closed form from the origin, so no integration error accumulates.
pub fn rollout(cmd: VelocityCommand, cfg: &PlannerConfig) -> Trajectory {
    let origin = Pose2::default();
    let poses = (0..=cfg.steps())
        .map(|k| {
            let t = k as f64 * cfg.dt;
            let pose = if k == 0 {
                origin
            } else {
                integrate_arc(&origin, cmd.v, cmd.omega, t)
            };
            TimedPose { pose, t }
        })
        .collect();
    Trajectory { poses }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(horizon: f64) -> PlannerConfig {
        PlannerConfig {
            horizon,
            dt: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn straight_rollout() {
        let t = rollout(VelocityCommand::new(1.0, 0.0), &cfg(2.0));
        let e = t.endpoint();
        assert!((e.x - 2.0).abs() < 1e-12 && e.y == 0.0 && e.theta == 0.0);
        assert_eq!(t.poses[0].pose, Pose2::default());
        assert!(t.poses.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn arc_poses_on_circle() {
        let (v, w) = (0.7, 0.9);
        let r = v / w;
        let t = rollout(VelocityCommand::new(v, w), &cfg(3.0));
        for p in &t.poses {
            // circle centred at (0, r)
            let d = p.pose.x.hypot(p.pose.y - r);
            assert!((d - r).abs() < 1e-9);
        }
    }

    #[test]
    fn endpoint_matches_fine_euler() {
        for &(v, w) in &[(0.5, 0.3), (0.8, -1.2), (0.2, 1.0)] {
            let c = cfg(1.0);
            let e = rollout(VelocityCommand::new(v, w), &c).endpoint();
            let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
            let n = 1000;
            let h = c.horizon / n as f64;
            for _ in 0..n {
                x += v * th.cos() * h;
                y += v * th.sin() * h;
                th += w * h;
            }
            assert!((e.x - x).hypot(e.y - y) < 1e-3, "({v}, {w})");
        }
    }
}
