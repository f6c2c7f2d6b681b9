//! Unicycle kinematics shared by the planner rollouts and the simulator.

use serde::{Deserialize, Serialize};

/// Angular rates at or below this are integrated as straight lines.
pub const STRAIGHT_OMEGA_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// Expresses a world point in this pose's local frame.
    pub fn to_local(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (wx - self.x, wy - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Maps a point in this pose's local frame to the world frame.
    pub fn to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * lx - s * ly, self.y + s * lx + c * ly)
    }

    /// Composes a local pose onto this one.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        let (x, y) = self.to_world(local.x, local.y);
        Pose2::new(x, y, wrap_angle(self.theta + local.theta))
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Advances a pose by holding `(v, omega)` for `dt` seconds along the exact
/// arc (or straight line for negligible `omega`).
pub fn integrate_arc(pose: &Pose2, v: f64, omega: f64, dt: f64) -> Pose2 {
    if omega.abs() > STRAIGHT_OMEGA_EPS {
        let theta1 = pose.theta + omega * dt;
        let r = v / omega;
        Pose2::new(
            pose.x + r * (theta1.sin() - pose.theta.sin()),
            pose.y - r * (theta1.cos() - pose.theta.cos()),
            wrap_angle(theta1),
        )
    } else {
        Pose2::new(
            pose.x + v * dt * pose.theta.cos(),
            pose.y + v * dt * pose.theta.sin(),
            wrap_angle(pose.theta + omega * dt),
        )
    }
}
