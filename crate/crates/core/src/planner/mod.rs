//! Sampling-based velocity-space MPC. Candidate commands from the dynamic
//! window are rolled out, filtered for collisions against an occupancy grid,
//! and scored by `J = beta_goal * goal + beta_social * soc`, where `soc` is
//! the maximum attention value under the rollout.

mod cost;
mod rollout;
mod search;

pub use cost::{goal_cost, project_trajectory, social_cost};
pub use rollout::{rollout, TimedPose, Trajectory};
pub use search::{
    feasible_set, plan, plan_brute_oracle, Candidate, PlanDiagnostics, PlanOutcome, PlanRequest,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Clamps into the platform box `[-v_max, v_max] x [-omega_max, omega_max]`.
    pub fn clamped(self, v_max: f64, omega_max: f64) -> Self {
        Self {
            v: self.v.clamp(-v_max, v_max),
            omega: self.omega.clamp(-omega_max, omega_max),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0.0 && self.omega == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub beta_goal: f64,
    pub beta_social: f64,
    /// Rollout length, seconds.
    pub horizon: f64,
    /// Rollout step and control period, seconds.
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub accel_v: f64,
    pub accel_omega: f64,
    pub robot_radius: f64,
    pub goal_tolerance: f64,
    pub samples_v: usize,
    pub samples_omega: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            beta_goal: 1.0,
            beta_social: 2.0,
            horizon: 3.0,
            dt: 0.05,
            v_max: 0.8,
            omega_max: 1.2,
            accel_v: 1.5,
            accel_omega: 3.0,
            robot_radius: 0.35,
            goal_tolerance: 0.3,
            samples_v: 11,
            samples_omega: 21,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.beta_goal >= 0.0 && self.beta_social >= 0.0) {
            return Err("beta weights must be nonnegative".into());
        }
        if !(self.beta_goal + self.beta_social > 0.0) {
            return Err("beta_goal + beta_social must be positive".into());
        }
        if !(self.dt > 0.0 && self.horizon >= self.dt) {
            return Err("need horizon >= dt > 0".into());
        }
        if !(self.v_max > 0.0
            && self.omega_max > 0.0
            && self.accel_v > 0.0
            && self.accel_omega > 0.0)
        {
            return Err("platform limits must be positive".into());
        }
        if self.samples_v == 0 || self.samples_omega == 0 {
            return Err("sample counts must be positive".into());
        }
        Ok(())
    }

    /// Same configuration with the social term disabled.
    pub fn goal_only(&self) -> Self {
        Self {
            beta_social: 0.0,
            ..*self
        }
    }

    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) + 1e-9).floor() as usize
    }
}

/// Velocities reachable within one control period, intersected with the
/// platform limits. Forward motion only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityWindow {
    pub v_lo: f64,
    pub v_hi: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub samples_v: usize,
    pub samples_omega: usize,
}

fn lerp_sample(lo: f64, hi: f64, k: usize, n: usize) -> f64 {
    if n <= 1 {
        lo
    } else if k + 1 == n {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (n - 1) as f64
    }
}

impl VelocityWindow {
    pub fn contains(&self, cmd: VelocityCommand) -> bool {
        cmd.v >= self.v_lo
            && cmd.v <= self.v_hi
            && cmd.omega >= self.omega_lo
            && cmd.omega <= self.omega_hi
    }

    /// Uniform grid over the window, endpoints included; `v`-major order.
    pub fn samples(&self) -> Vec<VelocityCommand> {
        let mut out = Vec::with_capacity(self.samples_v * self.samples_omega);
        for a in 0..self.samples_v {
            let v = lerp_sample(self.v_lo, self.v_hi, a, self.samples_v);
            for b in 0..self.samples_omega {
                let omega = lerp_sample(self.omega_lo, self.omega_hi, b, self.samples_omega);
                out.push(VelocityCommand { v, omega });
            }
        }
        out
    }
}

pub fn admissible_window(current: VelocityCommand, cfg: &PlannerConfig) -> VelocityWindow {
    let dv = cfg.accel_v * cfg.dt;
    let dw = cfg.accel_omega * cfg.dt;
    VelocityWindow {
        v_lo: (current.v - dv).max(0.0),
        v_hi: (current.v + dv).min(cfg.v_max),
        omega_lo: (current.omega - dw).max(-cfg.omega_max),
        omega_hi: (current.omega + dw).min(cfg.omega_max),
        samples_v: cfg.samples_v,
        samples_omega: cfg.samples_omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_from_rest() {
        let cfg = PlannerConfig {
            dt: 0.1,
            accel_v: 2.0,
            accel_omega: 5.0,
            ..Default::default()
        };
        let w = admissible_window(VelocityCommand::STOP, &cfg);
        assert_eq!((w.v_lo, w.v_hi), (0.0, 0.2));
        assert_eq!((w.omega_lo, w.omega_hi), (-0.5, 0.5));
    }

    #[test]
    fn window_clamps_at_limits() {
        let cfg = PlannerConfig::default();
        let w = admissible_window(VelocityCommand::new(cfg.v_max, cfg.omega_max), &cfg);
        assert_eq!(w.v_hi, cfg.v_max);
        assert_eq!(w.omega_hi, cfg.omega_max);
    }

    #[test]
    fn samples_cover_grid_with_exact_endpoints() {
        let cfg = PlannerConfig::default();
        let w = admissible_window(VelocityCommand::new(0.4, 0.0), &cfg);
        let s = w.samples();
        assert_eq!(s.len(), 11 * 21);
        assert_eq!(s[0].v, w.v_lo);
        assert_eq!(s.last().unwrap().v, w.v_hi);
        assert_eq!(s.last().unwrap().omega, w.omega_hi);
        assert!(s.iter().any(|c| c.omega == 0.0));
    }

    proptest! {
        #[test]
        fn window_inside_platform_and_contains_current(v in 0.0f64..=0.8, w in -1.2f64..=1.2) {
            let cfg = PlannerConfig::default();
            let cur = VelocityCommand::new(v, w);
            let win = admissible_window(cur, &cfg);
            prop_assert!(win.v_lo >= 0.0 && win.v_hi <= cfg.v_max);
            prop_assert!(win.omega_lo >= -cfg.omega_max && win.omega_hi <= cfg.omega_max);
            prop_assert!(win.contains(cur));
            for s in win.samples() {
                prop_assert!(win.contains(s));
            }
        }
    }
}
