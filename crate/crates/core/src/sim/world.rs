use serde::{Deserialize, Serialize};

use super::scenario::{PedestrianSpec, ScenarioSpec};
use super::{Result, SimError, PEDESTRIAN_RADIUS};
use crate::kinematics::{integrate_arc, Pose2};
use crate::occupancy::OccupancyGrid;
use crate::planner::VelocityCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    ReachedGoal,
    Collision,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl PedestrianState {
    /// Constant-velocity extrapolation `dt` seconds ahead.
    pub fn extrapolate(&self, dt: f64) -> (f64, f64) {
        (self.x + self.vx * dt, self.y + self.vy * dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub tick: u64,
    pub robot: Pose2,
    pub command: VelocityCommand,
    pub pedestrians: Vec<PedestrianState>,
    pub status: EpisodeStatus,
    /// Smallest edge-to-edge robot/pedestrian gap seen so far.
    pub min_clearance: Option<f64>,
}

/// Position and velocity of a waypoint-following pedestrian at time `t`.
pub fn pedestrian_at(p: &PedestrianSpec, t: f64) -> PedestrianState {
    let mut pts = Vec::with_capacity(p.waypoints.len() + 1);
    pts.push(p.start);
    pts.extend_from_slice(&p.waypoints);
    let mut remaining = (t - p.start_delay).max(0.0) * p.speed;
    let moving = t >= p.start_delay && p.speed > 0.0;
    for w in pts.windows(2) {
        let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        if remaining < len {
            let (vx, vy) = if moving {
                (ux * p.speed, uy * p.speed)
            } else {
                (0.0, 0.0)
            };
            return PedestrianState {
                x: w[0][0] + ux * remaining,
                y: w[0][1] + uy * remaining,
                vx,
                vy,
            };
        }
        remaining -= len;
    }
    let last = pts[pts.len() - 1];
    PedestrianState {
        x: last[0],
        y: last[1],
        vx: 0.0,
        vy: 0.0,
    }
}

/// Immutable episode context: the instantiated scenario plus the robot
/// footprint and goal tolerance.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: ScenarioSpec,
    pub robot_radius: f64,
    pub goal_tolerance: f64,
}

impl World {
    pub fn new(scenario: ScenarioSpec, robot_radius: f64, goal_tolerance: f64) -> Result<Self> {
        scenario.validate(robot_radius)?;
        Ok(Self {
            scenario,
            robot_radius,
            goal_tolerance,
        })
    }

    pub fn goal(&self) -> (f64, f64) {
        (self.scenario.goal[0], self.scenario.goal[1])
    }

    pub fn pedestrians_at(&self, t: f64) -> Vec<PedestrianState> {
        self.scenario
            .pedestrians
            .iter()
            .map(|p| pedestrian_at(p, t))
            .collect()
    }

    pub fn initial_state(&self) -> WorldState {
        let mut s = WorldState {
            time: 0.0,
            tick: 0,
            robot: self.scenario.robot_start,
            command: VelocityCommand::STOP,
            pedestrians: self.pedestrians_at(0.0),
            status: EpisodeStatus::Running,
            min_clearance: None,
        };
        s.min_clearance = self.clearance(&s.robot, &s.pedestrians);
        s
    }

    fn clearance(&self, robot: &Pose2, peds: &[PedestrianState]) -> Option<f64> {
        peds.iter()
            .map(|p| robot.distance_to(p.x, p.y) - self.robot_radius - PEDESTRIAN_RADIUS)
            .reduce(f64::min)
    }

    /// True when the robot disc at `pose` touches any obstacle (lidar-visible
    /// or not), any pedestrian disc, or leaves the bounds.
    pub fn robot_collides(&self, pose: &Pose2, peds: &[PedestrianState]) -> bool {
        let r = self.robot_radius;
        !self.scenario.bounds.contains_disc(pose.x, pose.y, r)
            || self
                .scenario
                .obstacles
                .iter()
                .any(|o| o.distance(pose.x, pose.y) < r)
            || peds
                .iter()
                .any(|p| pose.distance_to(p.x, p.y) < r + PEDESTRIAN_RADIUS)
    }

    /// Advances one step: exact-arc robot motion, pedestrians at the new
    /// time, then collision, goal and timeout checks in that order.
    pub fn step(&self, state: &WorldState, cmd: VelocityCommand, dt: f64) -> Result<WorldState> {
        if state.status.is_terminal() {
            return Err(SimError::Terminal(state.status));
        }
        let tick = state.tick + 1;
        let time = state.time + dt;
        let robot = integrate_arc(&state.robot, cmd.v, cmd.omega, dt);
        let pedestrians = self.pedestrians_at(time);
        let clearance = self.clearance(&robot, &pedestrians);
        let min_clearance = match (state.min_clearance, clearance) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let (gx, gy) = self.goal();
        let status = if self.robot_collides(&robot, &pedestrians) {
            EpisodeStatus::Collision
        } else if robot.distance_to(gx, gy) <= self.goal_tolerance {
            EpisodeStatus::ReachedGoal
        } else if time >= self.scenario.time_limit - 1e-9 {
            EpisodeStatus::Timeout
        } else {
            EpisodeStatus::Running
        };
        Ok(WorldState {
            time,
            tick,
            robot,
            command: cmd,
            pedestrians,
            status,
            min_clearance,
        })
    }

    /// Occupancy the robot's range sensor reports: lidar-visible static
    /// obstacles plus current pedestrian discs.
    pub fn sensed_occupancy(
        &self,
        static_grid: &OccupancyGrid,
        peds: &[PedestrianState],
    ) -> OccupancyGrid {
        let mut grid = static_grid.clone();
        for p in peds {
            grid.fill_disc(p.x, p.y, PEDESTRIAN_RADIUS);
        }
        grid
    }
}
