use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::attention::{synth_attention, SynthMode};
use super::render::render_frame;
use super::world::{EpisodeStatus, World, WorldState};
use super::{Result, SimError};
use crate::costmap::{AttentionMap, CameraModel, MapFrame, MapProjection, MapRole};
use crate::distill::{load_model, AttentionModel, ImageSequence};
use crate::frame::ImageFrame;
use crate::occupancy::OccupancyGrid;
use crate::planner::{plan, PlanOutcome, PlanRequest, PlannerConfig, VelocityCommand};

/// Where each tick's command comes from.
#[derive(Debug, Clone)]
pub enum Policy {
    /// Planner reading the distilled model's attention map.
    ViLad(Box<AttentionModel>),
    /// Planner reading a synthetic attention map.
    PlannerWithMap(SynthMode),
    /// Planner with the social term switched off.
    GoalOnly,
    /// Externally supplied commands (zero-order hold is up to the caller).
    Teleop,
}

impl Policy {
    /// Parses `teleop`, `goal_only`, `synth:<ground_truth_social|pretrained_like>`
    /// or `vilad:<model file>`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.split_once(':') {
            None if spec == "teleop" => Ok(Policy::Teleop),
            None if spec == "goal_only" => Ok(Policy::GoalOnly),
            Some(("synth", "ground_truth_social")) => {
                Ok(Policy::PlannerWithMap(SynthMode::GroundTruthSocial))
            }
            Some(("synth", "pretrained_like")) => {
                Ok(Policy::PlannerWithMap(SynthMode::PretrainedLike))
            }
            Some(("vilad", path)) if !path.is_empty() => {
                Ok(Policy::ViLad(Box::new(load_model(path)?)))
            }
            _ => Err(SimError::Config(format!(
                "unknown policy `{spec}` (expected teleop, goal_only, synth:ground_truth_social, \
                 synth:pretrained_like or vilad:<model file>)"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Policy::ViLad(_) => "vilad".into(),
            Policy::PlannerWithMap(SynthMode::PretrainedLike) => "synth:pretrained_like".into(),
            Policy::PlannerWithMap(SynthMode::GroundTruthSocial) => {
                "synth:ground_truth_social".into()
            }
            Policy::GoalOnly => "goal_only".into(),
            Policy::Teleop => "teleop".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub planner: PlannerConfig,
    pub camera: CameraModel,
    /// Synthetic map size; distilled maps use the model's grid.
    pub map_width: usize,
    pub map_height: usize,
    pub occupancy_resolution: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            camera: CameraModel::default(),
            map_width: 64,
            map_height: 48,
            occupancy_resolution: 0.1,
        }
    }
}

/// One row of the trajectory CSV: the state after a tick and the command
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub feasible: usize,
    pub recovery: bool,
    pub social_cost: Option<f64>,
    pub total_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub status: EpisodeStatus,
    pub time_to_goal: Option<f64>,
    pub min_clearance: Option<f64>,
    pub trajectory: Vec<TrajectorySample>,
    pub ticks: Vec<TickRecord>,
}

impl EpisodeResult {
    pub fn path(&self) -> Vec<(f64, f64)> {
        self.trajectory.iter().map(|s| (s.x, s.y)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode result serializes")
    }
}

/// What a single tick saw and did.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub command: VelocityCommand,
    pub map: Option<AttentionMap>,
    pub plan: Option<PlanOutcome>,
    pub state: WorldState,
}

/// Stepwise episode loop: sense, build the attention map, plan, step.
pub struct Episode {
    world: World,
    policy: Policy,
    cfg: EpisodeConfig,
    state: WorldState,
    static_grid: OccupancyGrid,
    frames: VecDeque<ImageFrame>,
    trajectory: Vec<TrajectorySample>,
    ticks: Vec<TickRecord>,
}

impl Episode {
    pub fn new(world: World, policy: Policy, cfg: EpisodeConfig) -> Result<Self> {
        cfg.planner.validate().map_err(SimError::Config)?;
        cfg.camera
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        let state = world.initial_state();
        let static_grid = world.scenario.static_occupancy(cfg.occupancy_resolution);
        let r = state.robot;
        Ok(Self {
            trajectory: vec![TrajectorySample {
                t: 0.0,
                x: r.x,
                y: r.y,
                theta: r.theta,
                v: 0.0,
                omega: 0.0,
            }],
            world,
            policy,
            cfg,
            state,
            static_grid,
            frames: VecDeque::new(),
            ticks: Vec::new(),
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.state.status.is_terminal()
    }

    /// Occupancy the planner sees this tick.
    pub fn sensed_occupancy(&self) -> OccupancyGrid {
        self.world
            .sensed_occupancy(&self.static_grid, &self.state.pedestrians)
    }

    fn distilled_map(&mut self, model: &AttentionModel) -> Result<AttentionMap> {
        let frame = render_frame(&self.world, &self.state, &self.cfg.camera);
        let needed = model.config.frames();
        if self.frames.is_empty() {
            self.frames
                .extend(std::iter::repeat_n(frame.clone(), needed - 1));
        }
        self.frames.push_back(frame);
        while self.frames.len() > needed {
            self.frames.pop_front();
        }
        let frames: Vec<ImageFrame> = self.frames.iter().cloned().collect();
        let seq = ImageSequence::from_frames(&frames, &model.config)?;
        Ok(model.forward(&seq)?)
    }

    /// Runs one control tick. `teleop` is only read by the teleop policy;
    /// `None` there means stop.
    pub fn tick(&mut self, teleop: Option<VelocityCommand>) -> Result<TickOutput> {
        if self.is_done() {
            return Err(SimError::Terminal(self.state.status));
        }
        let pc = self.cfg.planner;
        let cam = self.cfg.camera;
        let (map, planner_cfg) = match &self.policy {
            Policy::Teleop => (None, pc),
            Policy::GoalOnly => (
                Some(AttentionMap::zeros(
                    self.cfg.map_width,
                    self.cfg.map_height,
                    MapRole::Synthetic,
                    MapFrame::Image,
                )?),
                pc.goal_only(),
            ),
            Policy::PlannerWithMap(mode) => (
                Some(synth_attention(
                    &self.world,
                    &self.state,
                    &cam,
                    *mode,
                    self.cfg.map_width,
                    self.cfg.map_height,
                )),
                pc,
            ),
            Policy::ViLad(model) => {
                let model = model.clone();
                (Some(self.distilled_map(&model)?), pc)
            }
        };

        let (command, outcome) = match &map {
            None => (
                teleop
                    .unwrap_or(VelocityCommand::STOP)
                    .clamped(pc.v_max, pc.omega_max),
                None,
            ),
            Some(map) => {
                let occupancy = self.sensed_occupancy();
                let projection = MapProjection::Image(cam);
                let req = PlanRequest {
                    pose: self.state.robot,
                    current: self.state.command,
                    goal: self.world.goal(),
                    occupancy: &occupancy,
                    map,
                    projection: &projection,
                };
                let out = plan(&req, &planner_cfg);
                (out.command, Some(out))
            }
        };

        self.state = self.world.step(&self.state, command, pc.dt)?;
        let r = self.state.robot;
        self.trajectory.push(TrajectorySample {
            t: self.state.time,
            x: r.x,
            y: r.y,
            theta: r.theta,
            v: command.v,
            omega: command.omega,
        });
        self.ticks.push(TickRecord {
            t: self.state.time,
            feasible: outcome
                .as_ref()
                .map_or(0, |o| o.diagnostics.candidates.len()),
            recovery: outcome.as_ref().is_some_and(|o| o.diagnostics.recovery),
            social_cost: outcome
                .as_ref()
                .and_then(|o| o.chosen)
                .map(|c| c.social_cost),
            total_cost: outcome.as_ref().and_then(|o| o.chosen).map(|c| c.total),
        });
        Ok(TickOutput {
            command,
            map,
            plan: outcome,
            state: self.state.clone(),
        })
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    pub fn result(&self) -> EpisodeResult {
        EpisodeResult {
            scenario: self.world.scenario.id.clone(),
            policy: self.policy.label(),
            seed: self.world.scenario.seed,
            status: self.state.status,
            time_to_goal: (self.state.status == EpisodeStatus::ReachedGoal)
                .then_some(self.state.time),
            min_clearance: self.state.min_clearance,
            trajectory: self.trajectory.clone(),
            ticks: self.ticks.clone(),
        }
    }
}

/// Runs until a terminal status. A teleop policy receives no commands here
/// and therefore holds still until the time limit.
pub fn run_episode(world: World, policy: Policy, cfg: EpisodeConfig) -> Result<EpisodeResult> {
    let mut ep = Episode::new(world, policy, cfg)?;
    while !ep.is_done() {
        ep.tick(None)?;
    }
    Ok(ep.result())
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,x,y,theta,v,omega";

/// Serializes samples with shortest round-trip float formatting.
pub fn trajectory_to_csv(samples: &[TrajectorySample]) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.t, s.x, s.y, s.theta, s.v, s.omega
        ));
    }
    out
}

pub fn trajectory_from_csv(text: &str) -> Result<Vec<TrajectorySample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRAJECTORY_CSV_HEADER => {}
        _ => {
            return Err(SimError::Csv {
                line: 1,
                reason: format!("expected header `{TRAJECTORY_CSV_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SimError::Csv {
                line: n + 1,
                reason: e.to_string(),
            })?;
        if vals.len() != 6 {
            return Err(SimError::Csv {
                line: n + 1,
                reason: format!("expected 6 fields, got {}", vals.len()),
            });
        }
        out.push(TrajectorySample {
            t: vals[0],
            x: vals[1],
            y: vals[2],
            theta: vals[3],
            v: vals[4],
            omega: vals[5],
        });
    }
    Ok(out)
}
