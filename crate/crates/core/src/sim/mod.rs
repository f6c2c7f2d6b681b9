//! Deterministic 2D world: unicycle robot, waypoint pedestrians, static
//! obstacles, a flat-shaded camera view and synthetic attention maps.

mod attention;
mod episode;
mod render;
mod scenario;
mod world;

pub use attention::{
    raw_attention_at, synth_attention, synth_attention_ground, SynthMode, BLOB_SIGMA_M,
    EXTRAPOLATION_HORIZON_S, EXTRAPOLATION_STEP_S,
};
pub use episode::{
    run_episode, trajectory_from_csv, trajectory_to_csv, Episode, EpisodeConfig, EpisodeResult,
    Policy, TickOutput, TickRecord, TrajectorySample, TRAJECTORY_CSV_HEADER,
};
pub use render::render_frame;
pub use scenario::{Bounds, Jitter, Lighting, Obstacle, PedestrianSpec, ScenarioSpec, Setting};
pub use world::{pedestrian_at, EpisodeStatus, PedestrianState, World, WorldState};

use thiserror::Error;

pub const PEDESTRIAN_RADIUS: f64 = 0.3;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("episode already finished with status {0:?}")]
    Terminal(EpisodeStatus),
    #[error("trajectory csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] crate::distill::DistillError),
    #[error(transparent)]
    Costmap(#[from] crate::costmap::CostmapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
