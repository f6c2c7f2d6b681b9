//! Wire messages. Every frame is one JSON envelope
//! `{"type": ..., "seq": ..., "payload": {...}}`; unknown fields are ignored.

use base64::Engine;
use serde::{Deserialize, Serialize};
use vilad_core::costmap::{decode_grid, encode_grid, AttentionMap, CostmapError};
use vilad_core::planner::{Candidate, VelocityCommand};
use vilad_core::sim::{Bounds, EpisodeStatus, Obstacle, PedestrianState};

/// Upper bound on a serialized snapshot.
pub const MAX_SNAPSHOT_BYTES: usize = 256 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    #[serde(flatten)]
    pub message: Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Message {
    Snapshot(Box<Snapshot>),
    Teleop(TeleopCommand),
    Control(Control),
    Error(ErrorReply),
}

impl Envelope {
    pub fn new(seq: u64, message: Message) -> Self {
        Self { seq, message }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub v: f64,
    pub omega: f64,
}

impl From<VelocityCommand> for Command {
    fn from(c: VelocityCommand) -> Self {
        Self {
            v: c.v,
            omega: c.omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pedestrian {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub radius: f64,
}

impl Pedestrian {
    pub fn from_state(p: &PedestrianState, radius: f64) -> Self {
        Self {
            x: p.x,
            y: p.y,
            vx: p.vx,
            vy: p.vy,
            radius,
        }
    }
}

/// Attention map as a base64-encoded `.agrid` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionPayload {
    pub width: usize,
    pub height: usize,
    pub agrid_base64: String,
}

impl AttentionPayload {
    pub fn encode(map: &AttentionMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            agrid_base64: base64::engine::general_purpose::STANDARD.encode(encode_grid(map)),
        }
    }

    pub fn decode(&self) -> Result<AttentionMap, CostmapError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.agrid_base64)
            .map_err(|e| CostmapError::Format {
                offset: 0,
                reason: format!("base64: {e}"),
            })?;
        decode_grid(&bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub v: f64,
    pub omega: f64,
    pub goal_cost: f64,
    pub social_cost: f64,
    pub total: f64,
}

impl From<Candidate> for CandidateScore {
    fn from(c: Candidate) -> Self {
        Self {
            v: c.cmd.v,
            omega: c.cmd.omega,
            goal_cost: c.goal_cost,
            social_cost: c.social_cost,
            total: c.total,
        }
    }
}

/// Static scene description, repeated in every snapshot so a client can
/// render from any single message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub scenario: String,
    pub policy: String,
    pub bounds: Bounds,
    pub obstacles: Vec<Obstacle>,
    pub robot_radius: f64,
    pub goal_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub tick: u64,
    pub robot: Pose,
    pub command: Command,
    pub pedestrians: Vec<Pedestrian>,
    pub goal: [f64; 2],
    pub status: EpisodeStatus,
    pub min_clearance: Option<f64>,
    pub attention: Option<AttentionPayload>,
    /// Best candidates first; empty for teleop.
    pub candidates: Vec<CandidateScore>,
    pub recovery: bool,
    pub recording: bool,
    pub scene: SceneInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopCommand {
    pub v: f64,
    pub omega: f64,
    /// Client clock in seconds; informational only.
    #[serde(default)]
    pub client_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Control {
    /// Client: begin recording the executed trajectory.
    RecordStart,
    /// Client: finish and write the recording.
    RecordStop,
    /// Client: restart the episode from the scenario start.
    Reset,
    /// Server: recording began at sim time `time`.
    RecordingStarted { time: f64 },
    /// Server: recording written.
    RecordingSaved { path: String, samples: usize },
    /// Server: episode restarted.
    ResetDone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub message: String,
    /// `seq` of the offending client message, when it could be read.
    #[serde(default)]
    pub in_reply_to: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    Unsupported,
    Control,
    Internal,
}
