//! The episode loop. It owns the [`Episode`] and talks to connections only
//! through the command mailbox, the control queue and the snapshot channel.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use tokio::sync::{broadcast, oneshot, watch};
use vilad_core::costmap::AttentionMap;
use vilad_core::planner::{PlanOutcome, VelocityCommand};
use vilad_core::sim::{trajectory_to_csv, Episode, Policy, World, PEDESTRIAN_RADIUS};

use crate::protocol::{
    AttentionPayload, CandidateScore, Command, Control, ErrorCode, ErrorReply, Message, Pedestrian,
    Pose, SceneInfo, Snapshot, TeleopCommand,
};
use crate::{ServerConfig, ServerError};

/// A control message plus the channel its answer goes back on.
pub(crate) struct ControlRequest {
    pub control: Control,
    pub reply: oneshot::Sender<Message>,
}

pub(crate) struct Channels {
    pub commands: watch::Receiver<Option<TeleopCommand>>,
    pub controls: mpsc::Receiver<ControlRequest>,
    pub snapshots: broadcast::Sender<Arc<Snapshot>>,
    pub stop: Arc<AtomicBool>,
}

struct Recording {
    start: usize,
}

pub struct Runner {
    cfg: ServerConfig,
    world: World,
    episode: Episode,
    held: Option<(VelocityCommand, f64)>,
    recording: Option<Recording>,
    saved: u64,
    tick: u64,
    last_map: Option<AttentionMap>,
    last_plan: Option<PlanOutcome>,
}

fn control_error(message: impl Into<String>) -> Message {
    Message::Error(ErrorReply {
        code: ErrorCode::Control,
        message: message.into(),
        in_reply_to: None,
    })
}

impl Runner {
    pub fn new(cfg: ServerConfig) -> Result<Self, ServerError> {
        let world = World::new(
            cfg.scenario.instantiate(cfg.seed),
            cfg.episode.planner.robot_radius,
            cfg.episode.planner.goal_tolerance,
        )?;
        let episode = Episode::new(world.clone(), cfg.policy.clone(), cfg.episode)?;
        Ok(Self {
            cfg,
            world,
            episode,
            held: None,
            recording: None,
            saved: 0,
            tick: 0,
            last_map: None,
            last_plan: None,
        })
    }

    fn is_teleop(&self) -> bool {
        matches!(self.cfg.policy, Policy::Teleop)
    }

    /// Command for this tick: the latest teleop message while fresh, else stop.
    fn teleop_command(
        &mut self,
        commands: &mut watch::Receiver<Option<TeleopCommand>>,
    ) -> VelocityCommand {
        let now = self.episode.state().time;
        if commands.has_changed().unwrap_or(false) {
            if let Some(c) = *commands.borrow_and_update() {
                let p = &self.cfg.episode.planner;
                self.held = Some((
                    VelocityCommand::new(c.v, c.omega).clamped(p.v_max, p.omega_max),
                    now,
                ));
            }
        }
        match self.held {
            Some((cmd, stamp)) if now - stamp <= self.cfg.staleness_s + 1e-9 => cmd,
            _ => VelocityCommand::STOP,
        }
    }

    pub fn handle_control(&mut self, control: Control) -> Message {
        match control {
            Control::RecordStart => {
                if !self.is_teleop() {
                    return control_error("recording needs the teleop policy");
                }
                self.recording = Some(Recording {
                    start: self.episode.trajectory().len() - 1,
                });
                Message::Control(Control::RecordingStarted {
                    time: self.episode.state().time,
                })
            }
            Control::RecordStop => {
                let Some(rec) = self.recording.take() else {
                    return control_error("record_stop without record_start");
                };
                match self.save_recording(rec.start) {
                    Ok((path, samples)) => Message::Control(Control::RecordingSaved {
                        path: path.to_string_lossy().into_owned(),
                        samples,
                    }),
                    Err(e) => control_error(e.to_string()),
                }
            }
            Control::Reset => match Episode::new(
                self.world.clone(),
                self.cfg.policy.clone(),
                self.cfg.episode,
            ) {
                Ok(ep) => {
                    self.episode = ep;
                    self.held = None;
                    self.recording = None;
                    self.last_map = None;
                    self.last_plan = None;
                    Message::Control(Control::ResetDone)
                }
                Err(e) => control_error(e.to_string()),
            },
            other => control_error(format!("{other:?} is a server-side control message")),
        }
    }

    fn save_recording(&mut self, start: usize) -> Result<(PathBuf, usize), ServerError> {
        let samples = &self.episode.trajectory()[start..];
        if samples.len() < 2 {
            return Err(ServerError::Recording(
                "recording holds fewer than two samples".into(),
            ));
        }
        let dir = self.cfg.record_dir.join(&self.world.scenario.id);
        std::fs::create_dir_all(&dir)?;
        let millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis());
        self.saved += 1;
        let path = dir.join(format!("teleop_{millis}_{:03}.csv", self.saved));
        std::fs::write(&path, trajectory_to_csv(samples))?;
        Ok((path, samples.len()))
    }

    /// Advances one tick unless the episode is over.
    pub fn step(
        &mut self,
        commands: &mut watch::Receiver<Option<TeleopCommand>>,
    ) -> Result<(), ServerError> {
        let teleop = self.teleop_command(commands);
        if self.episode.is_done() {
            return Ok(());
        }
        let out = self.episode.tick(Some(teleop))?;
        self.tick += 1;
        self.last_map = out.map;
        self.last_plan = out.plan;
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let s = self.episode.state();
        let attention = self.last_map.as_ref().map(|m| {
            let m = m
                .downsample(self.cfg.map_downsample.max(1))
                .unwrap_or_else(|_| m.clone());
            AttentionPayload::encode(&m)
        });
        let (candidates, recovery) = match &self.last_plan {
            Some(p) => (
                p.diagnostics
                    .top_k(self.cfg.top_k)
                    .into_iter()
                    .map(CandidateScore::from)
                    .collect(),
                p.diagnostics.recovery,
            ),
            None => (Vec::new(), false),
        };
        let sc = &self.world.scenario;
        Snapshot {
            time: s.time,
            tick: self.tick,
            robot: Pose {
                x: s.robot.x,
                y: s.robot.y,
                theta: s.robot.theta,
            },
            command: Command::from(s.command),
            pedestrians: s
                .pedestrians
                .iter()
                .map(|p| Pedestrian::from_state(p, PEDESTRIAN_RADIUS))
                .collect(),
            goal: sc.goal,
            status: s.status,
            min_clearance: s.min_clearance,
            attention,
            candidates,
            recovery,
            recording: self.recording.is_some(),
            scene: SceneInfo {
                scenario: sc.id.clone(),
                policy: self.cfg.policy.label(),
                bounds: sc.bounds,
                obstacles: sc.obstacles.clone(),
                robot_radius: self.world.robot_radius,
                goal_tolerance: self.world.goal_tolerance,
            },
        }
    }

    /// Runs until `stop` is set. Ticks are paced by `tick_period`; a slow
    /// tick delays the next one rather than skipping it.
    pub(crate) fn run(mut self, mut ch: Channels) -> Result<(), ServerError> {
        let mut next = Instant::now();
        let _ = ch.snapshots.send(Arc::new(self.snapshot()));
        while !ch.stop.load(Ordering::Relaxed) {
            while let Ok(req) = ch.controls.try_recv() {
                let reply = self.handle_control(req.control);
                let _ = req.reply.send(reply);
            }
            self.step(&mut ch.commands)?;
            // No receivers is fine: the episode keeps running.
            let _ = ch.snapshots.send(Arc::new(self.snapshot()));
            next += self.cfg.tick_period;
            let now = Instant::now();
            if next > now {
                std::thread::sleep(next - now);
            } else {
                next = now;
            }
        }
        Ok(())
    }
}

/// Lists recordings for `scenario` under `record_dir`, oldest first.
pub fn recordings(record_dir: &Path, scenario: &str) -> std::io::Result<Vec<PathBuf>> {
    let dir = record_dir.join(scenario);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    out.sort();
    Ok(out)
}
