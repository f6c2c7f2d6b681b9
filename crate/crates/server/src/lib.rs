//! Live bridge between a running episode and browser clients: world
//! snapshots out, teleop commands and recording controls in, over one
//! WebSocket at `/ws`. See `docs/protocol.md` for the message schema.

pub mod protocol;
mod runner;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot, watch};
use vilad_core::sim::{EpisodeConfig, Policy, ScenarioSpec, SimError};

use protocol::{Control, Envelope, ErrorCode, ErrorReply, Message, Snapshot, TeleopCommand};
pub use runner::{recordings, Runner};
use runner::{Channels, ControlRequest};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("recording: {0}")]
    Recording(String),
    #[error("episode loop stopped: {0}")]
    Loop(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub scenario: ScenarioSpec,
    pub policy: Policy,
    pub episode: EpisodeConfig,
    pub seed: u64,
    /// Teleop recordings go to `<record_dir>/<scenario id>/`.
    pub record_dir: PathBuf,
    pub tick_period: Duration,
    /// A teleop command older than this (sim seconds) decays to a stop.
    pub staleness_s: f64,
    /// Candidates listed per snapshot.
    pub top_k: usize,
    pub map_downsample: usize,
}

impl ServerConfig {
    pub fn new(scenario: ScenarioSpec, policy: Policy) -> Self {
        Self {
            scenario,
            policy,
            episode: EpisodeConfig::default(),
            seed: 0,
            record_dir: PathBuf::from("recordings"),
            tick_period: Duration::from_millis(50),
            staleness_s: 0.5,
            top_k: 8,
            map_downsample: 2,
        }
    }
}

#[derive(Clone)]
struct Shared {
    commands: Arc<watch::Sender<Option<TeleopCommand>>>,
    controls: Arc<Mutex<mpsc::Sender<ControlRequest>>>,
    snapshots: broadcast::Sender<Arc<Snapshot>>,
    teleop: bool,
}

pub struct Server {
    listener: TcpListener,
    cfg: ServerConfig,
}

impl Server {
    /// Binds the listening socket; a busy port fails here.
    pub async fn bind(cfg: ServerConfig, addr: &str) -> Result<Self, ServerError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServerError::Bind {
                addr: addr.into(),
                source,
            })?;
        Ok(Self { listener, cfg })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves or the episode loop fails.
    pub async fn run(
        self,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> Result<(), ServerError> {
        let runner = Runner::new(self.cfg.clone())?;
        let (cmd_tx, cmd_rx) = watch::channel(None);
        let (ctl_tx, ctl_rx) = mpsc::channel();
        let (snap_tx, _) = broadcast::channel(16);
        let stop = Arc::new(AtomicBool::new(false));
        let channels = Channels {
            commands: cmd_rx,
            controls: ctl_rx,
            snapshots: snap_tx.clone(),
            stop: stop.clone(),
        };
        let (loop_done_tx, loop_done_rx) = oneshot::channel();
        let handle = std::thread::spawn(move || {
            let r = runner.run(channels);
            let _ = loop_done_tx.send(());
            r
        });

        let shared = Shared {
            commands: Arc::new(cmd_tx),
            controls: Arc::new(Mutex::new(ctl_tx)),
            snapshots: snap_tx,
            teleop: matches!(self.cfg.policy, Policy::Teleop),
        };
        let app = Router::new()
            .route(
                "/",
                get(|| async { "vilad server; connect a WebSocket client to /ws\n" }),
            )
            .route("/ws", get(ws_handler))
            .with_state(shared);
        let serve = axum::serve(self.listener, app).with_graceful_shutdown(async move {
            tokio::select! {
                _ = shutdown => {}
                _ = loop_done_rx => {}
            }
        });
        let served = serve.await;
        stop.store(true, Ordering::Relaxed);
        let looped = tokio::task::spawn_blocking(move || handle.join())
            .await
            .map_err(|e| ServerError::Loop(e.to_string()))?
            .map_err(|_| ServerError::Loop("episode thread panicked".into()))?;
        looped?;
        served?;
        Ok(())
    }
}

/// Binds `0.0.0.0:<port>` and serves until Ctrl-C.
pub async fn serve(cfg: ServerConfig, port: u16) -> Result<(), ServerError> {
    let server = Server::bind(cfg, &format!("0.0.0.0:{port}")).await?;
    log::info!("listening on {}", server.local_addr()?);
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Shared>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, shared))
}

fn error_message(code: ErrorCode, message: impl Into<String>, in_reply_to: Option<u64>) -> Message {
    Message::Error(ErrorReply {
        code,
        message: message.into(),
        in_reply_to,
    })
}

/// Best-effort `seq` of a message that failed to parse as an envelope.
fn salvage_seq(text: &str) -> Option<u64> {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()?
        .get("seq")?
        .as_u64()
}

async fn handle_text(text: &str, shared: &Shared) -> Option<Message> {
    let env = match Envelope::from_json(text) {
        Ok(env) => env,
        Err(e) => {
            return Some(error_message(
                ErrorCode::Malformed,
                e.to_string(),
                salvage_seq(text),
            ))
        }
    };
    let seq = Some(env.seq);
    match env.message {
        Message::Teleop(cmd) => {
            if !(cmd.v.is_finite() && cmd.omega.is_finite()) {
                return Some(error_message(
                    ErrorCode::Malformed,
                    "teleop values must be finite",
                    seq,
                ));
            }
            if !shared.teleop {
                return Some(error_message(
                    ErrorCode::Unsupported,
                    "server policy is not teleop",
                    seq,
                ));
            }
            shared.commands.send_replace(Some(cmd));
            None
        }
        Message::Control(
            control @ (Control::RecordStart | Control::RecordStop | Control::Reset),
        ) => {
            let (tx, rx) = oneshot::channel();
            let sent = shared
                .controls
                .lock()
                .map(|c| c.send(ControlRequest { control, reply: tx }).is_ok())
                .unwrap_or(false);
            if !sent {
                return Some(error_message(
                    ErrorCode::Internal,
                    "episode loop is not running",
                    seq,
                ));
            }
            match rx.await {
                Ok(Message::Error(mut e)) => {
                    e.in_reply_to = seq;
                    Some(Message::Error(e))
                }
                Ok(reply) => Some(reply),
                Err(_) => Some(error_message(
                    ErrorCode::Internal,
                    "episode loop is not running",
                    seq,
                )),
            }
        }
        Message::Control(other) => Some(error_message(
            ErrorCode::Unsupported,
            format!("{other:?} is sent by the server, not accepted from clients"),
            seq,
        )),
        Message::Snapshot(_) | Message::Error(_) => Some(error_message(
            ErrorCode::Unsupported,
            "clients may send teleop and control only",
            seq,
        )),
    }
}

async fn connection(socket: WebSocket, shared: Shared) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = shared.snapshots.subscribe();
    let (reply_tx, mut reply_rx) = tokio::sync::mpsc::unbounded_channel::<Message>();

    let writer = tokio::spawn(async move {
        let mut seq = 0u64;
        loop {
            let msg = tokio::select! {
                biased;
                r = reply_rx.recv() => match r {
                    Some(m) => m,
                    None => break,
                },
                s = snapshots.recv() => match s {
                    Ok(s) => Message::Snapshot(Box::new((*s).clone())),
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            seq += 1;
            if sink
                .send(WsMessage::Text(Envelope::new(seq, msg).to_json().into()))
                .await
                .is_err()
            {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let reply = match frame {
            WsMessage::Text(text) => handle_text(text.as_str(), &shared).await,
            WsMessage::Binary(_) => Some(error_message(
                ErrorCode::Malformed,
                "binary frames are not supported",
                None,
            )),
            WsMessage::Close(_) => break,
            _ => None,
        };
        if let Some(reply) = reply {
            if reply_tx.send(reply).is_err() {
                break;
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}
