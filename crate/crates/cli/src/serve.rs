//! Live steering service. One thread owns the session and ticks it at a
//! fixed rate; WebSocket clients talk to it only through channels.
//!
//! Commands queue up and are applied between ticks. Frames go out through a
//! bounded broadcast channel, so a slow client loses its oldest frames and
//! never holds up the control tick.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use softarm_control::session::{command_name, ClientMessage, Command, ServerMessage, Session, PROTOCOL_VERSION};
use softarm_control::PlanMode;
use softarm_core::plant::DisturbanceParams;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};

use crate::commands::{geometry, load_forward, read_task, CONTROLLER_MODEL_FILE};
use crate::ServeArgs;

/// Frames buffered per client before the oldest are dropped.
pub const FRAME_BUFFER: usize = 16;

struct Request {
    command: Command,
    reply: oneshot::Sender<Result<(), String>>,
}

#[derive(Clone)]
struct Shared {
    commands: mpsc::UnboundedSender<Request>,
    frames: broadcast::Sender<Arc<str>>,
}

/// A running service.
pub struct ServerHandle {
    pub addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    control: Option<JoinHandle<()>>,
    server: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.server.abort();
        if let Some(c) = self.control.take() {
            let _ = c.join();
        }
    }
}

fn control_loop(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<Request>,
    frames: broadcast::Sender<Arc<str>>,
    tick: Duration,
    stop: Arc<AtomicBool>,
) {
    let mut next = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        while let Ok(req) = commands.try_recv() {
            let result = session.apply(&req.command).map_err(|e| e.to_string());
            let _ = req.reply.send(result);
        }
        match session.tick() {
            Ok(frame) => {
                let text = serde_json::to_string(&ServerMessage::Frame(Box::new(frame))).expect("frames serialize");
                // no subscribers is fine
                let _ = frames.send(text.into());
            }
            Err(e) => tracing::warn!("tick failed: {e}"),
        }
        next += tick;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
}

/// Starts the control loop and the WebSocket endpoint (`/ws`) on `listener`.
/// Must be called inside a tokio runtime.
pub fn start(listener: TcpListener, session: Session, tick: Duration) -> std::io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frame_tx, _) = broadcast::channel(FRAME_BUFFER);
    let stop = Arc::new(AtomicBool::new(false));
    let control = {
        let (frames, stop) = (frame_tx.clone(), stop.clone());
        std::thread::Builder::new()
            .name("control-loop".into())
            .spawn(move || control_loop(session, cmd_rx, frames, tick, stop))?
    };
    let shared = Shared {
        commands: cmd_tx,
        frames: frame_tx,
    };
    let app = Router::new().route("/ws", get(upgrade)).with_state(shared);
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        control: Some(control),
        server,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Shared>) -> Response {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Waits for the client's hello and answers it. False ends the connection.
async fn handshake(socket: &mut WebSocket) -> bool {
    let reason = match socket.recv().await {
        Some(Ok(Message::Text(t))) => match serde_json::from_str::<ClientMessage>(&t) {
            Ok(ClientMessage::Hello { version }) if version == PROTOCOL_VERSION => {
                return send(socket, &ServerMessage::Hello { version: PROTOCOL_VERSION }).await;
            }
            Ok(ClientMessage::Hello { version }) => {
                format!("unsupported protocol version {version}, server speaks {PROTOCOL_VERSION}")
            }
            _ => "expected hello".to_string(),
        },
        _ => return false,
    };
    send(socket, &ServerMessage::Error { reason }).await;
    false
}

async fn answer(text: &str, shared: &Shared) -> ServerMessage {
    let command = match serde_json::from_str::<ClientMessage>(text) {
        Ok(ClientMessage::Command(c)) => c,
        Ok(ClientMessage::Hello { .. }) => {
            return ServerMessage::Error {
                reason: "already greeted".into(),
            }
        }
        Err(e) => {
            return ServerMessage::Error {
                reason: format!("malformed message: {e}"),
            }
        }
    };
    let name = command_name(&command);
    let (reply, wait) = oneshot::channel();
    if shared.commands.send(Request { command, reply }).is_err() {
        return ServerMessage::Error {
            reason: "session stopped".into(),
        };
    }
    match wait.await {
        Ok(Ok(())) => ServerMessage::Ack { command: name },
        Ok(Err(reason)) => ServerMessage::Error { reason },
        Err(_) => ServerMessage::Error {
            reason: "session stopped".into(),
        },
    }
}

async fn client(mut socket: WebSocket, shared: Shared) {
    if !handshake(&mut socket).await {
        return;
    }
    let mut frames = shared.frames.subscribe();
    loop {
        tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(t))) => {
                    let reply = answer(&t, &shared).await;
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if socket.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

/// `softarm serve`: runs until interrupted.
pub fn serve_blocking(a: &ServeArgs) -> anyhow::Result<()> {
    let geom = geometry(&a.geom)?;
    let task = match &a.task {
        Some(path) => read_task(path)?,
        None => {
            let p = softarm_control::preset(&a.preset)?;
            anyhow::ensure!(p.mode == PlanMode::Online, "preset {} is not an online task", a.preset);
            p.task
        }
    };
    let forward = load_forward(&a.model)?;
    let controller = softarm_neural::model_load(a.model.model.join(CONTROLLER_MODEL_FILE)).ok().map(Arc::new);
    let session = Session::new(
        task,
        forward,
        controller,
        a.controller,
        DisturbanceParams::default().with_seed(a.seed),
        geom,
    )?;
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = TcpListener::bind(&a.addr).await?;
        let handle = start(listener, session, Duration::from_millis(a.tick_ms))?;
        tracing::info!("serving on ws://{}/ws", handle.addr);
        tokio::signal::ctrl_c().await?;
        handle.shutdown();
        Ok(())
    })
}
