//! WebSocket bridge: the stack runs on its own thread and publishes the
//! latest snapshot; each client gets snapshots plus acks for its commands.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use diffnav_core::bridge::{parse_command, Ack, MapPayload, ServerMessage, Snapshot, PROTOCOL_VERSION};
use diffnav_core::stack::{CommandSender, Stack};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};

pub const SCHEMA: &str = include_str!("../../../docs/bridge-protocol.md");

/// Latest published state: the snapshot and the map matching its version.
#[derive(Debug, Clone)]
pub struct Published {
    pub snapshot: Arc<Snapshot>,
    pub map: Arc<MapPayload>,
}

/// Running simulation thread. Dropping it stops the thread.
pub struct SimHandle {
    commands: CommandSender,
    published: watch::Receiver<Published>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl SimHandle {
    /// Starts ticking `stack`. `rate` is the speed relative to real time;
    /// zero runs as fast as possible. A snapshot is published every
    /// `1 / snapshot_hz` simulated seconds.
    pub fn spawn(mut stack: Stack, rate: f64, snapshot_hz: f64) -> Self {
        let commands = stack.sender();
        let mut seq = 1;
        let first = Published {
            snapshot: Arc::new(Snapshot { seq, ..stack.snapshot() }),
            map: Arc::new(stack.map_payload()),
        };
        let (tx, published) = watch::channel(first);
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let period = if snapshot_hz > 0.0 { 1.0 / snapshot_hz } else { f64::INFINITY };
        let thread = std::thread::spawn(move || {
            let started = Instant::now();
            let t0 = stack.time();
            let mut next_publish = t0 + period;
            let mut map_version = stack.map_version();
            let mut map = tx.borrow().map.clone();
            while !flag.load(Ordering::Relaxed) {
                stack.step();
                if rate > 0.0 {
                    let due = Duration::from_secs_f64((stack.time() - t0) / rate);
                    if let Some(wait) = due.checked_sub(started.elapsed()) {
                        std::thread::sleep(wait);
                    }
                }
                if stack.time() + 1e-9 < next_publish {
                    continue;
                }
                while next_publish <= stack.time() + 1e-9 {
                    next_publish += period;
                }
                if stack.map_version() != map_version {
                    map_version = stack.map_version();
                    map = Arc::new(stack.map_payload());
                }
                seq += 1;
                let snapshot = Arc::new(Snapshot { seq, ..stack.snapshot() });
                // keeps only the latest value: slow clients skip snapshots
                tx.send_replace(Published { snapshot, map: map.clone() });
            }
        });
        Self {
            commands,
            published,
            stop,
            thread: Some(thread),
        }
    }

    pub fn commands(&self) -> CommandSender {
        self.commands.clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Published> {
        self.published.clone()
    }
}

impl Drop for SimHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[derive(Clone)]
struct AppState {
    commands: CommandSender,
    published: watch::Receiver<Published>,
}

pub fn router(sim: &SimHandle) -> Router {
    let state = AppState {
        commands: sim.commands(),
        published: sim.subscribe(),
    };
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/schema", get(|| async { SCHEMA }))
        .with_state(state)
}

/// Serves `/ws` and `/schema` on `listener` until the task is dropped.
pub async fn serve(listener: TcpListener, sim: &SimHandle) -> std::io::Result<()> {
    axum::serve(listener, router(sim)).await
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

fn message(m: &ServerMessage) -> Message {
    Message::Text(m.to_json().into())
}

async fn client_session(mut socket: WebSocket, state: AppState) {
    let mut published = state.published.clone();
    let (ack_tx, mut ack_rx) = mpsc::unbounded_channel::<Ack>();
    let mut sent_map: Option<u64> = None;
    // the current snapshot goes out immediately
    published.mark_changed();
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                match parse_command(text.as_str()) {
                    Err(rejected) => {
                        if socket.send(message(&ServerMessage::Ack(rejected.ack()))).await.is_err() {
                            break;
                        }
                    }
                    Ok((id, command)) => {
                        let (reply_tx, reply_rx) = oneshot::channel();
                        let reply = Box::new(move |r| {
                            let _ = reply_tx.send(r);
                        });
                        let ack_tx = ack_tx.clone();
                        if let Err(e) = state.commands.send(command, Some(reply)) {
                            let _ = ack_tx.send(reject(id, e.to_string()));
                            continue;
                        }
                        tokio::spawn(async move {
                            let ack = match reply_rx.await {
                                Ok(Ok(goal_id)) => Ack { version: PROTOCOL_VERSION, id, accepted: true, reason: None, goal_id },
                                Ok(Err(reason)) => reject(id, reason),
                                Err(_) => reject(id, "the stack has shut down".into()),
                            };
                            let _ = ack_tx.send(ack);
                        });
                    }
                }
            }
            Some(ack) = ack_rx.recv() => {
                if socket.send(message(&ServerMessage::Ack(ack))).await.is_err() {
                    break;
                }
            }
            changed = published.changed() => {
                if changed.is_err() {
                    break;
                }
                let p = published.borrow_and_update().clone();
                let mut snap = (*p.snapshot).clone();
                if sent_map != Some(snap.map_version) {
                    snap.map = Some((*p.map).clone());
                    sent_map = Some(snap.map_version);
                }
                if socket.send(message(&ServerMessage::Snapshot(snap))).await.is_err() {
                    break;
                }
            }
        }
    }
}

fn reject(id: Option<u64>, reason: String) -> Ack {
    Ack {
        version: PROTOCOL_VERSION,
        id,
        accepted: false,
        reason: Some(reason),
        goal_id: None,
    }
}
