//! Blocking WebSocket client for the bridge, used by `teleop`, `map-saver`
//! and `navigate --url`.

use std::net::TcpStream;

use anyhow::{anyhow, bail, Context};
use diffnav_core::bridge::{encode_command, Ack, Command, ServerMessage, Snapshot};
use diffnav_core::client::GoalClient;
use diffnav_core::error::{Error, Result as CoreResult};
use diffnav_core::navigation::{GoalId, GoalStatus, NavGoal};
use tokio_tungstenite::tungstenite::stream::MaybeTlsStream;
use tokio_tungstenite::tungstenite::{connect, Message, WebSocket};

pub struct BridgeClient {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    latest: Option<Snapshot>,
    /// Last map payload seen, kept because it is only sent on change.
    map: Option<diffnav_core::bridge::MapPayload>,
}

impl BridgeClient {
    pub fn connect(url: &str) -> anyhow::Result<Self> {
        let (ws, _) = connect(url).with_context(|| format!("connecting to {url}"))?;
        Ok(Self {
            ws,
            next_id: 1,
            latest: None,
            map: None,
        })
    }

    fn read(&mut self) -> anyhow::Result<ServerMessage> {
        loop {
            match self.ws.read()? {
                Message::Text(t) => {
                    let msg: ServerMessage = serde_json::from_str(t.as_str()).context("bad server message")?;
                    if let ServerMessage::Snapshot(s) = &msg {
                        if let Some(m) = &s.map {
                            self.map = Some(m.clone());
                        }
                        self.latest = Some(s.clone());
                    }
                    return Ok(msg);
                }
                Message::Close(_) => bail!("server closed the connection"),
                _ => {}
            }
        }
    }

    /// Blocks for the next snapshot.
    pub fn next_snapshot(&mut self) -> anyhow::Result<Snapshot> {
        loop {
            if let ServerMessage::Snapshot(s) = self.read()? {
                return Ok(s);
            }
        }
    }

    pub fn latest(&self) -> Option<&Snapshot> {
        self.latest.as_ref()
    }

    pub fn map(&self) -> Option<&diffnav_core::bridge::MapPayload> {
        self.map.as_ref()
    }

    /// Sends `command` and waits for its ack.
    pub fn request(&mut self, command: &Command) -> anyhow::Result<Ack> {
        let id = self.next_id;
        self.next_id += 1;
        self.ws.send(Message::Text(encode_command(Some(id), command).into()))?;
        loop {
            if let ServerMessage::Ack(a) = self.read()? {
                if a.id == Some(id) {
                    return Ok(a);
                }
            }
        }
    }

    /// Sends a frame as-is.
    pub fn send_text(&mut self, text: &str) -> anyhow::Result<()> {
        self.ws.send(Message::Text(text.into()))?;
        Ok(())
    }

    /// Blocks for the next ack, whatever its id.
    pub fn next_ack(&mut self) -> anyhow::Result<Ack> {
        loop {
            if let ServerMessage::Ack(a) = self.read()? {
                return Ok(a);
            }
        }
    }

    pub fn close(mut self) {
        let _ = self.ws.close(None);
        // drain until the close handshake completes
        while self.ws.read().is_ok() {}
    }
}

fn conn(e: anyhow::Error) -> Error {
    Error::Connection(format!("{e:#}"))
}

impl GoalClient for BridgeClient {
    fn wait_for_server(&mut self) -> CoreResult<f64> {
        let s = self.next_snapshot().map_err(conn)?;
        if s.mode != "navigation" {
            return Err(Error::Connection(format!("the server is running {} mode, not navigation", s.mode)));
        }
        Ok(s.sim_time)
    }

    fn send_goal(&mut self, goal: NavGoal) -> CoreResult<GoalId> {
        let ack = self.request(&Command::SetGoal(goal)).map_err(conn)?;
        match (ack.accepted, ack.goal_id) {
            (true, Some(id)) => Ok(id),
            _ => Err(Error::InvalidParam(ack.reason.unwrap_or_else(|| "goal rejected".into()))),
        }
    }

    fn wait_for_result(&mut self, id: GoalId, timeout: f64) -> CoreResult<Option<GoalStatus>> {
        let start = self.latest.as_ref().map_or(0.0, |s| s.sim_time);
        loop {
            let s = self.next_snapshot().map_err(conn)?;
            if let Some(g) = s.goal.as_ref().filter(|g| g.id == id) {
                if g.state.is_terminal() {
                    return Ok(Some(GoalStatus {
                        state: g.state,
                        feedback: g.feedback,
                        elapsed: g.elapsed,
                    }));
                }
            } else if s.goal.as_ref().is_some_and(|g| g.id > id) {
                return Err(conn(anyhow!("goal {id} was superseded")));
            }
            if s.sim_time - start >= timeout {
                return Ok(None);
            }
        }
    }

    fn sim_time(&self) -> f64 {
        self.latest.as_ref().map_or(0.0, |s| s.sim_time)
    }
}
