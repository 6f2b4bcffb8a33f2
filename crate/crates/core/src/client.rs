//! Command-line client operations shared by the in-process and socket
//! front ends: the goal sender and map saver.

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::bridge::Command;
use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::mapping::save_map;
use crate::navigation::{quat_to_yaw, GoalId, GoalState, GoalStatus, NavGoal};
use crate::stack::{Mode, Stack};

/// Sim-seconds `navigate` waits for a terminal status.
pub const NAVIGATE_TIMEOUT: f64 = 600.0;

/// What the goal sender needs from a running stack.
pub trait GoalClient {
    /// Blocks until the stack accepts goals; returns its simulated time.
    fn wait_for_server(&mut self) -> Result<f64>;
    fn send_goal(&mut self, goal: NavGoal) -> Result<GoalId>;
    /// Blocks until `id` is terminal; `None` on timeout.
    fn wait_for_result(&mut self, id: GoalId, timeout: f64) -> Result<Option<GoalStatus>>;
    fn sim_time(&self) -> f64;
}

/// Drives a [`Stack`] owned by the caller, ticking it while waiting.
pub struct StackClient<'a> {
    stack: &'a mut Stack,
}

impl<'a> StackClient<'a> {
    pub fn new(stack: &'a mut Stack) -> Self {
        Self { stack }
    }
}

impl GoalClient for StackClient<'_> {
    fn wait_for_server(&mut self) -> Result<f64> {
        if self.stack.mode() != Mode::Navigation {
            return Err(Error::Connection("the stack is not running navigation".into()));
        }
        Ok(self.stack.time())
    }

    fn send_goal(&mut self, goal: NavGoal) -> Result<GoalId> {
        match self.stack.apply(Command::SetGoal(goal)) {
            Ok(Some(id)) => Ok(id),
            Ok(None) => Err(Error::Connection("goal accepted without an id".into())),
            Err(reason) => Err(Error::InvalidParam(reason)),
        }
    }

    fn wait_for_result(&mut self, id: GoalId, timeout: f64) -> Result<Option<GoalStatus>> {
        Ok(self.stack.run_until_terminal(id, timeout))
    }

    fn sim_time(&self) -> f64 {
        self.stack.time()
    }
}

/// Parsed `navigate <x> <w>` arguments; the raw text is echoed in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigateArgs {
    pub x: f64,
    pub w: f64,
    pub x_text: String,
    pub w_text: String,
}

pub fn parse_navigate_args<S: AsRef<str>>(args: &[S]) -> Result<NavigateArgs> {
    let [x_text, w_text] = args else {
        return Err(Error::Usage("navigate <x> <w>".into()));
    };
    let (x_text, w_text) = (x_text.as_ref(), w_text.as_ref());
    let num = |name: &str, s: &str| -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParam(format!("{name} must be a number, got `{s}`")))?;
        if !v.is_finite() {
            return Err(Error::NonFinite("navigate argument"));
        }
        Ok(v)
    };
    let x = num("x", x_text)?;
    let w = num("w", w_text)?;
    quat_to_yaw(w, None)?;
    Ok(NavigateArgs {
        x,
        w,
        x_text: x_text.to_string(),
        w_text: w_text.to_string(),
    })
}

fn log_line(out: &mut dyn Write, sim_time: f64, msg: &str) -> Result<()> {
    let wall = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    writeln!(out, "[INFO] [{wall:.6}, {sim_time:.6}]: {msg}").map_err(|e| Error::io("<stdout>", e))
}

/// Sends a robot-frame goal `x` metres ahead with orientation `w` and waits
/// for the outcome. Returns the process exit code: 0 only on success.
pub fn cmd_navigate<S: AsRef<str>>(args: &[S], client: &mut dyn GoalClient, out: &mut dyn Write) -> Result<i32> {
    let a = parse_navigate_args(args)?;
    log_line(out, 0.0, &format!("Set X = {}", a.x_text))?;
    log_line(out, 0.0, &format!("Set W = {}", a.w_text))?;
    log_line(out, 0.0, "Waiting for server")?;
    let t = client.wait_for_server()?;
    log_line(out, t, "Sending Goals")?;
    let id = client.send_goal(NavGoal::robot(a.x, a.w))?;
    log_line(out, client.sim_time(), "Waiting for server")?;
    let status = client.wait_for_result(id, NAVIGATE_TIMEOUT)?;
    let state = status.map(|s| s.state);
    let label = state.map_or("timed out", |s| s.name());
    log_line(out, client.sim_time(), &format!("Goal {id} {label}"))?;
    Ok(if state == Some(GoalState::Succeeded) { 0 } else { 1 })
}

/// Parses `-f <basename>`.
pub fn parse_map_saver_args<S: AsRef<str>>(args: &[S]) -> Result<PathBuf> {
    let usage = || Error::Usage("map-saver -f <basename>".into());
    match args {
        [flag, name] if flag.as_ref() == "-f" && !name.as_ref().is_empty() => Ok(PathBuf::from(name.as_ref())),
        _ => Err(usage()),
    }
}

/// Writes `<basename>.pgm` and `<basename>.yaml` from a live map.
pub fn cmd_map_saver<S: AsRef<str>>(args: &[S], live: Option<&OccupancyGrid>) -> Result<PathBuf> {
    let base = parse_map_saver_args(args)?;
    let grid = live.ok_or_else(|| Error::Connection("no live mapping session".into()))?;
    save_map(grid, &base)?;
    Ok(base)
}
