//! Building a stack from command-line options, and the headless `sim` run.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use diffnav_core::bridge::{parse_command, Command};
use diffnav_core::config::StackConfig;
use diffnav_core::geometry::Pose2D;
use diffnav_core::grid::OccupancyGrid;
use diffnav_core::mapping::load_map;
use diffnav_core::stack::{Mode, Stack};
use diffnav_core::world::DemoWorld;

#[derive(Debug, Clone)]
pub struct StackOptions {
    /// `demo` or the basename of a map used as ground truth.
    pub world: String,
    /// Static map for navigation (defaults to the world).
    pub map: Option<PathBuf>,
    pub mode: Mode,
    pub seed: u64,
    pub start: Option<Pose2D>,
    pub config: Option<PathBuf>,
}

impl Default for StackOptions {
    fn default() -> Self {
        Self {
            world: "demo".into(),
            map: None,
            mode: Mode::Navigation,
            seed: 1,
            start: None,
            config: None,
        }
    }
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<StackConfig> {
    Ok(match path {
        Some(p) => StackConfig::load(p)?,
        None => StackConfig::default(),
    })
}

fn load_world(world: &str) -> anyhow::Result<OccupancyGrid> {
    if world == "demo" {
        return Ok(DemoWorld::new().into_grid());
    }
    load_map(world).with_context(|| format!("loading world `{world}`"))
}

pub fn build_stack(opts: &StackOptions) -> anyhow::Result<Stack> {
    let cfg = load_config(opts.config.as_deref())?;
    let world = load_world(&opts.world)?;
    let map = opts.map.as_ref().map(load_map).transpose()?;
    let start = opts.start.unwrap_or_else(DemoWorld::spawn);
    Ok(Stack::new(cfg, opts.mode, world, map, start, opts.seed)?)
}

/// One line of a command log: `<sim_time> <json command>`. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_command_log(text: &str) -> anyhow::Result<Vec<(f64, Command)>> {
    let mut out: Vec<(f64, Command)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (t, json) = line
            .split_once(char::is_whitespace)
            .with_context(|| format!("line {}: expected `<time> <command>`", n + 1))?;
        let t: f64 = t.parse().with_context(|| format!("line {}: bad time `{t}`", n + 1))?;
        if !t.is_finite() || out.last().is_some_and(|(prev, _)| t < *prev) {
            bail!("line {}: times must be finite and non-decreasing", n + 1);
        }
        let (_, cmd) = parse_command(json.trim()).map_err(|r| anyhow::anyhow!("line {}: {}", n + 1, r.reason))?;
        out.push((t, cmd));
    }
    Ok(out)
}

pub const TRACE_HEADER: &str = "time,true_x,true_y,true_theta,est_x,est_y,est_theta,v,w,collision,goal_state";

/// Runs `stack` for `duration` simulated seconds, applying logged commands
/// when their time comes, and writes one CSV row per tick. `rate` paces the
/// run relative to real time (0 = unpaced). Returns the rejected commands'
/// reasons.
pub fn run_headless(stack: &mut Stack, commands: &[(f64, Command)], duration: f64, rate: f64, trace: &mut dyn Write) -> anyhow::Result<Vec<String>> {
    writeln!(trace, "{TRACE_HEADER}")?;
    let started = Instant::now();
    let t0 = stack.time();
    let mut pending = commands.iter().peekable();
    let mut rejected = Vec::new();
    let end = stack.time() + duration;
    while stack.time() + 1e-9 < end {
        while let Some((_, cmd)) = pending.next_if(|(t, _)| *t <= stack.time() + 1e-9) {
            if let Err(reason) = stack.apply(cmd.clone()) {
                rejected.push(reason);
            }
        }
        stack.step();
        if rate > 0.0 {
            let due = Duration::from_secs_f64((stack.time() - t0) / rate);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        let t = stack.true_pose();
        let e = stack.estimated_pose();
        let c = stack.sim().state().commanded;
        let goal = stack
            .last_goal()
            .and_then(|id| stack.goal_status(id))
            .map_or("", |s| s.state.name());
        writeln!(
            trace,
            "{:.3},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.4},{:.4},{},{}",
            stack.time(),
            t.x,
            t.y,
            t.theta,
            e.x,
            e.y,
            e.theta,
            c.v,
            c.w,
            stack.collision_seen() as u8,
            goal
        )?;
    }
    Ok(rejected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_log_parses() {
        let log = "# drive\n0 {\"kind\":\"teleop_key\",\"key\":\"i\"}\n\n2.5 {\"kind\":\"teleop_key\",\"key\":\"k\"}\n";
        let cmds = parse_command_log(log).unwrap();
        assert_eq!(cmds, vec![(0.0, Command::TeleopKey('i')), (2.5, Command::TeleopKey('k'))]);
        assert!(parse_command_log("1 {\"kind\":\"zzz\"}").is_err());
        assert!(parse_command_log("2 {\"kind\":\"teleop_key\",\"key\":\"i\"}\n1 {\"kind\":\"teleop_key\",\"key\":\"k\"}").is_err());
        assert!(parse_command_log("x {}").is_err());
    }

    #[test]
    fn headless_run_is_deterministic() {
        let log = parse_command_log("0 {\"kind\":\"teleop_key\",\"key\":\"i\"}\n1 {\"kind\":\"teleop_key\",\"key\":\"j\"}").unwrap();
        let run = || {
            let mut stack = build_stack(&StackOptions::default()).unwrap();
            let mut out = Vec::new();
            run_headless(&mut stack, &log, 2.0, 0.0, &mut out).unwrap();
            String::from_utf8(out).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        let rows: Vec<&str> = a.lines().collect();
        assert_eq!(rows[0], TRACE_HEADER);
        assert_eq!(rows.len(), 21);
        let last: Vec<f64> = rows[20].split(',').take(3).map(|v| v.parse().unwrap()).collect();
        assert!((last[0] - 2.0).abs() < 1e-9);
        assert!(last[2] > 2.0, "robot moved forward from the spawn");
    }
}
