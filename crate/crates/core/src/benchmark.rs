//! Time-to-goal benchmark over (min_vel_x, max_vel_x) pairs on a fixed course.

use std::fmt::Write;

use rayon::prelude::*;

use crate::bridge::Command;
use crate::config::StackConfig;
use crate::error::{Error, Result};
use crate::navigation::{GoalState, NavGoal};
use crate::stack::{Mode, Stack};
use crate::world::DemoWorld;

pub const DEFAULT_TIMEOUT: f64 = 600.0;

/// The velocity pairs of the original tuning study.
pub const DEFAULT_PAIRS: [(f64, f64); 6] = [(0.01, 0.1), (0.01, 0.5), (0.01, 1.0), (0.1, 0.1), (0.1, 0.5), (0.1, 1.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Reached { time: f64 },
    Collision { time: f64 },
    Aborted { time: f64 },
    Timeout,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Reached { .. } => "reached",
            Outcome::Collision { .. } => "collision",
            Outcome::Aborted { .. } => "aborted",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match *self {
            Outcome::Reached { time } => Some(time),
            _ => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::Collision { .. } | Outcome::Aborted { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub min_vel_x: f64,
    pub max_vel_x: f64,
    pub outcome: Outcome,
}

/// Runs the full stack on `course` once and reports how it ended.
pub fn run_course(cfg: &StackConfig, course: &str, seed: u64, timeout: f64) -> Result<Outcome> {
    let c = DemoWorld::course(course).ok_or_else(|| Error::InvalidParam(format!("unknown course `{course}`")))?;
    let mut cfg = cfg.clone();
    // display-only scans are not needed headless
    cfg.runtime.scan_hz = 0.0;
    let mut stack = Stack::new(cfg, Mode::Navigation, DemoWorld::new().into_grid(), None, c.start, seed)?;
    let id = stack
        .apply(Command::SetGoal(NavGoal::map(c.goal.x, c.goal.y, c.goal.theta)))
        .map_err(Error::Planning)?
        .expect("accepted goals carry an id");
    loop {
        let st = stack.goal_status(id).expect("goal is recorded");
        if stack.collision_seen() {
            return Ok(Outcome::Collision { time: stack.time() });
        }
        match st.state {
            GoalState::Succeeded => return Ok(Outcome::Reached { time: st.elapsed }),
            GoalState::Aborted | GoalState::Preempted => return Ok(Outcome::Aborted { time: st.elapsed }),
            _ => {}
        }
        if stack.time() >= timeout {
            return Ok(Outcome::Timeout);
        }
        stack.step();
    }
}

/// One row per pair, in input order; runs execute in parallel.
pub fn run_benchmark(base: &StackConfig, pairs: &[(f64, f64)], course: &str, seed: u64, timeout: f64) -> Result<Vec<BenchRow>> {
    if DemoWorld::course(course).is_none() {
        return Err(Error::InvalidParam(format!("unknown course `{course}`")));
    }
    pairs
        .par_iter()
        .map(|&(min_vel_x, max_vel_x)| {
            let mut cfg = base.clone();
            cfg.planner.min_vel_x = min_vel_x;
            cfg.planner.max_vel_x = max_vel_x;
            cfg.validate()?;
            Ok(BenchRow {
                min_vel_x,
                max_vel_x,
                outcome: run_course(&cfg, course, seed, timeout)?,
            })
        })
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>9}  {:>9}  {:>9}  {:>8}", "min_vel_x", "max_vel_x", "outcome", "time_s");
    for r in rows {
        let time = match r.outcome {
            Outcome::Reached { time } => format!("{time:.1}"),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "{:>9}  {:>9}  {:>9}  {:>8}",
            r.min_vel_x,
            r.max_vel_x,
            r.outcome.label(),
            time
        );
    }
    out
}

/// Comma-separated rows with a header line.
pub fn format_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("min_vel_x,max_vel_x,outcome,time_s\n");
    for r in rows {
        let time = r.outcome.time().map(|t| format!("{t:.3}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.min_vel_x, r.max_vel_x, r.outcome.label(), time);
    }
    out
}

/// Parses `"0.01:0.1,0.1:0.5"` into velocity pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|item| {
            let (a, b) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| Error::Usage(format!("pair `{item}` is not of the form min:max")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("`{s}` is not a number")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}
