//! Trajectory-rollout local planner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2D, Twist2D};
use crate::navigation::costmap::{Costmap, INSCRIBED};
use crate::sim::step_kinematics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub path_distance: f64,
    pub goal_distance: f64,
    pub obstacle: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            path_distance: 0.6,
            goal_distance: 0.8,
            obstacle: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub min_vel_x: f64,
    pub max_vel_x: f64,
    pub max_rot_vel: f64,
    pub acc_lim_x: f64,
    pub acc_lim_theta: f64,
    pub sim_time: f64,
    pub vx_samples: usize,
    pub vtheta_samples: usize,
    pub xy_goal_tolerance: f64,
    pub yaw_goal_tolerance: f64,
    pub cost_weights: CostWeights,
    /// Controller period; sets the reachable velocity window per tick.
    pub control_period: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            min_vel_x: 0.1,
            max_vel_x: 0.5,
            max_rot_vel: 1.0,
            acc_lim_x: 1.0,
            acc_lim_theta: 2.0,
            sim_time: 1.7,
            vx_samples: 6,
            vtheta_samples: 20,
            xy_goal_tolerance: 1.0,
            yaw_goal_tolerance: 1.0,
            cost_weights: CostWeights::default(),
            control_period: 0.1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.min_vel_x,
            self.max_vel_x,
            self.max_rot_vel,
            self.acc_lim_x,
            self.acc_lim_theta,
            self.sim_time,
            self.xy_goal_tolerance,
            self.yaw_goal_tolerance,
            self.control_period,
            self.cost_weights.path_distance,
            self.cost_weights.goal_distance,
            self.cost_weights.obstacle,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("planner parameter"));
        }
        if !(0.0 <= self.min_vel_x && self.min_vel_x <= self.max_vel_x) {
            return Err(Error::InvalidParam(format!(
                "need 0 <= min_vel_x <= max_vel_x, got {} and {}",
                self.min_vel_x, self.max_vel_x
            )));
        }
        if self.xy_goal_tolerance <= 0.0 || self.yaw_goal_tolerance <= 0.0 {
            return Err(Error::InvalidParam("goal tolerances must be > 0".into()));
        }
        if self.vx_samples == 0 || self.vtheta_samples == 0 {
            return Err(Error::InvalidParam("sample counts must be >= 1".into()));
        }
        if self.max_rot_vel < 0.0 || self.acc_lim_x <= 0.0 || self.acc_lim_theta <= 0.0 {
            return Err(Error::InvalidParam("velocity and acceleration limits must be positive".into()));
        }
        if self.sim_time <= 0.0 || self.control_period <= 0.0 {
            return Err(Error::InvalidParam("sim_time and control_period must be > 0".into()));
        }
        Ok(())
    }

    /// Reachable forward-velocity window from `v`.
    pub fn vx_window(&self, v: f64) -> (f64, f64) {
        let hi = self.max_vel_x.min(v + self.acc_lim_x * self.control_period);
        let lo = self.min_vel_x.max(v - self.acc_lim_x * self.control_period);
        (lo.min(hi), hi)
    }

    /// Reachable rotational-velocity window from `w`.
    pub fn vtheta_window(&self, w: f64) -> (f64, f64) {
        let hi = self.max_rot_vel.min(w + self.acc_lim_theta * self.control_period);
        let lo = (-self.max_rot_vel).max(w - self.acc_lim_theta * self.control_period);
        (lo.min(hi), hi)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![hi];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Velocity samples for one tick: the window grids, plus straight motion when
/// the rotational window contains it.
pub fn velocity_samples(cfg: &PlannerConfig, current: Twist2D) -> Vec<Twist2D> {
    let (vlo, vhi) = cfg.vx_window(current.v);
    let (wlo, whi) = cfg.vtheta_window(current.w);
    let mut ws = linspace(wlo, whi, cfg.vtheta_samples);
    if wlo <= 0.0 && 0.0 <= whi && !ws.contains(&0.0) {
        ws.push(0.0);
    }
    let mut out = Vec::new();
    for v in linspace(vlo, vhi, cfg.vx_samples) {
        for &w in &ws {
            out.push(Twist2D::new(v, w));
        }
    }
    out
}

/// Poses along a constant-velocity rollout, spaced at most half a cell or
/// 0.05 rad apart, excluding the start pose.
pub fn rollout(pose: Pose2D, t: Twist2D, sim_time: f64, resolution: f64) -> Vec<Pose2D> {
    let lin = t.v.abs() * sim_time / (0.5 * resolution);
    let ang = t.w.abs() * sim_time / 0.05;
    let n = lin.max(ang).ceil().max(1.0) as usize;
    (1..=n)
        .map(|k| step_kinematics(pose, t, sim_time * k as f64 / n as f64))
        .collect()
}

/// Rollout poses, besides the endpoint, checked for path deviation.
pub const PATH_CHECKS: usize = 20;

/// Unreachable marker in [`LocalGrids`].
pub const UNREACHABLE: u32 = u32::MAX;
/// Grid step costs in thousandths of a cell.
const STEP: u32 = 1000;
const DIAG_STEP: u32 = 1414;

/// Obstacle-aware distance grids over a square window around the robot:
/// distance to the nearest path cell, and to the local goal (the last pose of
/// the path's leading stretch inside the window). Both propagate only through traversable cells.
#[derive(Debug, Clone)]
pub struct LocalGrids {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    path_dist: Vec<u32>,
    goal_dist: Vec<u32>,
}

impl LocalGrids {
    /// Window of `half` cells around `pose`.
    pub fn new(cm: &Costmap, pose: Pose2D, path: &[Pose2D], half: usize) -> Self {
        let (cx, cy) = cm
            .world_to_cell(pose.x, pose.y)
            .unwrap_or_else(|| clamp_cell(cm, pose.x, pose.y));
        let x0 = cx.saturating_sub(half);
        let y0 = cy.saturating_sub(half);
        let x1 = (cx + half + 1).min(cm.width());
        let y1 = (cy + half + 1).min(cm.height());
        let (w, h) = (x1 - x0, y1 - y0);
        // only the leading stretch of path inside the window: a path that leaves
        // and re-enters may be unreachable within it
        let inside: Vec<usize> = path
            .iter()
            .map_while(|p| cm.world_to_cell(p.x, p.y))
            .take_while(|&(ix, iy)| ix >= x0 && ix < x1 && iy >= y0 && iy < y1)
            .map(|(ix, iy)| (iy - y0) * w + (ix - x0))
            .collect();
        let passable = |i: usize| {
            let c = cm.get(x0 + i % w, y0 + i / w);
            c < INSCRIBED
        };
        let path_dist = propagate(w, h, &inside, passable);
        let goal_dist = propagate(w, h, inside.last().map(std::slice::from_ref).unwrap_or(&[]), passable);
        Self {
            x0,
            y0,
            w,
            h,
            path_dist,
            goal_dist,
        }
    }

    fn lookup(&self, grid: &[u32], cm: &Costmap, x: f64, y: f64) -> Option<f64> {
        let (ix, iy) = cm.world_to_cell(x, y)?;
        if ix < self.x0 || iy < self.y0 || ix >= self.x0 + self.w || iy >= self.y0 + self.h {
            return None;
        }
        let d = grid[(iy - self.y0) * self.w + (ix - self.x0)];
        (d != UNREACHABLE).then(|| d as f64 / STEP as f64)
    }

    /// Free-space distance to the path, in cells.
    pub fn path_distance(&self, cm: &Costmap, x: f64, y: f64) -> Option<f64> {
        self.lookup(&self.path_dist, cm, x, y)
    }

    /// Free-space distance to the local goal, in cells.
    pub fn goal_distance(&self, cm: &Costmap, x: f64, y: f64) -> Option<f64> {
        self.lookup(&self.goal_dist, cm, x, y)
    }
}

fn clamp_cell(cm: &Costmap, x: f64, y: f64) -> (usize, usize) {
    let fx = ((x - cm.origin().x) / cm.resolution()).floor().clamp(0.0, (cm.width() - 1) as f64);
    let fy = ((y - cm.origin().y) / cm.resolution()).floor().clamp(0.0, (cm.height() - 1) as f64);
    (fx as usize, fy as usize)
}

/// Multi-source Dijkstra over an 8-connected window.
fn propagate(w: usize, h: usize, sources: &[usize], passable: impl Fn(usize) -> bool) -> Vec<u32> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist = vec![UNREACHABLE; w * h];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if passable(s) && dist[s] != 0 {
            dist[s] = 0;
            heap.push(Reverse((0u32, s)));
        }
    }
    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let n = ny as usize * w + nx as usize;
            if !passable(n) {
                continue;
            }
            let nd = d + if dx != 0 && dy != 0 { DIAG_STEP } else { STEP };
            if nd < dist[n] {
                dist[n] = nd;
                heap.push(Reverse((nd, n)));
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPlan {
    pub twist: Twist2D,
    pub trajectory: Vec<Pose2D>,
    pub score: f64,
}

/// Scores one rollout; `None` if any pose leaves the map, touches a cell of
/// cost at least inscribed, or ends where the path or goal cannot be reached.
pub fn score_trajectory(cm: &Costmap, traj: &[Pose2D], grids: &LocalGrids, cfg: &PlannerConfig) -> Option<f64> {
    let mut max_cost = 0u8;
    for p in traj {
        let c = cm.cost_at(p.x, p.y)?;
        if c >= INSCRIBED {
            return None;
        }
        max_cost = max_cost.max(c);
    }
    let end = traj.last()?;
    // worst deviation along the rollout, so arcs cannot swing off the path and back
    let mut pd = grids.path_distance(cm, end.x, end.y)?;
    for k in 0..PATH_CHECKS {
        let p = traj[k * traj.len() / PATH_CHECKS];
        pd = pd.max(grids.path_distance(cm, p.x, p.y)?);
    }
    let gd = grids.goal_distance(cm, end.x, end.y)?;
    let w = cfg.cost_weights;
    Some(w.path_distance * pd + w.goal_distance * gd + w.obstacle * max_cost as f64)
}

/// Window half-size, in cells, that contains every rollout for `cfg`.
pub fn window_half_cells(cfg: &PlannerConfig, resolution: f64) -> usize {
    let reach = cfg.max_vel_x.max(cfg.min_vel_x) * cfg.sim_time;
    (reach / resolution).ceil() as usize + 5
}

/// Picks the best admissible velocity pair for following `path` from `pose`.
pub fn plan_local(cm: &Costmap, pose: Pose2D, current: Twist2D, path: &[Pose2D], cfg: &PlannerConfig) -> Result<LocalPlan> {
    if path.is_empty() {
        return Err(Error::Planning("empty path".into()));
    }
    let grids = LocalGrids::new(cm, pose, path, window_half_cells(cfg, cm.resolution()));
    let mut best: Option<LocalPlan> = None;
    for t in velocity_samples(cfg, current) {
        let traj = rollout(pose, t, cfg.sim_time, cm.resolution());
        if let Some(score) = score_trajectory(cm, &traj, &grids, cfg) {
            // endpoints share cells, so break exact ties toward less turning, then speed
            let better = best.as_ref().is_none_or(|b| {
                (score, t.w.abs(), -t.v) < (b.score, b.twist.w.abs(), -b.twist.v)
            });
            if better {
                best = Some(LocalPlan {
                    twist: t,
                    trajectory: traj,
                    score,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Planning("every sampled trajectory collides".into()))
}
