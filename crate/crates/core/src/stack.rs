//! The full robot stack behind one tick loop: simulator, mapping or
//! localization, navigation and teleop, fed by a serialized command queue.

use std::sync::mpsc::{channel, Receiver, Sender};

use crate::bridge::{stride_sample, Command, GoalInfo, MapPayload, ScanPayload, Snapshot, PROTOCOL_VERSION};
use crate::config::StackConfig;
use crate::error::{Error, Result};
use crate::geometry::{Pose2D, Twist2D};
use crate::grid::OccupancyGrid;
use crate::localization::Amcl;
use crate::mapping::{integrate_scan, scan_match};
use crate::navigation::{inflate, GoalId, GoalStatus, Navigator};
use crate::robot::LaserScan;
use crate::sim::Simulator;
use crate::teleop::{classify_key, KeyKind, TeleopState};

/// Minimum simulated time between published map versions, seconds.
const MAP_PUBLISH_PERIOD: f64 = 1.0;
/// Occupied cells required before scan matching is trusted.
const MIN_MATCH_CELLS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Build a map from scans while the operator drives.
    Mapping,
    /// Localize against a fixed map and accept navigation goals.
    Navigation,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mapping => "mapping",
            Mode::Navigation => "navigation",
        }
    }
}

/// Outcome of one command: the goal id for accepted goals, or a reason.
pub type CommandResult = std::result::Result<Option<GoalId>, String>;
pub type Reply = Box<dyn FnOnce(CommandResult) + Send>;

struct Envelope {
    command: Command,
    reply: Option<Reply>,
}

/// Cloneable handle for submitting commands from other threads. Commands are
/// applied at the start of the next tick, in arrival order.
#[derive(Clone)]
pub struct CommandSender {
    tx: Sender<Envelope>,
}

impl CommandSender {
    pub fn send(&self, command: Command, reply: Option<Reply>) -> Result<()> {
        self.tx
            .send(Envelope { command, reply })
            .map_err(|_| Error::Config("the stack has shut down".into()))
    }
}

pub struct Stack {
    cfg: StackConfig,
    mode: Mode,
    sim: Simulator,
    map: OccupancyGrid,
    map_version: u64,
    map_dirty: bool,
    last_map_publish: f64,
    /// Mapping mode: correction from odometry to map frame.
    map_from_odom: Pose2D,
    amcl: Option<Amcl>,
    nav: Option<Navigator>,
    teleop: TeleopState,
    teleop_twist: Twist2D,
    last_goal: Option<GoalId>,
    last_scan: Option<LaserScan>,
    next_scan_time: f64,
    collision_seen: bool,
    seed: u64,
    tx: Sender<Envelope>,
    rx: Receiver<Envelope>,
}

impl Stack {
    /// `world` is the ground truth the simulator runs in. In navigation mode
    /// `static_map` is the map to localize and plan on (the world itself when
    /// `None`); mapping mode starts from an unknown grid covering the world.
    pub fn new(cfg: StackConfig, mode: Mode, world: OccupancyGrid, static_map: Option<OccupancyGrid>, start: Pose2D, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let sim = Simulator::new(world.clone(), cfg.robot.clone(), cfg.odom_noise, start, seed)?;
        let (map, amcl, nav) = match mode {
            Mode::Mapping => {
                let res = cfg.runtime.map_resolution;
                let w = (world.width() as f64 * world.resolution() / res).ceil() as usize;
                let h = (world.height() as f64 * world.resolution() / res).ceil() as usize;
                (OccupancyGrid::new(w, h, res, world.origin())?, None, None)
            }
            Mode::Navigation => {
                let map = static_map.unwrap_or(world);
                let [sx, sy, st] = cfg.runtime.initial_std;
                let amcl = Amcl::new(&map, cfg.amcl.clone(), start, (sx, sy, st), start, seed ^ 0xa5a5_5a5a)?;
                let costmap = inflate(&map, cfg.costmap.robot_radius, cfg.costmap.inflation_radius)?;
                let nav = Navigator::new(costmap, cfg.planner)?;
                (map, Some(amcl), Some(nav))
            }
        };
        let (tx, rx) = channel();
        let teleop = TeleopState::new(cfg.teleop);
        Ok(Self {
            cfg,
            mode,
            sim,
            map,
            map_version: 1,
            map_dirty: false,
            last_map_publish: 0.0,
            map_from_odom: Pose2D::default(),
            amcl,
            nav,
            teleop,
            teleop_twist: Twist2D::ZERO,
            last_goal: None,
            last_scan: None,
            next_scan_time: 0.0,
            collision_seen: false,
            seed,
            tx,
            rx,
        })
    }

    pub fn sender(&self) -> CommandSender {
        CommandSender { tx: self.tx.clone() }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &StackConfig {
        &self.cfg
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn amcl(&self) -> Option<&Amcl> {
        self.amcl.as_ref()
    }

    pub fn navigator(&self) -> Option<&Navigator> {
        self.nav.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.sim.state().time
    }

    pub fn dt(&self) -> f64 {
        self.cfg.planner.control_period
    }

    pub fn true_pose(&self) -> Pose2D {
        self.sim.state().true_pose
    }

    pub fn estimated_pose(&self) -> Pose2D {
        let odom = self.sim.state().odom_pose;
        match &self.amcl {
            Some(a) => a.pose(odom),
            None => self.map_from_odom.compose(&odom),
        }
    }

    /// Whether any step so far ended in contact.
    pub fn collision_seen(&self) -> bool {
        self.collision_seen
    }

    pub fn map(&self) -> &OccupancyGrid {
        &self.map
    }

    pub fn map_version(&self) -> u64 {
        self.map_version
    }

    pub fn last_goal(&self) -> Option<GoalId> {
        self.last_goal
    }

    pub fn goal_status(&self, id: GoalId) -> Option<GoalStatus> {
        self.nav.as_ref().and_then(|n| n.status(id))
    }

    /// Applies a command immediately (the queue calls this at tick start).
    pub fn apply(&mut self, command: Command) -> CommandResult {
        match command {
            Command::TeleopKey(key) => {
                if classify_key(key) == KeyKind::Direction {
                    // the operator takes over from autonomy
                    if let Some(nav) = self.nav.as_mut() {
                        if let Some(id) = nav.current_goal() {
                            nav.cancel_goal(id).map_err(|e| e.to_string())?;
                        }
                    }
                }
                self.teleop_twist = self.teleop.apply(key);
                Ok(None)
            }
            Command::SetGoal(goal) => {
                let pose = self.estimated_pose();
                let nav = self
                    .nav
                    .as_mut()
                    .ok_or_else(|| "navigation is not running in mapping mode".to_string())?;
                let id = nav.send_goal(&goal, pose).map_err(|e| e.to_string())?;
                self.teleop.stop();
                self.teleop_twist = Twist2D::ZERO;
                self.last_goal = Some(id);
                Ok(Some(id))
            }
            Command::CancelGoal(id) => {
                let nav = self
                    .nav
                    .as_mut()
                    .ok_or_else(|| "navigation is not running in mapping mode".to_string())?;
                let id = id
                    .or(nav.current_goal())
                    .ok_or_else(|| "no active goal".to_string())?;
                nav.cancel_goal(id).map_err(|e| e.to_string())?;
                Ok(Some(id))
            }
            Command::SetParam { name, value } => {
                let mut cfg = self.cfg.clone();
                cfg.set_param(&name, value).map_err(|e| e.to_string())?;
                if !name.starts_with("planner.") && !name.starts_with("teleop.") && !name.starts_with("runtime.scan") {
                    return Err(format!("`{name}` can only be set at startup"));
                }
                if let Some(nav) = self.nav.as_mut() {
                    nav.set_config(cfg.planner).map_err(|e| e.to_string())?;
                }
                if name.starts_with("teleop.") {
                    let t = cfg.teleop;
                    self.teleop.linear = t.linear;
                    self.teleop.angular = t.angular;
                    self.teleop.scale_linear = t.scale_linear;
                    self.teleop.scale_angular = t.scale_angular;
                }
                self.cfg = cfg;
                Ok(None)
            }
        }
    }

    fn drain_commands(&mut self) {
        while let Ok(env) = self.rx.try_recv() {
            let result = self.apply(env.command);
            if let Err(reason) = &result {
                log::info!("command rejected: {reason}");
            }
            if let Some(reply) = env.reply {
                reply(result);
            }
        }
    }

    /// Advances the whole stack by one control period.
    pub fn step(&mut self) {
        self.drain_commands();
        let dt = self.dt();
        let pose = self.estimated_pose();

        let twist = match self.nav.as_mut() {
            Some(nav) if nav.current_goal().is_some() => nav.tick(pose, self.sim.collided(), dt),
            Some(nav) => {
                nav.tick(pose, self.sim.collided(), dt);
                self.teleop_twist
            }
            None => self.teleop_twist,
        };
        self.sim.step(twist, dt);
        self.collision_seen |= self.sim.collided();
        self.sense();
    }

    fn sense(&mut self) {
        let now = self.time();
        let odom = self.sim.state().odom_pose;
        let periodic = self.cfg.runtime.scan_hz > 0.0 && now + 1e-9 >= self.next_scan_time;
        let amcl_due = self.amcl.as_ref().is_some_and(|a| a.needs_update(odom));
        if !(periodic || amcl_due) {
            return;
        }
        if periodic {
            self.next_scan_time = now + 1.0 / self.cfg.runtime.scan_hz;
        }
        let scan = self.sim.scan();
        if let Some(amcl) = self.amcl.as_mut() {
            if amcl_due {
                amcl.update(odom, &scan);
            }
        } else {
            self.integrate(odom, &scan);
        }
        self.last_scan = Some(scan);
    }

    fn integrate(&mut self, odom: Pose2D, scan: &LaserScan) {
        let mut pose = self.map_from_odom.compose(&odom);
        let occupied = self.map.raw_cells().iter().enumerate().filter(|(i, _)| self.map.is_occupied(*i)).count();
        if self.cfg.runtime.scan_match && occupied >= MIN_MATCH_CELLS {
            pose = scan_match(&self.map, pose, scan).0;
            self.map_from_odom = pose.compose(&odom.inverse());
        }
        match integrate_scan(&mut self.map, pose, scan) {
            Ok(()) => self.map_dirty = true,
            Err(e) => log::warn!("scan dropped: {e}"),
        }
        let now = self.time();
        if self.map_dirty && now - self.last_map_publish >= MAP_PUBLISH_PERIOD {
            self.map_version += 1;
            self.map_dirty = false;
            self.last_map_publish = now;
        }
    }

    /// Runs ticks until `seconds` of simulated time have passed.
    pub fn run_for(&mut self, seconds: f64) {
        let end = self.time() + seconds;
        while self.time() + 1e-9 < end {
            self.step();
        }
    }

    /// Runs until goal `id` is terminal or `timeout` simulated seconds pass.
    pub fn run_until_terminal(&mut self, id: GoalId, timeout: f64) -> Option<GoalStatus> {
        let end = self.time() + timeout;
        loop {
            self.drain_commands();
            if let Some(st) = self.goal_status(id).filter(|s| s.state.is_terminal()) {
                return Some(st);
            }
            if self.time() >= end {
                return None;
            }
            self.step();
        }
    }

    pub fn map_payload(&self) -> MapPayload {
        MapPayload::from_grid(&self.map)
    }

    /// Current state for publication; `seq` and `map` are filled in by the publisher.
    pub fn snapshot(&self) -> Snapshot {
        let particles = match &self.amcl {
            Some(a) => {
                let poses: Vec<[f64; 3]> = a.particles().particles().iter().map(|p| [p.pose.x, p.pose.y, p.pose.theta]).collect();
                stride_sample(&poses, self.cfg.runtime.max_published_particles)
            }
            None => Vec::new(),
        };
        let scan = self.last_scan.as_ref().map(|s| {
            let stride = 2;
            ScanPayload {
                angle_min: s.config.angle_min,
                angle_increment: s.config.angle_increment() * stride as f64,
                range_max: s.config.range_max,
                ranges: s.ranges.iter().step_by(stride).copied().collect(),
            }
        });
        let (global_path, goal) = match &self.nav {
            Some(nav) => {
                let pts: Vec<[f64; 2]> = nav.path().iter().map(|p| [p.x, p.y]).collect();
                let goal = self.last_goal.and_then(|id| {
                    let st = nav.status(id)?;
                    Some(GoalInfo {
                        id,
                        state: st.state,
                        target: nav.target(id)?,
                        feedback: st.feedback,
                        elapsed: st.elapsed,
                    })
                });
                (stride_sample(&pts, 500), goal)
            }
            None => (Vec::new(), None),
        };
        Snapshot {
            version: PROTOCOL_VERSION,
            seq: 0,
            sim_time: self.time(),
            mode: self.mode.name().to_string(),
            true_pose: self.true_pose(),
            estimated_pose: self.estimated_pose(),
            particles,
            scan,
            map_version: self.map_version,
            map: None,
            global_path,
            goal,
            collision: self.sim.collided(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
