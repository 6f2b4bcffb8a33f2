//! Deterministic kinematic simulation of the differential-drive robot.

pub mod kinematics;
pub mod lidar;
pub mod odometry;

pub use kinematics::{step_kinematics, twist_to_wheels, wheels_to_twist};
pub use lidar::{cast_ray, simulate_lidar};
pub use odometry::{step_odometry, OdomNoise, SimState};

use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::geometry::{Pose2D, Twist2D};
use crate::grid::OccupancyGrid;
use crate::robot::{LaserScan, RobotParams};

/// Longest straight sub-step used for collision checking, metres.
const COLLISION_STEP: f64 = 0.005;
/// Largest rotation per collision sub-step, radians.
const COLLISION_TURN: f64 = 0.05;

/// Ground-truth world plus robot state, advanced one tick at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: RobotParams,
    noise: OdomNoise,
    truth: OccupancyGrid,
    clearance: DistanceField,
    state: SimState,
    collided: bool,
    scan_count: u64,
}

impl Simulator {
    pub fn new(truth: OccupancyGrid, params: RobotParams, noise: OdomNoise, start: Pose2D, seed: u64) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        if truth.world_to_cell(start.x, start.y).is_none() {
            return Err(Error::OutOfBounds { x: start.x, y: start.y });
        }
        let clearance = DistanceField::from_grid(&truth, params.body_radius.max(truth.resolution()) * 4.0);
        Ok(Self {
            params,
            noise,
            truth,
            clearance,
            state: SimState::new(start, seed),
            collided: false,
            scan_count: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn truth(&self) -> &OccupancyGrid {
        &self.truth
    }

    /// True if the most recent step ended in contact with an obstacle.
    pub fn collided(&self) -> bool {
        self.collided
    }

    /// Whether a robot centred at `(x, y)` would overlap an occupied cell.
    pub fn in_collision(&self, x: f64, y: f64) -> bool {
        match self.truth.world_to_cell(x, y) {
            Some((ix, iy)) => self.clearance.get(ix, iy) < self.params.body_radius,
            None => true,
        }
    }

    /// Applies `cmd` for `dt` seconds. Wheel limits are enforced through the
    /// wheel-speed mapping; a step that would enter an obstacle stops at the
    /// last collision-free sub-pose and raises the collision flag.
    pub fn step(&mut self, cmd: Twist2D, dt: f64) {
        let wheels = twist_to_wheels(cmd, &self.params);
        let actual = wheels_to_twist(wheels, &self.params);

        let travel = (actual.v * dt).abs();
        let turn = (actual.w * dt).abs();
        let n = ((travel / COLLISION_STEP).max(turn / COLLISION_TURN).ceil() as usize).max(1);
        let sub_dt = dt / n as f64;

        let mut pose = self.state.true_pose;
        self.collided = false;
        for _ in 0..n {
            let next = step_kinematics(pose, actual, sub_dt);
            if self.in_collision(next.x, next.y) && !self.moving_away(pose, next) {
                self.collided = true;
                break;
            }
            pose = next;
        }

        let mut s = self.state.clone();
        s.commanded = actual;
        self.state = odometry::advance_odometry(&s, pose, &self.noise, dt);
    }

    // Allows backing out of contact: a sub-step that increases clearance is fine.
    fn moving_away(&self, from: Pose2D, to: Pose2D) -> bool {
        let clearance = |p: Pose2D| {
            self.truth
                .world_to_cell(p.x, p.y)
                .map_or(0.0, |(ix, iy)| self.clearance.get(ix, iy))
        };
        self.in_collision(from.x, from.y) && clearance(to) > clearance(from)
    }

    /// Scan from the current true pose. Each call uses a fresh noise stream.
    pub fn scan(&mut self) -> LaserScan {
        let seed = self.state.rng_seed ^ 0x9e37_79b9_7f4a_7c15 ^ self.scan_count.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        self.scan_count += 1;
        let mut scan = simulate_lidar(self.state.true_pose, &self.truth, &self.params.lidar, seed)
            .expect("true pose stays inside the world");
        scan.stamp = self.state.time;
        scan
    }
}
