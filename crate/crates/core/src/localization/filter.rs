use crate::error::Result;
use crate::geometry::{wrap_angle, Pose2D};
use crate::grid::OccupancyGrid;
use crate::robot::LaserScan;

use super::{
    estimate_pose, init_gaussian, motion_update, precompute_distance_field, resample, sensor_update, should_update,
    AmclConfig, LikelihoodField, OdomDelta, ParticleSet, PoseEstimate,
};

/// Running particle filter: tracks the odometry pose it last updated at and
/// the map-frame correction derived from its latest estimate.
#[derive(Debug, Clone)]
pub struct Amcl {
    cfg: AmclConfig,
    field: LikelihoodField,
    particles: ParticleSet,
    last_odom: Pose2D,
    estimate: PoseEstimate,
    seed: u64,
    sensor_updates: u64,
    diverged: bool,
}

impl Amcl {
    pub fn new(map: &OccupancyGrid, cfg: AmclConfig, initial: Pose2D, std: (f64, f64, f64), odom: Pose2D, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let particles = init_gaussian(map, initial, std, &cfg, seed)?;
        let field = precompute_distance_field(map, cfg.likelihood.max_obstacle_dist);
        Ok(Self::with_parts(cfg, field, particles, odom, seed))
    }

    /// Reuses an already computed field (the expensive part for large maps).
    pub fn with_field(map: &OccupancyGrid, field: LikelihoodField, cfg: AmclConfig, initial: Pose2D, std: (f64, f64, f64), odom: Pose2D, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let particles = init_gaussian(map, initial, std, &cfg, seed)?;
        Ok(Self::with_parts(cfg, field, particles, odom, seed))
    }

    fn with_parts(cfg: AmclConfig, field: LikelihoodField, particles: ParticleSet, odom: Pose2D, seed: u64) -> Self {
        let estimate = estimate_pose(&particles);
        Self {
            cfg,
            field,
            particles,
            last_odom: odom,
            estimate,
            seed,
            sensor_updates: 0,
            diverged: false,
        }
    }

    pub fn config(&self) -> &AmclConfig {
        &self.cfg
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn estimate(&self) -> &PoseEstimate {
        &self.estimate
    }

    pub fn updates(&self) -> u64 {
        self.sensor_updates
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Whether the robot has moved far enough since the last update.
    pub fn needs_update(&self, odom: Pose2D) -> bool {
        let d = self.last_odom.distance(&odom);
        let a = wrap_angle(odom.theta - self.last_odom.theta).abs();
        should_update(d, a, &self.cfg)
    }

    /// Motion update from the accumulated odometry, sensor update with
    /// `scan`, and a resample every `resample_interval` updates.
    pub fn update(&mut self, odom: Pose2D, scan: &LaserScan) {
        let delta = OdomDelta::between(self.last_odom, odom);
        let k = self.sensor_updates;
        let moved = motion_update(&self.particles, delta, &self.cfg, mix(self.seed, 2 * k + 1));
        let outcome = sensor_update(&moved, scan, &self.field, &self.cfg);
        self.diverged = outcome.diverged;
        self.particles = outcome.particles;
        self.sensor_updates += 1;
        self.estimate = estimate_pose(&self.particles);
        if self.sensor_updates % self.cfg.resample_interval as u64 == 0 {
            self.particles = resample(&self.particles, mix(self.seed, 2 * k + 2)).expect("weights normalised by sensor update");
        }
        self.last_odom = odom;
    }

    /// Map-frame pose now: the latest estimate carried forward by the
    /// odometry accumulated since.
    pub fn pose(&self, odom_now: Pose2D) -> Pose2D {
        self.estimate.pose.compose(&self.last_odom.between(&odom_now))
    }
}

fn mix(seed: u64, k: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
