use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the two-wheel differential base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Drive wheel radius `r`, metres.
    pub wheel_radius: f64,
    /// Axial distance between the drive wheels `d`, metres.
    pub wheel_separation: f64,
    /// Wheel rate limit, rad/s. Commands beyond it are scaled down uniformly.
    pub max_wheel_speed: f64,
    /// Radius of the circular collision footprint, metres.
    pub body_radius: f64,
    pub lidar: ScanConfig,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            wheel_radius: 0.04,
            wheel_separation: 0.1,
            max_wheel_speed: 30.0,
            body_radius: 0.06,
            lidar: ScanConfig::default(),
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wheel_radius", self.wheel_radius),
            ("wheel_separation", self.wheel_separation),
            ("max_wheel_speed", self.max_wheel_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.body_radius.is_finite() && self.body_radius >= 0.0) {
            return Err(Error::InvalidParam("body_radius must be >= 0".into()));
        }
        self.lidar.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub beam_count: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub noise_sigma: f64,
}

impl Default for ScanConfig {
    /// 360 beams over `[-π, π)`, 0.15–8 m, 1 cm range noise.
    fn default() -> Self {
        Self {
            beam_count: 360,
            angle_min: -PI,
            angle_max: PI,
            range_min: 0.15,
            range_max: 8.0,
            noise_sigma: 0.01,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_count == 0 {
            return Err(Error::InvalidParam("beam_count must be >= 1".into()));
        }
        if !(self.range_min >= 0.0 && self.range_min < self.range_max) {
            return Err(Error::InvalidParam("require 0 <= range_min < range_max".into()));
        }
        if !(self.angle_min < self.angle_max) {
            return Err(Error::InvalidParam("require angle_min < angle_max".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParam("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Angular step between beams. The span is half-open, so a full circle
    /// of `n` beams is spaced `2π / n` apart.
    pub fn angle_increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / self.beam_count as f64
    }

    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub config: ScanConfig,
    pub ranges: Vec<f64>,
    pub stamp: f64,
}

impl LaserScan {
    /// A max-range reading means "no return".
    pub fn is_sentinel(&self, i: usize) -> bool {
        self.ranges[i] >= self.config.range_max
    }

    /// `(bearing, range)` of every beam that hit something.
    pub fn hits(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ranges
            .iter()
            .enumerate()
            .filter(|(_, r)| **r < self.config.range_max)
            .map(|(i, r)| (self.config.bearing(i), *r))
    }
}
