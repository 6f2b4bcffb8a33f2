//! Whole-stack configuration, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::AmclConfig;
use crate::navigation::{CostmapConfig, PlannerConfig};
use crate::robot::RobotParams;
use crate::sim::OdomNoise;
use crate::teleop::TeleopConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Lidar rate for display and mapping, Hz. Zero scans only when AMCL asks.
    pub scan_hz: f64,
    /// Refine mapping poses by scan matching against the map built so far.
    pub scan_match: bool,
    /// Spread of the initial particle cloud (x, y, yaw).
    pub initial_std: [f64; 3],
    /// Particles published per snapshot.
    pub max_published_particles: usize,
    /// Cell size of the map built in mapping mode, metres.
    pub map_resolution: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            scan_hz: 10.0,
            scan_match: true,
            initial_std: [0.1, 0.1, 0.05],
            max_published_particles: 200,
            map_resolution: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub robot: RobotParams,
    pub odom_noise: OdomNoise,
    pub amcl: AmclConfig,
    pub planner: PlannerConfig,
    pub costmap: CostmapConfig,
    pub teleop: TeleopConfig,
    pub runtime: RuntimeConfig,
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.odom_noise.validate()?;
        self.amcl.validate()?;
        self.planner.validate()?;
        let c = &self.costmap;
        if !(c.robot_radius >= 0.0 && c.inflation_radius >= c.robot_radius) {
            return Err(Error::InvalidParam("need 0 <= robot_radius <= inflation_radius".into()));
        }
        if !(self.runtime.map_resolution > 0.0 && self.runtime.map_resolution.is_finite()) {
            return Err(Error::InvalidParam("map_resolution must be > 0".into()));
        }
        if !(self.runtime.scan_hz >= 0.0 && self.runtime.scan_hz.is_finite()) {
            return Err(Error::InvalidParam("scan_hz must be >= 0".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StackConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Sets one numeric parameter by dotted name, e.g. `planner.max_vel_x`.
    /// The result is validated; on error `self` is unchanged.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("parameter value"));
        }
        let mut root = toml::Value::try_from(&*self).expect("config serializes");
        let mut node = &mut root;
        let parts: Vec<&str> = name.split('.').collect();
        for part in &parts {
            node = node
                .get_mut(*part)
                .ok_or_else(|| Error::InvalidParam(format!("unknown parameter `{name}`")))?;
        }
        *node = match node {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value >= 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => {
                return Err(Error::InvalidParam(format!("`{name}` takes a non-negative integer")));
            }
            toml::Value::Boolean(_) if value == 0.0 || value == 1.0 => toml::Value::Boolean(value == 1.0),
            _ => return Err(Error::InvalidParam(format!("`{name}` is not a numeric parameter"))),
        };
        let updated: StackConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
