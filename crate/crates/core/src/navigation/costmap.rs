use serde::{Deserialize, Serialize};

use crate::distance::squared_edt;
use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::{CellClass, OccupancyGrid};

pub const FREE: u8 = 0;
pub const INSCRIBED: u8 = 253;
pub const LETHAL: u8 = 254;
pub const NO_INFORMATION: u8 = 255;
/// Exponential decay rate of inflated cost, per metre.
pub const DECAY_RATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostmapConfig {
    pub robot_radius: f64,
    pub inflation_radius: f64,
}

impl Default for CostmapConfig {
    fn default() -> Self {
        Self {
            robot_radius: 0.06,
            inflation_radius: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cost: Vec<u8>,
}

impl Costmap {
    /// Builds a costmap directly from cost values (row-major, row 0 at the origin).
    pub fn from_costs(width: usize, height: usize, resolution: f64, origin: Pose2D, cost: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || cost.len() != width * height {
            return Err(Error::InvalidParam(format!(
                "cost array of length {} does not match {width}x{height}",
                cost.len()
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParam(format!("resolution must be > 0, got {resolution}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cost,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn costs(&self) -> &[u8] {
        &self.cost
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> u8 {
        self.cost[iy * self.width + ix]
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.x) / self.resolution).floor();
        let fy = ((y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_to_world(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Cost under a world point; `None` off the map.
    pub fn cost_at(&self, x: f64, y: f64) -> Option<u8> {
        self.world_to_cell(x, y).map(|(ix, iy)| self.get(ix, iy))
    }
}

/// Inflated cost for a free cell at metric distance `d` from the nearest obstacle.
pub fn inflation_cost(d: f64, robot_radius: f64, inflation_radius: f64) -> u8 {
    if d <= 0.0 {
        LETHAL
    } else if d <= robot_radius {
        INSCRIBED
    } else if d >= inflation_radius {
        FREE
    } else {
        (252.0 * (-DECAY_RATE * (d - robot_radius)).exp()).round() as u8
    }
}

/// Costmap from an occupancy grid: occupied cells lethal, cells within
/// `robot_radius` of one inscribed, exponential decay out to `inflation_radius`,
/// unknown cells marked as no-information.
pub fn inflate(grid: &OccupancyGrid, robot_radius: f64, inflation_radius: f64) -> Result<Costmap> {
    if !(robot_radius >= 0.0 && inflation_radius >= robot_radius && inflation_radius.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "need 0 <= robot_radius <= inflation_radius, got {robot_radius} and {inflation_radius}"
        )));
    }
    let classes = grid.classes();
    let sq = squared_edt(grid.width(), grid.height(), |i| classes[i] == CellClass::Occupied);
    let res = grid.resolution();
    let cost = classes
        .iter()
        .zip(&sq)
        .map(|(c, &s)| match c {
            CellClass::Occupied => LETHAL,
            CellClass::Unknown => NO_INFORMATION,
            CellClass::Free => inflation_cost(s.sqrt() * res, robot_radius, inflation_radius),
        })
        .collect();
    Costmap::from_costs(grid.width(), grid.height(), res, grid.origin(), cost)
}
