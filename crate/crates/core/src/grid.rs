//! Log-odds occupancy grid.
//!
//! Cells are stored as fixed-point log-odds in hundredths so that sensor
//! updates are exact integer additions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;

/// Log-odds scale of the fixed-point cell representation.
pub const LOG_ODDS_SCALE: f64 = 100.0;
/// Lower clamp, in fixed-point units (-6.0).
pub const L_MIN: i16 = -600;
/// Upper clamp, in fixed-point units (+6.0).
pub const L_MAX: i16 = 600;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;
pub const DEFAULT_FREE_THRESH: f64 = 0.196;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Occupied,
    Free,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<i16>,
    occupied_thresh: f64,
    free_thresh: f64,
    // thresholds mapped into fixed-point log-odds units
    occ_raw: f64,
    free_raw: f64,
}

fn logit_raw(p: f64) -> f64 {
    (p / (1.0 - p)).ln() * LOG_ODDS_SCALE
}

pub fn log_odds_to_prob(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

impl OccupancyGrid {
    /// An all-unknown grid. `origin` is the world pose of the corner of cell `(0, 0)`.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam("grid dimensions must be non-zero".into()));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::InvalidParam(format!("resolution must be > 0, got {resolution}")));
        }
        if !origin.is_finite() {
            return Err(Error::NonFinite("origin"));
        }
        if origin.theta != 0.0 {
            return Err(Error::RotatedOrigin(origin.theta));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![0; width * height],
            occupied_thresh: DEFAULT_OCCUPIED_THRESH,
            free_thresh: DEFAULT_FREE_THRESH,
            occ_raw: logit_raw(DEFAULT_OCCUPIED_THRESH),
            free_raw: logit_raw(DEFAULT_FREE_THRESH),
        })
    }

    pub fn occupied_thresh(&self) -> f64 {
        self.occupied_thresh
    }

    pub fn free_thresh(&self) -> f64 {
        self.free_thresh
    }

    /// Requires `0 < free < occupied < 1`.
    pub fn set_thresholds(&mut self, occupied: f64, free: f64) -> Result<()> {
        if !(free > 0.0 && free < occupied && occupied < 1.0) {
            return Err(Error::InvalidParam(format!(
                "thresholds must satisfy 0 < free ({free}) < occupied ({occupied}) < 1"
            )));
        }
        self.occupied_thresh = occupied;
        self.free_thresh = free;
        self.occ_raw = logit_raw(occupied);
        self.free_raw = logit_raw(free);
        Ok(())
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

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn contains_cell(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    /// Cell containing the world point, or `None` if it falls outside the grid.
    #[inline]
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (fx, fy) = self.world_to_grid(x, y);
        let (ix, iy) = (fx.floor(), fy.floor());
        if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    /// Continuous grid coordinates (cell units, origin at the grid corner).
    #[inline]
    pub fn world_to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin.x) / self.resolution,
            (y - self.origin.y) / self.resolution,
        )
    }

    /// World coordinates of the centre of a cell.
    #[inline]
    pub fn cell_to_world(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    #[inline]
    pub fn raw(&self, idx: usize) -> i16 {
        self.cells[idx]
    }

    pub fn raw_cells(&self) -> &[i16] {
        &self.cells
    }

    /// Adds a fixed-point increment to a cell, clamping to `[L_MIN, L_MAX]`.
    #[inline]
    pub fn add_raw(&mut self, idx: usize, delta: i16) {
        let v = self.cells[idx] as i32 + delta as i32;
        self.cells[idx] = v.clamp(L_MIN as i32, L_MAX as i32) as i16;
    }

    pub fn set_raw(&mut self, idx: usize, value: i16) {
        self.cells[idx] = value.clamp(L_MIN, L_MAX);
    }

    pub fn log_odds(&self, idx: usize) -> f64 {
        self.cells[idx] as f64 / LOG_ODDS_SCALE
    }

    pub fn probability(&self, idx: usize) -> f64 {
        log_odds_to_prob(self.log_odds(idx))
    }

    #[inline]
    pub fn class(&self, idx: usize) -> CellClass {
        let v = self.cells[idx];
        if v == 0 {
            return CellClass::Unknown;
        }
        let v = v as f64;
        if v > self.occ_raw {
            CellClass::Occupied
        } else if v < self.free_raw {
            CellClass::Free
        } else {
            CellClass::Unknown
        }
    }

    pub fn class_at(&self, ix: usize, iy: usize) -> CellClass {
        self.class(self.index(ix, iy))
    }

    /// Sets a cell to the saturated log-odds for its class.
    pub fn set_class(&mut self, idx: usize, class: CellClass) {
        self.cells[idx] = match class {
            CellClass::Occupied => L_MAX,
            CellClass::Free => L_MIN,
            CellClass::Unknown => 0,
        };
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.cells[idx] as f64 > self.occ_raw
    }

    pub fn classes(&self) -> Vec<CellClass> {
        (0..self.cells.len()).map(|i| self.class(i)).collect()
    }

    /// Copy of the grid with every cell replaced by its saturated class value.
    pub fn to_trinary(&self) -> OccupancyGrid {
        let mut out = self.clone();
        for i in 0..self.cells.len() {
            out.set_class(i, self.class(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_to_cell_examples() {
        let g = OccupancyGrid::new(100, 100, 0.01, Pose2D::default()).unwrap();
        assert_eq!(g.world_to_cell(0.005, 0.005), Some((0, 0)));
        assert_eq!(g.world_to_cell(-0.001, 0.0), None);
        assert_eq!(g.world_to_cell(1.0, 0.5), None);

        let g = OccupancyGrid::new(10, 10, 0.01, Pose2D::new(-5.0, -15.56, 0.0)).unwrap();
        assert_eq!(g.world_to_cell(-5.0, -15.56), Some((0, 0)));
    }

    #[test]
    fn cell_center_roundtrip_exhaustive() {
        let g = OccupancyGrid::new(100, 100, 0.01, Pose2D::new(-0.37, 1.21, 0.0)).unwrap();
        for iy in 0..100 {
            for ix in 0..100 {
                let (x, y) = g.cell_to_world(ix, iy);
                assert_eq!(g.world_to_cell(x, y), Some((ix, iy)));
            }
        }
    }

    #[test]
    fn rotated_origin_rejected() {
        assert!(matches!(
            OccupancyGrid::new(3, 3, 0.1, Pose2D::new(0.0, 0.0, 0.2)),
            Err(Error::RotatedOrigin(_))
        ));
        assert!(OccupancyGrid::new(0, 3, 0.1, Pose2D::default()).is_err());
        assert!(OccupancyGrid::new(3, 3, 0.0, Pose2D::default()).is_err());
    }

    #[test]
    fn classification_thresholds() {
        let mut g = OccupancyGrid::new(4, 1, 0.1, Pose2D::default()).unwrap();
        assert_eq!(g.class(0), CellClass::Unknown);
        g.add_raw(0, 85);
        assert_eq!(g.class(0), CellClass::Occupied);
        g.add_raw(1, -40);
        assert_eq!(g.class(1), CellClass::Unknown);
        g.add_raw(1, -400);
        assert_eq!(g.class(1), CellClass::Free);
        g.add_raw(2, 30000);
        assert_eq!(g.raw(2), L_MAX);
        g.add_raw(3, -30000);
        assert_eq!(g.raw(3), L_MIN);
    }
}
