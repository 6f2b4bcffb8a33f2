//! Built-in demo environment: a 10 m × 10 m walled room split by an interior
//! wall with a doorway, plus two boxes that break the room's symmetry.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::Pose2D;
use crate::grid::{CellClass, OccupancyGrid};

pub const ROOM_SIZE: f64 = 10.0;
pub const RESOLUTION: f64 = 0.01;
pub const WALL_THICKNESS: f64 = 0.1;
/// Interior wall spans x ∈ [4.95, 5.05].
pub const DIVIDER_X: (f64, f64) = (4.95, 5.05);
/// Doorway through the interior wall, y range.
pub const DOORWAY_Y: (f64, f64) = (4.5, 5.5);

/// Axis-aligned solid rectangle `(x0, y0, x1, y1)`.
type Rect = (f64, f64, f64, f64);

const BOXES: [Rect; 2] = [(1.0, 7.6, 2.0, 8.4), (7.0, 8.2, 8.2, 8.8)];

#[derive(Debug, Clone)]
pub struct DemoWorld {
    grid: OccupancyGrid,
}

/// Fixed start and goal used by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Course {
    pub id: &'static str,
    pub start: Pose2D,
    pub goal: Pose2D,
}

pub const COURSES: [&str; 1] = ["doorway"];

impl DemoWorld {
    pub fn new() -> Self {
        let cells = (ROOM_SIZE / RESOLUTION).round() as usize;
        let mut grid = OccupancyGrid::new(cells, cells, RESOLUTION, Pose2D::default())
            .expect("static world dimensions are valid");
        let t = WALL_THICKNESS;
        let mut solids: Vec<Rect> = vec![
            (0.0, 0.0, ROOM_SIZE, t),
            (0.0, ROOM_SIZE - t, ROOM_SIZE, ROOM_SIZE),
            (0.0, 0.0, t, ROOM_SIZE),
            (ROOM_SIZE - t, 0.0, ROOM_SIZE, ROOM_SIZE),
            (DIVIDER_X.0, 0.0, DIVIDER_X.1, DOORWAY_Y.0),
            (DIVIDER_X.0, DOORWAY_Y.1, DIVIDER_X.1, ROOM_SIZE),
        ];
        solids.extend_from_slice(&BOXES);
        for iy in 0..cells {
            for ix in 0..cells {
                let (x, y) = grid.cell_to_world(ix, iy);
                let solid = solids
                    .iter()
                    .any(|&(x0, y0, x1, y1)| x >= x0 && x < x1 && y >= y0 && y < y1);
                let idx = grid.index(ix, iy);
                grid.set_class(idx, if solid { CellClass::Occupied } else { CellClass::Free });
            }
        }
        Self { grid }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn into_grid(self) -> OccupancyGrid {
        self.grid
    }

    /// Default spawn pose for interactive sessions.
    pub fn spawn() -> Pose2D {
        Pose2D::new(2.0, 2.0, FRAC_PI_2)
    }

    pub fn course(id: &str) -> Option<Course> {
        match id {
            "doorway" => Some(Course {
                id: "doorway",
                start: Pose2D::new(1.5, 1.5, FRAC_PI_2),
                goal: Pose2D::new(8.5, 5.0, 0.0),
            }),
            _ => None,
        }
    }
}

impl Default for DemoWorld {
    fn default() -> Self {
        Self::new()
    }
}
