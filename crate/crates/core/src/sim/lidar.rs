use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::grid::OccupancyGrid;
use crate::raycast::GridRay;
use crate::robot::{LaserScan, ScanConfig};

/// Distance along a ray to the entry point of the first occupied cell, or
/// `None` if the ray leaves the grid or reaches `max_range` first.
/// Occupied cells entirely closer than `min_range` are ignored.
pub fn cast_ray(grid: &OccupancyGrid, x: f64, y: f64, bearing: f64, min_range: f64, max_range: f64) -> Option<f64> {
    let res = grid.resolution();
    let start = grid.world_to_grid(x, y);
    let (s, c) = bearing.sin_cos();
    let min_t = min_range / res;
    for cell in GridRay::new(start, (c, s), max_range / res) {
        if !grid.contains_cell(cell.ix, cell.iy) {
            return None;
        }
        if cell.t_exit < min_t {
            continue;
        }
        if grid.is_occupied(grid.index(cell.ix as usize, cell.iy as usize)) {
            let t = cell.t_enter.max(min_t) * res;
            return (t < max_range).then_some(t);
        }
    }
    None
}

/// Simulated range scan from `pose` against a ground-truth grid.
///
/// Unknown cells are transparent. Hits get additive Gaussian noise and are
/// clamped into `[range_min, range_max]`; misses report `range_max`.
pub fn simulate_lidar(pose: Pose2D, truth: &OccupancyGrid, cfg: &ScanConfig, seed: u64) -> Result<LaserScan> {
    if truth.world_to_cell(pose.x, pose.y).is_none() {
        return Err(Error::OutOfBounds { x: pose.x, y: pose.y });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (cfg.noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.noise_sigma).expect("valid sigma"));
    let ranges = (0..cfg.beam_count)
        .map(|i| {
            let bearing = pose.theta + cfg.bearing(i);
            match cast_ray(truth, pose.x, pose.y, bearing, cfg.range_min, cfg.range_max) {
                Some(r) => {
                    let noisy = r + normal.map_or(0.0, |n| n.sample(&mut rng));
                    noisy.clamp(cfg.range_min, cfg.range_max)
                }
                None => cfg.range_max,
            }
        })
        .collect();
    Ok(LaserScan {
        config: cfg.clone(),
        ranges,
        stamp: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellClass;

    fn room(w: usize, h: usize) -> OccupancyGrid {
        let mut g = OccupancyGrid::new(w, h, 0.01, Pose2D::new(-2.5, -2.5, 0.0)).unwrap();
        for i in 0..g.len() {
            g.set_class(i, CellClass::Free);
        }
        g
    }

    fn quiet() -> ScanConfig {
        ScanConfig {
            noise_sigma: 0.0,
            ..ScanConfig::default()
        }
    }

    #[test]
    fn empty_map_all_sentinel() {
        let g = room(1000, 1000);
        let scan = simulate_lidar(Pose2D::new(0.0, 0.0, 0.0), &g, &ScanConfig::default(), 1).unwrap();
        assert_eq!(scan.ranges.len(), 360);
        assert!(scan.ranges.iter().all(|r| *r == 8.0));
    }

    #[test]
    fn wall_ahead_and_behind() {
        let mut g = room(500, 500);
        // wall column at x = 2.0
        let (wx, _) = g.world_to_cell(2.0, 0.0).unwrap();
        for iy in 0..g.height() {
            let i = g.index(wx, iy);
            g.set_class(i, CellClass::Occupied);
        }
        let cfg = quiet();
        let scan = simulate_lidar(Pose2D::new(0.0, 0.0, 0.0), &g, &cfg, 1).unwrap();
        // bearing 0 is beam 180 in a [-π, π) scan
        let fwd = scan.ranges[180];
        assert!((fwd - 2.0).abs() <= 0.01, "{fwd}");
        assert_eq!(scan.ranges[0], 8.0);

        // facing away: the wall is behind
        let scan = simulate_lidar(Pose2D::new(0.0, 0.0, std::f64::consts::PI), &g, &cfg, 1).unwrap();
        assert_eq!(scan.ranges[180], 8.0);
        assert!((scan.ranges[0] - 2.0).abs() <= 0.01);
    }

    #[test]
    fn ranges_stay_valid_with_noise() {
        let mut g = room(400, 400);
        for iy in 0..400 {
            let i = g.index(300, iy);
            g.set_class(i, CellClass::Occupied);
            let i = g.index(110, iy);
            g.set_class(i, CellClass::Occupied);
        }
        let cfg = ScanConfig {
            noise_sigma: 0.5,
            ..ScanConfig::default()
        };
        for seed in 0..20 {
            let scan = simulate_lidar(Pose2D::new(-1.2, 0.1, 0.3), &g, &cfg, seed).unwrap();
            assert!(scan.ranges.iter().all(|r| *r >= cfg.range_min && *r <= cfg.range_max));
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let g = room(100, 100);
        assert!(simulate_lidar(Pose2D::new(10.0, 0.0, 0.0), &g, &quiet(), 0).is_err());
    }
}
