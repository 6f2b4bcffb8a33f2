use crate::distance::squared_edt;
use crate::geometry::Pose2D;
use crate::grid::OccupancyGrid;
use crate::robot::LaserScan;

/// Translation step of the first pass, in cells.
const FIRST_STEP_CELLS: f64 = 3.0;
/// Rotation step of the first pass, radians.
const FIRST_STEP_RAD: f64 = 0.05;
const PASSES: usize = 3;
const MAX_MOVES_PER_PASS: usize = 60;
/// Endpoint likelihood kernel width, in cells.
const SIGMA_CELLS: f64 = 3.0;

/// Endpoint likelihood lookup over a window of the grid.
struct Field {
    x0: i64,
    y0: i64,
    w: usize,
    h: usize,
    sq: Vec<f64>,
}

impl Field {
    #[inline]
    fn likelihood(&self, gx: f64, gy: f64) -> f64 {
        let ix = gx.floor() as i64 - self.x0;
        let iy = gy.floor() as i64 - self.y0;
        if ix < 0 || iy < 0 || ix as usize >= self.w || iy as usize >= self.h {
            return 0.0;
        }
        let d2 = self.sq[iy as usize * self.w + ix as usize];
        (-d2 / (2.0 * SIGMA_CELLS * SIGMA_CELLS)).exp()
    }
}

fn score(field: &Field, grid: &OccupancyGrid, pose: Pose2D, beams: &[(f64, f64)]) -> f64 {
    let (gx, gy) = grid.world_to_grid(pose.x, pose.y);
    let res = grid.resolution();
    let total: f64 = beams
        .iter()
        .map(|&(bearing, range)| {
            let (s, c) = (pose.theta + bearing).sin_cos();
            field.likelihood(gx + c * range / res, gy + s * range / res)
        })
        .sum();
    total / beams.len() as f64
}

/// Refines `initial` by hill-climbing over `(x, y, θ)` so that the scan's
/// returning beams land on or near occupied cells.
///
/// Three passes with halving step sizes; a move is taken only if it
/// improves the score, so the result never scores worse than `initial`.
/// Returns the pose and its mean per-beam endpoint likelihood in `[0, 1]`.
pub fn scan_match(grid: &OccupancyGrid, initial: Pose2D, scan: &LaserScan) -> (Pose2D, f64) {
    let beams: Vec<(f64, f64)> = scan.hits().collect();
    if beams.is_empty() {
        return (initial, 0.0);
    }
    let Some(field) = local_field(grid, initial, scan) else {
        return (initial, 0.0);
    };

    let res = grid.resolution();
    let mut best = initial;
    let mut best_score = score(&field, grid, best, &beams);
    let mut step_xy = FIRST_STEP_CELLS * res;
    let mut step_th = FIRST_STEP_RAD;
    for _ in 0..PASSES {
        for _ in 0..MAX_MOVES_PER_PASS {
            let candidates = [
                (step_xy, 0.0, 0.0),
                (-step_xy, 0.0, 0.0),
                (0.0, step_xy, 0.0),
                (0.0, -step_xy, 0.0),
                (0.0, 0.0, step_th),
                (0.0, 0.0, -step_th),
            ];
            let (cand, cand_score) = candidates
                .iter()
                .map(|&(dx, dy, dth)| {
                    let p = Pose2D::new(best.x + dx, best.y + dy, best.theta + dth);
                    (p, score(&field, grid, p, &beams))
                })
                .fold((best, best_score), |acc, c| if c.1 > acc.1 { c } else { acc });
            if cand_score > best_score {
                best = cand;
                best_score = cand_score;
            } else {
                break;
            }
        }
        step_xy /= 2.0;
        step_th /= 2.0;
    }
    (best, best_score)
}

/// Squared distance field over the part of the grid the scan can reach from
/// anywhere in the search neighbourhood. `None` if that part has no
/// occupied cells.
fn local_field(grid: &OccupancyGrid, pose: Pose2D, scan: &LaserScan) -> Option<Field> {
    let res = grid.resolution();
    let reach = scan
        .hits()
        .map(|(_, r)| r)
        .fold(0.0, f64::max);
    // endpoints that drift beyond this margin simply score zero
    let margin_cells = 16.0 * FIRST_STEP_CELLS + 4.0 * SIGMA_CELLS;
    let (gx, gy) = grid.world_to_grid(pose.x, pose.y);
    let span = reach / res + margin_cells;
    let x0 = ((gx - span).floor() as i64).max(0);
    let y0 = ((gy - span).floor() as i64).max(0);
    let x1 = ((gx + span).ceil() as i64).min(grid.width() as i64);
    let y1 = ((gy + span).ceil() as i64).min(grid.height() as i64);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let at = |i: usize| grid.index(x0 as usize + i % w, y0 as usize + i / w);
    if !(0..w * h).any(|i| grid.is_occupied(at(i))) {
        return None;
    }
    let sq = squared_edt(w, h, |i| grid.is_occupied(at(i)));
    Some(Field { x0, y0, w, h, sq })
}
