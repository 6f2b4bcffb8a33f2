//! 8-connected A* over a costmap.
//!
//! Edge costs are integers so that planner and oracle costs compare exactly:
//! moving into a cell of cost `c` costs `len · (64 + c)`, with `len` the step
//! length in millionths of a cell (1_000_000 straight, 1_414_214 diagonal).
//! That is the step length · (1 + c/64) model scaled by 64·10⁶.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::navigation::costmap::{Costmap, INSCRIBED, NO_INFORMATION};

pub const STRAIGHT: u64 = 1_000_000;
pub const DIAGONAL: u64 = 1_414_214;
pub const COST_BASE: u64 = 64;

pub type Path = Vec<Pose2D>;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPlan {
    pub poses: Path,
    /// Total integer edge cost of the cell path.
    pub cost: u64,
}

/// Cells the planner may enter. Unknown space is allowed at its (maximal) cost.
#[inline]
pub fn traversable(c: u8) -> bool {
    c < INSCRIBED || c == NO_INFORMATION
}

#[inline]
pub fn edge_cost(len: u64, dest_cost: u8) -> u64 {
    len * (COST_BASE + dest_cost as u64)
}

pub const NEIGHBORS: [(i64, i64, u64); 8] = [
    (1, 0, STRAIGHT),
    (-1, 0, STRAIGHT),
    (0, 1, STRAIGHT),
    (0, -1, STRAIGHT),
    (1, 1, DIAGONAL),
    (1, -1, DIAGONAL),
    (-1, 1, DIAGONAL),
    (-1, -1, DIAGONAL),
];

/// Octile distance at the minimum per-step cost: exactly the cheapest
/// possible cost-to-go, so admissible and consistent.
#[inline]
fn heuristic(ax: usize, ay: usize, bx: usize, by: usize) -> u64 {
    let dx = ax.abs_diff(bx) as u64;
    let dy = ay.abs_diff(by) as u64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    COST_BASE * (DIAGONAL * lo + STRAIGHT * (hi - lo))
}

/// Optimal cell path between two cells; `None` if the goal is unreachable.
pub fn astar_cells(cm: &Costmap, start: (usize, usize), goal: (usize, usize)) -> Option<(Vec<(usize, usize)>, u64)> {
    let w = cm.width();
    let h = cm.height();
    let n = w * h;
    let s = cm.index(start.0, start.1);
    let g = cm.index(goal.0, goal.1);
    let mut dist = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    dist[s] = 0;
    open.push(Reverse((heuristic(start.0, start.1, goal.0, goal.1), s)));
    while let Some(Reverse((_, cur))) = open.pop() {
        if closed[cur] {
            continue;
        }
        if cur == g {
            let mut cells = vec![(cur % w, cur / w)];
            let mut c = cur;
            while parent[c] != usize::MAX {
                c = parent[c];
                cells.push((c % w, c / w));
            }
            cells.reverse();
            return Some((cells, dist[g]));
        }
        closed[cur] = true;
        let (cx, cy) = ((cur % w) as i64, (cur / w) as i64);
        for (dx, dy, len) in NEIGHBORS {
            let (nx, ny) = (cx + dx, cy + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let ni = ny as usize * w + nx as usize;
            let c = cm.costs()[ni];
            if closed[ni] || !traversable(c) {
                continue;
            }
            let nd = dist[cur] + edge_cost(len, c);
            if nd < dist[ni] {
                dist[ni] = nd;
                parent[ni] = cur;
                open.push(Reverse((nd + heuristic(nx as usize, ny as usize, goal.0, goal.1), ni)));
            }
        }
    }
    None
}

/// Plans from `start` to `goal`. The returned path runs through cell centres,
/// each pose heading toward the next; the last pose is `goal` itself.
pub fn plan_global(cm: &Costmap, start: Pose2D, goal: Pose2D) -> Result<GlobalPlan> {
    let s = cm
        .world_to_cell(start.x, start.y)
        .ok_or_else(|| Error::Planning(format!("start ({:.3}, {:.3}) is off the map", start.x, start.y)))?;
    let g = cm
        .world_to_cell(goal.x, goal.y)
        .ok_or_else(|| Error::Planning(format!("goal ({:.3}, {:.3}) is off the map", goal.x, goal.y)))?;
    if !traversable(cm.get(g.0, g.1)) {
        return Err(Error::Planning(format!(
            "goal ({:.3}, {:.3}) lies in a lethal cell",
            goal.x, goal.y
        )));
    }
    let (cells, cost) = astar_cells(cm, s, g)
        .ok_or_else(|| Error::Planning(format!("goal ({:.3}, {:.3}) is unreachable", goal.x, goal.y)))?;
    let mut poses: Path = Vec::with_capacity(cells.len());
    for (i, &(ix, iy)) in cells.iter().enumerate() {
        if i + 1 == cells.len() {
            poses.push(goal);
            break;
        }
        let (x, y) = cm.cell_to_world(ix, iy);
        let (nx, ny) = cm.cell_to_world(cells[i + 1].0, cells[i + 1].1);
        poses.push(Pose2D::new(x, y, (ny - y).atan2(nx - x)));
    }
    Ok(GlobalPlan { poses, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigation::costmap::LETHAL;

    fn costmap(w: usize, h: usize, cost: Vec<u8>) -> Costmap {
        Costmap::from_costs(w, h, 0.1, Pose2D::default(), cost).unwrap()
    }

    #[test]
    fn start_equals_goal() {
        let cm = costmap(10, 10, vec![0; 100]);
        let goal = Pose2D::new(0.55, 0.55, 1.0);
        let plan = plan_global(&cm, Pose2D::new(0.55, 0.55, 0.0), goal).unwrap();
        assert_eq!(plan.poses, vec![goal]);
        assert_eq!(plan.cost, 0);
    }

    #[test]
    fn free_diagonal_costs() {
        let cm = costmap(50, 50, vec![0; 2500]);
        let plan = plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(4.95, 4.95, 0.0)).unwrap();
        assert_eq!(plan.cost, 49 * DIAGONAL * 64);
        assert_eq!(plan.poses.len(), 50);
        let plan = plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(4.95, 0.05, 0.0)).unwrap();
        assert_eq!(plan.cost, 49 * STRAIGHT * 64);
        assert!(plan.poses[..49].iter().all(|p| p.theta == 0.0));
    }

    #[test]
    fn lethal_goal_and_enclosed_goal_fail() {
        let mut cost = vec![0u8; 100];
        cost[55] = LETHAL;
        let cm = costmap(10, 10, cost);
        assert!(plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(0.55, 0.55, 0.0)).is_err());

        let mut cost = vec![0u8; 100];
        for (x, y) in [(4, 4), (5, 4), (6, 4), (4, 5), (6, 5), (4, 6), (5, 6), (6, 6)] {
            cost[y * 10 + x] = LETHAL;
        }
        let cm = costmap(10, 10, cost);
        let err = plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(0.55, 0.55, 0.0)).unwrap_err();
        assert!(err.to_string().contains("unreachable"));
    }

    #[test]
    fn detours_around_wall() {
        let mut cost = vec![0u8; 400];
        for y in 0..15 {
            cost[y * 20 + 10] = LETHAL;
        }
        let cm = costmap(20, 20, cost);
        let plan = plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(1.95, 0.05, 0.0)).unwrap();
        for p in &plan.poses {
            assert!(traversable(cm.cost_at(p.x, p.y).unwrap()));
        }
        assert!(plan.poses.iter().any(|p| p.y > 1.5));
        for w in plan.poses.windows(2) {
            assert!(w[0].distance(&w[1]) <= 0.1 * 2f64.sqrt() + 1e-9);
        }
    }

    #[test]
    fn unknown_is_traversable_but_penalised() {
        let mut cost = vec![0u8; 30];
        for x in 0..10 {
            cost[10 + x] = NO_INFORMATION;
        }
        let cm = costmap(10, 3, cost);
        // only route from row 0 to row 2 crosses the unknown row
        let plan = plan_global(&cm, Pose2D::new(0.05, 0.05, 0.0), Pose2D::new(0.05, 0.25, 0.0)).unwrap();
        assert_eq!(plan.cost, 64 * STRAIGHT + (64 + 255) * STRAIGHT);
    }
}
