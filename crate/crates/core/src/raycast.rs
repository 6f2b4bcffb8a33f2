//! Integer grid traversal visiting every cell a ray crosses, in order.

/// One visited cell and the ray parameter interval spent inside it.
/// Distances are in the same units as the grid coordinates fed to [`GridRay::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCell {
    pub ix: i64,
    pub iy: i64,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Iterator over the cells crossed by a ray from `start` along `dir` up to `max_t`.
///
/// Coordinates are continuous grid coordinates (cell `(i, j)` spans
/// `[i, i+1) × [j, j+1)`). `dir` must be a unit vector for `t` to be a
/// distance.
#[derive(Debug, Clone)]
pub struct GridRay {
    ix: i64,
    iy: i64,
    step_x: i64,
    step_y: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
    max_t: f64,
    done: bool,
}

impl GridRay {
    pub fn new(start: (f64, f64), dir: (f64, f64), max_t: f64) -> Self {
        let (sx, sy) = start;
        let (dx, dy) = dir;
        let ix = sx.floor() as i64;
        let iy = sy.floor() as i64;

        let (step_x, t_max_x, t_delta_x) = axis_setup(sx, ix, dx);
        let (step_y, t_max_y, t_delta_y) = axis_setup(sy, iy, dy);

        Self {
            ix,
            iy,
            step_x,
            step_y,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
            max_t,
            done: !(max_t >= 0.0),
        }
    }
}

fn axis_setup(s: f64, i: i64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, (i as f64 + 1.0 - s) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, (s - i as f64) / -d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

impl Iterator for GridRay {
    type Item = RayCell;

    fn next(&mut self) -> Option<RayCell> {
        if self.done {
            return None;
        }
        let t_enter = self.t;
        let (ix, iy) = (self.ix, self.iy);
        let t_exit;
        if self.t_max_x < self.t_max_y {
            t_exit = self.t_max_x;
            self.ix += self.step_x;
            self.t_max_x += self.t_delta_x;
        } else {
            t_exit = self.t_max_y;
            self.iy += self.step_y;
            self.t_max_y += self.t_delta_y;
        }
        if t_exit >= self.max_t {
            self.done = true;
        }
        self.t = t_exit;
        Some(RayCell {
            ix,
            iy,
            t_enter,
            t_exit: t_exit.min(self.max_t),
        })
    }
}
