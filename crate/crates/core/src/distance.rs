//! Exact Euclidean distance transform (Felzenszwalb & Huttenlocher, separable
//! lower envelope of parabolas).

use crate::grid::OccupancyGrid;

const INF: f64 = 1e20;

/// Squared distance (in cells²) from each cell to the nearest seed cell.
/// Cells with no seed anywhere get a very large value.
pub fn squared_edt(width: usize, height: usize, seed: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut d: Vec<f64> = (0..width * height)
        .map(|i| if seed(i) { 0.0 } else { INF })
        .collect();

    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..width {
        for y in 0..height {
            f[y] = d[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            d[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut d[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    d
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let mut s;
        loop {
            let p = v[k];
            s = (fq - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            // z[0] is -inf, so this stops at k == 0 at the latest
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

/// Per-cell metric distance to the nearest occupied cell, capped at `max_dist`.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    max_dist: f64,
    dist: Vec<f32>,
}

impl DistanceField {
    pub fn from_grid(grid: &OccupancyGrid, max_dist: f64) -> Self {
        let sq = squared_edt(grid.width(), grid.height(), |i| grid.is_occupied(i));
        let res = grid.resolution();
        let dist = sq
            .into_iter()
            .map(|s| (s.sqrt() * res).min(max_dist) as f32)
            .collect();
        Self {
            width: grid.width(),
            height: grid.height(),
            resolution: res,
            max_dist,
            dist,
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.dist[iy * self.width + ix] as f64
    }

    #[inline]
    pub fn at_index(&self, idx: usize) -> f64 {
        self.dist[idx] as f64
    }

    /// Distance at an integer cell that may lie off the grid (capped there).
    #[inline]
    pub fn get_checked(&self, ix: i64, iy: i64) -> f64 {
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            return self.max_dist;
        }
        self.get(ix as usize, iy as usize)
    }

    pub fn max_dist(&self) -> f64 {
        self.max_dist
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}
