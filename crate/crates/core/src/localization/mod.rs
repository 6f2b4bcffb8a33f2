//! Monte Carlo localization on a static map.

mod filter;

pub use filter::Amcl;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distance::DistanceField;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2D};
use crate::grid::OccupancyGrid;
use crate::robot::LaserScan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn from_particles(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn count(&self) -> usize {
        self.particles.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Every `n`-th particle pose such that at most `limit` are returned.
    pub fn downsample(&self, limit: usize) -> Vec<Pose2D> {
        if limit == 0 || self.particles.is_empty() {
            return Vec::new();
        }
        let stride = self.particles.len().div_ceil(limit);
        self.particles.iter().step_by(stride).map(|p| p.pose).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodParams {
    pub z_hit: f64,
    pub z_rand: f64,
    pub sigma_hit: f64,
    pub max_obstacle_dist: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self {
            z_hit: 0.95,
            z_rand: 0.05,
            sigma_hit: 0.05,
            max_obstacle_dist: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmclConfig {
    pub min_particles: usize,
    pub update_min_d: f64,
    pub update_min_a: f64,
    /// Diff-corrected motion noise: rot-from-rot, rot-from-trans,
    /// trans-from-trans, trans-from-rot.
    pub alphas: [f64; 4],
    pub likelihood: LikelihoodParams,
    pub beam_stride: usize,
    /// Resample after every `resample_interval`-th sensor update.
    pub resample_interval: usize,
}

impl Default for AmclConfig {
    fn default() -> Self {
        Self {
            min_particles: 500,
            update_min_d: 0.1,
            update_min_a: 0.2,
            alphas: [0.1, 0.2, 0.02, 0.01],
            likelihood: LikelihoodParams::default(),
            beam_stride: 8,
            resample_interval: 1,
        }
    }
}

impl AmclConfig {
    pub fn validate(&self) -> Result<()> {
        let l = &self.likelihood;
        if self.min_particles == 0 {
            return Err(Error::InvalidParam("min_particles must be >= 1".into()));
        }
        if (l.z_hit + l.z_rand - 1.0).abs() > 1e-9 || l.z_hit < 0.0 || l.z_rand < 0.0 {
            return Err(Error::InvalidParam("z_hit + z_rand must equal 1".into()));
        }
        if !(l.sigma_hit > 0.0 && l.max_obstacle_dist > 0.0) {
            return Err(Error::InvalidParam("sigma_hit and max_obstacle_dist must be > 0".into()));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::InvalidParam("odometry alphas must be >= 0".into()));
        }
        if self.beam_stride == 0 || self.resample_interval == 0 {
            return Err(Error::InvalidParam("beam_stride and resample_interval must be >= 1".into()));
        }
        if !(self.update_min_d >= 0.0 && self.update_min_a >= 0.0) {
            return Err(Error::InvalidParam("update gates must be >= 0".into()));
        }
        Ok(())
    }
}

/// Odometry increment decomposed as rotate, translate, rotate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdomDelta {
    pub trans: f64,
    pub rot1: f64,
    pub rot2: f64,
}

impl OdomDelta {
    pub fn between(prev: Pose2D, now: Pose2D) -> Self {
        let (dx, dy) = (now.x - prev.x, now.y - prev.y);
        let trans = dx.hypot(dy);
        // heading of a sub-centimetre move is noise; treat it as a pure turn
        let rot1 = if trans < 0.01 {
            0.0
        } else {
            wrap_angle(dy.atan2(dx) - prev.theta)
        };
        let rot2 = wrap_angle(now.theta - prev.theta - rot1);
        Self { trans, rot1, rot2 }
    }
}

/// Particles drawn around `mean`; draws landing in occupied (or off-map)
/// cells are retried a few times, then kept.
pub fn init_gaussian(map: &OccupancyGrid, mean: Pose2D, std: (f64, f64, f64), cfg: &AmclConfig, seed: u64) -> Result<ParticleSet> {
    const RETRIES: usize = 20;
    if map.world_to_cell(mean.x, mean.y).is_none() {
        return Err(Error::OutOfBounds { x: mean.x, y: mean.y });
    }
    let (sx, sy, sth) = std;
    if !(sx >= 0.0 && sy >= 0.0 && sth >= 0.0) {
        return Err(Error::InvalidParam("initial std must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.min_particles;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| {
            let mut pose = mean;
            for _ in 0..RETRIES {
                pose = Pose2D::new(
                    mean.x + sx * unit.sample(&mut rng),
                    mean.y + sy * unit.sample(&mut rng),
                    mean.theta + sth * unit.sample(&mut rng),
                );
                let free = map
                    .world_to_cell(pose.x, pose.y)
                    .is_some_and(|(ix, iy)| !map.is_occupied(map.index(ix, iy)));
                if free {
                    break;
                }
            }
            Particle { pose, weight: w }
        })
        .collect();
    Ok(ParticleSet { particles })
}

/// Filter updates are gated on accumulated motion; both thresholds inclusive.
pub fn should_update(d: f64, a: f64, cfg: &AmclConfig) -> bool {
    d >= cfg.update_min_d || a >= cfg.update_min_a
}

fn sample_std(rng: &mut ChaCha8Rng, var: f64) -> f64 {
    if var > 0.0 {
        Normal::new(0.0, var.sqrt()).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Diff-corrected odometry motion model: each particle follows the
/// rotate-translate-rotate increment with independently perturbed parts.
pub fn motion_update(ps: &ParticleSet, delta: OdomDelta, cfg: &AmclConfig, seed: u64) -> ParticleSet {
    let [a1, a2, a3, a4] = cfg.alphas;
    let fold = |r: f64| wrap_angle(r).abs().min(wrap_angle(r - PI).abs());
    let rot1_noise = fold(delta.rot1);
    let rot2_noise = fold(delta.rot2);
    let t2 = delta.trans * delta.trans;
    let var_rot1 = a1 * rot1_noise * rot1_noise + a2 * t2;
    let var_trans = a3 * t2 + a4 * (rot1_noise * rot1_noise + rot2_noise * rot2_noise);
    let var_rot2 = a1 * rot2_noise * rot2_noise + a2 * t2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let particles = ps
        .particles
        .iter()
        .map(|p| {
            let rot1 = delta.rot1 - sample_std(&mut rng, var_rot1);
            let trans = delta.trans - sample_std(&mut rng, var_trans);
            let rot2 = delta.rot2 - sample_std(&mut rng, var_rot2);
            let heading = p.pose.theta + rot1;
            Particle {
                pose: Pose2D::new(
                    p.pose.x + trans * heading.cos(),
                    p.pose.y + trans * heading.sin(),
                    p.pose.theta + rot1 + rot2,
                ),
                weight: p.weight,
            }
        })
        .collect();
    ParticleSet { particles }
}

/// Map plus its obstacle distance field, ready for scan scoring.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    origin: Pose2D,
    resolution: f64,
    field: DistanceField,
}

impl LikelihoodField {
    pub fn distance_at(&self, x: f64, y: f64) -> f64 {
        let gx = ((x - self.origin.x) / self.resolution).floor() as i64;
        let gy = ((y - self.origin.y) / self.resolution).floor() as i64;
        self.field.get_checked(gx, gy)
    }

    pub fn field(&self) -> &DistanceField {
        &self.field
    }
}

/// Distance from every cell to its nearest occupied cell, capped at
/// `max_obstacle_dist`.
pub fn precompute_distance_field(map: &OccupancyGrid, max_obstacle_dist: f64) -> LikelihoodField {
    LikelihoodField {
        origin: map.origin(),
        resolution: map.resolution(),
        field: DistanceField::from_grid(map, max_obstacle_dist),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorOutcome {
    pub particles: ParticleSet,
    /// All weights vanished and were reset to uniform.
    pub diverged: bool,
}

/// Log-likelihood of a scan taken from `pose` under the likelihood-field model.
pub fn scan_log_likelihood(pose: Pose2D, scan: &LaserScan, field: &LikelihoodField, cfg: &AmclConfig) -> f64 {
    let l = &cfg.likelihood;
    let norm = 1.0 / (l.sigma_hit * (2.0 * PI).sqrt());
    let rand_term = l.z_rand / scan.config.range_max;
    let two_var = 2.0 * l.sigma_hit * l.sigma_hit;
    (0..scan.ranges.len())
        .step_by(cfg.beam_stride)
        .filter(|&i| !scan.is_sentinel(i))
        .map(|i| {
            let r = scan.ranges[i];
            let bearing = pose.theta + scan.config.bearing(i);
            let ex = pose.x + r * bearing.cos();
            let ey = pose.y + r * bearing.sin();
            let d = field.distance_at(ex, ey);
            (l.z_hit * norm * (-d * d / two_var).exp() + rand_term).ln()
        })
        .sum()
}

/// Reweights particles by the scan likelihood and renormalises.
///
/// Products are formed in log space; if every weight is zero (or not
/// finite) afterwards the set is reset to uniform and flagged as diverged.
pub fn sensor_update(ps: &ParticleSet, scan: &LaserScan, field: &LikelihoodField, cfg: &AmclConfig) -> SensorOutcome {
    let logs: Vec<f64> = ps
        .particles
        .iter()
        .map(|p| p.weight.ln() + scan_log_likelihood(p.pose, scan, field, cfg))
        .collect();
    let max = logs.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let n = ps.particles.len();
    if !max.is_finite() {
        let w = 1.0 / n as f64;
        let particles = ps.particles.iter().map(|p| Particle { pose: p.pose, weight: w }).collect();
        return SensorOutcome {
            particles: ParticleSet { particles },
            diverged: true,
        };
    }
    let raw: Vec<f64> = logs
        .iter()
        .map(|l| if l.is_finite() { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    let particles = ps
        .particles
        .iter()
        .zip(&raw)
        .map(|(p, w)| Particle {
            pose: p.pose,
            weight: w / total,
        })
        .collect();
    SensorOutcome {
        particles: ParticleSet { particles },
        diverged: false,
    }
}

/// Low-variance (systematic) resampling: one uniform offset, `n` evenly
/// spaced pointers through the cumulative weights.
pub fn resample(ps: &ParticleSet, seed: u64) -> Result<ParticleSet> {
    let n = ps.particles.len();
    let total = ps.total_weight();
    if n == 0 || !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidParam("cannot resample particles with zero total weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = total / n as f64;
    let offset = rng.random::<f64>() * step;
    let w = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    let mut cumulative = ps.particles[0].weight;
    for m in 0..n {
        let u = offset + m as f64 * step;
        while u > cumulative && i + 1 < n {
            i += 1;
            cumulative += ps.particles[i].weight;
        }
        out.push(Particle {
            pose: ps.particles[i].pose,
            weight: w,
        });
    }
    Ok(ParticleSet { particles: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PoseEstimate {
    pub pose: Pose2D,
    pub cov_xx: f64,
    pub cov_xy: f64,
    pub cov_yy: f64,
    /// Circular variance of the heading, `1 - |mean resultant|`, in [0, 1].
    pub var_theta: f64,
}

/// Weighted mean position and circular mean heading.
pub fn estimate_pose(ps: &ParticleSet) -> PoseEstimate {
    let total = ps.total_weight();
    if ps.particles.is_empty() || !(total > 0.0) {
        return PoseEstimate::default();
    }
    let (mut mx, mut my, mut ss, mut sc) = (0.0, 0.0, 0.0, 0.0);
    for p in &ps.particles {
        let w = p.weight / total;
        mx += w * p.pose.x;
        my += w * p.pose.y;
        ss += w * p.pose.theta.sin();
        sc += w * p.pose.theta.cos();
    }
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for p in &ps.particles {
        let w = p.weight / total;
        let (dx, dy) = (p.pose.x - mx, p.pose.y - my);
        cxx += w * dx * dx;
        cxy += w * dx * dy;
        cyy += w * dy * dy;
    }
    let resultant = ss.hypot(sc).min(1.0);
    PoseEstimate {
        pose: Pose2D::new(mx, my, ss.atan2(sc)),
        cov_xx: cxx,
        cov_xy: cxy,
        cov_yy: cyy,
        var_theta: 1.0 - resultant,
    }
}
