//! Planar poses, body velocities and small angle/inertia helpers.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into `(-π, π]`.
///
/// Non-finite input yields an error rather than a NaN that would silently
/// poison every pose downstream.
pub fn normalize_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_angle(a))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can land exactly on -π after the shift; the interval is open there.
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Robot pose in the map (or odom) frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ⊕ other`: applies `other` expressed in this pose's frame.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// `self⁻¹ ⊕ other`: `other` expressed in this pose's frame.
    pub fn between(&self, other: &Pose2D) -> Pose2D {
        self.inverse().compose(other)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Body-frame velocity command. There is no lateral component: a
/// differential-drive base cannot slide sideways.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2D {
    pub v: f64,
    pub w: f64,
}

impl Twist2D {
    pub const ZERO: Twist2D = Twist2D { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0.0 && self.w == 0.0
    }
}

/// Angular rates of the right and left drive wheels, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub w_right: f64,
    pub w_left: f64,
}

impl WheelSpeeds {
    pub fn new(w_right: f64, w_left: f64) -> Self {
        Self { w_right, w_left }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InertiaDiag {
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
}

/// Diagonal inertia of a solid cylinder about its centre (axis along z).
pub fn cylinder_inertia(m: f64, r: f64, h: f64) -> Result<InertiaDiag> {
    for (name, v) in [("mass", m), ("radius", r), ("height", h)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
        if v < 0.0 {
            return Err(Error::InvalidParam(format!("{name} must be non-negative, got {v}")));
        }
    }
    let side = m * (3.0 * r * r + h * h) / 12.0;
    Ok(InertiaDiag {
        ixx: side,
        iyy: side,
        izz: m * r * r / 2.0,
    })
}
