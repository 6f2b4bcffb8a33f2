use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2D};
use crate::navigation::local::PlannerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalFrame {
    Map,
    #[default]
    Robot,
}

/// A navigation goal. Orientation is a yaw-only quaternion; when `quat_z` is
/// absent the sign of z is taken as non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavGoal {
    #[serde(default)]
    pub frame: GoalFrame,
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    pub quat_w: f64,
    #[serde(default)]
    pub quat_z: Option<f64>,
}

impl NavGoal {
    pub fn robot(x: f64, quat_w: f64) -> Self {
        Self {
            frame: GoalFrame::Robot,
            x,
            y: 0.0,
            quat_w,
            quat_z: None,
        }
    }

    /// Map-frame goal with an arbitrary heading.
    pub fn map(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            frame: GoalFrame::Map,
            x,
            y,
            quat_w: (yaw / 2.0).cos(),
            quat_z: Some((yaw / 2.0).sin()),
        }
    }

    pub fn yaw(&self) -> Result<f64> {
        quat_to_yaw(self.quat_w, self.quat_z)
    }

    /// Goal pose in the map frame, given the robot pose at send time.
    pub fn to_map(&self, robot_pose: Pose2D) -> Result<Pose2D> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::NonFinite("goal position"));
        }
        let local = Pose2D::new(self.x, self.y, self.yaw()?);
        Ok(match self.frame {
            GoalFrame::Map => local,
            GoalFrame::Robot => robot_pose.compose(&local),
        })
    }
}

/// yaw = 2·atan2(z, w), with z = √(1 − w²) when only w is given.
pub fn quat_to_yaw(w: f64, z: Option<f64>) -> Result<f64> {
    if !(-1.0..=1.0).contains(&w) {
        return Err(Error::InvalidParam(format!("quat_w must lie in [-1, 1], got {w}")));
    }
    let z = match z {
        Some(z) if z.is_finite() => z,
        Some(_) => return Err(Error::NonFinite("quat_z")),
        None => (1.0 - w * w).sqrt(),
    };
    Ok(wrap_angle(2.0 * z.atan2(w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalState {
    Pending,
    Active,
    Succeeded,
    Aborted,
    Preempted,
}

impl GoalState {
    /// Wire name, as serialized.
    pub fn name(self) -> &'static str {
        match self {
            GoalState::Pending => "pending",
            GoalState::Active => "active",
            GoalState::Succeeded => "succeeded",
            GoalState::Aborted => "aborted",
            GoalState::Preempted => "preempted",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, GoalState::Succeeded | GoalState::Aborted | GoalState::Preempted)
    }

    pub fn can_transition(self, to: GoalState) -> bool {
        matches!(
            (self, to),
            (GoalState::Pending, GoalState::Active)
                | (GoalState::Pending, GoalState::Preempted)
                | (GoalState::Active, GoalState::Succeeded)
                | (GoalState::Active, GoalState::Aborted)
                | (GoalState::Active, GoalState::Preempted)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalStatus {
    pub state: GoalState,
    pub feedback: Pose2D,
    pub elapsed: f64,
}

pub type GoalId = u64;

/// Shared goal-id allocator, so ids can be handed out before a goal reaches
/// the controller.
#[derive(Debug, Clone, Default)]
pub struct GoalIds(Arc<AtomicU64>);

impl GoalIds {
    pub fn next(&self) -> GoalId {
        self.0.fetch_add(1, Ordering::Relaxed) + 1
    }
}

pub fn goal_reached(pose: Pose2D, goal: Pose2D, cfg: &PlannerConfig) -> bool {
    let d = (pose.x - goal.x).hypot(pose.y - goal.y);
    d <= cfg.xy_goal_tolerance && wrap_angle(goal.theta - pose.theta).abs() <= cfg.yaw_goal_tolerance
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn quaternion_conventions() {
        assert_eq!(quat_to_yaw(1.0, None).unwrap(), 0.0);
        assert!((quat_to_yaw(0.0, None).unwrap() - PI).abs() < 1e-15);
        assert!((quat_to_yaw((PI / 4.0).cos(), None).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!(quat_to_yaw(2.0, None).is_err());
        assert!(quat_to_yaw(-1.5, None).is_err());
        for yaw in [-3.0, -FRAC_PI_2, -0.1, 0.0, 0.7, 3.1] {
            assert!((NavGoal::map(0.0, 0.0, yaw).yaw().unwrap() - yaw).abs() < 1e-12);
        }
    }

    #[test]
    fn robot_frame_transform() {
        let g = NavGoal::robot(1.0, 1.0).to_map(Pose2D::new(2.0, 3.0, 0.0)).unwrap();
        assert_eq!(g, Pose2D::new(3.0, 3.0, 0.0));
        let g = NavGoal::robot(1.0, 1.0).to_map(Pose2D::new(2.0, 3.0, FRAC_PI_2)).unwrap();
        assert!((g.x - 2.0).abs() < 1e-15 && (g.y - 4.0).abs() < 1e-15);
        let g = NavGoal::map(5.0, 6.0, 0.5).to_map(Pose2D::new(2.0, 3.0, 1.0)).unwrap();
        assert!((g.x - 5.0).abs() < 1e-15 && (g.theta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reached_examples() {
        let cfg = PlannerConfig::default();
        let g = Pose2D::new(1.0, 1.0, 0.0);
        assert!(goal_reached(g, g, &cfg));
        assert!(!goal_reached(Pose2D::new(2.01, 1.0, 0.0), g, &cfg));
        assert!(goal_reached(Pose2D::new(1.5, 1.0, 0.9), g, &cfg));
        assert!(!goal_reached(Pose2D::new(1.0, 1.0, 1.2), g, &cfg));
        assert!(goal_reached(Pose2D::new(1.0, 1.0, -3.0), Pose2D::new(1.0, 1.0, 3.0), &cfg));
    }

    #[test]
    fn transitions() {
        use GoalState::*;
        assert!(Pending.can_transition(Active));
        assert!(Active.can_transition(Succeeded));
        for t in [Succeeded, Aborted, Preempted] {
            assert!(t.is_terminal());
            for to in [Pending, Active, Succeeded, Aborted, Preempted] {
                assert!(!t.can_transition(to));
            }
        }
    }

    #[test]
    fn ids_are_shared_and_increasing() {
        let a = GoalIds::default();
        let b = a.clone();
        assert_eq!(a.next(), 1);
        assert_eq!(b.next(), 2);
    }
}
