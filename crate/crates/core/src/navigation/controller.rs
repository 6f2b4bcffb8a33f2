//! Goal state machine driving the global and local planners.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2D, Twist2D};
use crate::navigation::costmap::Costmap;
use crate::navigation::global::{plan_global, Path};
use crate::navigation::goal::{goal_reached, GoalId, GoalIds, GoalState, GoalStatus, NavGoal};
use crate::navigation::local::{plan_local, window_half_cells, PlannerConfig};

#[derive(Debug, Clone)]
struct GoalRecord {
    status: GoalStatus,
    target: Pose2D,
    sent_at: f64,
}

#[derive(Debug, Clone)]
pub struct Navigator {
    costmap: Costmap,
    cfg: PlannerConfig,
    ids: GoalIds,
    goals: BTreeMap<GoalId, GoalRecord>,
    current: Option<GoalId>,
    path: Path,
    progress: usize,
    trajectory: Vec<Pose2D>,
    last_cmd: Twist2D,
    clock: f64,
}

impl Navigator {
    pub fn new(costmap: Costmap, cfg: PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            costmap,
            cfg,
            ids: GoalIds::default(),
            goals: BTreeMap::new(),
            current: None,
            path: Vec::new(),
            progress: 0,
            trajectory: Vec::new(),
            last_cmd: Twist2D::ZERO,
            clock: 0.0,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: PlannerConfig) -> Result<()> {
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn costmap(&self) -> &Costmap {
        &self.costmap
    }

    pub fn set_costmap(&mut self, costmap: Costmap) {
        self.costmap = costmap;
    }

    /// Allocator shared with anything that needs ids before the goal arrives here.
    pub fn ids(&self) -> GoalIds {
        self.ids.clone()
    }

    pub fn current_goal(&self) -> Option<GoalId> {
        self.current
    }

    pub fn status(&self, id: GoalId) -> Option<GoalStatus> {
        self.goals.get(&id).map(|r| r.status)
    }

    pub fn target(&self, id: GoalId) -> Option<Pose2D> {
        self.goals.get(&id).map(|r| r.target)
    }

    /// Remaining global path of the current goal.
    pub fn path(&self) -> &[Pose2D] {
        &self.path[self.progress.min(self.path.len())..]
    }

    /// Rollout chosen on the last tick.
    pub fn trajectory(&self) -> &[Pose2D] {
        &self.trajectory
    }

    pub fn send_goal(&mut self, goal: &NavGoal, robot_pose: Pose2D) -> Result<GoalId> {
        let target = goal.to_map(robot_pose)?;
        let id = self.ids.next();
        self.insert_goal(id, target, robot_pose);
        Ok(id)
    }

    /// Like [`Navigator::send_goal`] with an id taken earlier from [`Navigator::ids`].
    pub fn send_goal_with_id(&mut self, id: GoalId, goal: &NavGoal, robot_pose: Pose2D) -> Result<()> {
        let target = goal.to_map(robot_pose)?;
        self.insert_goal(id, target, robot_pose);
        Ok(())
    }

    fn insert_goal(&mut self, id: GoalId, target: Pose2D, robot_pose: Pose2D) {
        if let Some(prev) = self.current.take() {
            self.set_state(prev, GoalState::Preempted);
        }
        self.goals.insert(
            id,
            GoalRecord {
                status: GoalStatus {
                    state: GoalState::Pending,
                    feedback: robot_pose,
                    elapsed: 0.0,
                },
                target,
                sent_at: self.clock,
            },
        );
        self.current = Some(id);
        self.clear_plan();
    }

    pub fn cancel_goal(&mut self, id: GoalId) -> Result<GoalStatus> {
        let state = self.goals.get(&id).ok_or(Error::UnknownGoal(id))?.status.state;
        if !state.is_terminal() {
            self.set_state(id, GoalState::Preempted);
            if self.current == Some(id) {
                self.current = None;
                self.clear_plan();
                self.last_cmd = Twist2D::ZERO;
            }
        }
        Ok(self.goals[&id].status)
    }

    fn clear_plan(&mut self) {
        self.path.clear();
        self.progress = 0;
        self.trajectory.clear();
    }

    fn set_state(&mut self, id: GoalId, to: GoalState) {
        if let Some(r) = self.goals.get_mut(&id) {
            debug_assert!(r.status.state.can_transition(to), "{:?} -> {:?}", r.status.state, to);
            r.status.state = to;
        }
    }

    fn finish(&mut self, id: GoalId, state: GoalState) -> Twist2D {
        self.set_state(id, state);
        self.current = None;
        self.clear_plan();
        self.last_cmd = Twist2D::ZERO;
        Twist2D::ZERO
    }

    /// One controller step at localized `pose`. `collision` is the simulator's
    /// contact flag for the last step.
    pub fn tick(&mut self, pose: Pose2D, collision: bool, dt: f64) -> Twist2D {
        self.clock += dt;
        let Some(id) = self.current else {
            self.last_cmd = Twist2D::ZERO;
            return Twist2D::ZERO;
        };
        let (state, target) = {
            let r = self.goals.get_mut(&id).expect("current goal is recorded");
            r.status.feedback = pose;
            r.status.elapsed = self.clock - r.sent_at;
            (r.status.state, r.target)
        };

        if state == GoalState::Pending {
            self.set_state(id, GoalState::Active);
            if goal_reached(pose, target, &self.cfg) {
                return self.finish(id, GoalState::Succeeded);
            }
            match plan_global(&self.costmap, pose, target) {
                Ok(plan) => {
                    self.path = plan.poses;
                    self.progress = 0;
                }
                Err(e) => {
                    log::info!("goal {id} aborted: {e}");
                    return self.finish(id, GoalState::Aborted);
                }
            }
        }

        if collision {
            log::info!("goal {id} aborted: collision");
            return self.finish(id, GoalState::Aborted);
        }
        if goal_reached(pose, target, &self.cfg) {
            return self.finish(id, GoalState::Succeeded);
        }
        let d = (pose.x - target.x).hypot(pose.y - target.y);
        if d <= self.cfg.xy_goal_tolerance {
            return self.rotate_toward(pose, target.theta);
        }

        self.advance_progress(pose);
        match self.follow(pose) {
            Ok(t) => t,
            Err(first) => {
                log::debug!("goal {id}: {first}; replanning");
                let replanned = plan_global(&self.costmap, pose, target).and_then(|plan| {
                    self.path = plan.poses;
                    self.progress = 0;
                    self.follow(pose)
                });
                match replanned {
                    Ok(t) => t,
                    Err(e) => {
                        log::info!("goal {id} aborted: {e}");
                        self.finish(id, GoalState::Aborted)
                    }
                }
            }
        }
    }

    /// Path poses considered per tick: enough to leave the local window.
    fn window(&self) -> usize {
        2 * window_half_cells(&self.cfg, self.costmap.resolution()) + 1
    }

    fn advance_progress(&mut self, pose: Pose2D) {
        let end = (self.progress + self.window()).min(self.path.len());
        let mut best = (self.progress, f64::INFINITY);
        for i in self.progress..end {
            let p = self.path[i];
            let d = (p.x - pose.x).hypot(p.y - pose.y);
            if d < best.1 {
                best = (i, d);
            }
        }
        self.progress = best.0;
    }

    fn follow(&mut self, pose: Pose2D) -> Result<Twist2D> {
        let end = (self.progress + self.window()).min(self.path.len());
        let local = plan_local(&self.costmap, pose, self.last_cmd, &self.path[self.progress..end], &self.cfg)?;
        self.last_cmd = local.twist;
        self.trajectory = local.trajectory;
        Ok(local.twist)
    }

    /// Turn in place toward the goal heading once the position is within tolerance.
    fn rotate_toward(&mut self, pose: Pose2D, yaw: f64) -> Twist2D {
        let err = wrap_angle(yaw - pose.theta);
        let (lo, hi) = self.cfg.vtheta_window(self.last_cmd.w);
        let desired = err.signum() * self.cfg.max_rot_vel.min(err.abs() / self.cfg.control_period);
        let t = Twist2D::new(0.0, desired.clamp(lo, hi));
        self.last_cmd = t;
        self.trajectory.clear();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::navigation::costmap::inflate;
    use crate::sim::step_kinematics;
    use crate::world::DemoWorld;

    fn navigator() -> Navigator {
        let cm = inflate(DemoWorld::new().grid(), 0.06, 0.25).unwrap();
        Navigator::new(cm, PlannerConfig::default()).unwrap()
    }

    /// Drives with perfect localization until the goal leaves the active states.
    fn drive(nav: &mut Navigator, mut pose: Pose2D, id: GoalId, max_ticks: usize) -> (Pose2D, GoalState) {
        for _ in 0..max_ticks {
            let t = nav.tick(pose, false, 0.1);
            let st = nav.status(id).unwrap().state;
            if st.is_terminal() {
                assert_eq!(t, Twist2D::ZERO);
                return (pose, st);
            }
            pose = step_kinematics(pose, t, 0.1);
        }
        (pose, nav.status(id).unwrap().state)
    }

    #[test]
    fn goal_at_robot_pose_succeeds_immediately() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let id = nav.send_goal(&NavGoal::robot(0.0, 1.0), pose).unwrap();
        assert_eq!(nav.status(id).unwrap().state, GoalState::Pending);
        assert_eq!(nav.tick(pose, false, 0.1), Twist2D::ZERO);
        assert_eq!(nav.status(id).unwrap().state, GoalState::Succeeded);
    }

    #[test]
    fn reaches_goal_through_doorway() {
        let mut nav = navigator();
        let start = Pose2D::new(2.0, 3.0, 0.0);
        let id = nav.send_goal(&NavGoal::map(8.0, 3.0, 0.0), start).unwrap();
        let (end, st) = drive(&mut nav, start, id, 3000);
        assert_eq!(st, GoalState::Succeeded);
        assert!(goal_reached(end, Pose2D::new(8.0, 3.0, 0.0), nav.config()));
        assert!(end.x > 5.05, "finished on the far side of the wall");
    }

    #[test]
    fn unreachable_goal_aborts() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        // inside the interior wall
        let id = nav.send_goal(&NavGoal::map(5.0, 3.0, 0.0), pose).unwrap();
        assert_eq!(nav.tick(pose, false, 0.1), Twist2D::ZERO);
        assert_eq!(nav.status(id).unwrap().state, GoalState::Aborted);
        assert_eq!(nav.tick(pose, false, 0.1), Twist2D::ZERO);
    }

    #[test]
    fn collision_aborts() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let id = nav.send_goal(&NavGoal::map(4.0, 3.0, 0.0), pose).unwrap();
        assert_ne!(nav.tick(pose, false, 0.1), Twist2D::ZERO);
        assert_eq!(nav.status(id).unwrap().state, GoalState::Active);
        assert_eq!(nav.tick(pose, true, 0.1), Twist2D::ZERO);
        assert_eq!(nav.status(id).unwrap().state, GoalState::Aborted);
    }

    #[test]
    fn preemption_and_cancel() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let first = nav.send_goal(&NavGoal::map(4.0, 3.0, 0.0), pose).unwrap();
        nav.tick(pose, false, 0.1);
        assert_eq!(nav.status(first).unwrap().state, GoalState::Active);
        let second = nav.send_goal(&NavGoal::map(4.0, 5.0, 0.0), pose).unwrap();
        assert_eq!(nav.status(first).unwrap().state, GoalState::Preempted);
        assert_eq!(nav.status(second).unwrap().state, GoalState::Pending);

        nav.tick(pose, false, 0.1);
        assert_eq!(nav.cancel_goal(second).unwrap().state, GoalState::Preempted);
        assert_eq!(nav.cancel_goal(second).unwrap().state, GoalState::Preempted);
        assert_eq!(nav.tick(pose, false, 0.1), Twist2D::ZERO);
        assert!(matches!(nav.cancel_goal(99), Err(Error::UnknownGoal(99))));

        let done = nav.send_goal(&NavGoal::robot(0.0, 1.0), pose).unwrap();
        nav.tick(pose, false, 0.1);
        assert_eq!(nav.cancel_goal(done).unwrap().state, GoalState::Succeeded);
    }

    #[test]
    fn rotates_in_place_within_tolerance() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let id = nav.send_goal(&NavGoal::map(2.2, 3.0, 3.0), pose).unwrap();
        let t = nav.tick(pose, false, 0.1);
        assert_eq!(t.v, 0.0);
        assert!(t.w > 0.0);
        let (_, st) = drive(&mut nav, pose, id, 200);
        assert_eq!(st, GoalState::Succeeded);
    }

    #[test]
    fn invalid_quaternion_rejected() {
        let mut nav = navigator();
        assert!(nav.send_goal(&NavGoal::robot(1.0, 2.0), Pose2D::default()).is_err());
        assert_eq!(nav.current_goal(), None);
    }

    #[test]
    fn elapsed_and_feedback_track_ticks() {
        let mut nav = navigator();
        let pose = Pose2D::new(2.0, 3.0, 0.0);
        let id = nav.send_goal(&NavGoal::map(4.0, 3.0, 0.0), pose).unwrap();
        for _ in 0..5 {
            nav.tick(pose, false, 0.1);
        }
        let st = nav.status(id).unwrap();
        assert!((st.elapsed - 0.5).abs() < 1e-9);
        assert_eq!(st.feedback, pose);
    }
}
