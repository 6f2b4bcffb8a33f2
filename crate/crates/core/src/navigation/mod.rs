pub mod controller;
pub mod costmap;
pub mod global;
pub mod goal;
pub mod local;

pub use controller::Navigator;
pub use costmap::{inflate, Costmap, CostmapConfig};
pub use global::{plan_global, GlobalPlan, Path};
pub use goal::{goal_reached, quat_to_yaw, GoalFrame, GoalId, GoalIds, GoalState, GoalStatus, NavGoal};
pub use local::{plan_local, CostWeights, LocalPlan, PlannerConfig};
