pub mod benchmark;
pub mod bridge;
pub mod client;
pub mod config;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod localization;
pub mod mapping;
pub mod navigation;
pub mod raycast;
pub mod robot;
pub mod sim;
pub mod stack;
pub mod teleop;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{cylinder_inertia, normalize_angle, InertiaDiag, Pose2D, Twist2D, WheelSpeeds};
pub use grid::{CellClass, OccupancyGrid};
pub use robot::{LaserScan, RobotParams, ScanConfig};

pub use benchmark::{run_benchmark, BenchRow, Outcome};
pub use bridge::{Command, ServerMessage, Snapshot};
pub use client::{cmd_map_saver, cmd_navigate, GoalClient, StackClient};
pub use config::StackConfig;
pub use localization::{Amcl, AmclConfig};
pub use mapping::{load_map, save_map};
pub use navigation::{GoalState, GoalStatus, NavGoal, Navigator, PlannerConfig};
pub use sim::{OdomNoise, Simulator};
pub use stack::{Mode, Stack};
pub use teleop::{TeleopConfig, TeleopState};
pub use world::DemoWorld;
