//! Planning and control for the soft arm.
//!
//! The planner searches module configurations that minimize a task cost
//! through the learned forward model. A controller (model-based or learned)
//! turns planned configurations into cable commands, and the runner closes
//! the loop around the simulated plant using encoder readings only.

pub mod controller;
mod error;
pub mod losses;
pub mod metrics;
pub mod planner;
pub mod presets;
pub mod runner;
pub mod session;
pub mod task;

pub use controller::{cc_control, nn_control, ControlHistory, Controller, ControllerKind};
pub use error::ControlError;
pub use losses::{loss_config_change, loss_obstacle, loss_orientation, loss_position, total_cost, LossBreakdown};
pub use metrics::{summarize, MeanStd, Summary};
pub use planner::{plan_offline, plan_step, PlanStepResult, PlannerSettings};
pub use presets::{preset, ExperimentPreset, PRESET_NAMES};
pub use runner::{run_closed_loop, PlanMode, Pilot, TrajectoryLog};
pub use task::{Obstacle, OrientationTarget, PositionTarget, TaskSpec, Waypoint};
