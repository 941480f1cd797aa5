//! Kinematic kernel and simulated plant for a cable-driven modular soft arm.
//!
//! The arm is a chain of identical modules. Each module is bent by three
//! cables spaced 120° apart and is modelled as a constant-curvature arc:
//!
//! ```text
//!   cables (a1, a2, a3)  ->  arc (bend φ, direction θ)  ->  tip orientation (ox, oy, oz)
//! ```
//!
//! [`pcc`] holds the pure conversions and the forward kinematics of the
//! chain. [`plant`] wraps them into a disturbed "ground truth" arm with
//! motor lag, gravity droop and noise, [`babble`] generates the phased random
//! actuation used to explore the workspace, and [`dataset`] records and
//! persists the resulting samples.

pub mod babble;
pub mod dataset;
mod error;
pub mod pcc;
pub mod plant;

pub use error::{DatasetError, KinematicsError};
pub use pcc::{
    arc_to_action, arc_to_config, config_to_arc, estimate_arc, forward_state, forward_state_arcs,
    module_transform, ArcParams, ArmGeometry, ModuleAction, ModuleConfiguration, RigidTransform,
    RobotState,
};
