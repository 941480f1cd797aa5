//! Piecewise-constant-curvature (PCC) kinematics.
//!
//! Conventions used throughout:
//!
//! * cable `i` sits at angle `(i-1)·120°` around the module axis, at radius
//!   `cable_radius`; a positive displacement lengthens the cable;
//! * `θ` is the direction of the neutral (non-stretching) surface measured
//!   from cable 1, and the tip bends within the plane of azimuth `θ − π/2`;
//! * a module's configuration is the unit orientation of its tip expressed in
//!   its own base frame; the robot state collects tip positions and
//!   orientations of every module in the robot base frame.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::KinematicsError;

const ZERO_SUM_TOL: f64 = 1e-9;
const RANGE_TOL: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-9;
/// Below this bend the arc geometry is evaluated with a Taylor series.
const SMALL_BEND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmGeometry {
    /// Length of one module (m).
    pub module_length: f64,
    /// Distance from the module axis to each cable (m).
    pub cable_radius: f64,
    pub module_count: usize,
    /// Cable displacement that maps to normalized magnitude 1 (m).
    pub max_cable_displacement: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            module_length: 0.2,
            cable_radius: 0.02,
            module_count: 3,
            max_cable_displacement: 0.03,
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let lengths = [
            ("module_length", self.module_length),
            ("cable_radius", self.cable_radius),
            ("max_cable_displacement", self.max_cable_displacement),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.module_count == 0 {
            return Err(KinematicsError::InvalidGeometry(
                "module_count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn arm_length(&self) -> f64 {
        self.module_length * self.module_count as f64
    }

    /// Largest bend reachable with every `|a_i| <= max_cable_displacement`.
    pub fn max_bend(&self) -> f64 {
        2.0 / 3f64.sqrt() * self.max_cable_displacement / self.cable_radius
    }
}

/// Cable displacements of one module in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModuleAction {
    pub cables: [f64; 3],
}

impl ModuleAction {
    pub const ZERO: ModuleAction = ModuleAction { cables: [0.0; 3] };

    pub fn new(a1: f64, a2: f64, a3: f64) -> Self {
        Self {
            cables: [a1, a2, a3],
        }
    }

    pub fn sum(&self) -> f64 {
        self.cables.iter().sum()
    }

    /// Checks the zero-sum constraint only.
    pub fn check_zero_sum(&self) -> Result<(), KinematicsError> {
        if self.cables.iter().any(|c| !c.is_finite()) {
            return Err(KinematicsError::NonFinite("module action"));
        }
        let sum = self.sum();
        if sum.abs() > ZERO_SUM_TOL {
            return Err(KinematicsError::ZeroSum { sum });
        }
        Ok(())
    }

    /// Checks zero-sum and the per-cable range.
    pub fn validate(&self, geom: &ArmGeometry) -> Result<(), KinematicsError> {
        self.check_zero_sum()?;
        let limit = geom.max_cable_displacement;
        for (index, &value) in self.cables.iter().enumerate() {
            if value.abs() > limit + RANGE_TOL {
                return Err(KinematicsError::OutOfRange {
                    index,
                    value,
                    limit,
                });
            }
        }
        Ok(())
    }

    /// Cable displacements divided by the normalization constant.
    pub fn normalized(&self, geom: &ArmGeometry) -> [f64; 3] {
        self.cables.map(|c| c / geom.max_cable_displacement)
    }

    pub fn from_normalized(values: [f64; 3], geom: &ArmGeometry) -> Self {
        Self {
            cables: values.map(|v| v * geom.max_cable_displacement),
        }
    }

    /// Subtracts the mean so the displacements sum to zero.
    pub fn project_zero_sum(self) -> Self {
        let mean = self.sum() / 3.0;
        Self {
            cables: self.cables.map(|c| c - mean),
        }
    }
}

/// Constant-curvature arc parameters of one module.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArcParams {
    /// Angle between base and end planes (rad, ≥ 0).
    pub bend_angle: f64,
    /// Neutral surface direction relative to cable 1 (rad, in (−π, π]).
    pub neutral_direction: f64,
}

impl ArcParams {
    pub fn new(bend_angle: f64, neutral_direction: f64) -> Self {
        Self {
            bend_angle,
            neutral_direction: wrap_angle(neutral_direction),
        }
    }

    /// Cartesian bend vector `(φ cos θ, φ sin θ)`; linear in the cables.
    pub fn bend_vector(&self) -> [f64; 2] {
        let (s, c) = self.neutral_direction.sin_cos();
        [self.bend_angle * c, self.bend_angle * s]
    }

    pub fn from_bend_vector(v: [f64; 2]) -> Self {
        let bend = v[0].hypot(v[1]);
        if bend == 0.0 {
            Self::default()
        } else {
            Self::new(bend, v[1].atan2(v[0]))
        }
    }
}

/// Unit orientation of a module tip relative to its own base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleConfiguration {
    pub ox: f64,
    pub oy: f64,
    pub oz: f64,
}

impl Default for ModuleConfiguration {
    fn default() -> Self {
        Self::STRAIGHT
    }
}

impl ModuleConfiguration {
    pub const STRAIGHT: ModuleConfiguration = ModuleConfiguration {
        ox: 0.0,
        oy: 0.0,
        oz: 1.0,
    };

    /// Builds a configuration, rejecting vectors that are not unit length.
    pub fn new(ox: f64, oy: f64, oz: f64) -> Result<Self, KinematicsError> {
        let c = Self { ox, oy, oz };
        c.check_unit()?;
        Ok(c)
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn from_vector(v: Vector3<f64>) -> Result<Self, KinematicsError> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(KinematicsError::NotUnit { norm: n });
        }
        Ok(Self {
            ox: v.x / n,
            oy: v.y / n,
            oz: v.z / n,
        })
    }

    pub fn check_unit(&self) -> Result<(), KinematicsError> {
        let norm = self.vector().norm();
        if !norm.is_finite() {
            return Err(KinematicsError::NonFinite("module configuration"));
        }
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(KinematicsError::NotUnit { norm });
        }
        Ok(())
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.ox, self.oy, self.oz)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.ox, self.oy, self.oz]
    }

    /// Angle between two orientations in radians.
    pub fn angle_to(&self, other: &ModuleConfiguration) -> f64 {
        angle_between(&self.vector(), &other.vector())
    }
}

/// Angle between two vectors, robust near 0 and π.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// `self ∘ other`: `other` is expressed in the frame of `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        *self.rotation.matrix()
    }
}

/// Tip positions and orientations of every module, in the robot base frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub positions: Vec<Vector3<f64>>,
    pub orientations: Vec<Vector3<f64>>,
}

impl RobotState {
    pub fn module_count(&self) -> usize {
        self.positions.len()
    }

    pub fn tip_position(&self) -> Vector3<f64> {
        *self
            .positions
            .last()
            .expect("robot state has at least one module")
    }

    /// Flattens to `[p_1, o_1, p_2, o_2, ...]` (6 values per module).
    pub fn to_vec(&self) -> Vec<f64> {
        self.positions
            .iter()
            .zip(&self.orientations)
            .flat_map(|(p, o)| [p.x, p.y, p.z, o.x, o.y, o.z])
            .collect()
    }

    /// Inverse of [`RobotState::to_vec`].
    pub fn from_slice(values: &[f64]) -> Self {
        assert_eq!(values.len() % 6, 0, "robot state needs 6 values per module");
        let mut positions = Vec::with_capacity(values.len() / 6);
        let mut orientations = Vec::with_capacity(values.len() / 6);
        for chunk in values.chunks_exact(6) {
            positions.push(Vector3::new(chunk[0], chunk[1], chunk[2]));
            orientations.push(Vector3::new(chunk[3], chunk[4], chunk[5]));
        }
        Self {
            positions,
            orientations,
        }
    }
}

/// Estimates the arc of a module from its cable displacements.
///
/// `φ = √(a1² + (a2−a3)²/3) / r_p`, `θ = atan2(−a1, (a2−a3)/√3)`, with
/// `θ = 0` for a straight module.
pub fn estimate_arc(
    action: &ModuleAction,
    geom: &ArmGeometry,
) -> Result<ArcParams, KinematicsError> {
    action.check_zero_sum()?;
    let [a1, a2, a3] = action.cables;
    let across = (a2 - a3) / 3f64.sqrt();
    let bend = a1.hypot(across) / geom.cable_radius;
    let direction = if a1 == 0.0 && across == 0.0 {
        0.0
    } else {
        (-a1).atan2(across)
    };
    Ok(ArcParams {
        bend_angle: bend,
        neutral_direction: direction,
    })
}

pub fn arc_to_config(arc: &ArcParams) -> ModuleConfiguration {
    let (sb, cb) = arc.bend_angle.sin_cos();
    let (sp, cp) = (arc.neutral_direction - FRAC_PI_2).sin_cos();
    ModuleConfiguration {
        ox: sb * cp,
        oy: sb * sp,
        oz: cb,
    }
}

/// Recovers the arc that produces `config`.
///
/// The direction follows `θ = atan2(oy, ox) + π/2`. For the bend the closed
/// form `φ = atan2(oy / sin(θ − π/2), oz)` divides by zero whenever the bend
/// plane has `oy = 0`; since `sin(θ − π/2) = oy / √(ox² + oy²)` it reduces to
/// `φ = atan2(√(ox² + oy²), oz)`, which is used here and is defined
/// everywhere. A configuration with `ox = oy = 0` maps to `θ = 0`.
pub fn config_to_arc(config: &ModuleConfiguration) -> ArcParams {
    let lateral = config.ox.hypot(config.oy);
    let direction = if config.ox == 0.0 && config.oy == 0.0 {
        0.0
    } else {
        wrap_angle(config.oy.atan2(config.ox) + FRAC_PI_2)
    };
    ArcParams {
        bend_angle: lateral.atan2(config.oz),
        neutral_direction: direction,
    }
}

/// Cable displacements that realize `arc`.
pub fn arc_to_action(arc: &ArcParams, geom: &ArmGeometry) -> Result<ModuleAction, KinematicsError> {
    if arc.bend_angle < 0.0 {
        return Err(KinematicsError::NegativeBend(arc.bend_angle));
    }
    let scale = arc.bend_angle * geom.cable_radius;
    let t = arc.neutral_direction;
    let action = ModuleAction::new(
        -scale * t.sin(),
        scale * (2.0 * FRAC_PI_3 - t).sin(),
        scale * (t - FRAC_PI_3).sin(),
    );
    action.validate(geom)?;
    Ok(action)
}

/// Frame of a module tip relative to its base for a constant-curvature arc.
pub fn module_transform(arc: &ArcParams, geom: &ArmGeometry) -> RigidTransform {
    let bend = arc.bend_angle;
    let l0 = geom.module_length;
    let (sp, cp) = (arc.neutral_direction - FRAC_PI_2).sin_cos();
    // radial = ρ(1 − cos φ), axial = ρ sin φ with ρ = l0/φ
    let (radial, axial) = if bend.abs() < SMALL_BEND {
        (
            l0 * (bend / 2.0 - bend.powi(3) / 24.0),
            l0 * (1.0 - bend * bend / 6.0),
        )
    } else {
        (
            l0 * 2.0 * (bend / 2.0).sin().powi(2) / bend,
            l0 * bend.sin() / bend,
        )
    };
    let translation = Vector3::new(radial * cp, radial * sp, axial);
    let axis = Unit::new_unchecked(Vector3::new(-sp, cp, 0.0));
    RigidTransform {
        rotation: Rotation3::from_axis_angle(&axis, bend),
        translation,
    }
}

/// Forward kinematics of the chain from per-module arcs.
pub fn forward_state_arcs(arcs: &[ArcParams], geom: &ArmGeometry) -> RobotState {
    let mut frame = RigidTransform::identity();
    let mut positions = Vec::with_capacity(arcs.len());
    let mut orientations = Vec::with_capacity(arcs.len());
    for arc in arcs {
        frame = frame.compose(&module_transform(arc, geom));
        positions.push(frame.translation);
        orientations.push(frame.rotation * Vector3::z());
    }
    RobotState {
        positions,
        orientations,
    }
}

/// Forward kinematics of the chain from module configurations.
pub fn forward_state(
    configs: &[ModuleConfiguration],
    geom: &ArmGeometry,
) -> Result<RobotState, KinematicsError> {
    if configs.len() != geom.module_count {
        return Err(KinematicsError::ModuleCount {
            expected: geom.module_count,
            got: configs.len(),
        });
    }
    let mut arcs = Vec::with_capacity(configs.len());
    for c in configs {
        c.check_unit()?;
        arcs.push(config_to_arc(c));
    }
    Ok(forward_state_arcs(&arcs, geom))
}
