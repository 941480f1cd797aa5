//! Simulated arm used as ground truth in place of hardware.
//!
//! Each tick the plant applies three disturbances to the ideal PCC model:
//!
//! 1. **Motor lag.** The cable actually pulled by each motor moves a fraction
//!    `hysteresis_rate` of the way from its previous position to the command.
//!    The motor encoders read these actual cable positions.
//! 2. **Friction twist.** Uneven cable friction rotates the bending plane:
//!    the realized neutral direction is offset by `friction_twist`.
//! 3. **Gravity droop.** Going from base to tip, every module's tip
//!    orientation is tilted toward −z by
//!    `gravity_droop_gain · (|base_xy| + |reach_xy|)`, where `base_xy` is the
//!    horizontal offset of the module base from the robot axis and `reach_xy`
//!    the module's own horizontal extension.
//! 4. **Noise.** Gaussian noise of `config_noise_std` on both components of
//!    the bend vector `(φ cos θ, φ sin θ)`.
//!
//! Encoders only see item 1; items 2 to 4 are what separates the encoder
//! estimate from the true shape.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pcc::{
    arc_to_config, config_to_arc, estimate_arc, module_transform, ArcParams, ArmGeometry,
    ModuleAction, ModuleConfiguration, RigidTransform, RobotState,
};
use crate::KinematicsError;

/// Upper bound on a realized bend (rad).
pub const MAX_REALIZED_BEND: f64 = 1.6;

/// Simulated tick period (s).
pub const TICK_SECONDS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceParams {
    /// Droop per meter of horizontal lever arm (rad/m).
    pub gravity_droop_gain: f64,
    /// Fraction of the remaining cable error closed per tick, in (0, 1].
    pub hysteresis_rate: f64,
    /// Standard deviation of the bend-vector noise (rad).
    pub config_noise_std: f64,
    /// Offset of the realized neutral direction from the cable estimate (rad).
    pub friction_twist: f64,
    pub seed: u64,
}

impl Default for DisturbanceParams {
    fn default() -> Self {
        Self {
            gravity_droop_gain: 0.5,
            hysteresis_rate: 0.35,
            config_noise_std: 0.01,
            friction_twist: 0.14,
            seed: 0,
        }
    }
}

impl DisturbanceParams {
    /// The disturbance-free limit: the plant equals the PCC model.
    pub fn ideal(seed: u64) -> Self {
        Self {
            gravity_droop_gain: 0.0,
            hysteresis_rate: 1.0,
            config_noise_std: 0.0,
            friction_twist: 0.0,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.gravity_droop_gain >= 0.0 && self.gravity_droop_gain.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "gravity_droop_gain must be finite and non-negative".into(),
            ));
        }
        if !(self.config_noise_std >= 0.0 && self.config_noise_std.is_finite()) {
            return Err(KinematicsError::InvalidGeometry(
                "config_noise_std must be finite and non-negative".into(),
            ));
        }
        if !self.friction_twist.is_finite() {
            return Err(KinematicsError::InvalidGeometry(
                "friction_twist must be finite".into(),
            ));
        }
        if !(self.hysteresis_rate > 0.0 && self.hysteresis_rate <= 1.0) {
            return Err(KinematicsError::InvalidGeometry(
                "hysteresis_rate must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub commanded: Vec<ModuleAction>,
    /// Cable positions actually reached by the motors (what encoders read).
    pub cables: Vec<ModuleAction>,
    pub realized_arcs: Vec<ArcParams>,
    pub tick: u64,
    rng: ChaCha8Rng,
}

impl PlantState {
    pub fn at_rest(geom: &ArmGeometry, params: &DisturbanceParams) -> Self {
        let n = geom.module_count;
        Self {
            commanded: vec![ModuleAction::ZERO; n],
            cables: vec![ModuleAction::ZERO; n],
            realized_arcs: vec![ArcParams::default(); n],
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        }
    }
}

/// What the plant exposes after a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantObservation {
    /// Configurations estimated from the motor encoders.
    pub encoder_configs: Vec<ModuleConfiguration>,
    /// Ground-truth state, for evaluation and training targets only.
    pub true_state: RobotState,
    /// Ground-truth module configurations, for evaluation only.
    pub true_configs: Vec<ModuleConfiguration>,
}

/// Advances the plant by one tick. On error the input state is untouched.
pub fn plant_step(
    state: &PlantState,
    actions: &[ModuleAction],
    params: &DisturbanceParams,
    geom: &ArmGeometry,
) -> Result<(PlantState, PlantObservation), KinematicsError> {
    if actions.len() != geom.module_count {
        return Err(KinematicsError::ModuleCount {
            expected: geom.module_count,
            got: actions.len(),
        });
    }
    for a in actions {
        a.validate(geom)?;
    }

    let mut next = state.clone();
    next.tick += 1;
    next.commanded = actions.to_vec();

    // encoder path: lagged cables only
    let rate = params.hysteresis_rate;
    let mut encoder_arcs = Vec::with_capacity(actions.len());
    for (cable, cmd) in next.cables.iter_mut().zip(actions) {
        for i in 0..3 {
            cable.cables[i] = (1.0 - rate) * cable.cables[i] + rate * cmd.cables[i];
        }
        *cable = cable.project_zero_sum();
        encoder_arcs.push(estimate_arc(cable, geom)?);
    }
    let encoder_configs: Vec<_> = encoder_arcs.iter().map(arc_to_config).collect();

    // ground-truth path: body shape under gravity and noise
    let noise = Normal::new(0.0, params.config_noise_std)
        .map_err(|_| KinematicsError::NonFinite("noise std"))?;
    let mut base = RigidTransform::identity();
    let mut realized = Vec::with_capacity(actions.len());
    let mut positions = Vec::with_capacity(actions.len());
    let mut orientations = Vec::with_capacity(actions.len());
    for arc in &encoder_arcs {
        let twisted = ArcParams::new(
            arc.bend_angle,
            arc.neutral_direction + params.friction_twist,
        );
        let mut arc = droop(&twisted, &base, params.gravity_droop_gain, geom);
        if params.config_noise_std > 0.0 {
            let [bx, by] = arc.bend_vector();
            arc = ArcParams::from_bend_vector([
                bx + noise.sample(&mut next.rng),
                by + noise.sample(&mut next.rng),
            ]);
        }
        arc.bend_angle = arc.bend_angle.min(MAX_REALIZED_BEND);
        base = base.compose(&module_transform(&arc, geom));
        positions.push(base.translation);
        orientations.push(base.rotation * Vector3::z());
        realized.push(arc);
    }
    let true_configs = realized.iter().map(arc_to_config).collect();
    next.realized_arcs = realized;

    Ok((
        next,
        PlantObservation {
            encoder_configs,
            true_state: RobotState {
                positions,
                orientations,
            },
            true_configs,
        },
    ))
}

/// Tilts the tip of a module (whose base frame is `base`) toward −z.
fn droop(arc: &ArcParams, base: &RigidTransform, gain: f64, geom: &ArmGeometry) -> ArcParams {
    if gain == 0.0 {
        return *arc;
    }
    let local = module_transform(arc, geom);
    let reach = base.rotation * local.translation;
    let lever = base.translation.xy().norm() + reach.xy().norm();
    let tip = base.rotation * arc_to_config(arc).vector();
    let down = -Vector3::z();
    let axis = tip.cross(&down);
    if axis.norm() < 1e-12 {
        return *arc;
    }
    let remaining = tip.angle(&down);
    let tilt = (gain * lever).min(remaining);
    let drooped = Rotation3::from_axis_angle(&Unit::new_normalize(axis), tilt) * tip;
    let local_tip = base.rotation.inverse() * drooped;
    config_to_arc(&ModuleConfiguration::from_vector(local_tip).unwrap_or_default())
}

/// Owns a plant state and serializes all mutation through [`Plant::step`].
#[derive(Debug, Clone)]
pub struct Plant {
    geom: ArmGeometry,
    params: DisturbanceParams,
    state: PlantState,
}

impl Plant {
    pub fn new(geom: ArmGeometry, params: DisturbanceParams) -> Result<Self, KinematicsError> {
        geom.validate()?;
        params.validate()?;
        Ok(Self {
            state: PlantState::at_rest(&geom, &params),
            geom,
            params,
        })
    }

    pub fn step(&mut self, actions: &[ModuleAction]) -> Result<PlantObservation, KinematicsError> {
        let (next, obs) = plant_step(&self.state, actions, &self.params, &self.geom)?;
        self.state = next;
        Ok(obs)
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn geometry(&self) -> &ArmGeometry {
        &self.geom
    }

    pub fn params(&self) -> &DisturbanceParams {
        &self.params
    }

    /// Encoder configurations of the current state.
    pub fn encoder_configs(&self) -> Vec<ModuleConfiguration> {
        self.state
            .cables
            .iter()
            .map(|c| arc_to_config(&estimate_arc(c, &self.geom).unwrap_or_default()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rest_stays_straight_without_noise() {
        let geom = ArmGeometry::default();
        let params = DisturbanceParams {
            config_noise_std: 0.0,
            ..Default::default()
        };
        let mut plant = Plant::new(geom, params).unwrap();
        let obs = plant.step(&[ModuleAction::ZERO; 3]).unwrap();
        for (m, p) in obs.true_state.positions.iter().enumerate() {
            assert_abs_diff_eq!(
                *p,
                Vector3::new(0.0, 0.0, 0.2 * (m + 1) as f64),
                epsilon = 1e-12
            );
        }
        for c in &obs.encoder_configs {
            assert_eq!(*c, ModuleConfiguration::STRAIGHT);
        }
    }

    #[test]
    fn ideal_plant_matches_encoders() {
        let geom = ArmGeometry::default();
        let mut plant = Plant::new(geom, DisturbanceParams::ideal(3)).unwrap();
        let actions = [
            ModuleAction::new(-0.02, 0.01, 0.01),
            ModuleAction::new(0.01, -0.02, 0.01),
            ModuleAction::new(0.0, 0.015, -0.015),
        ];
        let obs = plant.step(&actions).unwrap();
        for (e, t) in obs.encoder_configs.iter().zip(&obs.true_configs) {
            assert_abs_diff_eq!(e.vector(), t.vector(), epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_action_leaves_state_unchanged() {
        let geom = ArmGeometry::default();
        let mut plant = Plant::new(geom, DisturbanceParams::default()).unwrap();
        plant
            .step(&[ModuleAction::new(-0.01, 0.005, 0.005); 3])
            .unwrap();
        let before = plant.state().clone();
        let bad = [
            ModuleAction::new(0.04, -0.02, -0.02),
            ModuleAction::ZERO,
            ModuleAction::ZERO,
        ];
        assert!(plant.step(&bad).is_err());
        assert_eq!(plant.state(), &before);
    }

    #[test]
    fn cables_lag_the_command() {
        let geom = ArmGeometry::default();
        let params = DisturbanceParams {
            config_noise_std: 0.0,
            gravity_droop_gain: 0.0,
            ..Default::default()
        };
        let mut plant = Plant::new(geom, params).unwrap();
        let cmd = ModuleAction::new(-0.02, 0.01, 0.01);
        plant.step(&[cmd; 3]).unwrap();
        assert_abs_diff_eq!(
            plant.state().cables[0].cables[0],
            -0.02 * 0.35,
            epsilon = 1e-15
        );
        for _ in 0..100 {
            plant.step(&[cmd; 3]).unwrap();
        }
        assert_abs_diff_eq!(plant.state().cables[0].cables[0], -0.02, epsilon = 1e-12);
    }

    #[test]
    fn droop_pulls_bent_tip_down() {
        let geom = ArmGeometry::default();
        let arc = ArcParams::new(1.0, std::f64::consts::FRAC_PI_2);
        let drooped = droop(&arc, &RigidTransform::identity(), 0.5, &geom);
        assert!(drooped.bend_angle > arc.bend_angle);
        assert_abs_diff_eq!(
            drooped.neutral_direction,
            arc.neutral_direction,
            epsilon = 1e-9
        );
        let straight = droop(
            &ArcParams::default(),
            &RigidTransform::identity(),
            0.5,
            &geom,
        );
        assert_eq!(straight.bend_angle, 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        let geom = ArmGeometry::default();
        let params = DisturbanceParams {
            hysteresis_rate: 0.0,
            ..Default::default()
        };
        assert!(Plant::new(geom, params).is_err());
    }
}
