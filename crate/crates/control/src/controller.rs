//! Configuration-to-action controllers.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use softarm_core::{arc_to_action, config_to_arc, ArcParams, ArmGeometry, ModuleAction, ModuleConfiguration};
use softarm_neural::model::{ACTION_HISTORY, CONFIG_HISTORY};
use softarm_neural::{controller_input, nn_c2a_forward, ModelBundle};

use crate::ControlError;

/// Largest change of any cable between consecutive learned commands (m).
pub const SLEW_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Cc,
    Nn,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Cc => "cc",
            ControllerKind::Nn => "nn",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cc" => Ok(ControllerKind::Cc),
            "nn" => Ok(ControllerKind::Nn),
            other => Err(format!("unknown controller '{other}' (expected cc or nn)")),
        }
    }
}

/// Largest bend along `direction` that keeps every cable within range.
pub fn bend_limit(direction: f64, geom: &ArmGeometry) -> f64 {
    use std::f64::consts::FRAC_PI_3;
    let s = [
        direction.sin().abs(),
        (2.0 * FRAC_PI_3 - direction).sin().abs(),
        (direction - FRAC_PI_3).sin().abs(),
    ];
    let worst = s.iter().cloned().fold(0.0, f64::max);
    geom.max_cable_displacement / (geom.cable_radius * worst)
}

/// Model-based controller: inverts the constant-curvature mapping, saturating
/// the bend (direction kept) when the cables would leave their range.
pub fn cc_control(
    targets: &[ModuleConfiguration],
    geom: &ArmGeometry,
) -> Result<Vec<ModuleAction>, ControlError> {
    targets
        .iter()
        .map(|t| {
            let arc = config_to_arc(t);
            // slightly inside the limit so rounding never trips validation
            let limit = bend_limit(arc.neutral_direction, geom) * (1.0 - 1e-12);
            let arc = ArcParams::new(arc.bend_angle.min(limit), arc.neutral_direction);
            Ok(arc_to_action(&arc, geom)?)
        })
        .collect()
}

/// Recent encoder readings and applied actions, most recent first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlHistory {
    configs: VecDeque<Vec<f64>>,
    actions: VecDeque<Vec<f64>>,
}

impl ControlHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the encoder reading taken at the start of a tick.
    pub fn push_config(&mut self, configs: &[ModuleConfiguration]) {
        self.configs
            .push_front(configs.iter().flat_map(|c| c.to_array()).collect());
        self.configs.truncate(CONFIG_HISTORY);
    }

    /// Records the action applied during a tick.
    pub fn push_action(&mut self, actions: &[ModuleAction], geom: &ArmGeometry) {
        self.actions
            .push_front(actions.iter().flat_map(|a| a.normalized(geom)).collect());
        self.actions.truncate(ACTION_HISTORY);
    }

    /// True once the learned controller has a full input window.
    pub fn is_warm(&self) -> bool {
        self.configs.len() == CONFIG_HISTORY && self.actions.len() == ACTION_HISTORY
    }

    pub fn last_action(&self, geom: &ArmGeometry) -> Option<Vec<ModuleAction>> {
        self.actions.front().map(|a| {
            a.chunks_exact(3)
                .map(|c| ModuleAction::from_normalized([c[0], c[1], c[2]], geom))
                .collect()
        })
    }
}

/// Scales the change from `previous` uniformly so no cable moves more than
/// `limit`. Uniform scaling keeps the zero-sum and range constraints.
pub fn limit_slew(previous: &[ModuleAction], next: &[ModuleAction], limit: f64) -> Vec<ModuleAction> {
    previous
        .iter()
        .zip(next)
        .map(|(p, n)| {
            let delta = [0, 1, 2].map(|i| n.cables[i] - p.cables[i]);
            let worst = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            if worst <= limit {
                *n
            } else {
                let s = limit / worst;
                ModuleAction {
                    cables: [0, 1, 2].map(|i| p.cables[i] + s * delta[i]),
                }
            }
        })
        .collect()
}

/// Outcome of one controller call.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub actions: Vec<ModuleAction>,
    /// True when the learned controller fell back to the model-based one.
    pub fallback: bool,
}

/// Learned controller. Until the history holds a full window it falls back
/// to [`cc_control`]; its commands are slew-limited against the last action.
pub fn nn_control(
    model: &ModelBundle,
    targets: &[ModuleConfiguration],
    history: &ControlHistory,
    geom: &ArmGeometry,
) -> Result<ControlOutput, ControlError> {
    if !history.is_warm() {
        return Ok(ControlOutput {
            actions: cc_control(targets, geom)?,
            fallback: true,
        });
    }
    let target: Vec<f64> = targets.iter().flat_map(|c| c.to_array()).collect();
    let configs: Vec<&[f64]> = history.configs.iter().map(Vec::as_slice).collect();
    let actions: Vec<&[f64]> = history.actions.iter().map(Vec::as_slice).collect();
    let input = controller_input(model, &target, &configs, &actions)?;
    let raw: Vec<ModuleAction> = nn_c2a_forward(model, &input)?
        .into_iter()
        .map(|a| ModuleAction::from_normalized(a.map(|v| v.clamp(-1.0, 1.0)), geom).project_zero_sum())
        .collect();
    let previous = history.last_action(geom).expect("warm history has actions");
    Ok(ControlOutput {
        actions: limit_slew(&previous, &raw, SLEW_LIMIT),
        fallback: false,
    })
}

/// A controller choice together with the model it needs.
#[derive(Debug, Clone)]
pub enum Controller {
    Cc,
    Nn(Arc<ModelBundle>),
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Cc => ControllerKind::Cc,
            Controller::Nn(_) => ControllerKind::Nn,
        }
    }

    pub fn control(
        &self,
        targets: &[ModuleConfiguration],
        history: &ControlHistory,
        geom: &ArmGeometry,
    ) -> Result<ControlOutput, ControlError> {
        match self {
            Controller::Cc => Ok(ControlOutput {
                actions: cc_control(targets, geom)?,
                fallback: false,
            }),
            Controller::Nn(model) => nn_control(model, targets, history, geom),
        }
    }
}
