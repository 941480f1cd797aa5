//! Gradient-based configuration planner on top of the learned forward model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use softarm_core::{arc_to_config, config_to_arc, ArcParams, ArmGeometry, ModuleConfiguration};
use softarm_neural::adam::{Adam, AdamConfig};
use softarm_neural::ModelBundle;

use crate::losses::{total_cost, LossBreakdown};
use crate::task::TaskSpec;
use crate::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerSettings {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Planned bends are clamped to this angle (rad).
    pub max_bend: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            iterations: 10,
            learning_rate: 0.02,
            max_bend: ArmGeometry::default().max_bend(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStepResult {
    pub configs: Vec<ModuleConfiguration>,
    pub cost: f64,
    pub breakdown: LossBreakdown,
    /// Cost of the starting configurations.
    pub initial_cost: f64,
    /// Index of the returned iterate; 0 is the starting point.
    pub best_iteration: usize,
    /// Set when a non-finite cost stopped the step; `configs` is then the
    /// starting point.
    pub error: Option<String>,
}

pub fn flatten(configs: &[ModuleConfiguration]) -> Vec<f64> {
    configs.iter().flat_map(|c| c.to_array()).collect()
}

/// Rescales each module's 3-vector to unit length and clamps its bend.
fn project(flat: &[f64], max_bend: f64) -> Vec<ModuleConfiguration> {
    flat.chunks_exact(3)
        .map(|c| {
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let unit = if n > 1e-12 && n.is_finite() {
                ModuleConfiguration {
                    ox: c[0] / n,
                    oy: c[1] / n,
                    oz: c[2] / n,
                }
            } else {
                ModuleConfiguration::STRAIGHT
            };
            let arc = config_to_arc(&unit);
            if arc.bend_angle > max_bend {
                arc_to_config(&ArcParams::new(max_bend, arc.neutral_direction))
            } else {
                unit
            }
        })
        .collect()
}

/// One planning step: a fresh Adam run from `start`, returning the lowest-cost
/// iterate (the starting point included).
pub fn plan_step(
    start: &[ModuleConfiguration],
    task: &TaskSpec,
    model: &ModelBundle,
    settings: &PlannerSettings,
) -> Result<PlanStepResult, ControlError> {
    task.validate(model.module_count)?;
    let c0 = flatten(start);
    let failed = |initial_cost: f64, msg: String| PlanStepResult {
        configs: start.to_vec(),
        cost: initial_cost,
        breakdown: LossBreakdown::default(),
        initial_cost,
        best_iteration: 0,
        error: Some(msg),
    };

    let mut adam = Adam::new(
        AdamConfig::with_lr(settings.learning_rate),
        [(1, c0.len())],
    );
    let mut current = Array2::from_shape_vec((1, c0.len()), c0.clone()).expect("row");
    let mut best: Option<(f64, LossBreakdown, Vec<ModuleConfiguration>, usize)> = None;
    let mut initial_cost = f64::NAN;
    for it in 0..=settings.iterations {
        let flat: Vec<f64> = current.iter().copied().collect();
        let (cost, breakdown, grad) = total_cost(task, model, &flat, &c0)?;
        if !cost.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Ok(failed(initial_cost, format!("non-finite cost at iteration {it}")));
        }
        if it == 0 {
            initial_cost = cost;
        }
        if best.as_ref().is_none_or(|b| cost < b.0) {
            let configs = if it == 0 { start.to_vec() } else { project(&flat, f64::INFINITY) };
            best = Some((cost, breakdown, configs, it));
        }
        if it == settings.iterations {
            break;
        }
        let grad = Array2::from_shape_vec((1, grad.len()), grad).expect("row");
        adam.step(&mut [&mut current], &[grad]);
        let projected = flatten(&project(current.as_slice().expect("contiguous"), settings.max_bend));
        current = Array2::from_shape_vec((1, projected.len()), projected).expect("row");
    }
    let (cost, breakdown, configs, best_iteration) = best.expect("at least one iterate");
    Ok(PlanStepResult {
        configs,
        cost,
        breakdown,
        initial_cost,
        best_iteration,
        error: None,
    })
}

/// Chains [`plan_step`] along the task's waypoints, each step starting from
/// the previous plan. A task without waypoints yields an empty trajectory.
pub fn plan_offline(
    start: &[ModuleConfiguration],
    task: &TaskSpec,
    model: &ModelBundle,
    settings: &PlannerSettings,
) -> Result<Vec<PlanStepResult>, ControlError> {
    task.validate(model.module_count)?;
    let mut out: Vec<PlanStepResult> = Vec::with_capacity(task.waypoints.len());
    let mut prev = start.to_vec();
    for k in 0..task.waypoints.len() {
        let step = plan_step(&prev, &task.at(k), model, settings)?;
        prev = step.configs.clone();
        out.push(step);
    }
    Ok(out)
}
