//! Planning losses.
//!
//! The plain functions work on whatever units they are given. The planner
//! measures position and orientation losses in the forward model's normalized
//! output space and obstacle distances in meters (see [`total_cost`]).

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use softarm_neural::model::c2s_graph;
use softarm_neural::{Graph, ModelBundle, NeuralError, Var};

use crate::task::TaskSpec;

/// Squared norms at or below this are treated as zero distance.
const ZERO_SQ: f64 = 1e-24;
/// Distances are clamped here before taking the reciprocal.
pub const MIN_OBSTACLE_DISTANCE: f64 = 1e-6;

fn norm3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Euclidean distance between predicted and desired position.
pub fn loss_position(predicted: &[f64; 3], desired: &[f64; 3]) -> f64 {
    norm3(predicted, desired)
}

/// Euclidean distance between predicted and desired orientation vectors.
pub fn loss_orientation(predicted: &[f64; 3], desired: &[f64; 3]) -> f64 {
    norm3(predicted, desired)
}

/// Reciprocal distance inside the risk radius, zero outside.
pub fn loss_obstacle(point: &[f64; 3], center: &[f64; 3], radius: f64) -> f64 {
    let d = norm3(point, center);
    if d <= radius {
        1.0 / d.max(MIN_OBSTACLE_DISTANCE)
    } else {
        0.0
    }
}

/// Euclidean distance between stacked configuration vectors.
pub fn loss_config_change(configs: &[f64], previous: &[f64]) -> f64 {
    configs
        .iter()
        .zip(previous)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Weighted contribution of each loss family to the total cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub position: f64,
    pub orientation: f64,
    pub obstacle: f64,
    pub config_change: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.position + self.orientation + self.obstacle + self.config_change
    }
}

/// Graph nodes of one cost evaluation.
pub struct CostGraph {
    pub total: Var,
    pub position: Var,
    pub orientation: Var,
    pub obstacle: Var,
    pub config_change: Var,
}

impl CostGraph {
    pub fn breakdown(&self, g: &Graph) -> LossBreakdown {
        LossBreakdown {
            position: g.scalar_value(self.position),
            orientation: g.scalar_value(self.orientation),
            obstacle: g.scalar_value(self.obstacle),
            config_change: g.scalar_value(self.config_change),
        }
    }
}

/// Euclidean norm of a node; exactly zero (with zero gradient) at the origin.
fn norm_node(g: &mut Graph, v: Var) -> Var {
    let sq = g.square(v);
    let s = g.sum(sq);
    if g.scalar_value(s) <= ZERO_SQ {
        g.scale(s, 0.0)
    } else {
        g.sqrt(s)
    }
}

fn weighted_sum(g: &mut Graph, terms: Vec<(Var, f64)>) -> Result<Var, NeuralError> {
    let mut acc = g.scalar(0.0);
    for (v, w) in terms {
        let v = g.scale(v, w);
        acc = g.add(acc, v)?;
    }
    Ok(acc)
}

/// Builds the planning cost for stacked configurations `configs` (`[1, 3n]`)
/// relative to the previous configurations `previous`.
///
/// Position and orientation errors are taken between normalized forward
/// model outputs and normalized targets. Obstacle distances use the
/// denormalized positions in meters. Whether an obstacle term is active is
/// decided from the current value, so the term is piecewise smooth.
pub fn cost_graph(
    g: &mut Graph,
    task: &TaskSpec,
    model: &ModelBundle,
    configs: Var,
    previous: &[f64],
) -> Result<CostGraph, NeuralError> {
    let norm = model.output_norm()?;
    let outputs = c2s_graph(g, model, configs)?;

    let mut position = Vec::new();
    for t in &task.position_targets {
        let base = 6 * t.module;
        let target: Vec<f64> = (0..3)
            .map(|k| (t.position[k] - norm.center(base + k)) / norm.half_range(base + k))
            .collect();
        let pred = g.slice(outputs[t.module], 0, 3)?;
        let target = g.row(&target);
        let d = g.sub(pred, target)?;
        position.push((norm_node(g, d), t.weight));
    }

    let mut orientation = Vec::new();
    for t in &task.orientation_targets {
        let base = 6 * t.module + 3;
        let target: Vec<f64> = (0..3)
            .map(|k| (t.orientation[k] - norm.center(base + k)) / norm.half_range(base + k))
            .collect();
        let pred = g.slice(outputs[t.module], 3, 6)?;
        let target = g.row(&target);
        let d = g.sub(pred, target)?;
        orientation.push((norm_node(g, d), t.weight));
    }

    let mut obstacle = Vec::new();
    for ob in &task.obstacles {
        for &m in &ob.watched {
            let base = 6 * m;
            let half: Vec<f64> = (0..3).map(|k| norm.half_range(base + k)).collect();
            let shift: Vec<f64> = (0..3).map(|k| norm.center(base + k) - ob.center[k]).collect();
            let pred = g.slice(outputs[m], 0, 3)?;
            let half = g.row(&half);
            let shift = g.row(&shift);
            let meters = g.mul(pred, half)?;
            let rel = g.add(meters, shift)?;
            let d = norm_node(g, rel);
            if g.scalar_value(d) <= ob.radius {
                let d = g.max_const(d, MIN_OBSTACLE_DISTANCE);
                obstacle.push((g.reciprocal(d), ob.weight));
            }
        }
    }

    let prev = g.row(previous);
    let delta = g.sub(configs, prev)?;
    let change = norm_node(g, delta);

    let position = weighted_sum(g, position)?;
    let orientation = weighted_sum(g, orientation)?;
    let obstacle = weighted_sum(g, obstacle)?;
    let config_change = g.scale(change, task.smoothness_weight);
    let total = weighted_sum(
        g,
        vec![(position, 1.0), (orientation, 1.0), (obstacle, 1.0), (config_change, 1.0)],
    )?;
    Ok(CostGraph {
        total,
        position,
        orientation,
        obstacle,
        config_change,
    })
}

/// Total cost and gradient with respect to the stacked configurations.
pub fn total_cost(
    task: &TaskSpec,
    model: &ModelBundle,
    configs: &[f64],
    previous: &[f64],
) -> Result<(f64, LossBreakdown, Vec<f64>), NeuralError> {
    let mut g = Graph::new();
    let x = g.leaf(Array2::from_shape_vec((1, configs.len()), configs.to_vec()).expect("row"));
    let cost = cost_graph(&mut g, task, model, x, previous)?;
    let grads = g.backward(cost.total)?;
    let grad = grads
        .get(x)
        .map(|a| a.iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; configs.len()]);
    Ok((g.scalar_value(cost.total), cost.breakdown(&g), grad))
}
