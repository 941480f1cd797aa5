//! Task descriptions consumed by the planner.
//!
//! Module indices are 0-based from the base. Positions are in meters in the
//! robot base frame, orientations are unit vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ControlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTarget {
    pub module: usize,
    pub position: [f64; 3],
    pub weight: f64,
    /// Marks a position to be held rather than tracked; reported separately
    /// as constraint error.
    #[serde(default)]
    pub constraint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationTarget {
    pub module: usize,
    pub orientation: [f64; 3],
    pub weight: f64,
}

fn default_watched() -> Vec<usize> {
    vec![2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 3],
    /// Risk radius (m): the obstacle loss is active within this distance.
    pub radius: f64,
    pub weight: f64,
    /// Modules whose end positions must keep away.
    #[serde(default = "default_watched")]
    pub watched: Vec<usize>,
}

/// Per-step overrides for trajectory tasks. Each non-empty list replaces the
/// corresponding field of the targets (or obstacle centers) in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orientations: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacle_centers: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    #[serde(default)]
    pub position_targets: Vec<PositionTarget>,
    #[serde(default)]
    pub orientation_targets: Vec<OrientationTarget>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Weight of the configuration-change loss.
    pub smoothness_weight: f64,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

fn unit_ok(v: &[f64; 3]) -> bool {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n - 1.0).abs() <= 1e-6
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, smoothness_weight: f64) -> Self {
        Self {
            name: name.into(),
            position_targets: Vec::new(),
            orientation_targets: Vec::new(),
            obstacles: Vec::new(),
            smoothness_weight,
            waypoints: Vec::new(),
        }
    }

    pub fn validate(&self, module_count: usize) -> Result<(), ControlError> {
        let bad = |msg: String| Err(ControlError::InvalidTask(msg));
        if !(self.smoothness_weight >= 0.0 && self.smoothness_weight.is_finite()) {
            return bad("smoothness weight must be non-negative".into());
        }
        for (i, p) in self.position_targets.iter().enumerate() {
            if p.module >= module_count || !(p.weight >= 0.0) || !finite3(&p.position) {
                return bad(format!("position target {i} is invalid"));
            }
        }
        for (i, o) in self.orientation_targets.iter().enumerate() {
            if o.module >= module_count || !(o.weight >= 0.0) || !unit_ok(&o.orientation) {
                return bad(format!(
                    "orientation target {i} needs a valid module, weight >= 0 and a unit vector"
                ));
            }
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            if !(ob.radius > 0.0) || !(ob.weight >= 0.0) || !finite3(&ob.center) {
                return bad(format!("obstacle {i} needs radius > 0 and weight >= 0"));
            }
            if ob.watched.iter().any(|m| *m >= module_count) {
                return bad(format!("obstacle {i} watches a module that does not exist"));
            }
        }
        for (k, w) in self.waypoints.iter().enumerate() {
            let lens = [
                (w.positions.len(), self.position_targets.len(), "positions"),
                (w.orientations.len(), self.orientation_targets.len(), "orientations"),
                (w.obstacle_centers.len(), self.obstacles.len(), "obstacle centers"),
            ];
            for (got, want, what) in lens {
                if got != 0 && got != want {
                    return bad(format!("waypoint {k} has {got} {what}, task has {want}"));
                }
            }
            if w.orientations.iter().any(|o| !unit_ok(o)) {
                return bad(format!("waypoint {k} has a non-unit orientation"));
            }
            if w.positions.iter().chain(&w.obstacle_centers).any(|p| !finite3(p)) {
                return bad(format!("waypoint {k} has a non-finite point"));
            }
        }
        Ok(())
    }

    /// The task as seen at step `k`: waypoint overrides applied (the last
    /// waypoint holds after the sequence ends) and the sequence dropped.
    pub fn at(&self, k: usize) -> TaskSpec {
        let mut out = TaskSpec {
            waypoints: Vec::new(),
            ..self.clone()
        };
        let Some(w) = self.waypoints.get(k.min(self.waypoints.len().saturating_sub(1))) else {
            return out;
        };
        for (t, p) in out.position_targets.iter_mut().zip(&w.positions) {
            t.position = *p;
        }
        for (t, o) in out.orientation_targets.iter_mut().zip(&w.orientations) {
            t.orientation = *o;
        }
        for (t, c) in out.obstacles.iter_mut().zip(&w.obstacle_centers) {
            t.center = *c;
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TaskSpec, ControlError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ControlError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ControlError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ControlError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("task serializes");
        std::fs::write(path, text).map_err(|source| ControlError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
