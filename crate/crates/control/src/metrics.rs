//! Task metrics computed from logged ground truth.

use serde::{Deserialize, Serialize};
use softarm_core::RobotState;

use crate::runner::TrajectoryLog;

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

/// Polar angle of a unit vector from +z (rad).
pub fn polar_angle(v: &[f64; 3]) -> f64 {
    v[0].hypot(v[1]).atan2(v[2])
}

/// Azimuth of a vector in the x-y plane (rad).
pub fn azimuth(v: &[f64; 3]) -> f64 {
    v[1].atan2(v[0])
}

/// Azimuth errors are only reported for targets tilted at least 1°.
pub const MIN_TILT_FOR_AZIMUTH: f64 = std::f64::consts::PI / 180.0;

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Per-tick errors of one run. Lengths in meters, angles in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickErrors {
    /// Mean distance to the tracked (non-constraint) position targets.
    pub position: Vec<f64>,
    /// Mean distance to the held (constraint) position targets.
    pub constraint: Vec<f64>,
    /// Polar-angle difference, mean over orientation targets.
    pub orientation_z: Vec<f64>,
    /// Azimuth difference, mean over tilted orientation targets.
    pub orientation_x: Vec<f64>,
    /// Angle between achieved and desired orientation.
    pub orientation_angle: Vec<f64>,
    /// Closest watched-module distance to each obstacle, per tick.
    pub obstacle_distance: Vec<Vec<f64>>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn tick_errors(log: &TrajectoryLog) -> TickErrors {
    let mut out = TickErrors {
        obstacle_distance: vec![Vec::new(); log.header.task.obstacles.len()],
        ..Default::default()
    };
    for rec in &log.ticks {
        let task = log.header.task.at(rec.tick as usize);
        let state = RobotState::from_slice(&rec.true_state);
        let pos = |m: usize| {
            let p = state.positions[m];
            [p.x, p.y, p.z]
        };
        let ori = |m: usize| {
            let o = state.orientations[m];
            [o.x, o.y, o.z]
        };
        let (mut tracked, mut held) = (Vec::new(), Vec::new());
        for t in &task.position_targets {
            let e = dist(&pos(t.module), &t.position);
            if t.constraint {
                held.push(e);
            } else {
                tracked.push(e);
            }
        }
        let (mut z, mut x, mut total) = (Vec::new(), Vec::new(), Vec::new());
        for t in &task.orientation_targets {
            let o = ori(t.module);
            z.push((polar_angle(&o) - polar_angle(&t.orientation)).abs().to_degrees());
            if polar_angle(&t.orientation) >= MIN_TILT_FOR_AZIMUTH {
                let d = softarm_core::pcc::wrap_angle(azimuth(&o) - azimuth(&t.orientation));
                x.push(d.abs().to_degrees());
            }
            total.push(angle(&o, &t.orientation).to_degrees());
        }
        out.position.extend(mean(&tracked));
        out.constraint.extend(mean(&held));
        out.orientation_z.extend(mean(&z));
        out.orientation_x.extend(mean(&x));
        out.orientation_angle.extend(mean(&total));
        for (i, ob) in task.obstacles.iter().enumerate() {
            let d = ob
                .watched
                .iter()
                .map(|m| dist(&pos(*m), &ob.center))
                .fold(f64::INFINITY, f64::min);
            out.obstacle_distance[i].push(d);
        }
    }
    out
}

/// Summary over one or more runs of the same task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub ticks: usize,
    pub position_error_m: Option<MeanStd>,
    pub constraint_error_m: Option<MeanStd>,
    pub orientation_error_z_deg: Option<MeanStd>,
    pub orientation_error_x_deg: Option<MeanStd>,
    pub orientation_error_deg: Option<MeanStd>,
    /// Tracked-position error averaged over the last ticks of each run.
    pub terminal_position_error_m: Option<MeanStd>,
    /// Smallest distance to each obstacle over all runs (m).
    pub min_obstacle_distance_m: Vec<f64>,
    pub degraded_ticks: usize,
    pub max_decide_ms: f64,
    pub mean_decide_ms: f64,
}

/// Ticks at the end of a run used for the terminal error.
pub const TERMINAL_TICKS: usize = 10;

/// Pools tick errors of all `logs` (errors are pooled tick by tick).
pub fn summarize(logs: &[TrajectoryLog]) -> Summary {
    let mut pooled = TickErrors::default();
    let mut terminal = Vec::new();
    let mut min_dist: Vec<f64> = Vec::new();
    let (mut degraded, mut ticks, mut max_ms, mut sum_ms) = (0, 0, 0.0f64, 0.0);
    for log in logs {
        let e = tick_errors(log);
        if let Some(t) = mean(&e.position[e.position.len().saturating_sub(TERMINAL_TICKS)..]) {
            terminal.push(t);
        }
        pooled.position.extend(&e.position);
        pooled.constraint.extend(&e.constraint);
        pooled.orientation_z.extend(&e.orientation_z);
        pooled.orientation_x.extend(&e.orientation_x);
        pooled.orientation_angle.extend(&e.orientation_angle);
        if min_dist.len() < e.obstacle_distance.len() {
            min_dist.resize(e.obstacle_distance.len(), f64::INFINITY);
        }
        for (i, d) in e.obstacle_distance.iter().enumerate() {
            min_dist[i] = d.iter().copied().fold(min_dist[i], f64::min);
        }
        for t in &log.ticks {
            degraded += t.degraded as usize;
            max_ms = max_ms.max(t.decide_ms);
            sum_ms += t.decide_ms;
        }
        ticks += log.ticks.len();
    }
    Summary {
        runs: logs.len(),
        ticks,
        position_error_m: MeanStd::of(&pooled.position),
        constraint_error_m: MeanStd::of(&pooled.constraint),
        orientation_error_z_deg: MeanStd::of(&pooled.orientation_z),
        orientation_error_x_deg: MeanStd::of(&pooled.orientation_x),
        orientation_error_deg: MeanStd::of(&pooled.orientation_angle),
        terminal_position_error_m: MeanStd::of(&terminal),
        min_obstacle_distance_m: min_dist,
        degraded_ticks: degraded,
        max_decide_ms: max_ms,
        mean_decide_ms: if ticks > 0 { sum_ms / ticks as f64 } else { 0.0 },
    }
}
