//! Built-in experiment presets.
//!
//! Trajectory tasks start from the straight arm: the tip first moves to the
//! start of its path, then follows it. Targets that must be reachable are
//! taken from the forward kinematics of known configurations.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};
use softarm_core::{forward_state_arcs, ArcParams, ArmGeometry};

use crate::controller::ControllerKind;
use crate::runner::PlanMode;
use crate::task::{Obstacle, OrientationTarget, PositionTarget, TaskSpec, Waypoint};
use crate::ControlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub task: TaskSpec,
    pub mode: PlanMode,
    pub controller: ControllerKind,
    pub seeds: Vec<u64>,
    pub ticks: usize,
}

pub const POSITION_WEIGHT: f64 = 1.0;
pub const SMOOTHNESS_WEIGHT: f64 = 0.5;
pub const ORIENTATION_WEIGHT: f64 = 2.0;
pub const OBSTACLE_WEIGHT: f64 = 1.0;

/// Ticks spent moving from the straight arm to the start of a path.
pub const APPROACH_TICKS: usize = 30;
/// Ticks per loop of a circular path.
pub const LOOP_TICKS: usize = 150;
/// Extra ticks run after the last waypoint.
const SETTLE_TICKS: usize = 10;

/// Per-module bend on the circle tasks (rad); the tip circle has a radius
/// of about 0.2 m at a height of about 0.55 m.
pub const CIRCLE_BEND: f64 = 0.233;
/// Bend of the outer modules on the upright-tip circle (rad).
pub const S_CIRCLE_BEND: f64 = 0.55;
/// Bend of the two upper modules on the constraint-base circle (rad).
pub const CONSTRAINED_CIRCLE_BEND: f64 = 0.41;

/// Obstacle risk radii (m).
pub const LOW_RISK: f64 = 0.05;
pub const HIGH_RISK: f64 = 0.15;

/// Plant seeds of the evaluation runs, disjoint from the seeds used to collect
/// training data.
pub const DEFAULT_SEEDS: [u64; 5] = [1001, 1002, 1003, 1004, 1005];

fn lerp(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * s)
}

/// Smooth 0 → 1 ramp with zero slope at both ends.
fn ease(s: f64) -> f64 {
    0.5 - 0.5 * (PI * s.clamp(0.0, 1.0)).cos()
}

fn unit(polar: f64, azimuth: f64) -> [f64; 3] {
    [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()]
}

fn tip_of(arcs: &[(f64, f64)]) -> ([f64; 3], [f64; 3]) {
    let arcs: Vec<ArcParams> = arcs.iter().map(|(b, d)| ArcParams::new(*b, *d)).collect();
    let s = forward_state_arcs(&arcs, &ArmGeometry::default());
    let p = s.tip_position();
    let o = s.orientations.last().expect("modules");
    ([p.x, p.y, p.z], [o.x, o.y, o.z])
}

fn module_of(arcs: &[(f64, f64)], m: usize) -> ([f64; 3], [f64; 3]) {
    let arcs: Vec<ArcParams> = arcs.iter().map(|(b, d)| ArcParams::new(*b, *d)).collect();
    let s = forward_state_arcs(&arcs, &ArmGeometry::default());
    let (p, o) = (s.positions[m], s.orientations[m]);
    ([p.x, p.y, p.z], [o.x, o.y, o.z])
}

/// Tip path that bends the arm toward +x and then sweeps the bend direction
/// once around z. `bends` are the per-module (bend angle, direction offset)
/// pairs on the loop, so every target comes from a known configuration.
fn circle_path(bends: [(f64, f64); 3]) -> Vec<([f64; 3], f64)> {
    let pose = |scale: f64, azimuth: f64| {
        let arcs = bends.map(|(b, d)| (b * scale, FRAC_PI_2 + d + azimuth));
        (tip_of(&arcs).0, azimuth)
    };
    let mut out = Vec::new();
    for k in 1..=APPROACH_TICKS {
        out.push(pose(ease(k as f64 / APPROACH_TICKS as f64), 0.0));
    }
    for k in 1..=LOOP_TICKS {
        out.push(pose(1.0, TAU * k as f64 / LOOP_TICKS as f64));
    }
    out
}

fn tip_target(position: [f64; 3]) -> PositionTarget {
    PositionTarget {
        module: 2,
        position,
        weight: POSITION_WEIGHT,
        constraint: false,
    }
}

fn offline(name: &str, task: TaskSpec) -> ExperimentPreset {
    let ticks = task.waypoints.len() + SETTLE_TICKS;
    ExperimentPreset {
        name: name.into(),
        task,
        mode: PlanMode::Offline,
        controller: ControllerKind::Nn,
        seeds: DEFAULT_SEEDS.to_vec(),
        ticks,
    }
}

fn online(name: &str, task: TaskSpec, ticks: usize) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        task,
        mode: PlanMode::Online,
        controller: ControllerKind::Nn,
        seeds: DEFAULT_SEEDS.to_vec(),
        ticks,
    }
}

pub fn position_circle() -> ExperimentPreset {
    let path = circle_path([(CIRCLE_BEND, 0.0); 3]);
    let mut task = TaskSpec::new("position-circle", SMOOTHNESS_WEIGHT);
    task.position_targets.push(tip_target(path[0].0));
    task.waypoints = path
        .iter()
        .map(|(p, _)| Waypoint {
            positions: vec![*p],
            ..Default::default()
        })
        .collect();
    offline("position-circle", task)
}

/// Circle with the tip tilted `tilt_deg` from vertical, pointing outward and
/// turned by `turn_deg` about z (positive is anticlockwise seen from above).
/// An upright tip uses an S-shaped arm whose top module bends back.
pub fn orientation_circle(name: &str, tilt_deg: f64, turn_deg: f64) -> ExperimentPreset {
    let path = if tilt_deg == 0.0 {
        circle_path([(S_CIRCLE_BEND, 0.0), (0.0, 0.0), (S_CIRCLE_BEND, PI)])
    } else {
        circle_path([(CIRCLE_BEND, 0.0); 3])
    };
    let tilt = tilt_deg.to_radians();
    let turn = turn_deg.to_radians();
    let mut task = TaskSpec::new(name, SMOOTHNESS_WEIGHT);
    task.position_targets.push(tip_target(path[0].0));
    task.orientation_targets.push(OrientationTarget {
        module: 2,
        orientation: [0.0, 0.0, 1.0],
        weight: ORIENTATION_WEIGHT,
    });
    task.waypoints = path
        .iter()
        .enumerate()
        .map(|(k, (p, a))| {
            let ramp = ease((k + 1) as f64 / APPROACH_TICKS as f64);
            Waypoint {
                positions: vec![*p],
                orientations: vec![unit(tilt * ramp, a + turn)],
                ..Default::default()
            }
        })
        .collect();
    offline(name, task)
}

/// Tip follows a circle while the base module's end is held in place.
pub fn constraint_base() -> ExperimentPreset {
    let path = circle_path([(0.0, 0.0), (CONSTRAINED_CIRCLE_BEND, 0.0), (CONSTRAINED_CIRCLE_BEND, 0.0)]);
    let mut task = TaskSpec::new("constraint-base", SMOOTHNESS_WEIGHT);
    task.position_targets.push(PositionTarget {
        module: 0,
        position: [0.0, 0.0, ArmGeometry::default().module_length],
        weight: POSITION_WEIGHT,
        constraint: true,
    });
    task.position_targets.push(tip_target(path[0].0));
    let hold = task.position_targets[0].position;
    task.waypoints = path
        .iter()
        .map(|(p, _)| Waypoint {
            positions: vec![hold, *p],
            ..Default::default()
        })
        .collect();
    offline("constraint-base", task)
}

/// Module `m`'s end is held at the pose of a bent arm while its orientation
/// swings back and forth about the held pose.
fn constraint_swing(name: &str, m: usize, swing_deg: f64) -> ExperimentPreset {
    let bent = [(0.35, FRAC_PI_2), (0.35, FRAC_PI_2), (0.35, FRAC_PI_2)];
    let (p, o) = module_of(&bent, m);
    let (polar, az) = (o[0].hypot(o[1]).atan2(o[2]), o[1].atan2(o[0]));
    let (p_start, _) = module_of(&[(0.0, 0.0); 3], m);
    let mut task = TaskSpec::new(name, SMOOTHNESS_WEIGHT);
    task.position_targets.push(PositionTarget {
        module: m,
        position: p,
        weight: POSITION_WEIGHT,
        constraint: true,
    });
    task.orientation_targets.push(OrientationTarget {
        module: m,
        orientation: o,
        weight: ORIENTATION_WEIGHT,
    });
    let mut waypoints = Vec::new();
    for k in 1..=APPROACH_TICKS {
        let s = ease(k as f64 / APPROACH_TICKS as f64);
        waypoints.push(Waypoint {
            positions: vec![lerp(p_start, p, s)],
            orientations: vec![unit(polar * s, az)],
            ..Default::default()
        });
    }
    for k in 1..=LOOP_TICKS {
        let a = swing_deg.to_radians() * (TAU * k as f64 / LOOP_TICKS as f64).sin();
        waypoints.push(Waypoint {
            positions: vec![p],
            orientations: vec![unit(polar, az + a)],
            ..Default::default()
        });
    }
    task.waypoints = waypoints;
    offline(name, task)
}

pub fn constraint_middle() -> ExperimentPreset {
    constraint_swing("constraint-middle", 1, 20.0)
}

pub fn constraint_end() -> ExperimentPreset {
    constraint_swing("constraint-end", 2, 20.0)
}

/// Per-module bend toward +x of the obstacle-task reach pose (rad).
pub const REACH_BEND: f64 = 0.6;
pub const REACH_TICKS: usize = 150;

/// Tip of the arm bent uniformly toward +x, shifted sideways by `y`.
pub fn on_reach_path(bend: f64, y: f64) -> [f64; 3] {
    let p = tip_of(&[(bend, FRAC_PI_2); 3]).0;
    [p[0], p[1] + y, p[2]]
}

/// Static reach target used by the obstacle presets.
pub fn reach_target() -> [f64; 3] {
    on_reach_path(REACH_BEND, 0.0)
}

fn obstacle(center: [f64; 3], radius: f64) -> Obstacle {
    Obstacle {
        center,
        radius,
        weight: OBSTACLE_WEIGHT,
        watched: vec![2],
    }
}

/// First obstacle. Its risk area covers the unobstructed reach path when the
/// radius is [`HIGH_RISK`].
pub fn obstacle_one() -> [f64; 3] {
    on_reach_path(0.25, 0.12)
}

/// Second obstacle, further along; its risk area covers the path taken
/// around the first one.
pub fn obstacle_two() -> [f64; 3] {
    on_reach_path(0.38, 0.1)
}

/// Ticks over which the reach target slides from the straight tip to its
/// final place.
pub const REACH_APPROACH_TICKS: usize = 60;

/// Reach planned offline from the straight arm. The target slides along the
/// unobstructed path, then stays put.
pub fn obstacle_task(name: &str, obstacles: Vec<Obstacle>) -> ExperimentPreset {
    let mut task = TaskSpec::new(name, SMOOTHNESS_WEIGHT);
    task.position_targets.push(tip_target(reach_target()));
    task.obstacles = obstacles;
    task.waypoints = (1..=REACH_TICKS)
        .map(|k| {
            let s = ease(k as f64 / REACH_APPROACH_TICKS as f64);
            Waypoint {
                positions: vec![on_reach_path(REACH_BEND * s, 0.0)],
                ..Default::default()
            }
        })
        .collect();
    offline(name, task)
}

/// Sideways offset of the two obstacles flanking the reach path (m). Two
/// [`HIGH_RISK`] areas overlap across the path; a [`LOW_RISK`] one leaves a
/// gap on its side.
pub const RISK_OFFSET: f64 = 0.135;
/// Bend along the reach path at which the flanking obstacles sit (rad).
const RISK_BEND: f64 = 0.25;

/// Obstacles on the left (+y) and right (-y) of the reach path.
pub fn risk_levels(name: &str, left: f64, right: f64) -> ExperimentPreset {
    obstacle_task(
        name,
        vec![
            obstacle(on_reach_path(RISK_BEND, RISK_OFFSET), left),
            obstacle(on_reach_path(RISK_BEND, -RISK_OFFSET), right),
        ],
    )
}

/// Target moving out of the workspace and back.
pub fn online_follow() -> ExperimentPreset {
    let mut task = TaskSpec::new("online-follow", SMOOTHNESS_WEIGHT);
    task.position_targets.push(tip_target([0.1, 0.0, 0.5]));
    let ticks = 300;
    task.waypoints = (0..ticks)
        .map(|k| {
            let s = 0.5 - 0.5 * (TAU * k as f64 / 150.0).cos();
            Waypoint {
                positions: vec![[0.1 + 0.5 * s, 0.0, 0.5]],
                ..Default::default()
            }
        })
        .collect();
    online("online-follow", task, ticks)
}

/// An obstacle pushed into the arm; no position target.
pub fn online_avoid() -> ExperimentPreset {
    let mut task = TaskSpec::new("online-avoid", SMOOTHNESS_WEIGHT);
    let from = [0.3, 0.0, 0.55];
    let to = [0.06, 0.0, 0.55];
    task.obstacles.push(obstacle(from, LOW_RISK));
    let ticks = 150;
    task.waypoints = (0..ticks)
        .map(|k| Waypoint {
            obstacle_centers: vec![lerp(from, to, ease(k as f64 / 60.0))],
            ..Default::default()
        })
        .collect();
    online("online-avoid", task, ticks)
}

pub const PRESET_NAMES: &[&str] = &[
    "position-circle",
    "orient-0",
    "orient-40",
    "orient-50",
    "orient-60",
    "orient-50a20",
    "orient-50c20",
    "constraint-base",
    "constraint-middle",
    "constraint-end",
    "obstacle-0",
    "obstacle-1",
    "obstacle-2",
    "risk-levels",
    "risk-levels-low-left",
    "risk-levels-low-right",
    "online-follow",
    "online-avoid",
];

pub fn preset(name: &str) -> Result<ExperimentPreset, ControlError> {
    Ok(match name {
        "position-circle" => position_circle(),
        "orient-0" => orientation_circle(name, 0.0, 0.0),
        "orient-40" => orientation_circle(name, 40.0, 0.0),
        "orient-50" => orientation_circle(name, 50.0, 0.0),
        "orient-60" => orientation_circle(name, 60.0, 0.0),
        "orient-50a20" => orientation_circle(name, 50.0, 20.0),
        "orient-50c20" => orientation_circle(name, 50.0, -20.0),
        "constraint-base" => constraint_base(),
        "constraint-middle" => constraint_middle(),
        "constraint-end" => constraint_end(),
        "obstacle-0" => obstacle_task(name, vec![]),
        "obstacle-1" => obstacle_task(name, vec![obstacle(obstacle_one(), HIGH_RISK)]),
        "obstacle-2" => obstacle_task(
            name,
            vec![obstacle(obstacle_one(), HIGH_RISK), obstacle(obstacle_two(), HIGH_RISK)],
        ),
        "risk-levels" => risk_levels(name, HIGH_RISK, HIGH_RISK),
        "risk-levels-low-left" => risk_levels(name, LOW_RISK, HIGH_RISK),
        "risk-levels-low-right" => risk_levels(name, HIGH_RISK, LOW_RISK),
        "online-follow" => online_follow(),
        "online-avoid" => online_avoid(),
        other => return Err(ControlError::UnknownPreset(other.into())),
    })
}
