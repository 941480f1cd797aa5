mod common;

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use softarm_control::controller::{bend_limit, limit_slew, SLEW_LIMIT};
use softarm_control::runner::TickRecord;
use softarm_control::*;
use softarm_core::plant::{DisturbanceParams, Plant};
use softarm_core::{arc_to_config, config_to_arc, estimate_arc, ArcParams, ArmGeometry, ModuleAction, ModuleConfiguration};

use common::{toy_controller, toy_forward};

#[test]
fn cc_control_inverts_reachable_configurations() {
    let geom = ArmGeometry::default();
    for k in 0..200 {
        let dir = -3.1 + 6.2 * k as f64 / 199.0;
        let bend = 0.95 * bend_limit(dir, &geom) * ((k % 7) as f64 / 6.0);
        let target = arc_to_config(&ArcParams::new(bend, dir));
        let action = cc_control(&[target], &geom).unwrap()[0];
        let back = arc_to_config(&estimate_arc(&action, &geom).unwrap());
        assert_abs_diff_eq!(back.ox, target.ox, epsilon = 1e-12);
        assert_abs_diff_eq!(back.oy, target.oy, epsilon = 1e-12);
        assert_abs_diff_eq!(back.oz, target.oz, epsilon = 1e-12);
    }
}

#[test]
fn bend_limit_is_tight() {
    let geom = ArmGeometry::default();
    // along a cable the limit is the largest single displacement
    assert_abs_diff_eq!(bend_limit(std::f64::consts::FRAC_PI_2, &geom), 1.5, epsilon = 1e-12);
    // between cables it reaches the hexagon corner
    assert_abs_diff_eq!(bend_limit(0.0, &geom), geom.max_bend(), epsilon = 1e-12);
}

proptest! {
    #[test]
    fn saturation_keeps_direction_and_range(bend in 0.0f64..3.0, dir in -std::f64::consts::PI..std::f64::consts::PI) {
        let geom = ArmGeometry::default();
        let target = arc_to_config(&ArcParams::new(bend, dir));
        let action = cc_control(&[target], &geom).unwrap()[0];
        action.validate(&geom).unwrap();
        let arc = estimate_arc(&action, &geom).unwrap();
        let want = config_to_arc(&target);
        prop_assert!(arc.bend_angle <= want.bend_angle + 1e-12);
        if arc.bend_angle > 1e-9 {
            let d = softarm_core::pcc::wrap_angle(arc.neutral_direction - want.neutral_direction);
            prop_assert!(d.abs() <= 1e-9);
        }
    }

    #[test]
    fn slew_limit_keeps_actions_valid(
        a in proptest::array::uniform2(-1.0f64..1.0),
        b in proptest::array::uniform2(-1.0f64..1.0),
    ) {
        let geom = ArmGeometry::default();
        let make = |v: [f64; 2]| {
            let arc = ArcParams::from_bend_vector([v[0] * 1.4, v[1] * 1.4]);
            cc_control(&[arc_to_config(&arc)], &geom).unwrap()[0]
        };
        let (prev, next) = (make(a), make(b));
        let out = limit_slew(&[prev], &[next], SLEW_LIMIT)[0];
        out.validate(&geom).unwrap();
        for i in 0..3 {
            prop_assert!((out.cables[i] - prev.cables[i]).abs() <= SLEW_LIMIT + 1e-15);
        }
    }
}

#[test]
fn learned_controller_falls_back_until_history_is_full() {
    let geom = ArmGeometry::default();
    let model = toy_controller(1);
    let mut history = ControlHistory::new();
    let target = vec![arc_to_config(&ArcParams::new(0.4, 1.0)); 3];
    for tick in 0..6 {
        history.push_config(&[ModuleConfiguration::STRAIGHT; 3]);
        let out = nn_control(&model, &target, &history, &geom).unwrap();
        assert_eq!(out.fallback, tick < 5, "tick {tick}");
        if out.fallback {
            assert_eq!(out.actions, cc_control(&target, &geom).unwrap());
        }
        for a in &out.actions {
            a.validate(&geom).unwrap();
        }
        history.push_action(&out.actions, &geom);
    }
}

fn run(kind: ControllerKind, mode: PlanMode, seed: u64, ticks: usize) -> TrajectoryLog {
    let geom = ArmGeometry::default();
    let forward = Arc::new(toy_forward(11));
    let controller = match kind {
        ControllerKind::Cc => Controller::Cc,
        ControllerKind::Nn => Controller::Nn(Arc::new(toy_controller(12))),
    };
    let mut task = TaskSpec::new("loop", 0.5);
    task.position_targets.push(PositionTarget {
        module: 2,
        position: [0.1, 0.05, 0.5],
        weight: 1.0,
        constraint: false,
    });
    task.waypoints = (0..ticks)
        .map(|k| Waypoint {
            positions: vec![[0.1 + 0.002 * k as f64, 0.05, 0.5]],
            ..Default::default()
        })
        .collect();
    let mut plant = Plant::new(geom, DisturbanceParams::default().with_seed(seed)).unwrap();
    let mut pilot = Pilot::new(task, mode, forward, controller, geom, &plant.encoder_configs()).unwrap();
    run_closed_loop(&mut pilot, &mut plant, ticks).unwrap()
}

fn without_timing(mut log: TrajectoryLog) -> TrajectoryLog {
    for t in &mut log.ticks {
        t.decide_ms = 0.0;
    }
    log
}

#[test]
fn closed_loop_is_deterministic_per_seed() {
    for mode in [PlanMode::Online, PlanMode::Offline] {
        let a = without_timing(run(ControllerKind::Nn, mode, 3, 20));
        let b = without_timing(run(ControllerKind::Nn, mode, 3, 20));
        assert_eq!(a, b);
        let c = without_timing(run(ControllerKind::Nn, mode, 4, 20));
        assert_ne!(a.ticks.last().unwrap().true_state, c.ticks.last().unwrap().true_state);
    }
}

/// Replays the logged encoder readings through a fresh pilot.
fn replay(log: &TrajectoryLog) -> Vec<Vec<f64>> {
    let geom = log.header.geometry;
    let controller = match log.header.controller {
        ControllerKind::Cc => Controller::Cc,
        ControllerKind::Nn => Controller::Nn(Arc::new(toy_controller(12))),
    };
    let reading = |r: &TickRecord| -> Vec<ModuleConfiguration> {
        r.encoder_configs
            .chunks_exact(3)
            .map(|c| ModuleConfiguration { ox: c[0], oy: c[1], oz: c[2] })
            .collect()
    };
    let mut pilot = Pilot::new(
        log.header.task.clone(),
        log.header.mode,
        Arc::new(toy_forward(11)),
        controller,
        geom,
        &reading(&log.ticks[0]),
    )
    .unwrap();
    log.ticks
        .iter()
        .map(|r| {
            let step = pilot.step(&reading(r)).unwrap();
            step.actions.iter().flat_map(|a| a.normalized(&geom)).collect()
        })
        .collect()
}

#[test]
fn actions_depend_on_encoder_readings_only() {
    for kind in [ControllerKind::Cc, ControllerKind::Nn] {
        for mode in [PlanMode::Online, PlanMode::Offline] {
            let log = run(kind, mode, 5, 15);
            let mut corrupted = log.clone();
            for t in &mut corrupted.ticks {
                for v in &mut t.true_state {
                    *v = -*v + 0.37;
                }
            }
            let logged: Vec<Vec<f64>> = log.ticks.iter().map(|t| t.actions.clone()).collect();
            assert_eq!(replay(&log), logged);
            assert_eq!(replay(&corrupted), logged);
        }
    }
}

#[test]
fn trajectory_log_round_trip() {
    let log = run(ControllerKind::Nn, PlanMode::Online, 6, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.log");
    log.write(&path).unwrap();
    assert_eq!(TrajectoryLog::read(&path).unwrap(), log);
    std::fs::write(&path, "garbage\n").unwrap();
    assert!(TrajectoryLog::read(&path).is_err());
}

#[test]
fn applied_actions_are_always_valid() {
    let geom = ArmGeometry::default();
    for kind in [ControllerKind::Cc, ControllerKind::Nn] {
        let log = run(kind, PlanMode::Online, 7, 25);
        for t in &log.ticks {
            for c in t.actions.chunks_exact(3) {
                ModuleAction::from_normalized([c[0], c[1], c[2]], &geom)
                    .validate(&geom)
                    .unwrap();
            }
        }
    }
}

#[test]
fn summary_statistics_match_hand_values() {
    let s = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(s.mean, 2.5);
    assert_abs_diff_eq!(s.std, 1.25f64.sqrt(), epsilon = 1e-15);
    assert!(MeanStd::of(&[]).is_none());
}

#[test]
fn orientation_metrics_split_tilt_and_heading() {
    use softarm_control::metrics::tick_errors;
    use softarm_control::runner::LogHeader;
    let mut task = TaskSpec::new("o", 0.5);
    let target = [50f64.to_radians().sin(), 0.0, 50f64.to_radians().cos()];
    task.orientation_targets.push(OrientationTarget {
        module: 2,
        orientation: target,
        weight: 2.0,
    });
    // achieved: tilt 45°, heading 10°
    let (t, h) = (45f64.to_radians(), 10f64.to_radians());
    let mut state = vec![0.0; 18];
    state[12..18].copy_from_slice(&[0.1, 0.2, 0.5, t.sin() * h.cos(), t.sin() * h.sin(), t.cos()]);
    let log = TrajectoryLog {
        header: LogHeader {
            task,
            mode: PlanMode::Online,
            controller: ControllerKind::Cc,
            seed: 0,
            geometry: ArmGeometry::default(),
        },
        ticks: vec![TickRecord {
            tick: 0,
            encoder_configs: vec![],
            target_configs: vec![],
            actions: vec![],
            true_state: state,
            losses: Default::default(),
            degraded: false,
            fallback: false,
            decide_ms: 0.0,
        }],
    };
    let e = tick_errors(&log);
    assert_abs_diff_eq!(e.orientation_z[0], 5.0, epsilon = 1e-9);
    assert_abs_diff_eq!(e.orientation_x[0], 10.0, epsilon = 1e-9);
    assert!(e.position.is_empty());
}

fn targets() -> Vec<ModuleConfiguration> {
    [(0.3, 0.4), (0.5, -1.2), (0.2, 2.0)]
        .iter()
        .map(|(b, d)| arc_to_config(&ArcParams::new(*b, *d)))
        .collect()
}

fn max_gap(a: &[ModuleConfiguration], b: &[ModuleConfiguration]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.vector() - y.vector()).amax()).fold(0.0, f64::max)
}

#[test]
fn ideal_plant_reaches_cc_target_in_one_step() {
    let geom = ArmGeometry::default();
    let mut plant = Plant::new(geom, DisturbanceParams::ideal(1)).unwrap();
    let target = targets();
    let obs = plant.step(&cc_control(&target, &geom).unwrap()).unwrap();
    assert!(max_gap(&obs.true_configs, &target) <= 1e-9);
}

#[test]
fn slew_limited_cc_settles_on_a_constant_target() {
    let geom = ArmGeometry::default();
    let mut plant = Plant::new(geom, DisturbanceParams::ideal(2)).unwrap();
    let target = targets();
    let wanted = cc_control(&target, &geom).unwrap();
    let mut applied = vec![ModuleAction::ZERO; 3];
    let mut last = None;
    for _ in 0..200 {
        applied = limit_slew(&applied, &wanted, SLEW_LIMIT);
        last = Some(plant.step(&applied).unwrap());
    }
    assert!(max_gap(&last.unwrap().true_configs, &target) <= 1e-6);
}
