//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances are pinned below.
//!
//! Run alone with `cargo test -p softarm-control --test acceptance`.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use nalgebra::Vector3;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softarm_control::runner::TickRecord;
use softarm_control::*;
use softarm_core::babble::BabbleSchedule;
use softarm_core::dataset::{collect_dataset, Dataset};
use softarm_core::plant::{DisturbanceParams, Plant};
use softarm_core::*;
use softarm_neural::bilstm::{bilstm_forward, sum_and_range_node, BiLstmVars};
use softarm_neural::{sum_and_range, BiLstmSpec, BiLstmWeights, Graph, NeuralError, Var};

use common::trained::{self, Trained};

const ROUND_TRIP_TOL: f64 = 1e-9;
const ROUND_TRIP_SECS: f64 = 1.0;
const FK_TOL_M: f64 = 1e-7;
const FK_SEGMENTS: usize = 10_000;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_SECS: f64 = 30.0;
const ZERO_SUM_TOL: f64 = 1e-12;
const SATURATED_CASE_TOL: f64 = 1e-4;
const ENCODER_GAP_DEG: (f64, f64) = (4.0, 16.0);
const C2S_MAX_ERROR_PCT: f64 = 3.0;
const C2A_MAX_ERROR_PCT: f64 = 4.0;
const TRAIN_MAX_SECS: f64 = 30.0 * 60.0;
/// Mean tip error limit as a fraction of the arm length.
const POSITION_FRACTION: f64 = 0.04;
const ORIENT_MAX_DEG: f64 = 6.0;
/// Executed tip must stay this fraction of r away from each obstacle center.
const CLEARANCE_FRACTION: f64 = 0.8;
const MIN_RATE_HZ: f64 = 10.0;
const ONLINE_TICKS: usize = 100;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome { name, pass, detail }
}

fn main() {
    let mut results = vec![
        kinematic_round_trips(),
        fk_oracle(),
        autodiff(),
        sum_and_range_criterion(),
        plant_calibration(),
    ];
    let (quality, models) = model_quality();
    results.push(quality);
    results.push(position_task(&models));
    results.push(orientation_task(&models));
    results.push(obstacle_task(&models));
    results.push(risk_levels(&models));
    results.push(online_rate(&models));
    results.push(sensor_only(&models));

    let failed: Vec<&Outcome> = results.iter().filter(|r| !r.pass).collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    for f in &failed {
        println!("  failed {}: {}", f.name, f.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- kinematics

fn kinematic_round_trips() -> Outcome {
    let geom = ArmGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let arcs: Vec<ArcParams> = (0..1000)
        .map(|_| ArcParams::new(1.5 * (1.0 - rng.random::<f64>()), rng.random_range(-PI..PI)))
        .collect();
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for arc in &arcs {
        let back = estimate_arc(&arc_to_action(arc, &geom).expect("in range"), &geom).expect("valid");
        worst = worst.max((back.bend_angle - arc.bend_angle).abs());
        worst = worst.max(pcc::wrap_angle(back.neutral_direction - arc.neutral_direction).abs());
        let c = arc_to_config(arc);
        let again = arc_to_config(&config_to_arc(&c));
        worst = worst.max((again.vector() - c.vector()).amax());
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        "kinematic round trips",
        worst <= ROUND_TRIP_TOL && secs < ROUND_TRIP_SECS,
        format!("worst {worst:.2e} (tol {ROUND_TRIP_TOL:e}), {secs:.3} s (limit {ROUND_TRIP_SECS} s)"),
    )
}

/// Tip of a constant-curvature backbone by midpoint integration of its
/// tangent, which turns at a constant rate in the plane of azimuth θ − π/2.
fn integrate_arc(bend: f64, direction: f64, length: f64) -> Vector3<f64> {
    let azimuth = direction - FRAC_PI_2;
    let ds = length / FK_SEGMENTS as f64;
    (0..FK_SEGMENTS).fold(Vector3::zeros(), |p, k| {
        let a = bend * (k as f64 + 0.5) / FK_SEGMENTS as f64;
        p + Vector3::new(a.sin() * azimuth.cos(), a.sin() * azimuth.sin(), a.cos()) * ds
    })
}

fn fk_oracle() -> Outcome {
    let geom = ArmGeometry::default();
    let mut worst: f64 = 0.0;
    for i in 0..=30 {
        let bend = 1.5 * i as f64 / 30.0;
        for j in 0..32 {
            let dir = -PI + 2.0 * PI * j as f64 / 32.0;
            let t = module_transform(&ArcParams::new(bend, dir), &geom);
            worst = worst.max((t.translation - integrate_arc(bend, dir, geom.module_length)).norm());
        }
    }
    outcome(
        "forward kinematics oracle",
        worst <= FK_TOL_M,
        format!("worst translation error {worst:.2e} m (tol {FK_TOL_M:e})"),
    )
}

// ------------------------------------------------------------------ autodiff

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// ‖a − n‖ / (‖a‖ + ‖n‖) over a whole gradient.
fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

type Builder = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var, NeuralError>>;

/// Relative error of the tape gradient against central differences.
fn gradient_error(inputs: &[Array2<f64>], f: &Builder) -> f64 {
    const H: f64 = 1e-5;
    let eval = |xs: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let out = f(&mut g, &vars).expect("graph builds");
        (g, vars, out)
    };
    let (g, vars, out) = eval(inputs);
    let grads = g.backward(out).expect("scalar output");
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for (k, x) in inputs.iter().enumerate() {
        let ga = grads.get(vars[k]).cloned().unwrap_or_else(|| Array2::zeros(x.dim()));
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                let mut plus = inputs.to_vec();
                plus[k][[r, c]] += H;
                let mut minus = inputs.to_vec();
                minus[k][[r, c]] -= H;
                let (gp, _, op) = eval(&plus);
                let (gm, _, om) = eval(&minus);
                numeric.push((gp.scalar_value(op) - gm.scalar_value(om)) / (2.0 * H));
                analytic.push(ga[[r, c]]);
            }
        }
    }
    rel_err(&analytic, &numeric)
}

fn project(g: &mut Graph, v: Var) -> Result<Var, NeuralError> {
    let (r, c) = g.value(v).dim();
    let w = g.leaf(Array2::from_shape_fn((r, c), |(i, j)| 0.3 + 0.17 * i as f64 - 0.11 * j as f64));
    let p = g.mul(v, w)?;
    Ok(g.sum(p))
}

fn network_case(spec: BiLstmSpec, controller: bool, modules: usize, seed: u64) -> (Vec<Array2<f64>>, Builder) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = BiLstmWeights::init(&spec, &mut rng);
    let mut inputs: Vec<Array2<f64>> = weights.params().into_iter().cloned().collect();
    let n_params = inputs.len();
    for _ in 0..modules {
        inputs.push(random(2, spec.input_size, &mut rng, -1.0, 1.0));
    }
    let targets: Vec<Array2<f64>> = (0..modules)
        .map(|_| random(2, spec.output_size, &mut rng, -0.5, 0.5))
        .collect();
    let f: Builder = Box::new(move |g, v| {
        let vars = BiLstmVars {
            params: v[..n_params].to_vec(),
        };
        let outs = bilstm_forward(g, &spec, &vars, &v[n_params..])?;
        let mut total = g.scalar(0.0);
        for (o, t) in outs.iter().zip(&targets) {
            let o = if controller { sum_and_range_node(g, *o)? } else { *o };
            let t = g.leaf(t.clone());
            let d = g.sub(o, t)?;
            let d = g.square(d);
            let d = g.mean(d);
            total = g.add(total, d)?;
        }
        Ok(total)
    });
    (inputs, f)
}

fn autodiff() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = random(3, 4, &mut rng, -1.0, 1.0);
    let b = random(3, 4, &mut rng, -1.0, 1.0);
    let row = random(1, 4, &mut rng, -1.0, 1.0);
    let m = random(4, 2, &mut rng, -1.0, 1.0);
    let pos = random(3, 4, &mut rng, 0.5, 2.0);
    let spread = a.mapv(|x| if x.abs() < 0.05 { x + 0.2 } else { x });
    let triples = random(2, 3, &mut rng, -2.0, 2.0);
    let mut cases: Vec<(&str, Vec<Array2<f64>>, Builder)> = vec![
        ("matmul", vec![a.clone(), m], Box::new(|g, v| { let y = g.matmul(v[0], v[1])?; project(g, y) })),
        ("add", vec![a.clone(), row.clone()], Box::new(|g, v| { let y = g.add(v[0], v[1])?; project(g, y) })),
        ("sub", vec![a.clone(), b.clone()], Box::new(|g, v| { let y = g.sub(v[0], v[1])?; project(g, y) })),
        ("mul", vec![a.clone(), b.clone()], Box::new(|g, v| { let y = g.mul(v[0], v[1])?; project(g, y) })),
        ("tanh", vec![a.clone()], Box::new(|g, v| { let y = g.tanh(v[0]); project(g, y) })),
        ("sigmoid", vec![a.clone()], Box::new(|g, v| { let y = g.sigmoid(v[0]); project(g, y) })),
        ("square", vec![a.clone()], Box::new(|g, v| { let y = g.square(v[0]); project(g, y) })),
        ("sqrt", vec![pos.clone()], Box::new(|g, v| { let y = g.sqrt(v[0]); project(g, y) })),
        ("reciprocal", vec![pos], Box::new(|g, v| { let y = g.reciprocal(v[0]); project(g, y) })),
        ("max_const", vec![spread], Box::new(|g, v| { let y = g.max_const(v[0], 0.0); project(g, y) })),
        ("concat", vec![a.clone(), b], Box::new(|g, v| { let y = g.concat(&[v[0], v[1]])?; project(g, y) })),
        ("slice", vec![a.clone()], Box::new(|g, v| { let y = g.slice(v[0], 1, 3)?; project(g, y) })),
        ("sum", vec![a.clone()], Box::new(|g, v| { let y = g.square(v[0]); Ok(g.sum(y)) })),
        ("mean", vec![a.clone()], Box::new(|g, v| { let y = g.square(v[0]); Ok(g.mean(y)) })),
        ("scale", vec![a.clone()], Box::new(|g, v| { let y = g.scale(v[0], -2.5); project(g, y) })),
        ("offset", vec![a], Box::new(|g, v| { let y = g.offset(v[0], 0.7); let y = g.square(y); project(g, y) })),
        ("sum_and_range", vec![triples], Box::new(|g, v| { let y = sum_and_range_node(g, v[0])?; project(g, y) })),
    ];
    let toy = |input_size, output_size| BiLstmSpec {
        layer_count: 2,
        hidden_size: 4,
        input_size,
        output_size,
    };
    let (inputs, f) = network_case(toy(3, 6), false, 3, 22);
    cases.push(("forward network", inputs, f));
    let (inputs, f) = network_case(toy(softarm_neural::C2A_FEATURES, 3), true, 3, 23);
    cases.push(("controller network", inputs, f));

    let mut worst = (0.0f64, "");
    for (name, inputs, f) in &cases {
        let e = gradient_error(inputs, f);
        if e >= worst.0 {
            worst = (e, name);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        "autodiff gradients",
        worst.0 <= GRAD_REL_TOL && secs < GRAD_SECS,
        format!(
            "{} cases, worst rel. error {:.2e} ({}) (tol {GRAD_REL_TOL:e}), {secs:.1} s (limit {GRAD_SECS} s)",
            cases.len(),
            worst.0,
            worst.1
        ),
    )
}

fn sum_and_range_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut worst_sum, mut in_range) = (0.0f64, true);
    for _ in 0..100_000 {
        let raw = [0; 3].map(|_| rng.random_range(-10.0..10.0));
        let a = sum_and_range(raw);
        worst_sum = worst_sum.max(a.iter().sum::<f64>().abs());
        in_range &= a.iter().all(|x| (-1.0..=1.0).contains(x));
    }
    let case = sum_and_range([10.0, -10.0, -10.0]);
    let case_err = [1.0, -0.5, -0.5]
        .iter()
        .zip(case)
        .map(|(w, a)| (w - a).abs())
        .fold(0.0, f64::max);
    outcome(
        "sum_and_range",
        worst_sum <= ZERO_SUM_TOL && in_range && case_err <= SATURATED_CASE_TOL,
        format!(
            "worst |sum| {worst_sum:.1e} (tol {ZERO_SUM_TOL:e}), in range {in_range}, (10,-10,-10) error {case_err:.1e} (tol {SATURATED_CASE_TOL:e})"
        ),
    )
}

// --------------------------------------------------------------------- plant

/// Mean angle (deg) between encoder and true configuration, per module.
fn encoder_gaps(ds: &Dataset) -> Vec<f64> {
    let n = ds.module_count();
    let mut sums = vec![0.0; n];
    for r in &ds.records {
        for (m, s) in sums.iter_mut().enumerate() {
            let e = Vector3::from_column_slice(&r.encoder_configs[3 * m..3 * m + 3]);
            let t = Vector3::from_column_slice(&r.true_configs[3 * m..3 * m + 3]);
            *s += e.dot(&t).clamp(-1.0, 1.0).acos().to_degrees();
        }
    }
    sums.iter().map(|s| s / ds.len() as f64).collect()
}

fn plant_calibration() -> Outcome {
    let geom = ArmGeometry::default();
    let mut pass = true;
    let mut rows = Vec::new();
    for seed in 1..=5 {
        let schedule = BabbleSchedule {
            seed,
            ..Default::default()
        };
        let ds = collect_dataset(&schedule, &DisturbanceParams::default().with_seed(seed), &geom)
            .expect("dataset");
        let g = encoder_gaps(&ds);
        pass &= g.windows(2).all(|w| w[0] < w[1]);
        pass &= g.iter().all(|x| (ENCODER_GAP_DEG.0..=ENCODER_GAP_DEG.1).contains(x));
        rows.push(format!("{:.1}/{:.1}/{:.1}", g[0], g[1], g[2]));
    }
    outcome(
        "plant calibration",
        pass,
        format!(
            "encoder gaps I/II/III deg per seed [{}] (need increasing, each in [{}, {}])",
            rows.join(", "),
            ENCODER_GAP_DEG.0,
            ENCODER_GAP_DEG.1
        ),
    )
}

// -------------------------------------------------------------------- models

fn model_quality() -> (Outcome, Trained) {
    let ds = trained::training_dataset();
    let started = Instant::now();
    let training = trained::train(&ds);
    let secs = started.elapsed().as_secs_f64();
    let (c2s, c2a) = (
        training.forward_report.best_val_error_pct,
        training.controller_report.best_val_error_pct,
    );
    let result = outcome(
        "model quality",
        c2s <= C2S_MAX_ERROR_PCT && c2a <= C2A_MAX_ERROR_PCT && secs <= TRAIN_MAX_SECS,
        format!(
            "{} samples, held-out error C2S {c2s:.2}% (limit {C2S_MAX_ERROR_PCT}%), C2A {c2a:.2}% (limit {C2A_MAX_ERROR_PCT}%), training {secs:.0} s (limit {TRAIN_MAX_SECS} s, {} epochs max)",
            ds.len(),
            trained::TRAIN_EPOCHS
        ),
    );
    (result, training.models)
}

// ---------------------------------------------------------------- closed loop

fn controller(kind: ControllerKind, models: &Trained) -> Controller {
    match kind {
        ControllerKind::Cc => Controller::Cc,
        ControllerKind::Nn => Controller::Nn(models.controller.clone()),
    }
}

fn run(preset: &ExperimentPreset, kind: ControllerKind, seed: u64, models: &Trained) -> TrajectoryLog {
    let geom = ArmGeometry::default();
    let mut plant = Plant::new(geom, DisturbanceParams::default().with_seed(seed)).expect("plant");
    let mut pilot = Pilot::new(
        preset.task.clone(),
        preset.mode,
        models.forward.clone(),
        controller(kind, models),
        geom,
        &plant.encoder_configs(),
    )
    .expect("pilot");
    run_closed_loop(&mut pilot, &mut plant, preset.ticks).expect("run")
}

fn runs(name: &str, kind: ControllerKind, models: &Trained) -> Vec<TrajectoryLog> {
    let p = preset(name).expect("preset");
    p.seeds.iter().map(|&s| run(&p, kind, s, models)).collect()
}

fn arm_length() -> f64 {
    ArmGeometry::default().arm_length()
}

fn position_task(models: &Trained) -> Outcome {
    let limit = POSITION_FRACTION * arm_length();
    let nn = runs("position-circle", ControllerKind::Nn, models);
    let cc = runs("position-circle", ControllerKind::Cc, models);
    let mean = |l: &TrajectoryLog| summarize(std::slice::from_ref(l)).position_error_m.expect("tracked").mean;
    let nn_all = summarize(&nn).position_error_m.expect("tracked");
    let cc_all = summarize(&cc).position_error_m.expect("tracked");
    let paired = nn.iter().zip(&cc).all(|(a, b)| mean(b) > mean(a));
    outcome(
        "position task",
        nn_all.mean <= limit && paired,
        format!(
            "NN {:.2}±{:.2} cm (limit {:.2} cm), CC {:.2}±{:.2} cm, CC worse on every paired seed: {paired}",
            100.0 * nn_all.mean,
            100.0 * nn_all.std,
            100.0 * limit,
            100.0 * cc_all.mean,
            100.0 * cc_all.std
        ),
    )
}

fn orientation_task(models: &Trained) -> Outcome {
    let logs = runs("orient-50", ControllerKind::Nn, models);
    let s = summarize(&logs);
    let z = s.orientation_error_z_deg.expect("orientation targets");
    outcome(
        "orientation task",
        z.mean <= ORIENT_MAX_DEG,
        format!(
            "orient-50 bend-angle error {:.2}±{:.2} deg (limit {ORIENT_MAX_DEG} deg)",
            z.mean, z.std
        ),
    )
}

fn tip(rec: &TickRecord) -> Vector3<f64> {
    RobotState::from_slice(&rec.true_state).tip_position()
}

/// Smallest executed tip distance to each obstacle center.
fn clearances(log: &TrajectoryLog) -> Vec<f64> {
    log.header
        .task
        .obstacles
        .iter()
        .map(|o| {
            let c = Vector3::from(o.center);
            log.ticks.iter().map(|r| (tip(r) - c).norm()).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn clear_of_all(log: &TrajectoryLog) -> bool {
    clearances(log)
        .iter()
        .zip(&log.header.task.obstacles)
        .all(|(d, o)| *d >= CLEARANCE_FRACTION * o.radius)
}

/// Distance to the final target averaged over the last ticks.
fn terminal_error(log: &TrajectoryLog) -> f64 {
    summarize(std::slice::from_ref(log))
        .terminal_position_error_m
        .expect("tracked")
        .mean
}

fn closest_approach(log: &TrajectoryLog, target: [f64; 3]) -> f64 {
    let t = Vector3::from(target);
    log.ticks.iter().map(|r| (tip(r) - t).norm()).fold(f64::INFINITY, f64::min)
}

fn fmt_m(v: &[f64]) -> String {
    v.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join("/")
}

fn obstacle_task(models: &Trained) -> Outcome {
    let tol = POSITION_FRACTION * arm_length();
    let mut pass = true;
    let mut rows = Vec::new();
    for name in ["obstacle-1", "obstacle-2"] {
        for log in runs(name, ControllerKind::Nn, models) {
            let (clear, term) = (clear_of_all(&log), terminal_error(&log));
            pass &= clear && term <= tol;
            rows.push(format!(
                "{name} seed {}: clearance {} m, terminal {:.3} m",
                log.header.seed,
                fmt_m(&clearances(&log)),
                term
            ));
        }
    }
    outcome(
        "obstacle task",
        pass,
        format!(
            "need clearance >= {CLEARANCE_FRACTION} r and terminal error <= {tol:.3} m; {}",
            rows.join("; ")
        ),
    )
}

fn risk_levels(models: &Trained) -> Outcome {
    let tol = POSITION_FRACTION * arm_length();
    let target = softarm_control::presets::reach_target();
    let mut pass = true;
    let mut rows = Vec::new();
    for log in runs("risk-levels", ControllerKind::Nn, models) {
        let closest = closest_approach(&log, target);
        let ok = clear_of_all(&log) && closest > tol;
        pass &= ok;
        rows.push(format!(
            "both high seed {}: closest to target {closest:.3} m, clearance {} m",
            log.header.seed,
            fmt_m(&clearances(&log))
        ));
    }
    for (name, low) in [("risk-levels-low-left", 0), ("risk-levels-low-right", 1)] {
        for log in runs(name, ControllerKind::Nn, models) {
            let c = clearances(&log);
            let term = terminal_error(&log);
            let nearer_low = c[low] < c[1 - low];
            pass &= clear_of_all(&log) && term <= tol && nearer_low;
            rows.push(format!(
                "{name} seed {}: terminal {term:.3} m, clearance {} m",
                log.header.seed,
                fmt_m(&c)
            ));
        }
    }
    outcome(
        "risk-level behavior",
        pass,
        format!(
            "both high: never within {tol:.3} m of the target and clear of both; one low: reaches target, passes nearer the low-risk obstacle; clearance >= {CLEARANCE_FRACTION} r throughout; {}",
            rows.join("; ")
        ),
    )
}

fn online_rate(models: &Trained) -> Outcome {
    let geom = ArmGeometry::default();
    let p = preset("online-follow").expect("preset");
    let mut task = p.task.clone();
    task.obstacles.push(Obstacle {
        center: [0.3, 0.1, 0.5],
        radius: 0.1,
        weight: 1.0,
        watched: vec![2],
    });
    let mut plant = Plant::new(geom, DisturbanceParams::default().with_seed(p.seeds[0])).expect("plant");
    let mut pilot = Pilot::new(
        task,
        PlanMode::Online,
        models.forward.clone(),
        controller(ControllerKind::Nn, models),
        geom,
        &plant.encoder_configs(),
    )
    .expect("pilot");
    let started = Instant::now();
    let mut slowest: f64 = 0.0;
    for _ in 0..ONLINE_TICKS {
        let t = Instant::now();
        let step = pilot.step(&plant.encoder_configs()).expect("step");
        plant.step(&step.actions).expect("plant");
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    let rate = ONLINE_TICKS as f64 / started.elapsed().as_secs_f64();
    outcome(
        "online loop rate",
        rate >= MIN_RATE_HZ,
        format!(
            "{rate:.1} Hz over {ONLINE_TICKS} ticks of plan_step + control + plant_step (need >= {MIN_RATE_HZ} Hz), slowest tick {:.1} ms",
            1e3 * slowest
        ),
    )
}

/// Replays logged encoder readings through a fresh pilot.
fn replay(log: &TrajectoryLog, models: &Trained) -> Vec<Vec<f64>> {
    let geom = log.header.geometry;
    let reading = |r: &TickRecord| -> Vec<ModuleConfiguration> {
        r.encoder_configs
            .chunks_exact(3)
            .map(|c| ModuleConfiguration { ox: c[0], oy: c[1], oz: c[2] })
            .collect()
    };
    let mut pilot = Pilot::new(
        log.header.task.clone(),
        log.header.mode,
        models.forward.clone(),
        controller(log.header.controller, models),
        geom,
        &reading(&log.ticks[0]),
    )
    .expect("pilot");
    log.ticks
        .iter()
        .map(|r| {
            let step = pilot.step(&reading(r)).expect("step");
            step.actions.iter().flat_map(|a| a.normalized(&geom)).collect()
        })
        .collect()
}

fn sensor_only(models: &Trained) -> Outcome {
    let mut pass = true;
    let mut checked = 0;
    for (name, ticks) in [("position-circle", 40), ("obstacle-1", 40), ("online-avoid", 20)] {
        let mut p = preset(name).expect("preset");
        p.ticks = ticks;
        for kind in [ControllerKind::Nn, ControllerKind::Cc] {
            let log = run(&p, kind, p.seeds[0], models);
            let mut corrupted = log.clone();
            for t in &mut corrupted.ticks {
                for v in &mut t.true_state {
                    *v = 0.37 - *v;
                }
            }
            let applied: Vec<Vec<f64>> = log.ticks.iter().map(|t| t.actions.clone()).collect();
            pass &= replay(&log, models) == applied && replay(&corrupted, models) == applied;
            checked += log.ticks.len();
        }
    }
    outcome(
        "sensor-only control",
        pass,
        format!("replayed {checked} ticks from encoder logs, with and without corrupted ground truth; actions identical: {pass}"),
    )
}

