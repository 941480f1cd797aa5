use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Serialize;
use softarm_control::planner::{plan_offline, PlannerSettings};
use softarm_control::{preset, run_closed_loop, Controller, ControllerKind, Pilot, TaskSpec, TrajectoryLog, PRESET_NAMES};
use softarm_core::babble::BabbleSchedule;
use softarm_core::dataset::{collect_dataset, dataset_read, dataset_write};
use softarm_core::plant::{DisturbanceParams, Plant};
use softarm_core::{ArmGeometry, ModuleConfiguration};
use softarm_neural::train::EpochRecord;
use softarm_neural::{model_load, model_save, nn_c2s_forward, train_c2a, train_c2s, BiLstmSpec, ModelBundle, TrainConfig, TrainReport};

use crate::report::{render_table, report_rows};
use crate::{CollectArgs, GeomArgs, ModelArgs, PlanArgs, ReportArgs, RunArgs, TrainArgs};

pub const FORWARD_MODEL_FILE: &str = "c2s.bin";
pub const CONTROLLER_MODEL_FILE: &str = "c2a.bin";

pub fn geometry(args: &GeomArgs) -> anyhow::Result<ArmGeometry> {
    let Some(path) = &args.geom else {
        return Ok(ArmGeometry::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let geom: ArmGeometry = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    geom.validate()?;
    Ok(geom)
}

pub fn read_task(path: &Path) -> anyhow::Result<TaskSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_forward(args: &ModelArgs) -> anyhow::Result<Arc<ModelBundle>> {
    let path = args.model.join(FORWARD_MODEL_FILE);
    let m = model_load(&path).with_context(|| format!("loading forward model {}", path.display()))?;
    Ok(Arc::new(m))
}

/// The learned controller, or an explicit error when it is needed but absent.
pub fn load_controller(args: &ModelArgs, kind: ControllerKind) -> anyhow::Result<Controller> {
    match kind {
        ControllerKind::Cc => Ok(Controller::Cc),
        ControllerKind::Nn => {
            let path = args.model.join(CONTROLLER_MODEL_FILE);
            let m = model_load(&path)
                .with_context(|| format!("the nn controller needs a trained controller model at {}", path.display()))?;
            Ok(Controller::Nn(Arc::new(m)))
        }
    }
}

pub fn collect(a: &CollectArgs) -> anyhow::Result<()> {
    let geom = geometry(&a.geom)?;
    let schedule = BabbleSchedule {
        total_samples: a.samples,
        seed: a.seed,
        ..Default::default()
    };
    let params = DisturbanceParams::default().with_seed(a.plant_seed);
    let ds = collect_dataset(&schedule, &params, &geom)?;
    dataset_write(&ds, &a.out)?;
    println!("wrote {} samples to {}", ds.len(), a.out.display());
    Ok(())
}

fn write_curve(path: &Path, epochs: &[EpochRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for e in epochs {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    forward: &'a TrainReport,
    controller: &'a TrainReport,
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let ds = dataset_read(&a.dataset)?;
    let cfg = TrainConfig {
        max_epochs: a.epochs,
        seed: a.seed,
        ..Default::default()
    };
    fs::create_dir_all(&a.out)?;
    let (forward, fr) = train_c2s(&ds, &BiLstmSpec::c2s(), &cfg)?;
    println!(
        "forward model: held-out error {:.2}% at epoch {} ({:.0} s)",
        fr.best_val_error_pct, fr.best_epoch, fr.elapsed_secs
    );
    let (controller, cr) = train_c2a(&ds, &BiLstmSpec::c2a(), &cfg)?;
    println!(
        "controller: held-out error {:.2}% at epoch {} ({:.0} s)",
        cr.best_val_error_pct, cr.best_epoch, cr.elapsed_secs
    );
    model_save(&forward, a.out.join(FORWARD_MODEL_FILE))?;
    model_save(&controller, a.out.join(CONTROLLER_MODEL_FILE))?;
    write_curve(&a.out.join("c2s-curve.csv"), &fr.epochs)?;
    write_curve(&a.out.join("c2a-curve.csv"), &cr.epochs)?;
    let summary = TrainSummary {
        forward: &fr,
        controller: &cr,
    };
    fs::write(a.out.join("train-report.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct PlannedStep {
    pub tick: usize,
    pub configs: Vec<[f64; 3]>,
    /// Tip position predicted by the forward model (m).
    pub predicted_tip: [f64; 3],
    pub cost: f64,
}

pub fn plan(a: &PlanArgs) -> anyhow::Result<()> {
    let task = match (&a.preset, &a.task) {
        (Some(name), None) => preset(name)?.task,
        (None, Some(path)) => read_task(path)?,
        _ => bail!("give exactly one of --preset or --task"),
    };
    let geom = geometry(&a.geom)?;
    let forward = load_forward(&a.model)?;
    let settings = PlannerSettings {
        max_bend: geom.max_bend(),
        ..Default::default()
    };
    let start = vec![ModuleConfiguration::STRAIGHT; geom.module_count];
    let plan = plan_offline(&start, &task, &forward, &settings)?;
    let mut steps = Vec::with_capacity(plan.len());
    for (tick, s) in plan.iter().enumerate() {
        let tip = nn_c2s_forward(&forward, &s.configs)?.tip_position();
        steps.push(PlannedStep {
            tick,
            configs: s.configs.iter().map(|c| c.to_array()).collect(),
            predicted_tip: [tip.x, tip.y, tip.z],
            cost: s.cost,
        });
    }
    fs::write(&a.out, serde_json::to_string_pretty(&steps)?)?;
    println!("wrote {} planned steps to {}", steps.len(), a.out.display());
    Ok(())
}

pub fn log_file_name(log: &TrajectoryLog) -> String {
    format!(
        "{}-{}-seed{}.log",
        log.header.task.name,
        log.header.controller.name(),
        log.header.seed
    )
}

pub fn run(a: &RunArgs) -> anyhow::Result<()> {
    let p = preset(&a.preset)?;
    let geom = geometry(&a.geom)?;
    let kind = a.controller.unwrap_or(p.controller);
    let forward = load_forward(&a.model)?;
    let controller = load_controller(&a.model, kind)?;
    let seeds = if a.seeds.is_empty() { p.seeds.clone() } else { a.seeds.clone() };
    let ticks = a.ticks.unwrap_or(p.ticks);
    fs::create_dir_all(&a.out)?;
    let mut logs = Vec::with_capacity(seeds.len());
    let mut paths: Vec<PathBuf> = Vec::new();
    for seed in seeds {
        let mut plant = Plant::new(geom, DisturbanceParams::default().with_seed(seed))?;
        let mut pilot = Pilot::new(
            p.task.clone(),
            p.mode,
            forward.clone(),
            controller.clone(),
            geom,
            &plant.encoder_configs(),
        )?;
        let log = run_closed_loop(&mut pilot, &mut plant, ticks)?;
        let path = a.out.join(log_file_name(&log));
        log.write(&path)?;
        paths.push(path);
        logs.push(log);
    }
    let rows = report_rows(&logs);
    let table = render_table(&rows);
    fs::write(a.out.join("report.txt"), &table)?;
    fs::write(a.out.join("report.json"), serde_json::to_string_pretty(&rows)?)?;
    print!("{table}");
    let decide: Vec<f64> = logs.iter().flat_map(|l| l.ticks.iter().map(|t| t.decide_ms)).collect();
    if !decide.is_empty() {
        eprintln!(
            "decision time: mean {:.1} ms, max {:.1} ms",
            decide.iter().sum::<f64>() / decide.len() as f64,
            decide.iter().copied().fold(0.0, f64::max)
        );
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> anyhow::Result<()> {
    let logs = a
        .logs
        .iter()
        .map(|p| TrajectoryLog::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = report_rows(&logs);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        print!("{}", render_table(&rows));
    }
    if let Some(dir) = &a.series {
        fs::create_dir_all(dir)?;
        for log in &logs {
            let name = log_file_name(log).replace(".log", ".csv");
            crate::report::write_series(log, &dir.join(name))?;
        }
    }
    Ok(())
}

pub fn list_presets() {
    for name in PRESET_NAMES {
        let p = preset(name).expect("listed presets exist");
        println!(
            "{name:<24} {:<8} {:<3} {} ticks, seeds {:?}",
            format!("{:?}", p.mode).to_lowercase(),
            p.controller.name(),
            p.ticks,
            p.seeds
        );
    }
}
