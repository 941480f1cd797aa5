//! Closed-loop execution: encoder reading, planning, control, plant.
//!
//! [`Pilot`] is everything that decides actions. It only ever sees encoder
//! configurations; the runner feeds it from a [`Plant`] and logs ground truth
//! next to its decisions for evaluation.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use softarm_core::plant::Plant;
use softarm_core::{ArmGeometry, ModuleAction, ModuleConfiguration};
use softarm_neural::ModelBundle;

use crate::controller::{ControlHistory, Controller, ControllerKind};
use crate::losses::LossBreakdown;
use crate::planner::{plan_offline, plan_step, PlanStepResult, PlannerSettings};
use crate::task::TaskSpec;
use crate::ControlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    /// The whole configuration trajectory is planned before the first tick.
    Offline,
    /// One planning step per tick, warm-started from the encoder reading.
    Online,
}

/// What the pilot decided in one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotStep {
    pub target_configs: Vec<ModuleConfiguration>,
    pub actions: Vec<ModuleAction>,
    pub breakdown: LossBreakdown,
    /// Planner failed; the previous action was held.
    pub degraded: bool,
    /// The learned controller fell back to the model-based one.
    pub fallback: bool,
}

/// Planner plus controller, driven by encoder readings only.
#[derive(Debug, Clone)]
pub struct Pilot {
    pub task: TaskSpec,
    pub mode: PlanMode,
    pub settings: PlannerSettings,
    forward: Arc<ModelBundle>,
    controller: Controller,
    geom: ArmGeometry,
    history: ControlHistory,
    offline: Vec<PlanStepResult>,
    tick: usize,
    last_actions: Vec<ModuleAction>,
}

impl Pilot {
    /// `start` is the encoder reading before the first tick; offline tasks are
    /// planned from it immediately.
    pub fn new(
        task: TaskSpec,
        mode: PlanMode,
        forward: Arc<ModelBundle>,
        controller: Controller,
        geom: ArmGeometry,
        start: &[ModuleConfiguration],
    ) -> Result<Self, ControlError> {
        task.validate(geom.module_count)?;
        let settings = PlannerSettings {
            max_bend: geom.max_bend(),
            ..PlannerSettings::default()
        };
        let offline = match mode {
            PlanMode::Offline => plan_offline(start, &task, &forward, &settings)?,
            PlanMode::Online => Vec::new(),
        };
        Ok(Self {
            task,
            mode,
            settings,
            forward,
            controller,
            geom,
            history: ControlHistory::new(),
            offline,
            tick: 0,
            last_actions: vec![ModuleAction::ZERO; geom.module_count],
        })
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    pub fn controller_kind(&self) -> ControllerKind {
        self.controller.kind()
    }

    /// Swaps the controller; the history carries over.
    pub fn set_controller(&mut self, controller: Controller) {
        self.controller = controller;
    }

    /// Replaces the task (online mode reads it at every tick).
    pub fn set_task(&mut self, task: TaskSpec) -> Result<(), ControlError> {
        task.validate(self.geom.module_count)?;
        self.task = task;
        Ok(())
    }

    pub fn offline_plan(&self) -> &[PlanStepResult] {
        &self.offline
    }

    /// Decides the actions for the next tick from the current encoder reading.
    pub fn step(&mut self, encoder: &[ModuleConfiguration]) -> Result<PilotStep, ControlError> {
        let k = self.tick;
        self.tick += 1;
        self.history.push_config(encoder);
        let plan = match self.mode {
            PlanMode::Offline => match self.offline.get(k).or(self.offline.last()) {
                Some(p) => p.clone(),
                None => hold(encoder),
            },
            PlanMode::Online => plan_step(encoder, &self.task.at(k), &self.forward, &self.settings)?,
        };
        if plan.error.is_some() {
            let actions = self.last_actions.clone();
            self.history.push_action(&actions, &self.geom);
            return Ok(PilotStep {
                target_configs: encoder.to_vec(),
                actions,
                breakdown: plan.breakdown,
                degraded: true,
                fallback: false,
            });
        }
        let out = self.controller.control(&plan.configs, &self.history, &self.geom)?;
        self.history.push_action(&out.actions, &self.geom);
        self.last_actions = out.actions.clone();
        Ok(PilotStep {
            target_configs: plan.configs,
            actions: out.actions,
            breakdown: plan.breakdown,
            degraded: false,
            fallback: out.fallback,
        })
    }
}

fn hold(encoder: &[ModuleConfiguration]) -> PlanStepResult {
    PlanStepResult {
        configs: encoder.to_vec(),
        cost: 0.0,
        breakdown: LossBreakdown::default(),
        initial_cost: 0.0,
        best_iteration: 0,
        error: None,
    }
}

/// One logged tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Encoder reading the pilot acted on, 3 per module.
    pub encoder_configs: Vec<f64>,
    /// Planned configurations, 3 per module.
    pub target_configs: Vec<f64>,
    /// Applied cable displacements, normalized, 3 per module.
    pub actions: Vec<f64>,
    /// Ground-truth state after the tick `[p, o]` per module. Evaluation only.
    pub true_state: Vec<f64>,
    pub losses: LossBreakdown,
    pub degraded: bool,
    pub fallback: bool,
    /// Time spent deciding the tick (ms).
    pub decide_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub task: TaskSpec,
    pub mode: PlanMode,
    pub controller: ControllerKind,
    pub seed: u64,
    pub geometry: ArmGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
}

pub const LOG_MAGIC: &str = "# softarm-log v1 ";

/// Runs `ticks` closed-loop ticks.
pub fn run_closed_loop(
    pilot: &mut Pilot,
    plant: &mut Plant,
    ticks: usize,
) -> Result<TrajectoryLog, ControlError> {
    let geom = *plant.geometry();
    let mut log = TrajectoryLog {
        header: LogHeader {
            task: pilot.task.clone(),
            mode: pilot.mode,
            controller: pilot.controller_kind(),
            seed: plant.params().seed,
            geometry: geom,
        },
        ticks: Vec::with_capacity(ticks),
    };
    for k in 0..ticks {
        let encoder = plant.encoder_configs();
        let started = Instant::now();
        let step = pilot.step(&encoder)?;
        let decide_ms = started.elapsed().as_secs_f64() * 1e3;
        let obs = plant.step(&step.actions)?;
        log.ticks.push(TickRecord {
            tick: k as u64,
            encoder_configs: encoder.iter().flat_map(|c| c.to_array()).collect(),
            target_configs: step.target_configs.iter().flat_map(|c| c.to_array()).collect(),
            actions: step.actions.iter().flat_map(|a| a.normalized(&geom)).collect(),
            true_state: obs.true_state.to_vec(),
            losses: step.breakdown,
            degraded: step.degraded,
            fallback: step.fallback,
            decide_ms,
        });
    }
    Ok(log)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ControlError + '_ {
    move |source| ControlError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl TrajectoryLog {
    /// Writes a JSON header line followed by one JSON record per tick.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ControlError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        let header = serde_json::to_string(&self.header).expect("header serializes");
        writeln!(w, "{LOG_MAGIC}{header}").map_err(io_err(path))?;
        for t in &self.ticks {
            let line = serde_json::to_string(t).expect("record serializes");
            writeln!(w, "{line}").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<TrajectoryLog, ControlError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let bad = |line: u64, message: String| ControlError::LogParse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let first = lines
            .next()
            .ok_or_else(|| bad(1, "empty file".into()))?
            .map_err(io_err(path))?;
        let json = first
            .strip_prefix(LOG_MAGIC)
            .ok_or_else(|| bad(1, "missing log header".into()))?;
        let header: LogHeader = serde_json::from_str(json).map_err(|e| bad(1, e.to_string()))?;
        let mut ticks = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TickRecord =
                serde_json::from_str(&line).map_err(|e| bad(i as u64 + 2, e.to_string()))?;
            ticks.push(rec);
        }
        Ok(TrajectoryLog { header, ticks })
    }
}
