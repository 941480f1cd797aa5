//! Interactive online session: commands are applied between ticks and each
//! tick produces a frame for display.
//!
//! Messages are JSON objects tagged by `"type"`. A client first sends
//! `{"type":"hello","version":1}`; the server answers with its own hello.
//! Afterwards the server streams `frame` messages and answers every command
//! with `ack` or `error`.

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use softarm_core::plant::{DisturbanceParams, Plant};
use softarm_core::ArmGeometry;
use softarm_neural::{nn_c2s_forward, ModelBundle};

use crate::controller::{Controller, ControllerKind};
use crate::losses::LossBreakdown;
use crate::runner::{PlanMode, Pilot};
use crate::task::{Obstacle, PositionTarget, TaskSpec};
use crate::ControlError;

pub const PROTOCOL_VERSION: u32 = 1;

/// Operator commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Sets (or adds) the tip position target.
    SetTarget { position: [f64; 3] },
    ClearTarget,
    AddObstacle { center: [f64; 3], radius: f64 },
    MoveObstacle { index: usize, center: [f64; 3] },
    /// Changes an obstacle's risk radius.
    SetRisk { index: usize, radius: f64 },
    RemoveObstacle { index: usize },
    SetController { controller: ControllerKind },
    Pause,
    Resume,
}

/// Client-to-server messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello { version: u32 },
    Command(Command),
}

/// Server-to-client messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { version: u32 },
    Frame(Box<Frame>),
    Ack { command: String },
    Error { reason: String },
}

/// Ground truth sent for display only; the pilot never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayState {
    pub positions: Vec<[f64; 3]>,
    pub orientations: Vec<[f64; 3]>,
    /// Distance from the tip to each obstacle center (m).
    pub obstacle_distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub paused: bool,
    pub controller: ControllerKind,
    pub encoder_configs: Vec<[f64; 3]>,
    pub planned_configs: Vec<[f64; 3]>,
    /// Normalized cable commands.
    pub actions: Vec<[f64; 3]>,
    /// Tip position predicted by the forward model for the plan.
    pub predicted_tip: [f64; 3],
    pub losses: LossBreakdown,
    pub target: Option<[f64; 3]>,
    pub obstacles: Vec<Obstacle>,
    pub degraded: bool,
    pub fallback: bool,
    pub display: DisplayState,
}

pub struct Session {
    plant: Plant,
    pilot: Pilot,
    forward: Arc<ModelBundle>,
    controller_model: Option<Arc<ModelBundle>>,
    paused: bool,
    last: Option<Frame>,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn controller_for(
    kind: ControllerKind,
    model: &Option<Arc<ModelBundle>>,
) -> Result<Controller, ControlError> {
    match kind {
        ControllerKind::Cc => Ok(Controller::Cc),
        ControllerKind::Nn => model
            .clone()
            .map(Controller::Nn)
            .ok_or(ControlError::MissingController),
    }
}

impl Session {
    pub fn new(
        task: TaskSpec,
        forward: Arc<ModelBundle>,
        controller_model: Option<Arc<ModelBundle>>,
        kind: ControllerKind,
        params: DisturbanceParams,
        geom: ArmGeometry,
    ) -> Result<Self, ControlError> {
        let plant = Plant::new(geom, params)?;
        let controller = controller_for(kind, &controller_model)?;
        let pilot = Pilot::new(
            task,
            PlanMode::Online,
            forward.clone(),
            controller,
            geom,
            &plant.encoder_configs(),
        )?;
        Ok(Self {
            plant,
            pilot,
            forward,
            controller_model,
            paused: false,
            last: None,
        })
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn task(&self) -> &TaskSpec {
        &self.pilot.task
    }

    /// Applies a command. Target and obstacle edits freeze any scripted
    /// waypoints at the current tick.
    pub fn apply(&mut self, cmd: &Command) -> Result<(), ControlError> {
        let n = self.pilot.task.obstacles.len();
        let check = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(ControlError::InvalidTask(format!("no obstacle {i}")))
            }
        };
        let mut task = self.pilot.task.at(self.pilot.tick());
        match cmd {
            Command::Pause => {
                self.paused = true;
                return Ok(());
            }
            Command::Resume => {
                self.paused = false;
                return Ok(());
            }
            Command::SetController { controller } => {
                let c = controller_for(*controller, &self.controller_model)?;
                self.pilot.set_controller(c);
                return Ok(());
            }
            Command::SetTarget { position } => {
                let tip = self.plant.geometry().module_count - 1;
                task.position_targets.retain(|t| t.module != tip || t.constraint);
                task.position_targets.push(PositionTarget {
                    module: tip,
                    position: *position,
                    weight: crate::presets::POSITION_WEIGHT,
                    constraint: false,
                });
            }
            Command::ClearTarget => task.position_targets.retain(|t| t.constraint),
            Command::AddObstacle { center, radius } => task.obstacles.push(Obstacle {
                center: *center,
                radius: *radius,
                weight: crate::presets::OBSTACLE_WEIGHT,
                watched: vec![self.plant.geometry().module_count - 1],
            }),
            Command::MoveObstacle { index, center } => {
                check(*index)?;
                task.obstacles[*index].center = *center;
            }
            Command::SetRisk { index, radius } => {
                check(*index)?;
                task.obstacles[*index].radius = *radius;
            }
            Command::RemoveObstacle { index } => {
                check(*index)?;
                task.obstacles.remove(*index);
            }
        }
        // waypoints are indexed from the session start, so keep the frozen
        // task as a static one
        self.pilot.set_task(task)
    }

    /// Advances one tick (unless paused) and returns the frame to display.
    pub fn tick(&mut self) -> Result<Frame, ControlError> {
        if self.paused {
            if let Some(f) = &self.last {
                return Ok(Frame {
                    paused: true,
                    target: self.target(),
                    obstacles: self.pilot.task.at(self.pilot.tick()).obstacles,
                    ..f.clone()
                });
            }
        }
        let geom = *self.plant.geometry();
        let encoder = self.plant.encoder_configs();
        let task_now = self.pilot.task.at(self.pilot.tick());
        let step = self.pilot.step(&encoder)?;
        let obs = self.plant.step(&step.actions)?;
        let predicted = nn_c2s_forward(&self.forward, &step.target_configs)?;
        let tip = obs.true_state.tip_position();
        let frame = Frame {
            tick: obs_tick(&self.plant),
            paused: self.paused,
            controller: self.pilot.controller_kind(),
            encoder_configs: encoder.iter().map(|c| c.to_array()).collect(),
            planned_configs: step.target_configs.iter().map(|c| c.to_array()).collect(),
            actions: step.actions.iter().map(|a| a.normalized(&geom)).collect(),
            predicted_tip: arr(&predicted.tip_position()),
            losses: step.breakdown,
            target: target_of(&task_now, geom.module_count - 1),
            obstacles: task_now.obstacles.clone(),
            degraded: step.degraded,
            fallback: step.fallback,
            display: DisplayState {
                positions: obs.true_state.positions.iter().map(arr).collect(),
                orientations: obs.true_state.orientations.iter().map(arr).collect(),
                obstacle_distances: task_now
                    .obstacles
                    .iter()
                    .map(|o| (tip - Vector3::from(o.center)).norm())
                    .collect(),
            },
        };
        self.last = Some(frame.clone());
        Ok(frame)
    }

    fn target(&self) -> Option<[f64; 3]> {
        target_of(
            &self.pilot.task.at(self.pilot.tick()),
            self.plant.geometry().module_count - 1,
        )
    }
}

fn obs_tick(plant: &Plant) -> u64 {
    plant.state().tick
}

fn target_of(task: &TaskSpec, tip: usize) -> Option<[f64; 3]> {
    task.position_targets
        .iter()
        .find(|t| t.module == tip && !t.constraint)
        .map(|t| t.position)
}

/// Short name of a command for acknowledgements.
pub fn command_name(cmd: &Command) -> String {
    serde_json::to_value(cmd)
        .ok()
        .and_then(|v| v.get("command").and_then(|c| c.as_str()).map(String::from))
        .unwrap_or_default()
}
