//! Babbling datasets and their on-disk format.
//!
//! A dataset file is plain text:
//!
//! ```text
//! # softarm-dataset v1 {"geometry":{..},"disturbance":{..},"schedule":{..},"action_scale":0.03}
//! tick,action_1_1,...,true_config_3_3
//! 0,0.0123,...
//! ```
//!
//! The first line is a versioned header carrying the geometry, the action
//! normalization constant and the seeds (as a single-line JSON object); the
//! second names the columns; every further line is one record. Floats are
//! written in shortest round-trip form so reading a file back is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::babble::{make_babble_schedule, BabbleSchedule};
use crate::pcc::ArmGeometry;
use crate::plant::{DisturbanceParams, Plant};
use crate::DatasetError;

pub const DATASET_MAGIC: &str = "# softarm-dataset v1 ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub geometry: ArmGeometry,
    pub disturbance: DisturbanceParams,
    pub schedule: BabbleSchedule,
    /// Cable displacement (m) corresponding to a normalized action of 1.
    pub action_scale: f64,
}

/// One tick of babbling.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub tick: u64,
    /// Commanded cable displacements, normalized to [−1, 1], 3 per module.
    pub actions: Vec<f64>,
    /// Encoder-estimated configurations after the tick, 3 per module.
    pub encoder_configs: Vec<f64>,
    /// Ground-truth robot state `[p, o]` per module, 6 per module.
    pub true_state: Vec<f64>,
    /// Ground-truth configurations; for evaluation only.
    pub true_configs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn module_count(&self) -> usize {
        self.header.geometry.module_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Runs the babbling schedule on a fresh plant and records every tick.
pub fn collect_dataset(
    schedule: &BabbleSchedule,
    params: &DisturbanceParams,
    geom: &ArmGeometry,
) -> Result<Dataset, DatasetError> {
    let actions = make_babble_schedule(schedule, geom)?;
    let mut plant = Plant::new(*geom, *params)?;
    let mut records = Vec::with_capacity(actions.len());
    for (tick, step) in actions.iter().enumerate() {
        let obs = plant.step(step)?;
        records.push(DatasetRecord {
            tick: tick as u64,
            actions: step.iter().flat_map(|a| a.normalized(geom)).collect(),
            encoder_configs: obs
                .encoder_configs
                .iter()
                .flat_map(|c| c.to_array())
                .collect(),
            true_state: obs.true_state.to_vec(),
            true_configs: obs.true_configs.iter().flat_map(|c| c.to_array()).collect(),
        });
    }
    Ok(Dataset {
        header: DatasetHeader {
            geometry: *geom,
            disturbance: *params,
            schedule: *schedule,
            action_scale: geom.max_cable_displacement,
        },
        records,
    })
}

fn column_names(modules: usize) -> Vec<String> {
    let mut cols = vec!["tick".to_string()];
    for group in ["action", "encoder_config"] {
        for m in 1..=modules {
            for i in 1..=3 {
                cols.push(format!("{group}_{m}_{i}"));
            }
        }
    }
    for m in 1..=modules {
        for axis in ["px", "py", "pz", "ox", "oy", "oz"] {
            cols.push(format!("state_{m}_{axis}"));
        }
    }
    for m in 1..=modules {
        for i in 1..=3 {
            cols.push(format!("true_config_{m}_{i}"));
        }
    }
    cols
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn dataset_write(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let header = serde_json::to_string(&dataset.header).expect("header serializes");
    writeln!(out, "{DATASET_MAGIC}{header}").map_err(io_err(path))?;
    writeln!(out, "{}", column_names(dataset.module_count()).join(",")).map_err(io_err(path))?;
    let mut line = String::new();
    for r in &dataset.records {
        line.clear();
        line.push_str(&r.tick.to_string());
        for v in r
            .actions
            .iter()
            .chain(&r.encoder_configs)
            .chain(&r.true_state)
            .chain(&r.true_configs)
        {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn dataset_read(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let parse_err = |line: u64, message: String| DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(io_err(path))?;
    let json = first
        .strip_prefix(DATASET_MAGIC)
        .ok_or_else(|| parse_err(1, "missing or unsupported dataset header".into()))?;
    let header: DatasetHeader =
        serde_json::from_str(json).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    header.geometry.validate()?;
    let modules = header.geometry.module_count;
    let expected_cols = column_names(modules);

    let second = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing column header".into()))?
        .map_err(io_err(path))?;
    if second
        .split(',')
        .ne(expected_cols.iter().map(String::as_str))
    {
        return Err(parse_err(
            2,
            "column header does not match module count".into(),
        ));
    }

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i as u64 + 3;
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols.len() {
            return Err(parse_err(
                lineno,
                format!(
                    "expected {} fields, found {}",
                    expected_cols.len(),
                    fields.len()
                ),
            ));
        }
        let tick = fields[0]
            .parse::<u64>()
            .map_err(|e| parse_err(lineno, format!("tick: {e}")))?;
        let mut values = Vec::with_capacity(fields.len() - 1);
        for (col, f) in fields[1..].iter().enumerate() {
            let v = f
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("{}: {e}", expected_cols[col + 1])))?;
            values.push(v);
        }
        let (actions, rest) = values.split_at(3 * modules);
        let (encoder, rest) = rest.split_at(3 * modules);
        let (state, configs) = rest.split_at(6 * modules);
        records.push(DatasetRecord {
            tick,
            actions: actions.to_vec(),
            encoder_configs: encoder.to_vec(),
            true_state: state.to_vec(),
            true_configs: configs.to_vec(),
        });
    }
    Ok(Dataset { header, records })
}
