//! Trained networks with their normalization constants, inference entry
//! points, and the model file format.
//!
//! File layout (all integers and floats little-endian):
//!
//! ```text
//! magic "SOFTARMN" | u32 version | u8 kind | u64 seed | u32 modules
//! u32 layers | u32 hidden | u32 input | u32 output
//! norm(input) | norm(output)        norm = u8 present [u32 dims, f64 min[dims], f64 max[dims]]
//! u32 arrays  { u32 rows, u32 cols, f64 values[rows·cols] }*
//! sha256 of everything above (32 bytes)
//! ```

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};
use softarm_core::{ModuleConfiguration, RobotState};

use crate::bilstm::{bilstm_forward, module_label, sum_and_range_node, BiLstmSpec, BiLstmWeights};
use crate::norm::Normalizer;
use crate::tape::{Graph, Var};
use crate::NeuralError;

pub const MODEL_MAGIC: &[u8; 8] = b"SOFTARMN";
pub const MODEL_VERSION: u32 = 1;

/// Features per module of a controller input.
pub const C2A_FEATURES: usize = 31;
/// Past configurations fed to the controller (most recent first).
pub const CONFIG_HISTORY: usize = 4;
/// Past actions fed to the controller (most recent first).
pub const ACTION_HISTORY: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Configurations to robot state.
    ForwardModel,
    /// Target and history to actions.
    Controller,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ForwardModel => "forward model",
            ModelKind::Controller => "controller",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub kind: ModelKind,
    pub spec: BiLstmSpec,
    pub weights: BiLstmWeights,
    pub module_count: usize,
    /// Per-dimension constants of the stacked module configurations (3 per module).
    pub input_norm: Option<Normalizer>,
    /// Per-dimension constants of the stacked robot state (6 per module);
    /// forward model only.
    pub output_norm: Option<Normalizer>,
    pub seed: u64,
}

impl ModelBundle {
    fn expect(&self, kind: ModelKind) -> Result<(), NeuralError> {
        if self.kind != kind {
            return Err(NeuralError::WrongKind {
                expected: kind.name(),
                found: self.kind.name(),
            });
        }
        Ok(())
    }

    pub fn input_norm(&self) -> Result<&Normalizer, NeuralError> {
        self.input_norm
            .as_ref()
            .ok_or(NeuralError::MissingNormalization("inputs"))
    }

    pub fn output_norm(&self) -> Result<&Normalizer, NeuralError> {
        self.output_norm
            .as_ref()
            .ok_or(NeuralError::MissingNormalization("outputs"))
    }
}

/// Forward model on the graph.
///
/// `configs` is a `[batch, 3·modules]` node of raw configurations; the
/// result holds one `[batch, 6]` node per module in *normalized* output
/// units (see [`ModelBundle::output_norm`]). Parameters enter as leaves.
pub fn c2s_graph(g: &mut Graph, model: &ModelBundle, configs: Var) -> Result<Vec<Var>, NeuralError> {
    model.expect(ModelKind::ForwardModel)?;
    let norm = model.input_norm()?;
    let n = model.module_count;
    let cols = g.value(configs).ncols();
    if cols != 3 * n || norm.dims() != 3 * n {
        return Err(NeuralError::Shape {
            op: "forward model",
            axis: "configuration",
            expected: 3 * n,
            got: cols,
        });
    }
    let center: Vec<f64> = (0..3 * n).map(|k| norm.center(k)).collect();
    let inv: Vec<f64> = (0..3 * n).map(|k| 1.0 / norm.half_range(k)).collect();
    let center = g.row(&center);
    let inv = g.row(&inv);
    let shifted = g.sub(configs, center)?;
    let scaled = g.mul(shifted, inv)?;
    let inputs = (0..n)
        .map(|m| g.slice(scaled, 3 * m, 3 * m + 3))
        .collect::<Result<Vec<_>, _>>()?;
    let vars = model.weights.leaves(g);
    bilstm_forward(g, &model.spec, &vars, &inputs)
}

/// Normalized forward-model outputs for a batch of stacked configurations.
pub fn c2s_predict_normalized(
    model: &ModelBundle,
    configs: &Array2<f64>,
) -> Result<Vec<Array2<f64>>, NeuralError> {
    let mut g = Graph::new();
    let x = g.leaf(configs.clone());
    let out = c2s_graph(&mut g, model, x)?;
    Ok(out.iter().map(|v| g.value(*v).clone()).collect())
}

/// Predicted robot state for one set of module configurations.
///
/// Orientation outputs are rescaled to unit length.
pub fn nn_c2s_forward(
    model: &ModelBundle,
    configs: &[ModuleConfiguration],
) -> Result<RobotState, NeuralError> {
    let flat: Vec<f64> = configs.iter().flat_map(|c| c.to_array()).collect();
    let x = Array2::from_shape_vec((1, flat.len()), flat).expect("row");
    let out = c2s_predict_normalized(model, &x)?;
    let y: Vec<f64> = out.iter().flat_map(|o| o.iter().copied().collect::<Vec<_>>()).collect();
    let y = model.output_norm()?.denormalize(&y);
    let mut state = RobotState {
        positions: Vec::with_capacity(configs.len()),
        orientations: Vec::with_capacity(configs.len()),
    };
    for m in 0..configs.len() {
        let b = &y[6 * m..6 * m + 6];
        state
            .positions
            .push(nalgebra::Vector3::new(b[0], b[1], b[2]));
        let o = nalgebra::Vector3::new(b[3], b[4], b[5]);
        state.orientations.push(o / o.norm().max(1e-12));
    }
    Ok(state)
}

/// Per-module controller features, each in `[−1, 1]` for in-distribution data.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerInput {
    pub features: Vec<[f64; C2A_FEATURES]>,
}

/// Assembles controller features.
///
/// `target` and each `past_configs` entry are stacked raw configurations
/// (3 per module); `past_actions` entries are stacked normalized actions.
/// Histories are most recent first.
pub fn controller_input(
    model: &ModelBundle,
    target: &[f64],
    past_configs: &[&[f64]],
    past_actions: &[&[f64]],
) -> Result<ControllerInput, NeuralError> {
    model.expect(ModelKind::Controller)?;
    assemble_features(model.input_norm()?, model.module_count, target, past_configs, past_actions)
}

pub(crate) fn assemble_features(
    norm: &Normalizer,
    n: usize,
    target: &[f64],
    past_configs: &[&[f64]],
    past_actions: &[&[f64]],
) -> Result<ControllerInput, NeuralError> {
    let check = |axis: &'static str, expected: usize, got: usize| {
        if expected != got {
            Err(NeuralError::Shape {
                op: "controller input",
                axis,
                expected,
                got,
            })
        } else {
            Ok(())
        }
    };
    check("target", 3 * n, target.len())?;
    check("config history", CONFIG_HISTORY, past_configs.len())?;
    check("action history", ACTION_HISTORY, past_actions.len())?;
    for c in past_configs {
        check("config history entry", 3 * n, c.len())?;
    }
    for a in past_actions {
        check("action history entry", 3 * n, a.len())?;
    }
    let target = norm.normalize(target);
    let configs: Vec<Vec<f64>> = past_configs.iter().map(|c| norm.normalize(c)).collect();
    let mut features = Vec::with_capacity(n);
    for m in 0..n {
        let mut f = [0.0; C2A_FEATURES];
        let r = 3 * m..3 * m + 3;
        f[0..3].copy_from_slice(&target[r.clone()]);
        for (k, c) in configs.iter().enumerate() {
            f[3 + 3 * k..6 + 3 * k].copy_from_slice(&c[r.clone()]);
        }
        for (k, a) in past_actions.iter().enumerate() {
            f[15 + 3 * k..18 + 3 * k].copy_from_slice(&a[r.clone()]);
        }
        f[30] = module_label(m + 1, n)?;
        features.push(f);
    }
    Ok(ControllerInput { features })
}

/// Controller on the graph: `inputs` holds one `[batch, 31]` node per module;
/// returns normalized actions, one `[batch, 3]` node per module.
pub fn c2a_graph(g: &mut Graph, model: &ModelBundle, inputs: &[Var]) -> Result<Vec<Var>, NeuralError> {
    model.expect(ModelKind::Controller)?;
    if inputs.len() != model.module_count {
        return Err(NeuralError::Shape {
            op: "controller",
            axis: "modules",
            expected: model.module_count,
            got: inputs.len(),
        });
    }
    let vars = model.weights.leaves(g);
    let raw = bilstm_forward(g, &model.spec, &vars, inputs)?;
    raw.into_iter().map(|r| sum_and_range_node(g, r)).collect()
}

/// Normalized actions per module.
pub fn nn_c2a_forward(model: &ModelBundle, input: &ControllerInput) -> Result<Vec<[f64; 3]>, NeuralError> {
    let mut g = Graph::new();
    let inputs: Vec<Var> = input
        .features
        .iter()
        .map(|f| g.row(f))
        .collect();
    let out = c2a_graph(&mut g, model, &inputs)?;
    Ok(out
        .iter()
        .map(|v| {
            let a = g.value(*v);
            [a[[0, 0]], a[[0, 1]], a[[0, 2]]]
        })
        .collect())
}

// ---------------------------------------------------------------- file format

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_norm(out: &mut Vec<u8>, n: &Option<Normalizer>) {
    match n {
        None => out.push(0),
        Some(n) => {
            out.push(1);
            put_u32(out, n.dims() as u32);
            for v in n.min.iter().chain(&n.max) {
                put_f64(out, *v);
            }
        }
    }
}

/// Serializes a bundle to bytes.
pub fn model_to_bytes(model: &ModelBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION);
    out.push(match model.kind {
        ModelKind::ForwardModel => 0,
        ModelKind::Controller => 1,
    });
    out.extend_from_slice(&model.seed.to_le_bytes());
    put_u32(&mut out, model.module_count as u32);
    for v in [
        model.spec.layer_count,
        model.spec.hidden_size,
        model.spec.input_size,
        model.spec.output_size,
    ] {
        put_u32(&mut out, v as u32);
    }
    put_norm(&mut out, &model.input_norm);
    put_norm(&mut out, &model.output_norm);
    let params = model.weights.params();
    put_u32(&mut out, params.len() as u32);
    for p in params {
        put_u32(&mut out, p.nrows() as u32);
        put_u32(&mut out, p.ncols() as u32);
        for v in p.iter() {
            put_f64(&mut out, *v);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        if self.pos + n > self.bytes.len() {
            return Err(NeuralError::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn norm(&mut self) -> Result<Option<Normalizer>, NeuralError> {
        match self.u8()? {
            0 => Ok(None),
            1 => {
                let dims = self.u32()? as usize;
                let min = (0..dims).map(|_| self.f64()).collect::<Result<_, _>>()?;
                let max = (0..dims).map(|_| self.f64()).collect::<Result<_, _>>()?;
                Ok(Some(Normalizer { min, max }))
            }
            t => Err(NeuralError::Format(format!("bad normalization tag {t}"))),
        }
    }
}

/// Parses bytes produced by [`model_to_bytes`].
pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelBundle, NeuralError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MODEL_MAGIC {
        return Err(NeuralError::Format("not a model file".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(NeuralError::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    if bytes.len() < 32 + r.pos {
        return Err(NeuralError::Format("truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(NeuralError::Checksum);
    }
    let mut r = Reader {
        bytes: body,
        pos: r.pos,
    };
    let kind = match r.u8()? {
        0 => ModelKind::ForwardModel,
        1 => ModelKind::Controller,
        k => return Err(NeuralError::Format(format!("unknown model kind {k}"))),
    };
    let seed = r.u64()?;
    let module_count = r.u32()? as usize;
    let spec = BiLstmSpec {
        layer_count: r.u32()? as usize,
        hidden_size: r.u32()? as usize,
        input_size: r.u32()? as usize,
        output_size: r.u32()? as usize,
    };
    spec.validate()?;
    let input_norm = r.norm()?;
    let output_norm = r.norm()?;
    let mut weights = BiLstmWeights::zeros(&spec);
    let count = r.u32()? as usize;
    let mut params = weights.params_mut();
    if count != params.len() {
        return Err(NeuralError::Format(format!(
            "expected {} weight arrays, found {count}",
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if (rows, cols) != p.dim() {
            return Err(NeuralError::Format(format!(
                "weight array is {rows}x{cols}, expected {:?}",
                p.dim()
            )));
        }
        for v in p.iter_mut() {
            *v = r.f64()?;
        }
    }
    if r.pos != body.len() {
        return Err(NeuralError::Format("trailing bytes".into()));
    }
    Ok(ModelBundle {
        kind,
        spec,
        weights,
        module_count,
        input_norm,
        output_norm,
        seed,
    })
}

pub fn model_save(model: &ModelBundle, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|source| NeuralError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn model_load(path: impl AsRef<Path>) -> Result<ModelBundle, NeuralError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| NeuralError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_bytes(&bytes)
}
