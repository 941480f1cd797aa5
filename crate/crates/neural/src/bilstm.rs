//! Bidirectional LSTM whose sequence axis is the module chain.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tape::{Graph, Var};
use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLstmSpec {
    pub layer_count: usize,
    pub hidden_size: usize,
    pub input_size: usize,
    pub output_size: usize,
}

impl BiLstmSpec {
    /// Forward model: encoder configuration in, `[p, o]` out per module.
    pub fn c2s() -> Self {
        Self {
            layer_count: 4,
            hidden_size: 64,
            input_size: 3,
            output_size: 6,
        }
    }

    /// Controller: 31 history features in, 3 raw cable outputs per module.
    pub fn c2a() -> Self {
        Self {
            layer_count: 2,
            hidden_size: 32,
            input_size: crate::C2A_FEATURES,
            output_size: 3,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layer_count == 0
            || self.hidden_size == 0
            || self.input_size == 0
            || self.output_size == 0
        {
            return Err(NeuralError::InvalidSpec(format!(
                "all sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_size
        } else {
            2 * self.hidden_size
        }
    }
}

/// One direction of one layer. Gates are packed as `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `[input + hidden, 4·hidden]`, acting on `[x, h]`.
    pub w: Array2<f64>,
    /// `[1, 4·hidden]`.
    pub b: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmWeights {
    /// Per layer: forward cell, backward cell.
    pub layers: Vec<[LstmCell; 2]>,
    /// `[2·hidden, output]`, shared by all modules.
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

impl BiLstmWeights {
    pub fn zeros(spec: &BiLstmSpec) -> Self {
        let h = spec.hidden_size;
        let cell = |inp: usize| LstmCell {
            w: Array2::zeros((inp + h, 4 * h)),
            b: Array2::zeros((1, 4 * h)),
        };
        Self {
            layers: (0..spec.layer_count)
                .map(|l| [cell(spec.layer_input(l)), cell(spec.layer_input(l))])
                .collect(),
            head_w: Array2::zeros((2 * h, spec.output_size)),
            head_b: Array2::zeros((1, spec.output_size)),
        }
    }

    /// Uniform in ±1/√fan_in.
    pub fn init<R: Rng>(spec: &BiLstmSpec, rng: &mut R) -> Self {
        let mut w = Self::zeros(spec);
        for p in w.params_mut() {
            let bound = 1.0 / (p.nrows().max(1) as f64).sqrt();
            // biases are [1, n]; treat their fan-in like the matrix they feed
            let bound = if p.nrows() == 1 {
                1.0 / (spec.hidden_size as f64).sqrt()
            } else {
                bound
            };
            p.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        w
    }

    /// Parameter arrays in a fixed order.
    pub fn params(&self) -> Vec<&Array2<f64>> {
        let mut out = Vec::new();
        for pair in &self.layers {
            for c in pair {
                out.push(&c.w);
                out.push(&c.b);
            }
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for pair in &mut self.layers {
            for c in pair {
                out.push(&mut c.w);
                out.push(&mut c.b);
            }
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn check(&self, spec: &BiLstmSpec) -> Result<(), NeuralError> {
        let expected = Self::zeros(spec);
        if self.layers.len() != spec.layer_count {
            return Err(NeuralError::Shape {
                op: "bilstm",
                axis: "layers",
                expected: spec.layer_count,
                got: self.layers.len(),
            });
        }
        for (p, e) in self.params().iter().zip(expected.params()) {
            if p.dim() != e.dim() {
                let (axis, expected, got) = if p.nrows() != e.nrows() {
                    ("weight rows", e.nrows(), p.nrows())
                } else {
                    ("weight columns", e.ncols(), p.ncols())
                };
                return Err(NeuralError::Shape {
                    op: "bilstm",
                    axis,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    /// Registers every parameter as a leaf, in [`Self::params`] order.
    pub fn leaves(&self, g: &mut Graph) -> BiLstmVars {
        BiLstmVars {
            params: self.params().into_iter().map(|p| g.leaf(p.clone())).collect(),
        }
    }
}

/// Parameter leaves of a network on a particular graph.
#[derive(Debug, Clone)]
pub struct BiLstmVars {
    pub params: Vec<Var>,
}

impl BiLstmVars {
    fn cell(&self, layer: usize, dir: usize) -> (Var, Var) {
        let i = 4 * layer + 2 * dir;
        (self.params[i], self.params[i + 1])
    }

    fn head(&self) -> (Var, Var) {
        let n = self.params.len();
        (self.params[n - 2], self.params[n - 1])
    }
}

fn cell_step(
    g: &mut Graph,
    hidden: usize,
    (w, b): (Var, Var),
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), NeuralError> {
    let xh = g.concat(&[x, h])?;
    let z = g.matmul(xh, w)?;
    let z = g.add(z, b)?;
    let zi = g.slice(z, 0, hidden)?;
    let zf = g.slice(z, hidden, 2 * hidden)?;
    let zg = g.slice(z, 2 * hidden, 3 * hidden)?;
    let zo = g.slice(z, 3 * hidden, 4 * hidden)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Runs the network over `inputs` (one `[batch, input_size]` node per module)
/// and returns one `[batch, output_size]` node per module.
pub fn bilstm_forward(
    g: &mut Graph,
    spec: &BiLstmSpec,
    vars: &BiLstmVars,
    inputs: &[Var],
) -> Result<Vec<Var>, NeuralError> {
    let hidden = spec.hidden_size;
    let Some(first) = inputs.first() else {
        return Err(NeuralError::Shape {
            op: "bilstm",
            axis: "modules",
            expected: 1,
            got: 0,
        });
    };
    let batch = g.value(*first).nrows();
    for x in inputs {
        let (rows, cols) = g.value(*x).dim();
        if cols != spec.input_size {
            return Err(NeuralError::Shape {
                op: "bilstm",
                axis: "features",
                expected: spec.input_size,
                got: cols,
            });
        }
        if rows != batch {
            return Err(NeuralError::Shape {
                op: "bilstm",
                axis: "batch",
                expected: batch,
                got: rows,
            });
        }
    }
    let n = inputs.len();
    let zero = g.leaf(Array2::zeros((batch, hidden)));
    let mut seq = inputs.to_vec();
    for layer in 0..spec.layer_count {
        let mut fwd = Vec::with_capacity(n);
        let (mut h, mut c) = (zero, zero);
        for x in &seq {
            (h, c) = cell_step(g, hidden, vars.cell(layer, 0), *x, h, c)?;
            fwd.push(h);
        }
        let mut bwd = vec![zero; n];
        let (mut h, mut c) = (zero, zero);
        for m in (0..n).rev() {
            (h, c) = cell_step(g, hidden, vars.cell(layer, 1), seq[m], h, c)?;
            bwd[m] = h;
        }
        seq = fwd
            .iter()
            .zip(&bwd)
            .map(|(f, b)| g.concat(&[*f, *b]))
            .collect::<Result<_, _>>()?;
    }
    let (hw, hb) = vars.head();
    seq.iter()
        .map(|x| {
            let y = g.matmul(*x, hw)?;
            g.add(y, hb)
        })
        .collect()
}

/// The action output layer: `out_i = (3·tanh(r_i) − Σ_j tanh(r_j)) / 4`.
///
/// Each row of the result sums to zero and lies in `[−1, 1]`.
pub fn sum_and_range(raw: [f64; 3]) -> [f64; 3] {
    let t = raw.map(f64::tanh);
    let s: f64 = t.iter().sum();
    t.map(|ti| (3.0 * ti - s) / 4.0)
}

/// [`sum_and_range`] on a `[batch, 3]` graph node.
pub fn sum_and_range_node(g: &mut Graph, raw: Var) -> Result<Var, NeuralError> {
    let t = g.tanh(raw);
    let m = g.leaf(Array2::from_shape_fn((3, 3), |(i, j)| {
        if i == j {
            0.5
        } else {
            -0.25
        }
    }));
    g.matmul(t, m)
}

/// Position label of module `m` (1-based) in a chain of `n`.
pub fn module_label(m: usize, n: usize) -> Result<f64, NeuralError> {
    if n < 2 || m == 0 || m > n {
        return Err(NeuralError::Label { m, n });
    }
    Ok(2.0 * (m - 1) as f64 / (n - 1) as f64 - 1.0)
}
