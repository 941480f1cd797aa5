//! Eager reverse-mode autodiff over 2-D `f64` arrays.
//!
//! Every operation evaluates immediately and records itself on the graph;
//! [`Graph::backward`] then walks the record in reverse. Rows are the batch
//! axis: binary elementwise ops accept equal shapes or a single-row operand,
//! which is broadcast over the rows of the other.

use ndarray::{concatenate, s, Array2, Axis};

use crate::NeuralError;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Square(Var),
    Sqrt(Var),
    Reciprocal(Var),
    MaxConst(Var, f64),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Sum(Var),
    Mean(Var),
    Scale(Var, f64),
    Offset(Var),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Array2<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, axis: &'static str, expected: usize, got: usize) -> NeuralError {
    NeuralError::Shape {
        op,
        axis,
        expected,
        got,
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Inputs, parameters and constants are all leaves.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    pub fn row(&mut self, values: &[f64]) -> Var {
        self.leaf(Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("row shape"))
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(shape_err("matmul", "inner", va.ncols(), vb.nrows()));
        }
        let out = va.dot(vb);
        Ok(self.push(Op::MatMul(a, b), out))
    }

    fn broadcast_check(&self, op: &'static str, a: Var, b: Var) -> Result<(), NeuralError> {
        let (sa, sb) = (self.value(a).dim(), self.value(b).dim());
        if sa.1 != sb.1 {
            return Err(shape_err(op, "columns", sa.1, sb.1));
        }
        if sa.0 != sb.0 && sa.0 != 1 && sb.0 != 1 {
            return Err(shape_err(op, "rows", sa.0, sb.0));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.broadcast_check("add", a, b)?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.broadcast_check("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.broadcast_check("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), out)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x * x);
        self.push(Op::Square(a), out)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::sqrt);
        self.push(Op::Sqrt(a), out)
    }

    pub fn reciprocal(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| 1.0 / x);
        self.push(Op::Reciprocal(a), out)
    }

    /// Elementwise `max(a, c)`; the gradient passes where `a > c`.
    pub fn max_const(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).mapv(|x| x.max(c));
        self.push(Op::MaxConst(a, c), out)
    }

    /// Concatenates along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NeuralError> {
        let Some(first) = parts.first() else {
            return Err(shape_err("concat", "parts", 1, 0));
        };
        let rows = self.value(*first).nrows();
        for p in parts {
            let r = self.value(*p).nrows();
            if r != rows {
                return Err(shape_err("concat", "rows", rows, r));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = concatenate(Axis(1), &views).expect("checked rows");
        Ok(self.push(Op::Concat(parts.to_vec()), out))
    }

    /// Columns `start..end`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NeuralError> {
        let cols = self.value(a).ncols();
        if start >= end || end > cols {
            return Err(shape_err("slice", "columns", cols, end));
        }
        let out = self.value(a).slice(s![.., start..end]).to_owned();
        Ok(self.push(Op::Slice(a, start), out))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::Sum(a), out)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Array2::from_elem((1, 1), v.sum() / v.len() as f64);
        self.push(Op::Mean(a), out)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(Op::Scale(a, c), out)
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) + c;
        self.push(Op::Offset(a), out)
    }

    /// Gradients of the 1×1 node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Gradients, NeuralError> {
        let dim = self.value(out).dim();
        if dim != (1, 1) {
            return Err(NeuralError::NotScalar {
                rows: dim.0,
                cols: dim.1,
            });
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Array2::ones((1, 1)));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    let gb = reduce_to(&g, self.value(*b).nrows());
                    let ga = reduce_to(&g, self.value(*a).nrows());
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Sub(a, b) => {
                    let gb = -reduce_to(&g, self.value(*b).nrows());
                    let ga = reduce_to(&g, self.value(*a).nrows());
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = reduce_to(&(&g * vb), va.nrows());
                    let gb = reduce_to(&(&g * va), vb.nrows());
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Tanh(a) => {
                    let d = &g * &node.value.mapv(|y| 1.0 - y * y);
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = &g * &node.value.mapv(|y| y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let d = &g * &(self.value(*a) * 2.0);
                    accumulate(&mut grads, *a, d);
                }
                Op::Sqrt(a) => {
                    let d = &g / &(&node.value * 2.0);
                    accumulate(&mut grads, *a, d);
                }
                Op::Reciprocal(a) => {
                    let d = -&g * &node.value.mapv(|y| y * y);
                    accumulate(&mut grads, *a, d);
                }
                Op::MaxConst(a, c) => {
                    let mut d = g.clone();
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| {
                            if x <= *c {
                                *d = 0.0
                            }
                        });
                    accumulate(&mut grads, *a, d);
                }
                Op::Concat(parts) => {
                    let mut col = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        accumulate(&mut grads, *p, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::Slice(a, start) => {
                    let mut d = Array2::zeros(self.value(*a).dim());
                    let w = node.value.ncols();
                    d.slice_mut(s![.., *start..*start + w]).assign(&g);
                    accumulate(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let d = Array2::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    accumulate(&mut grads, *a, d);
                }
                Op::Mean(a) => {
                    let v = self.value(*a);
                    let d = Array2::from_elem(v.dim(), g[[0, 0]] / v.len() as f64);
                    accumulate(&mut grads, *a, d);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, &g * *c),
                Op::Offset(a) => accumulate(&mut grads, *a, g.clone()),
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Sums broadcast rows back down when the operand had a single row.
fn reduce_to(g: &Array2<f64>, rows: usize) -> Array2<f64> {
    if g.nrows() == rows {
        g.clone()
    } else {
        g.sum_axis(Axis(0)).insert_axis(Axis(0))
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(acc) => *acc += &g,
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` was created after the output node.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
