use rand::Rng;

use super::array::{self, Array};
use super::NumericsError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the right operand of a binary op lines up with the left one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    /// Right operand holds one row that is repeated over every row of the left.
    Rows,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Bcast),
    Sub(Var, Var, Bcast),
    Mul(Var, Var, Bcast),
    Div(Var, Var, Bcast),
    Scale(Var, f64),
    AddScalar(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
    },
    Softmax {
        input: Var,
        axis: usize,
    },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    ClampMin(Var, f64),
    LayerNorm {
        input: Var,
        inv_std: Vec<f64>,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    MaskedFill {
        input: Var,
        mask: Vec<bool>,
    },
    Sum(Var),
    Transpose(Var),
    Gather {
        input: Var,
        cols: Vec<usize>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Embedding { .. } => "embedding_lookup",
            Op::Softmax { .. } => "softmax",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::ClampMin(..) => "clamp_min",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Dropout { .. } => "dropout",
            Op::MaskedFill { .. } => "masked_fill",
            Op::Sum(..) => "sum",
            Op::Transpose(..) => "transpose",
            Op::Gather { .. } => "gather",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
}

/// Record of primitive operations in execution order. Node indices are a
/// topological order by construction, so the backward pass is a single
/// reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, or zeros of its shape when `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Array {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Array::zeros(&self.shapes[v.0]))
    }
}

const LN_EPS: f64 = 1e-5;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Array, op: Op) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { op: op.name() });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Array) -> Result<Var, NumericsError> {
        self.push(value, Op::Leaf)
    }

    fn bcast(&self, a: Var, b: Var, op: &str) -> Result<Bcast, NumericsError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() == bv.shape() {
            Ok(Bcast::Same)
        } else if bv.len() == av.last_dim() && bv.outer() == 1 {
            Ok(Bcast::Rows)
        } else {
            Err(NumericsError::Shape(format!(
                "{op}: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )))
        }
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        make: impl FnOnce(Var, Var, Bcast) -> Op,
    ) -> Result<Var, NumericsError> {
        let mode = self.bcast(a, b, name)?;
        let av = self.value(a);
        let bv = self.value(b);
        let n = av.last_dim();
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match mode {
                    Bcast::Same => bv.data()[i],
                    Bcast::Rows => bv.data()[i % n],
                };
                f(x, y)
            })
            .collect();
        let out = Array::new(av.shape(), data)?;
        self.push(out, make(a, b, mode))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = array::matmul(self.value(a), self.value(b))?;
        self.push(out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = array::transpose(self.value(a))?;
        self.push(out, Op::Transpose(a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x * k);
        self.push(out, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x + k);
        self.push(out, Op::AddScalar(a))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, NumericsError> {
        let first = inputs
            .first()
            .ok_or_else(|| NumericsError::Shape("concat of nothing".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(NumericsError::Shape(format!(
                "concat axis {axis} on {base:?}"
            )));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(NumericsError::Shape(format!("concat {base:?} with {s:?}")));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let arr = self.value(*v);
                let len = arr.shape()[axis] * inner;
                data.extend_from_slice(&arr.data()[o * len..(o + 1) * len]);
            }
        }
        let out = Array::new(&shape, data)?;
        self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        )
    }

    pub fn slice(
        &mut self,
        a: Var,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<Var, NumericsError> {
        let arr = self.value(a);
        if axis >= arr.rank() || start + len > arr.shape()[axis] || len == 0 {
            return Err(NumericsError::Shape(format!(
                "slice axis {axis} [{start}, {}) of {:?}",
                start + len,
                arr.shape()
            )));
        }
        let (outer, size, inner) = arr.split_at_axis(axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * size * inner + start * inner;
            data.extend_from_slice(&arr.data()[base..base + len * inner]);
        }
        let mut shape = arr.shape().to_vec();
        shape[axis] = len;
        let out = Array::new(&shape, data)?;
        self.push(
            out,
            Op::Slice {
                input: a,
                axis,
                start,
            },
        )
    }

    /// Rows of a 2-D `table` selected by `indices`.
    pub fn embedding_lookup(
        &mut self,
        table: Var,
        indices: &[usize],
    ) -> Result<Var, NumericsError> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(NumericsError::Shape(format!(
                "embedding table {:?}",
                t.shape()
            )));
        }
        let (rows, d) = (t.shape()[0], t.shape()[1]);
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= rows {
                return Err(NumericsError::Shape(format!(
                    "embedding index {i} out of range for {rows} rows"
                )));
            }
            data.extend_from_slice(t.row(i));
        }
        let out = Array::new(&[indices.len(), d], data)?;
        self.push(
            out,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, NumericsError> {
        let arr = self.value(a);
        if axis >= arr.rank() {
            return Err(NumericsError::Shape(format!(
                "softmax axis {axis} on {:?}",
                arr.shape()
            )));
        }
        let (outer, size, inner) = arr.split_at_axis(axis);
        let mut data = arr.data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let idx = |k: usize| o * size * inner + k * inner + i;
                let max = (0..size)
                    .map(|k| data[idx(k)])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for k in 0..size {
                    let e = (data[idx(k)] - max).exp();
                    data[idx(k)] = e;
                    total += e;
                }
                for k in 0..size {
                    data[idx(k)] /= total;
                }
            }
        }
        let out = Array::new(arr.shape(), data)?;
        self.push(out, Op::Softmax { input: a, axis })
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a))
    }

    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var, NumericsError> {
        let out = self.value(a).map(|x| x.max(floor));
        self.push(out, Op::ClampMin(a, floor))
    }

    /// Normalizes over the last axis (zero mean, unit variance, eps 1e-5).
    /// Gain and bias are applied separately with `mul`/`add`.
    pub fn layer_norm(&mut self, a: Var) -> Result<Var, NumericsError> {
        let arr = self.value(a);
        let n = arr.last_dim();
        let mut data = Vec::with_capacity(arr.len());
        let mut inv_std = Vec::with_capacity(arr.outer());
        for r in 0..arr.outer() {
            let row = arr.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            data.extend(row.iter().map(|x| (x - mean) * inv));
        }
        let out = Array::new(arr.shape(), data)?;
        self.push(out, Op::LayerNorm { input: a, inv_std })
    }

    /// Inverted dropout. Identity (and no tape entry) when `training` is false
    /// or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NumericsError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumericsError::Shape(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let arr = self.value(a);
        let mask: Vec<f64> = (0..arr.len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        let data = arr.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Array::new(arr.shape(), data)?;
        self.push(out, Op::Dropout { input: a, mask })
    }

    /// Replaces entries where `mask` is true with `value`.
    pub fn masked_fill(&mut self, a: Var, mask: &[bool], value: f64) -> Result<Var, NumericsError> {
        let arr = self.value(a);
        if mask.len() != arr.len() {
            return Err(NumericsError::Shape(format!(
                "mask of {} for {:?}",
                mask.len(),
                arr.shape()
            )));
        }
        let data = arr
            .data()
            .iter()
            .zip(mask)
            .map(|(&x, &m)| if m { value } else { x })
            .collect();
        let out = Array::new(arr.shape(), data)?;
        self.push(
            out,
            Op::MaskedFill {
                input: a,
                mask: mask.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = Array::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    /// Picks one column per row of a 2-D array, giving shape `[rows, 1]`.
    pub fn gather(&mut self, a: Var, cols: &[usize]) -> Result<Var, NumericsError> {
        let arr = self.value(a);
        if arr.rank() != 2 || cols.len() != arr.rows() || cols.iter().any(|&c| c >= arr.cols()) {
            return Err(NumericsError::Shape(format!(
                "gather {} columns from {:?}",
                cols.len(),
                arr.shape()
            )));
        }
        let data = cols
            .iter()
            .enumerate()
            .map(|(r, &c)| arr.get2(r, c))
            .collect();
        let out = Array::new(&[cols.len(), 1], data)?;
        self.push(
            out,
            Op::Gather {
                input: a,
                cols: cols.to_vec(),
            },
        )
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        if self.value(loss).len() != 1 {
            return Err(NumericsError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::filled(self.shape(loss), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn propagate(
        &self,
        idx: usize,
        g: &Array,
        grads: &mut [Option<Array>],
    ) -> Result<(), NumericsError> {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut acc = |v: Var, contrib: Array| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        };
        let elementwise = |v: Var, f: &dyn Fn(usize, f64) -> f64| -> Array {
            let data = g
                .data()
                .iter()
                .enumerate()
                .map(|(i, &gi)| f(i, gi))
                .collect();
            Array::new(self.shape(v), data).expect("same shape")
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                acc(*a, array::matmul(g, &array::transpose(bv)?)?);
                acc(*b, array::matmul(&array::transpose(av)?, g)?);
            }
            Op::Add(a, b, mode) | Op::Sub(a, b, mode) => {
                let sign = if matches!(node.op, Op::Sub(..)) {
                    -1.0
                } else {
                    1.0
                };
                acc(*a, g.clone());
                let gb = g.map(|x| sign * x);
                acc(*b, self.reduce_bcast(gb, *b, *mode));
            }
            Op::Mul(a, b, mode) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let n = av.last_dim();
                let bat = |i: usize| match mode {
                    Bcast::Same => bv.data()[i],
                    Bcast::Rows => bv.data()[i % n],
                };
                acc(*a, elementwise(*a, &|i, gi| gi * bat(i)));
                let gb = elementwise(*a, &|i, gi| gi * av.data()[i]);
                acc(*b, self.reduce_bcast(gb, *b, *mode));
            }
            Op::Div(a, b, mode) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let n = av.last_dim();
                let bat = |i: usize| match mode {
                    Bcast::Same => bv.data()[i],
                    Bcast::Rows => bv.data()[i % n],
                };
                acc(*a, elementwise(*a, &|i, gi| gi / bat(i)));
                let gb = elementwise(*a, &|i, gi| -gi * av.data()[i] / (bat(i) * bat(i)));
                acc(*b, self.reduce_bcast(gb, *b, *mode));
            }
            Op::Scale(a, k) => acc(*a, g.map(|x| x * k)),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Concat { inputs, axis } => {
                let outer: usize = y.shape()[..*axis].iter().product();
                let inner: usize = y.shape()[axis + 1..].iter().product();
                let total = y.shape()[*axis];
                let mut offset = 0;
                for v in inputs {
                    let size = self.shape(*v)[*axis];
                    let mut data = Vec::with_capacity(outer * size * inner);
                    for o in 0..outer {
                        let base = o * total * inner + offset * inner;
                        data.extend_from_slice(&g.data()[base..base + size * inner]);
                    }
                    acc(*v, Array::new(self.shape(*v), data)?);
                    offset += size;
                }
            }
            Op::Slice { input, axis, start } => {
                let src = self.value(*input);
                let (outer, size, inner) = src.split_at_axis(*axis);
                let len = y.shape()[*axis];
                let mut out = Array::zeros(src.shape());
                for o in 0..outer {
                    let base = o * size * inner + start * inner;
                    out.data_mut()[base..base + len * inner]
                        .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                }
                acc(*input, out);
            }
            Op::Embedding { table, indices } => {
                let shape = self.shape(*table).to_vec();
                let d = shape[1];
                let mut out = Array::zeros(&shape);
                for (r, &i) in indices.iter().enumerate() {
                    for c in 0..d {
                        out.data_mut()[i * d + c] += g.data()[r * d + c];
                    }
                }
                acc(*table, out);
            }
            Op::Softmax { input, axis } => {
                let (outer, size, inner) = y.split_at_axis(*axis);
                let mut out = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |k: usize| o * size * inner + k * inner + i;
                        let dot: f64 = (0..size).map(|k| g.data()[idx(k)] * y.data()[idx(k)]).sum();
                        for k in 0..size {
                            out[idx(k)] = y.data()[idx(k)] * (g.data()[idx(k)] - dot);
                        }
                    }
                }
                acc(*input, Array::new(y.shape(), out)?);
            }
            Op::Sigmoid(a) => acc(
                *a,
                elementwise(*a, &|i, gi| {
                    let s = y.data()[i];
                    gi * s * (1.0 - s)
                }),
            ),
            Op::Tanh(a) => acc(
                *a,
                elementwise(*a, &|i, gi| {
                    let t = y.data()[i];
                    gi * (1.0 - t * t)
                }),
            ),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(
                    *a,
                    elementwise(*a, &|i, gi| if x.data()[i] > 0.0 { gi } else { 0.0 }),
                );
            }
            Op::Exp(a) => acc(*a, elementwise(*a, &|i, gi| gi * y.data()[i])),
            Op::Log(a) => {
                let x = self.value(*a);
                acc(*a, elementwise(*a, &|i, gi| gi / x.data()[i]));
            }
            Op::ClampMin(a, floor) => {
                let x = self.value(*a);
                acc(
                    *a,
                    elementwise(*a, &|i, gi| if x.data()[i] > *floor { gi } else { 0.0 }),
                );
            }
            Op::LayerNorm { input, inv_std } => {
                let n = y.last_dim();
                let mut out = Vec::with_capacity(y.len());
                for (r, inv) in inv_std.iter().enumerate() {
                    let gr = &g.data()[r * n..(r + 1) * n];
                    let yr = y.row(r);
                    let mean_g = gr.iter().sum::<f64>() / n as f64;
                    let mean_gy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    out.extend(
                        gr.iter()
                            .zip(yr)
                            .map(|(gi, yi)| inv * (gi - mean_g - yi * mean_gy)),
                    );
                }
                acc(*input, Array::new(y.shape(), out)?);
            }
            Op::Dropout { input, mask } => acc(*input, elementwise(*input, &|i, gi| gi * mask[i])),
            Op::MaskedFill { input, mask } => acc(
                *input,
                elementwise(*input, &|i, gi| if mask[i] { 0.0 } else { gi }),
            ),
            Op::Sum(a) => {
                let gv = g.data()[0];
                acc(*a, Array::filled(self.shape(*a), gv));
            }
            Op::Transpose(a) => acc(*a, array::transpose(g)?),
            Op::Gather { input, cols } => {
                let shape = self.shape(*input).to_vec();
                let n = shape[1];
                let mut out = Array::zeros(&shape);
                for (r, &c) in cols.iter().enumerate() {
                    out.data_mut()[r * n + c] += g.data()[r];
                }
                acc(*input, out);
            }
        }
        Ok(())
    }

    fn reduce_bcast(&self, g: Array, b: Var, mode: Bcast) -> Array {
        match mode {
            Bcast::Same => g,
            Bcast::Rows => {
                let n = g.last_dim();
                let mut out = Array::zeros(self.shape(b));
                for (i, v) in g.data().iter().enumerate() {
                    out.data_mut()[i % n] += v;
                }
                out
            }
        }
    }
}
