use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use super::kernels::{self, Broadcast};
use super::{Element, Tensor, INDEX_BYTES};
use crate::error::{Error, Result};
use crate::profiler::{Category, OpKind, Recorder};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Lower/upper clamp applied to probabilities inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a value recorded on a specific [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// FLOP counting convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopConvention {
    /// FLOPs charged for one multiply-accumulate.
    pub fma: u64,
    /// FLOPs charged per element for tanh / sigmoid / log.
    pub transcendental: u64,
}

impl Default for FlopConvention {
    fn default() -> Self {
        FlopConvention {
            fma: 2,
            transcendental: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryKind {
    Add,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryKind {
    Relu,
    Tanh,
    Sigmoid,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param,
    MatMul {
        a: usize,
        b: usize,
    },
    Binary {
        kind: BinaryKind,
        a: usize,
        b: usize,
        ba: Broadcast,
        bb: Broadcast,
    },
    Unary {
        kind: UnaryKind,
        x: usize,
    },
    SegmentSum {
        data: usize,
        ids: Arc<[usize]>,
    },
    Gather {
        data: usize,
        indices: Arc<[usize]>,
    },
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Reshape {
        x: usize,
    },
    Sum {
        x: usize,
    },
    Bce {
        scores: usize,
        labels: Vec<T>,
        mask: Vec<bool>,
        valid: usize,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    name: String,
}

/// Records operations in execution order; [`Tape::backward`] replays them in
/// reverse. Every forward and backward kernel is reported to the tape's
/// [`Recorder`].
#[derive(Debug)]
pub struct Tape<T> {
    id: u32,
    nodes: Vec<Node<T>>,
    recorder: Recorder,
    scope: Vec<String>,
    flops: FlopConvention,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Self::with_recorder(Recorder::default())
    }

    pub fn with_recorder(recorder: Recorder) -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            recorder,
            scope: Vec::new(),
            flops: FlopConvention::default(),
        }
    }

    pub fn set_flop_convention(&mut self, conv: FlopConvention) {
        self.flops = conv;
    }

    pub fn recorder(&self) -> &Recorder {
        &self.recorder
    }

    pub fn recorder_mut(&mut self) -> &mut Recorder {
        &mut self.recorder
    }

    pub fn into_recorder(self) -> Recorder {
        self.recorder
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Runs `f` with `name` appended to the op-name prefix.
    pub fn scoped<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        self.scope.push(name.to_string());
        let out = f(self);
        self.scope.pop();
        out
    }

    fn op_name(&self, op: &str) -> String {
        if self.scope.is_empty() {
            op.to_string()
        } else {
            format!("{}/{}", self.scope.join("."), op)
        }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::Usage(format!(
                "variable {} does not belong to this tape",
                v.index
            )));
        }
        Ok(v.index)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.index].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool, name: String) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            value: value.with_node_id(index),
            op,
            requires_grad,
            name,
        });
        Var {
            tape: self.id,
            index,
        }
    }

    /// Constant input; no gradient flows into it.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false, String::new())
    }

    /// Differentiable input whose gradient [`Tape::backward`] returns.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Param, true, String::new())
    }

    fn needs(&self, idx: &[usize]) -> bool {
        idx.iter().any(|&i| self.nodes[i].requires_grad)
    }

    fn esize() -> u64 {
        T::DTYPE.size_bytes() as u64
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let name = self.op_name("matmul");
        let sw = self.recorder.start();
        let out = kernels::matmul(&self.nodes[ia].value, &self.nodes[ib].value)?;
        let (m, k) = self.nodes[ia].value.dims2("matmul")?;
        let n = out.shape()[1];
        let flops = self.flops.fma * (m * k * n) as u64;
        let bytes = Self::esize() * (m * k + k * n + m * n) as u64;
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::MatMul), flops, bytes);
        let rg = self.needs(&[ia, ib]);
        Ok(self.push(out, Op::MatMul { a: ia, b: ib }, rg, name))
    }

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let name = self.op_name(match kind {
            BinaryKind::Add => "add",
            BinaryKind::Mul => "mul",
        });
        let sw = self.recorder.start();
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let (_, ba, bb) = kernels::broadcast_plan(va.shape(), vb.shape())?;
        let out = match kind {
            BinaryKind::Add => kernels::binary(va, vb, |x, y| x + y)?,
            BinaryKind::Mul => kernels::binary(va, vb, |x, y| x * y)?,
        };
        let flops = out.numel() as u64;
        let bytes = va.nbytes() + vb.nbytes() + out.nbytes();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::Elementwise), flops, bytes);
        let rg = self.needs(&[ia, ib]);
        Ok(self.push(out, Op::Binary { kind, a: ia, b: ib, ba, bb }, rg, name))
    }

    /// Elementwise sum; scalar, row-vector and column-vector operands broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    /// Elementwise product with the same broadcasting as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    fn unary(&mut self, kind: UnaryKind, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let (label, per_elem) = match kind {
            UnaryKind::Relu => ("relu", 1),
            UnaryKind::Tanh => ("tanh", self.flops.transcendental),
            UnaryKind::Sigmoid => ("sigmoid", self.flops.transcendental),
        };
        let name = self.op_name(label);
        let sw = self.recorder.start();
        let v = &self.nodes[ix].value;
        let out = match kind {
            UnaryKind::Relu => kernels::unary(v, kernels::relu),
            UnaryKind::Tanh => kernels::unary(v, |t| t.tanh()),
            UnaryKind::Sigmoid => kernels::unary(v, kernels::sigmoid),
        };
        let flops = per_elem * out.numel() as u64;
        let bytes = v.nbytes() + out.nbytes();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::Elementwise), flops, bytes);
        let rg = self.needs(&[ix]);
        Ok(self.push(out, Op::Unary { kind, x: ix }, rg, name))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(UnaryKind::Relu, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(UnaryKind::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(UnaryKind::Sigmoid, x)
    }

    /// Message-passing reduction: `out[s] = Σ data[i]` over rows with `ids[i] == s`.
    pub fn unsorted_segment_sum(
        &mut self,
        data: Var,
        segment_ids: impl Into<Arc<[usize]>>,
        num_segments: usize,
    ) -> Result<Var> {
        let id = self.check(data)?;
        let ids: Arc<[usize]> = segment_ids.into();
        let name = self.op_name("unsorted_segment_sum");
        let sw = self.recorder.start();
        let v = &self.nodes[id].value;
        let out = kernels::unsorted_segment_sum(v, &ids, num_segments)?;
        let flops = v.numel() as u64;
        let bytes = v.nbytes() + out.nbytes() + INDEX_BYTES * ids.len() as u64;
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::SegmentSum), flops, bytes);
        let rg = self.needs(&[id]);
        Ok(self.push(out, Op::SegmentSum { data: id, ids }, rg, name))
    }

    pub fn gather_rows(&mut self, data: Var, indices: impl Into<Arc<[usize]>>) -> Result<Var> {
        let id = self.check(data)?;
        let indices: Arc<[usize]> = indices.into();
        let name = self.op_name("gather_rows");
        let sw = self.recorder.start();
        let v = &self.nodes[id].value;
        let out = kernels::gather_rows(v, &indices)?;
        let bytes = v.nbytes() + out.nbytes() + INDEX_BYTES * indices.len() as u64;
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::ConcatSlice), 0, bytes);
        let rg = self.needs(&[id]);
        Ok(self.push(out, Op::Gather { data: id, indices }, rg, name))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let idx = inputs
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<Vec<_>>>()?;
        let name = self.op_name("concat");
        let sw = self.recorder.start();
        let values: Vec<&Tensor<T>> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let out = kernels::concat(&values, axis)?;
        let bytes = values.iter().map(|t| t.nbytes()).sum::<u64>() + out.nbytes();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::ConcatSlice), 0, bytes);
        let rg = self.needs(&idx);
        Ok(self.push(out, Op::Concat { inputs: idx, axis }, rg, name))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ix = self.check(x)?;
        let name = self.op_name("slice");
        let sw = self.recorder.start();
        let v = &self.nodes[ix].value;
        let out = kernels::slice(v, axis, start, len)?;
        let bytes = v.nbytes() + out.nbytes();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::ConcatSlice), 0, bytes);
        let rg = self.needs(&[ix]);
        Ok(self.push(out, Op::Slice { x: ix, axis, start }, rg, name))
    }

    /// Metadata-only view change; not recorded as a kernel.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.reshape(shape)?;
        let rg = self.needs(&[ix]);
        let name = self.op_name("reshape");
        Ok(self.push(out, Op::Reshape { x: ix }, rg, name))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let name = self.op_name("sum");
        let sw = self.recorder.start();
        let v = &self.nodes[ix].value;
        let total = v.data().iter().fold(T::zero(), |acc, &e| acc + e);
        let flops = v.numel() as u64;
        let bytes = v.nbytes() + Self::esize();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::Elementwise), flops, bytes);
        let rg = self.needs(&[ix]);
        Ok(self.push(Tensor::scalar(total), Op::Sum { x: ix }, rg, name))
    }

    /// Mean binary cross-entropy over entries with `mask[i]`; probabilities are
    /// clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce_loss(&mut self, scores: Var, labels: &[T], mask: &[bool]) -> Result<Var> {
        let is = self.check(scores)?;
        let name = self.op_name("bce_loss");
        let sw = self.recorder.start();
        let p = &self.nodes[is].value;
        let loss = binary_cross_entropy(p.data(), labels, mask)?;
        let valid = mask.iter().filter(|&&m| m).count();
        let flops = valid as u64 * (self.flops.transcendental + 4);
        let bytes = p.nbytes() * 2 + mask.len() as u64 + Self::esize();
        self.recorder
            .finish(sw, &name, Category::forward(OpKind::Other), flops, bytes);
        let rg = self.needs(&[is]);
        let op = Op::Bce {
            scores: is,
            labels: labels.to_vec(),
            mask: mask.to_vec(),
            valid,
        };
        Ok(self.push(Tensor::scalar(loss), op, rg, name))
    }

    /// Reverse-mode sweep from a scalar `loss`. Returns gradients for every
    /// node created with [`Tape::param`] that the loss depends on.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        let il = self.check(loss)?;
        if self.nodes[il].value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[il].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[il] = Some(Tensor::ones(self.nodes[il].value.shape()));
        for i in (0..=il).rev() {
            if !self.nodes[i].requires_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if matches!(self.nodes[i].op, Op::Param) {
                grads[i] = Some(g);
                continue;
            }
            let sw = self.recorder.start();
            let vjp = self.vjp(i, &g)?;
            if let Some(kind) = vjp.kind {
                let name = format!("{}_grad", self.nodes[i].name);
                self.recorder
                    .finish(sw, &name, Category::backward(kind), vjp.flops, vjp.bytes);
            }
            for (j, contribution) in vjp.grads {
                self.accumulate(&mut grads, j, contribution);
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    fn accumulate(&mut self, grads: &mut [Option<Tensor<T>>], j: usize, c: Tensor<T>) {
        match &mut grads[j] {
            slot @ None => *slot = Some(c),
            Some(existing) => {
                let sw = self.recorder.start();
                for (e, v) in existing.data_mut().iter_mut().zip(c.data()) {
                    *e = *e + *v;
                }
                let n = c.numel() as u64;
                let name = self.op_name("grad_accumulate");
                self.recorder.finish(
                    sw,
                    &name,
                    Category::backward(OpKind::Elementwise),
                    n,
                    3 * n * Self::esize(),
                );
            }
        }
    }

    fn vjp(&self, i: usize, g: &Tensor<T>) -> Result<Vjp<T>> {
        let node = &self.nodes[i];
        let rg = |j: usize| self.nodes[j].requires_grad;
        let val = |j: usize| &self.nodes[j].value;
        let es = Self::esize();
        let mut out = Vjp::default();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul { a, b } => {
                let (va, vb) = (val(*a), val(*b));
                let (m, k) = va.dims2("matmul")?;
                let n = vb.shape()[1];
                out.kind = Some(OpKind::MatMul);
                out.bytes = g.nbytes() + va.nbytes() + vb.nbytes();
                if rg(*a) {
                    let ga = kernels::matmul(g, &kernels::transpose(vb)?)?;
                    out.flops += self.flops.fma * (m * n * k) as u64;
                    out.bytes += ga.nbytes();
                    out.grads.push((*a, ga));
                }
                if rg(*b) {
                    let gb = kernels::matmul(&kernels::transpose(va)?, g)?;
                    out.flops += self.flops.fma * (k * m * n) as u64;
                    out.bytes += gb.nbytes();
                    out.grads.push((*b, gb));
                }
            }
            Op::Binary { kind, a, b, ba, bb } => {
                out.kind = Some(OpKind::Elementwise);
                out.bytes = g.nbytes();
                let numel = g.numel() as u64;
                for (me, other, bme, bother) in [(*a, *b, *ba, *bb), (*b, *a, *bb, *ba)] {
                    if !rg(me) {
                        continue;
                    }
                    let gd = g.data();
                    let target = val(me);
                    let mut acc = vec![T::zero(); target.numel()];
                    match kind {
                        BinaryKind::Add => {
                            for (idx, &gv) in gd.iter().enumerate() {
                                let t = bme.index(idx);
                                acc[t] = acc[t] + gv;
                            }
                            if bme != Broadcast::Full {
                                out.flops += numel;
                            }
                        }
                        BinaryKind::Mul => {
                            let od = val(other).data();
                            for (idx, &gv) in gd.iter().enumerate() {
                                let t = bme.index(idx);
                                acc[t] = acc[t] + gv * od[bother.index(idx)];
                            }
                            out.flops += numel * if bme == Broadcast::Full { 1 } else { 2 };
                            out.bytes += val(other).nbytes();
                        }
                    }
                    let grad = Tensor::new(target.shape().to_vec(), acc)?;
                    out.bytes += grad.nbytes();
                    out.grads.push((me, grad));
                }
            }
            Op::Unary { kind, x } => {
                let y = &node.value;
                let gx = match kind {
                    UnaryKind::Relu => {
                        out.flops = g.numel() as u64;
                        kernels::binary(g, y, |gv, yv| if yv > T::zero() { gv } else { T::zero() })?
                    }
                    UnaryKind::Tanh => {
                        out.flops = 3 * g.numel() as u64;
                        kernels::binary(g, y, |gv, yv| gv * (T::one() - yv * yv))?
                    }
                    UnaryKind::Sigmoid => {
                        out.flops = 3 * g.numel() as u64;
                        kernels::binary(g, y, |gv, yv| gv * yv * (T::one() - yv))?
                    }
                };
                out.kind = Some(OpKind::Elementwise);
                out.bytes = g.nbytes() + y.nbytes() + gx.nbytes();
                out.grads.push((*x, gx));
            }
            Op::SegmentSum { data, ids } => {
                // adjoint of a segment sum is a gather
                let gd = kernels::gather_rows(g, ids)?;
                out.kind = Some(OpKind::ConcatSlice);
                out.bytes = g.nbytes() + gd.nbytes() + INDEX_BYTES * ids.len() as u64;
                out.grads.push((*data, gd));
            }
            Op::Gather { data, indices } => {
                let rows = val(*data).shape()[0];
                let gd = kernels::unsorted_segment_sum(g, indices, rows)?;
                out.kind = Some(OpKind::SegmentSum);
                out.flops = g.numel() as u64;
                out.bytes = g.nbytes() + gd.nbytes() + INDEX_BYTES * indices.len() as u64;
                out.grads.push((*data, gd));
            }
            Op::Concat { inputs, axis } => {
                out.kind = Some(OpKind::ConcatSlice);
                out.bytes = g.nbytes();
                let mut offset = 0;
                for &j in inputs {
                    let len = val(j).shape()[*axis];
                    if rg(j) {
                        let gj = kernels::slice(g, *axis, offset, len)?;
                        out.bytes += gj.nbytes();
                        out.grads.push((j, gj));
                    }
                    offset += len;
                }
            }
            Op::Slice { x, axis, start } => {
                let shape = val(*x).shape().to_vec();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[*axis + 1..].iter().product();
                let (extent, len) = (shape[*axis], g.shape()[*axis]);
                let mut acc = vec![T::zero(); val(*x).numel()];
                for o in 0..outer {
                    let dst = (o * extent + start) * inner;
                    let src = o * len * inner;
                    acc[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                }
                let gx = Tensor::new(shape, acc)?;
                out.kind = Some(OpKind::ConcatSlice);
                out.bytes = g.nbytes() + gx.nbytes();
                out.grads.push((*x, gx));
            }
            Op::Reshape { x } => {
                out.grads.push((*x, g.reshape(val(*x).shape())?));
            }
            Op::Sum { x } => {
                let gx = Tensor::full(val(*x).shape(), g.data()[0]);
                out.kind = Some(OpKind::Elementwise);
                out.bytes = es + gx.nbytes();
                out.grads.push((*x, gx));
            }
            Op::Bce {
                scores,
                labels,
                mask,
                valid,
            } => {
                let p = val(*scores);
                let lo = T::from_f64(PROB_CLAMP);
                let hi = T::one() - lo;
                let scale = g.data()[0] / T::from_f64(*valid as f64);
                let data = p
                    .data()
                    .iter()
                    .zip(labels)
                    .zip(mask)
                    .map(|((&pv, &y), &m)| {
                        if m && pv > lo && pv < hi {
                            scale * (pv - y) / (pv * (T::one() - pv))
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let gp = Tensor::new(p.shape().to_vec(), data)?;
                out.kind = Some(OpKind::Other);
                out.flops = 5 * *valid as u64;
                out.bytes = p.nbytes() * 3 + mask.len() as u64;
                out.grads.push((*scores, gp));
            }
        }
        out.grads.retain(|(j, _)| rg(*j));
        Ok(out)
    }
}

#[derive(Default)]
struct Vjp<T> {
    kind: Option<OpKind>,
    flops: u64,
    bytes: u64,
    grads: Vec<(usize, Tensor<T>)>,
}

/// Mean clamped binary cross-entropy over masked entries, accumulated in
/// index order.
pub fn binary_cross_entropy<T: Element>(scores: &[T], labels: &[T], mask: &[bool]) -> Result<T> {
    if scores.len() != labels.len() || scores.len() != mask.len() {
        return Err(Error::dim(
            "bce_loss",
            format!(
                "{} scores, {} labels, {} mask entries",
                scores.len(),
                labels.len(),
                mask.len()
            ),
        ));
    }
    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::one() - lo;
    let mut total = T::zero();
    let mut valid = 0usize;
    for ((&p, &y), &m) in scores.iter().zip(labels).zip(mask) {
        if !m {
            continue;
        }
        let pc = p.max(lo).min(hi);
        total = total - (y * pc.ln() + (T::one() - y) * (T::one() - pc).ln());
        valid += 1;
    }
    if valid == 0 {
        return Err(Error::Usage("loss needs at least one valid edge".into()));
    }
    Ok(total / T::from_f64(valid as f64))
}

/// Gradients produced by [`Tape::backward`], keyed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    tape: u32,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get_mut(v.index).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_rejects_non_scalar_and_foreign_vars() {
        let mut t = Tape::<f64>::new();
        let x = t.param(Tensor::ones(&[2]));
        assert!(matches!(t.backward(x), Err(Error::Usage(_))));

        let mut other = Tape::<f64>::new();
        let y = other.param(Tensor::scalar(1.0));
        assert!(matches!(t.backward(y), Err(Error::Usage(_))));
    }

    #[test]
    fn shared_input_gradients_accumulate() {
        // loss = sum(x * x) -> grad 2x
        let mut t = Tape::<f64>::new();
        let x = t.param(Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap());
        let y = t.mul(x, x).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }

    #[test]
    fn leaves_get_no_gradient() {
        let mut t = Tape::<f64>::new();
        let w = t.param(Tensor::from_f64(&[2], &[1.0, 2.0]).unwrap());
        let x = t.leaf(Tensor::from_f64(&[2], &[3.0, 4.0]).unwrap());
        let y = t.mul(w, x).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get(x).is_none());
        assert_eq!(g.get(w).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn backward_records_grad_categories() {
        let mut t = Tape::<f32>::new();
        let a = t.param(Tensor::ones(&[2, 3]));
        let b = t.leaf(Tensor::ones(&[3, 4]));
        let c = t.matmul(a, b).unwrap();
        let l = t.sum(c).unwrap();
        t.backward(l).unwrap();
        let recs = t.recorder().records();
        let mm_grad = recs
            .iter()
            .find(|r| r.category == Category::backward(OpKind::MatMul))
            .unwrap();
        // only dA is needed: 2*m*n*k
        assert_eq!(mm_grad.flops, 2 * 2 * 4 * 3);
        assert_eq!(mm_grad.op, "matmul_grad");
    }

    #[test]
    fn scoped_names() {
        let mut t = Tape::<f32>::new();
        let a = t.leaf(Tensor::ones(&[1, 1]));
        t.scoped("enc", |t| t.scoped("l0", |t| t.relu(a))).unwrap();
        assert_eq!(t.recorder().records()[0].op, "enc.l0/relu");
    }
}
