use std::collections::HashMap;
use std::sync::Arc;

use super::{GradientMap, ParamId, ParamStore, Tensor};
use crate::Scalar;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// An operation defined outside the core catalog. It receives the input
/// values and the gradient of its output and returns one gradient per input.
pub trait CustomOp<F>: Send {
    fn name(&self) -> &'static str;
    fn backward(&self, inputs: &[&Tensor<F>], output: &Tensor<F>, grad: &Tensor<F>) -> Vec<Tensor<F>>;
}

enum Op<F> {
    Constant,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    LogSumExp(Var),
    Sum(Var),
    Pick(Var, usize),
    Concat(Vec<Var>),
    ConcatCols(Var, Var),
    Stack(Vec<Var>),
    Row(Var, usize),
    Slice(Var, usize, usize),
    Gather(Var, Vec<usize>),
    PadRows(Var),
    Custom(Vec<Var>, Box<dyn CustomOp<F>>),
}

struct Node<F> {
    value: Arc<Tensor<F>>,
    op: Op<F>,
}

/// Single-use computation graph recorded in evaluation order.
///
/// Values are computed eagerly as nodes are added; [`Graph::backward`]
/// walks the tape in reverse.
pub struct Graph<F> {
    nodes: Vec<Node<F>>,
    params: HashMap<ParamId, Var>,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.push_shared(Arc::new(value), op)
    }

    fn push_shared(&mut self, value: Arc<Tensor<F>>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> F {
        self.value(v).item()
    }

    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node,
    /// so every use contributes to one accumulated gradient.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push_shared(store.shared(id), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    /// `[r,c] + [c]`, adding the vector to every row.
    pub fn add_row(&mut self, m: Var, bias: Var) -> Var {
        let mv = self.value(m);
        let bv = self.value(bias);
        assert_eq!(bv.rank(), 1, "add_row bias must be rank 1");
        assert_eq!(mv.cols(), bv.len(), "add_row width mismatch");
        let mut out = mv.clone();
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(m, bias))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Stable `log Σ exp` over all entries; yields a scalar.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let v = logsumexp(self.value(a).data());
        self.push(Tensor::scalar(v), Op::LogSumExp(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a).sum();
        self.push(Tensor::scalar(v), Op::Sum(a))
    }

    /// Selects one entry (flat index) as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Var {
        let v = self.value(a).data()[index];
        self.push(Tensor::scalar(v), Op::Pick(a, index))
    }

    /// Concatenates rank-1 tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.rank(), 1, "concat expects rank-1 inputs");
            out.extend_from_slice(t.data());
        }
        self.push(Tensor::vector(out), Op::Concat(parts.to_vec()))
    }

    /// `[n,a] ++ [n,b] -> [n,a+b]`
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows(), bv.rows(), "concat_cols row mismatch");
        let (n, ca, cb) = (av.rows(), av.cols(), bv.cols());
        let mut out = Vec::with_capacity(n * (ca + cb));
        for r in 0..n {
            out.extend_from_slice(av.row(r));
            out.extend_from_slice(bv.row(r));
        }
        self.push(Tensor::matrix(n, ca + cb, out), Op::ConcatCols(a, b))
    }

    /// Stacks equal-length rank-1 tensors as rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "stack of zero rows");
        let width = self.value(rows[0]).len();
        let mut out = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            let t = self.value(r);
            assert_eq!(t.rank(), 1, "stack expects rank-1 inputs");
            assert_eq!(t.len(), width, "stack width mismatch");
            out.extend_from_slice(t.data());
        }
        self.push(Tensor::matrix(rows.len(), width, out), Op::Stack(rows.to_vec()))
    }

    pub fn row(&mut self, m: Var, r: usize) -> Var {
        let v = Tensor::vector(self.value(m).row(r).to_vec());
        self.push(v, Op::Row(m, r))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        assert_eq!(t.rank(), 1, "slice expects a rank-1 input");
        let v = Tensor::vector(t.data()[start..start + len].to_vec());
        self.push(v, Op::Slice(a, start, len))
    }

    /// Row lookup: `table[ids[i]]` for each i, giving `[ids.len(), d]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let d = t.cols();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(t.row(i));
        }
        self.push(Tensor::matrix(ids.len(), d, out), Op::Gather(table, ids.to_vec()))
    }

    /// Appends zero rows up to `n` rows total.
    pub fn pad_rows(&mut self, m: Var, n: usize) -> Var {
        let t = self.value(m);
        assert!(n >= t.rows(), "pad_rows cannot shrink {} rows to {}", t.rows(), n);
        if n == t.rows() {
            return m;
        }
        let mut data = t.data().to_vec();
        data.resize(n * t.cols(), F::zero());
        let v = Tensor::matrix(n, t.cols(), data);
        self.push(v, Op::PadRows(m))
    }

    pub fn custom(&mut self, inputs: &[Var], value: Tensor<F>, op: Box<dyn CustomOp<F>>) -> Var {
        self.push(value, Op::Custom(inputs.to_vec(), op))
    }

    /// Reverse sweep from a scalar `loss`. Returns per-node gradients.
    pub fn backward(&self, loss: Var) -> NodeGrads<F> {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.value(loss).shape()
        );
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), F::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        NodeGrads { grads }
    }

    fn propagate(&self, op: &Op<F>, out: &Tensor<F>, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let mut acc = |v: Var, delta: Tensor<F>| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match op {
            Op::Constant | Op::Param => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::Scale(a, c) => acc(*a, g.map(|x| x * *c)),
            Op::AddRow(m, bias) => {
                let mut gb = vec![F::zero(); g.cols()];
                for r in 0..g.rows() {
                    for (s, &x) in gb.iter_mut().zip(g.row(r)) {
                        *s += x;
                    }
                }
                acc(*m, g.clone());
                acc(*bias, Tensor::vector(gb));
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                // dA = dC · Bᵀ, dB = Aᵀ · dC (rank-1 lhs treated as one row)
                let ga = g.matmul(&bv.transpose());
                acc(*a, ga);
                let a2 = if av.rank() == 1 {
                    Tensor::matrix(1, av.len(), av.data().to_vec())
                } else {
                    av.clone()
                };
                let g2 = if g.rank() == 1 {
                    Tensor::matrix(1, g.len(), g.data().to_vec())
                } else {
                    g.clone()
                };
                acc(*b, a2.transpose().matmul(&g2));
            }
            Op::Tanh(a) => acc(*a, g.zip_map(out, |x, y| x * (F::one() - y * y))),
            Op::Sigmoid(a) => acc(*a, g.zip_map(out, |x, y| x * y * (F::one() - y))),
            Op::LogSumExp(a) => {
                let lse = out.item();
                let gv = g.item();
                acc(*a, self.value(*a).map(|x| gv * (x - lse).exp()));
            }
            Op::Sum(a) => {
                let gv = g.item();
                acc(*a, Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Pick(a, i) => {
                let mut d = self.value(*a).zeros_like();
                d.data_mut()[*i] = g.item();
                acc(*a, d);
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    acc(p, Tensor::vector(g.data()[off..off + n].to_vec()));
                    off += n;
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let n = g.rows();
                let mut ga = Vec::with_capacity(n * ca);
                let mut gb = Vec::with_capacity(n * cb);
                for r in 0..n {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                acc(*a, Tensor::matrix(n, ca, ga));
                acc(*b, Tensor::matrix(n, cb, gb));
            }
            Op::Stack(rows) => {
                for (r, &v) in rows.iter().enumerate() {
                    acc(v, Tensor::vector(g.row(r).to_vec()));
                }
            }
            Op::Row(m, r) => {
                let mut d = self.value(*m).zeros_like();
                d.row_mut(*r).copy_from_slice(g.data());
                acc(*m, d);
            }
            Op::Slice(a, start, len) => {
                let mut d = self.value(*a).zeros_like();
                d.data_mut()[*start..*start + *len].copy_from_slice(g.data());
                acc(*a, d);
            }
            Op::Gather(table, ids) => {
                let mut d = self.value(*table).zeros_like();
                for (r, &i) in ids.iter().enumerate() {
                    for (s, &x) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                        *s += x;
                    }
                }
                acc(*table, d);
            }
            Op::PadRows(m) => {
                let src = self.value(*m);
                let keep = src.len();
                acc(*m, Tensor::from_parts(src.shape().to_vec(), g.data()[..keep].to_vec()));
            }
            Op::Custom(inputs, custom) => {
                let vals: Vec<&Tensor<F>> = inputs.iter().map(|&v| self.value(v)).collect();
                let deltas = custom.backward(&vals, out, g);
                assert_eq!(deltas.len(), inputs.len(), "{} returned wrong gradient count", custom.name());
                for (&v, d) in inputs.iter().zip(deltas) {
                    acc(v, d);
                }
            }
        }
    }

    /// Reverse sweep collected into a [`GradientMap`] over the trainable
    /// parameters of `store`. Parameters the loss does not reach get zeros.
    pub fn grad(&self, loss: Var, store: &ParamStore<F>) -> GradientMap<F> {
        let node_grads = self.backward(loss);
        let mut out = GradientMap::zeros(store);
        for (&id, &v) in &self.params {
            if let (Some(slot), Some(g)) = (out.slot_mut(id), node_grads.get(v)) {
                slot.add_assign(g);
            }
        }
        out
    }
}

/// Gradients of every node after a reverse sweep.
pub struct NodeGrads<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> NodeGrads<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

/// Exact reverse-mode gradient of a scalar `loss` w.r.t. `store`.
pub fn grad<F: Scalar>(graph: &Graph<F>, loss: Var, store: &ParamStore<F>) -> GradientMap<F> {
    graph.grad(loss, store)
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `log Σ exp(x)` with max subtraction. Empty input gives `-inf`.
pub fn logsumexp<F: Scalar>(xs: &[F]) -> F {
    let m = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if m == F::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<F>().ln()
}
