//! Dense row-major tensors and a reverse-mode tape for exactly the operations
//! the link predictor needs.
//!
//! Every forward op checks its output for NaN/Inf and fails with
//! [`Error::NonFinite`] instead of letting a poisoned value propagate.
//! Sums and means accumulate in `f64` regardless of the element type.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, Range};
use std::sync::Arc;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-7;

/// Element type of a [`Tensor`].
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// `c = a * b + beta * c` over strided row/column layouts; `c` is dense row-major.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the assert above bounds every strided access for the
                // dense row- or column-major layouts used in this module.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S = f32> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Real> Tensor<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![S::zero(); shape.iter().product()] }
    }

    pub fn scalar(v: S) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn vector(data: Vec<S>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    /// Builds an `[n x p]` matrix from equally long rows.
    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Ok(Tensor { shape: vec![rows.len(), cols], data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows when viewed as a matrix; vectors are a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn row(&self, r: usize) -> &[S] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Real>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64_lossy(v.as_f64())).collect(),
        }
    }

    fn add_assign(&mut self, other: &Tensor<S>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }
}

/// Undirected graph in compressed-row form. Neighbour lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl Adjacency {
    pub fn from_edges(num_nodes: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); num_nodes];
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx as usize >= num_nodes {
                    return Err(Error::Index { index: idx as usize, nodes: num_nodes });
                }
            }
            lists[i as usize].push(j);
            if i != j {
                lists[j as usize].push(i);
            }
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut neighbors = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            neighbors.extend(l);
            offsets.push(neighbors.len());
        }
        Ok(Adjacency { offsets, neighbors })
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// `sum_u h_u + max_u h_u` over the neighbours of `v` (zero when isolated).
pub fn aggregate_neighbors<S: Real>(h: &Tensor<S>, adj: &Adjacency, v: usize) -> Result<Vec<S>> {
    if h.rows() != adj.num_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} nodes",
            h.rows(),
            adj.num_nodes()
        )));
    }
    if v >= adj.num_nodes() {
        return Err(Error::Index { index: v, nodes: adj.num_nodes() });
    }
    let (out, _) = sum_max_rows(h, adj, v..v + 1);
    Ok(out)
}

/// Sum+max aggregation for a node range; returns outputs and per-entry argmax.
fn sum_max_rows<S: Real>(h: &Tensor<S>, adj: &Adjacency, nodes: Range<usize>) -> (Vec<S>, Vec<u32>) {
    let d = h.cols();
    let data = h.data();
    let mut out = vec![S::zero(); nodes.len() * d];
    let mut argmax = vec![u32::MAX; nodes.len() * d];
    let mut sum = vec![0.0f64; d];
    let mut best = vec![S::zero(); d];
    for (k, v) in nodes.enumerate() {
        let Some((&first, rest)) = adj.neighbors(v).split_first() else {
            continue;
        };
        let arg = &mut argmax[k * d..(k + 1) * d];
        let row = &data[first as usize * d..][..d];
        for j in 0..d {
            sum[j] = row[j].as_f64();
            best[j] = row[j];
            arg[j] = first;
        }
        for &u in rest {
            let row = &data[u as usize * d..][..d];
            for j in 0..d {
                let x = row[j];
                sum[j] += x.as_f64();
                // neighbours are ascending, so a strict comparison keeps the lowest index on ties
                if x > best[j] {
                    best[j] = x;
                    arg[j] = u;
                }
            }
        }
        for (j, o) in out[k * d..(k + 1) * d].iter_mut().enumerate() {
            *o = S::from_f64_lossy(sum[j] + best[j].as_f64());
        }
    }
    (out, argmax)
}

/// Binary cross-entropy of one clamped probability.
pub fn bce_loss(p: f64, label: f64) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<S> {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Concat(Var, Var),
    SumMax { h: Var, adj: Arc<Adjacency>, argmax: Vec<u32> },
    SegmentMean { h: Var, segments: Vec<Range<usize>> },
    Bce { p: Var, labels: Vec<f64>, clamped: Vec<f64> },
    WeightedSum { x: Var, weights: Tensor<S> },
}

/// Records forward ops in execution order for one backward pass.
pub struct Tape<S = f32> {
    values: Vec<Tensor<S>>,
    ops: Vec<Op<S>>,
}

impl<S: Real> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> Tape<S> {
    pub fn new() -> Self {
        Tape { values: Vec::new(), ops: Vec::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf)
    }

    fn push(&mut self, t: Tensor<S>, op: Op<S>) -> Var {
        self.values.push(t);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    fn push_checked(&mut self, t: Tensor<S>, op: Op<S>, name: &'static str) -> Result<Var> {
        if !t.is_finite() {
            return Err(Error::NonFinite(name));
        }
        Ok(self.push(t, op))
    }

    /// `x W + b` for `x: [n x p]`, `W: [p x q]`, `b: [q]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if !xv.is_matrix() || !wv.is_matrix() || xv.cols() != wv.rows() || bv.len() != wv.cols() {
            return Err(Error::ShapeMismatch(format!(
                "linear x{:?} W{:?} b{:?}",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let (n, p, q) = (xv.rows(), xv.cols(), wv.cols());
        let mut out = Vec::with_capacity(n * q);
        for _ in 0..n {
            out.extend_from_slice(bv.data());
        }
        S::gemm(n, p, q, xv.data(), p as isize, 1, wv.data(), q as isize, 1, S::one(), &mut out);
        self.push_checked(Tensor { shape: vec![n, q], data: out }, Op::Linear { x, w, b }, "linear")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| if v > S::zero() { v } else { S::zero() }).collect();
        let t = Tensor { shape: xv.shape.clone(), data };
        self.push_checked(t, Op::Relu(x), "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let data = xv
            .data()
            .iter()
            .map(|&v| {
                let v = v.as_f64();
                let s = if v >= 0.0 { 1.0 / (1.0 + (-v).exp()) } else { v.exp() / (1.0 + v.exp()) };
                S::from_f64_lossy(s)
            })
            .collect();
        let t = Tensor { shape: xv.shape.clone(), data };
        self.push_checked(t, Op::Sigmoid(x), "sigmoid")
    }

    /// Column-wise concatenation: `[n x p] ++ [n x q] -> [n x (p + q)]`.
    pub fn concat_cols(&mut self, x: Var, y: Var) -> Result<Var> {
        let (xv, yv) = (self.value(x), self.value(y));
        if !xv.is_matrix() || !yv.is_matrix() || xv.rows() != yv.rows() {
            return Err(Error::ShapeMismatch(format!("concat {:?} with {:?}", xv.shape(), yv.shape())));
        }
        let n = xv.rows();
        let (p, q) = (xv.cols(), yv.cols());
        let mut data = Vec::with_capacity(n * (p + q));
        for r in 0..n {
            data.extend_from_slice(xv.row(r));
            data.extend_from_slice(yv.row(r));
        }
        self.push_checked(Tensor { shape: vec![n, p + q], data }, Op::Concat(x, y), "concat")
    }

    /// Per-node `sum + elementwise max` of neighbour rows, `[n x d] -> [n x d]`.
    ///
    /// Isolated nodes get zeros. In backward the max gradient goes to the
    /// lowest-index neighbour among ties.
    pub fn neighbor_sum_max(&mut self, h: Var, adj: &Arc<Adjacency>) -> Result<Var> {
        let hv = self.value(h);
        if !hv.is_matrix() || hv.rows() != adj.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "aggregation over {:?} with {} nodes",
                hv.shape(),
                adj.num_nodes()
            )));
        }
        let (data, argmax) = sum_max_rows(hv, adj, 0..adj.num_nodes());
        let t = Tensor { shape: hv.shape.clone(), data };
        self.push_checked(t, Op::SumMax { h, adj: Arc::clone(adj), argmax }, "neighbor_sum_max")
    }

    /// Column means of each row range, `[n x d] -> [segments x d]`.
    pub fn segment_mean(&mut self, h: Var, segments: Vec<Range<usize>>) -> Result<Var> {
        let hv = self.value(h);
        let d = hv.cols();
        let mut data = Vec::with_capacity(segments.len() * d);
        let mut acc = vec![0.0f64; d];
        for seg in &segments {
            if seg.is_empty() {
                return Err(Error::EmptyInput);
            }
            if seg.end > hv.rows() {
                return Err(Error::Index { index: seg.end - 1, nodes: hv.rows() });
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            for r in seg.clone() {
                for (a, v) in acc.iter_mut().zip(hv.row(r)) {
                    *a += v.as_f64();
                }
            }
            let inv = 1.0 / seg.len() as f64;
            data.extend(acc.iter().map(|a| S::from_f64_lossy(a * inv)));
        }
        let t = Tensor { shape: vec![segments.len(), d], data };
        self.push_checked(t, Op::SegmentMean { h, segments }, "segment_mean")
    }

    /// Column means over all rows as a single `[1 x d]` row.
    pub fn mean_rows(&mut self, h: Var) -> Result<Var> {
        let n = self.value(h).rows();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        self.segment_mean(h, vec![0..n])
    }

    /// Mean binary cross-entropy of probabilities `p` (one per label).
    pub fn bce_mean(&mut self, p: Var, labels: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} predictions, {} labels", pv.len(), labels.len())));
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        let clamped: Vec<f64> =
            pv.data().iter().map(|v| v.as_f64().clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)).collect();
        let total: f64 = clamped.iter().zip(labels).map(|(&p, &m)| bce_loss(p, m)).sum();
        let loss = S::from_f64_lossy(total / labels.len() as f64);
        let op = Op::Bce { p, labels: labels.to_vec(), clamped };
        self.push_checked(Tensor::scalar(loss), op, "bce")
    }

    /// `sum(x * weights)` with constant weights; turns any tensor into a scalar.
    pub fn weighted_sum(&mut self, x: Var, weights: Tensor<S>) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!("{:?} vs weights {:?}", xv.shape(), weights.shape())));
        }
        let s: f64 = xv.data().iter().zip(weights.data()).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        self.push_checked(Tensor::scalar(S::from_f64_lossy(s)), Op::WeightedSum { x, weights }, "weighted_sum")
    }

    /// Back-propagates from the scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<S>> {
        if self.values[loss.0].len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar, got {:?}",
                self.values[loss.0].shape()
            )));
        }
        let Tape { values, ops } = self;
        let mut grads: Vec<Option<Tensor<S>>> = (0..values.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor { shape: values[loss.0].shape.clone(), data: vec![S::one()] });

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &ops[i] {
                Op::Leaf => {}
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (&values[x.0], &values[w.0]);
                    let (n, p, q) = (xv.rows(), xv.cols(), wv.cols());
                    let mut dx = vec![S::zero(); n * p];
                    // dx = g W^T
                    S::gemm(n, q, p, g.data(), q as isize, 1, wv.data(), 1, q as isize, S::zero(), &mut dx);
                    let mut dw = vec![S::zero(); p * q];
                    // dW = x^T g
                    S::gemm(p, n, q, xv.data(), 1, p as isize, g.data(), q as isize, 1, S::zero(), &mut dw);
                    let mut db = vec![0.0f64; q];
                    for r in 0..n {
                        for (acc, v) in db.iter_mut().zip(g.row(r)) {
                            *acc += v.as_f64();
                        }
                    }
                    accumulate(&mut grads, *x, Tensor { shape: xv.shape.clone(), data: dx });
                    accumulate(&mut grads, *w, Tensor { shape: wv.shape.clone(), data: dw });
                    let db = db.into_iter().map(S::from_f64_lossy).collect();
                    accumulate(&mut grads, *b, Tensor { shape: values[b.0].shape.clone(), data: db });
                }
                Op::Relu(x) => {
                    let xv = &values[x.0];
                    let data = xv
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&v, &gv)| if v > S::zero() { gv } else { S::zero() })
                        .collect();
                    accumulate(&mut grads, *x, Tensor { shape: xv.shape.clone(), data });
                }
                Op::Sigmoid(x) => {
                    let y = &values[i];
                    let data =
                        y.data().iter().zip(g.data()).map(|(&s, &gv)| gv * s * (S::one() - s)).collect();
                    accumulate(&mut grads, *x, Tensor { shape: y.shape.clone(), data });
                }
                Op::Concat(x, y) => {
                    let p = values[x.0].cols();
                    let q = values[y.0].cols();
                    let n = g.rows();
                    let mut dx = Vec::with_capacity(n * p);
                    let mut dy = Vec::with_capacity(n * q);
                    for r in 0..n {
                        let row = g.row(r);
                        dx.extend_from_slice(&row[..p]);
                        dy.extend_from_slice(&row[p..]);
                    }
                    accumulate(&mut grads, *x, Tensor { shape: values[x.0].shape.clone(), data: dx });
                    accumulate(&mut grads, *y, Tensor { shape: values[y.0].shape.clone(), data: dy });
                }
                Op::SumMax { h, adj, argmax } => {
                    let hv = &values[h.0];
                    let d = hv.cols();
                    let mut dh = vec![0.0f64; hv.len()];
                    for v in 0..adj.num_nodes() {
                        let gv = &g.data()[v * d..(v + 1) * d];
                        for &u in adj.neighbors(v) {
                            for (acc, x) in dh[u as usize * d..][..d].iter_mut().zip(gv) {
                                *acc += x.as_f64();
                            }
                        }
                        for (j, &u) in argmax[v * d..(v + 1) * d].iter().enumerate() {
                            if u != u32::MAX {
                                dh[u as usize * d + j] += gv[j].as_f64();
                            }
                        }
                    }
                    let data = dh.into_iter().map(S::from_f64_lossy).collect();
                    accumulate(&mut grads, *h, Tensor { shape: hv.shape.clone(), data });
                }
                Op::SegmentMean { h, segments } => {
                    let hv = &values[h.0];
                    let d = hv.cols();
                    let mut dh = vec![S::zero(); hv.len()];
                    for (s, seg) in segments.iter().enumerate() {
                        let inv = 1.0 / seg.len() as f64;
                        let gs: Vec<S> = g.row(s).iter().map(|v| S::from_f64_lossy(v.as_f64() * inv)).collect();
                        for r in seg.clone() {
                            for j in 0..d {
                                dh[r * d + j] += gs[j];
                            }
                        }
                    }
                    accumulate(&mut grads, *h, Tensor { shape: hv.shape.clone(), data: dh });
                }
                Op::Bce { p, labels, clamped } => {
                    let scale = g.data()[0].as_f64() / labels.len() as f64;
                    let data = clamped
                        .iter()
                        .zip(labels)
                        .map(|(&pc, &m)| S::from_f64_lossy(scale * (pc - m) / (pc * (1.0 - pc))))
                        .collect();
                    accumulate(&mut grads, *p, Tensor { shape: values[p.0].shape.clone(), data });
                }
                Op::WeightedSum { x, weights } => {
                    let gv = g.data()[0];
                    let data = weights.data().iter().map(|&w| w * gv).collect();
                    accumulate(&mut grads, *x, Tensor { shape: values[x.0].shape.clone(), data });
                }
            }
            if matches!(ops[i], Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        Ok(Gradients { grads, values })
    }
}

fn accumulate<S: Real>(grads: &mut [Option<Tensor<S>>], v: Var, g: Tensor<S>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`]: forward values and the gradient of the loss
/// with respect to every leaf.
pub struct Gradients<S = f32> {
    grads: Vec<Option<Tensor<S>>>,
    values: Vec<Tensor<S>>,
}

impl<S: Real> Gradients<S> {
    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.values[v.0]
    }

    /// Gradient of leaf `v`; zeros when the loss does not depend on it or `v`
    /// is not a leaf.
    pub fn wrt(&self, v: Var) -> Tensor<S> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.values[v.0].shape()),
        }
    }

    /// Moves the gradients of `vars` out, in order.
    pub fn take(&mut self, vars: &[Var]) -> Vec<Tensor<S>> {
        vars.iter()
            .map(|v| match self.grads[v.0].take() {
                Some(g) => g,
                None => Tensor::zeros(self.values[v.0].shape()),
            })
            .collect()
    }
}

/// Largest relative disagreement between the tape gradient and central
/// finite differences of a scalar function of `inputs`.
///
/// Per entry: `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<S, F>(f: F, inputs: &[Tensor<S>], eps: f64) -> Result<f64>
where
    S: Real,
    F: Fn(&mut Tape<S>, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor<S>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0].as_f64())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for j in 0..inputs[i].len() {
            let orig = inputs[i].data()[j];
            probe[i].data_mut()[j] = S::from_f64_lossy(orig.as_f64() + eps);
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = S::from_f64_lossy(orig.as_f64() - eps);
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[j].as_f64();
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
