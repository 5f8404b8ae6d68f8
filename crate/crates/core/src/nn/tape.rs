//! Reverse-mode automatic differentiation on a replayable tape.
//!
//! A [`Tape`] records a Wengert list of vector-valued operations.  Each node
//! is an [`Op`] variant plus its forward value; `backward` walks the list in
//! reverse, pushing adjoints through a hand-written rule per variant and
//! accumulating parameter gradients into a [`ParamGrads`].  Ops are plain
//! enum data — no closures — so a tape is inspectable and its replay order
//! is exactly its build order, which keeps training seed-deterministic.
//!
//! All values are `f64` vectors; scalars are length-1 vectors.  Forward
//! computation routes through the kernels module so tape evaluation shares
//! accumulation order with the rest of the crate.

use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::params::{ParamGrads, ParamId, ParameterStore};

/// Handle to one node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef(pub usize);

/// One recorded operation.
#[derive(Debug, Clone)]
pub enum Op {
    /// External constant; receives no gradient.
    Input,
    /// A whole 1-D parameter, or one row of a 2-D parameter.
    Param { id: ParamId, row: Option<usize> },
    /// Concatenation of earlier nodes.
    Concat { parts: Vec<NodeRef> },
    /// Contiguous sub-range of an earlier node.
    Slice { x: NodeRef, start: usize },
    /// Element-wise sum of two equal-length nodes.
    Add { a: NodeRef, b: NodeRef },
    /// Element-wise product of two equal-length nodes.
    Mul { a: NodeRef, b: NodeRef },
    /// Element-wise logistic sigmoid.
    Sigmoid { x: NodeRef },
    /// Element-wise hyperbolic tangent.
    Tanh { x: NodeRef },
    /// `y = M·x` for a 2-D parameter `M`.
    MatVec { m: ParamId, x: NodeRef },
    /// `y[i] = W[rows[i]]·x + b[rows[i]]`: an affine map restricted to a
    /// candidate subset of rows.  Rows outside `rows` get no logit and no
    /// gradient, which realizes legal-action masking.
    RowsAffine { w: ParamId, b: ParamId, rows: Vec<usize>, x: NodeRef },
    /// `y[i] = rows[i]·x` against a stack of earlier vector nodes.
    DotStack { rows: Vec<NodeRef>, x: NodeRef },
    /// `z = Σᵢ weights[i]·rows[i]` — a convex-combination readout.
    WeightedSum { weights: NodeRef, rows: Vec<NodeRef> },
    /// Stable softmax over a vector node.
    Softmax { x: NodeRef },
    /// Scalar `log Σ exp(x) − x[pick]`: negative log-softmax at `pick`.
    NllPick { x: NodeRef, pick: usize },
    /// Scalar `Σᵢ (x[i] − target[i])²` against a constant target.
    SqDiffConst { x: NodeRef, target: Vec<f64> },
    /// Scalar sum of earlier scalar nodes.
    SumScalars { xs: Vec<NodeRef> },
    /// Element-wise multiplication by a constant.
    Scale { x: NodeRef, c: f64 },
}

/// A Wengert list bound to an immutable parameter store.
pub struct Tape<'p> {
    store: &'p ParameterStore,
    ops: Vec<Op>,
    vals: Vec<Vec<f64>>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParameterStore) -> Self {
        Tape { store, ops: Vec::new(), vals: Vec::new() }
    }

    pub fn store(&self) -> &ParameterStore {
        self.store
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, n: NodeRef) -> &[f64] {
        &self.vals[n.0]
    }

    /// Forward value of a scalar (length-1) node.
    pub fn scalar(&self, n: NodeRef) -> f64 {
        debug_assert_eq!(self.vals[n.0].len(), 1);
        self.vals[n.0][0]
    }

    fn push(&mut self, op: Op, val: Vec<f64>) -> NodeRef {
        let r = NodeRef(self.ops.len());
        self.ops.push(op);
        self.vals.push(val);
        r
    }

    /// Records an external constant vector.
    pub fn input(&mut self, data: Vec<f64>) -> NodeRef {
        self.push(Op::Input, data)
    }

    /// Records a whole 1-D parameter as a node.
    pub fn param(&mut self, id: ParamId) -> NodeRef {
        let t = self.store.tensor(id);
        assert_eq!(t.dims.len(), 1, "param() expects a 1-D tensor, use param_row for matrices");
        let val = t.data.clone();
        self.push(Op::Param { id, row: None }, val)
    }

    /// Records row `row` of a 2-D parameter (an embedding lookup).
    pub fn param_row(&mut self, id: ParamId, row: usize) -> NodeRef {
        let t = self.store.tensor(id);
        assert_eq!(t.dims.len(), 2, "param_row() expects a 2-D tensor");
        assert!(row < t.rows(), "row {row} out of range for {}", self.store.name(id));
        let val = t.row(row).to_vec();
        self.push(Op::Param { id, row: Some(row) }, val)
    }

    pub fn concat(&mut self, parts: &[NodeRef]) -> NodeRef {
        let mut val = Vec::new();
        for p in parts {
            val.extend_from_slice(&self.vals[p.0]);
        }
        self.push(Op::Concat { parts: parts.to_vec() }, val)
    }

    pub fn slice(&mut self, x: NodeRef, start: usize, len: usize) -> NodeRef {
        assert!(start + len <= self.vals[x.0].len());
        let val = self.vals[x.0][start..start + len].to_vec();
        self.push(Op::Slice { x, start }, val)
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
        assert_eq!(va.len(), vb.len(), "add length mismatch");
        let val = va.iter().zip(vb).map(|(x, y)| x + y).collect();
        self.push(Op::Add { a, b }, val)
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        let (va, vb) = (&self.vals[a.0], &self.vals[b.0]);
        assert_eq!(va.len(), vb.len(), "mul length mismatch");
        let val = va.iter().zip(vb).map(|(x, y)| x * y).collect();
        self.push(Op::Mul { a, b }, val)
    }

    pub fn sigmoid(&mut self, x: NodeRef) -> NodeRef {
        let val = self.vals[x.0].iter().map(|&v| kernels::sigmoid(v)).collect();
        self.push(Op::Sigmoid { x }, val)
    }

    pub fn tanh(&mut self, x: NodeRef) -> NodeRef {
        let val = self.vals[x.0].iter().map(|&v| kernels::tanh(v)).collect();
        self.push(Op::Tanh { x }, val)
    }

    pub fn matvec(&mut self, m: ParamId, x: NodeRef) -> NodeRef {
        let t = self.store.tensor(m);
        assert_eq!(t.dims.len(), 2, "matvec weight must be 2-D");
        let (rows, cols) = (t.rows(), t.cols());
        assert_eq!(cols, self.vals[x.0].len(), "matvec width mismatch for {}", self.store.name(m));
        let mut val = vec![0.0; rows];
        kernels::matvec_into(&mut val, &t.data, rows, cols, &self.vals[x.0]);
        self.push(Op::MatVec { m, x }, val)
    }

    pub fn rows_affine(&mut self, w: ParamId, b: ParamId, rows: Vec<usize>, x: NodeRef) -> NodeRef {
        let wt = self.store.tensor(w);
        let bt = self.store.tensor(b);
        assert_eq!(wt.dims.len(), 2);
        assert_eq!(bt.dims.len(), 1);
        assert_eq!(wt.rows(), bt.len(), "weight/bias row mismatch");
        assert_eq!(wt.cols(), self.vals[x.0].len());
        assert!(!rows.is_empty(), "rows_affine needs at least one candidate");
        let xv = &self.vals[x.0];
        let val: Vec<f64> = rows
            .iter()
            .map(|&r| {
                assert!(r < wt.rows());
                kernels::dot(wt.row(r), xv) + bt.data[r]
            })
            .collect();
        self.push(Op::RowsAffine { w, b, rows, x }, val)
    }

    pub fn dot_stack(&mut self, rows: &[NodeRef], x: NodeRef) -> NodeRef {
        assert!(!rows.is_empty(), "dot_stack needs at least one row");
        let xv = &self.vals[x.0];
        let val: Vec<f64> = rows
            .iter()
            .map(|r| {
                assert_eq!(self.vals[r.0].len(), xv.len());
                kernels::dot(&self.vals[r.0], xv)
            })
            .collect();
        self.push(Op::DotStack { rows: rows.to_vec(), x }, val)
    }

    pub fn weighted_sum(&mut self, weights: NodeRef, rows: &[NodeRef]) -> NodeRef {
        assert_eq!(self.vals[weights.0].len(), rows.len());
        assert!(!rows.is_empty());
        let width = self.vals[rows[0].0].len();
        let mut val = vec![0.0; width];
        for (i, r) in rows.iter().enumerate() {
            let wv = self.vals[weights.0][i];
            let rv = &self.vals[r.0];
            assert_eq!(rv.len(), width);
            for j in 0..width {
                val[j] += wv * rv[j];
            }
        }
        self.push(Op::WeightedSum { weights, rows: rows.to_vec() }, val)
    }

    pub fn softmax(&mut self, x: NodeRef) -> NodeRef {
        let mut val = vec![0.0; self.vals[x.0].len()];
        kernels::softmax_into(&mut val, &self.vals[x.0]);
        self.push(Op::Softmax { x }, val)
    }

    /// Negative log-softmax of `x` at index `pick`, as a scalar node.
    pub fn nll_pick(&mut self, x: NodeRef, pick: usize) -> NodeRef {
        let xv = &self.vals[x.0];
        assert!(pick < xv.len());
        let val = vec![kernels::log_sum_exp(xv) - xv[pick]];
        self.push(Op::NllPick { x, pick }, val)
    }

    /// Squared Euclidean distance to a constant target, as a scalar node.
    pub fn sq_diff_const(&mut self, x: NodeRef, target: Vec<f64>) -> NodeRef {
        let xv = &self.vals[x.0];
        assert_eq!(xv.len(), target.len());
        let v: f64 = xv.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum();
        self.push(Op::SqDiffConst { x, target }, vec![v])
    }

    /// Sum of scalar nodes, as a scalar node.
    pub fn sum_scalars(&mut self, xs: &[NodeRef]) -> NodeRef {
        let mut v = 0.0;
        for x in xs {
            debug_assert_eq!(self.vals[x.0].len(), 1);
            v += self.vals[x.0][0];
        }
        self.push(Op::SumScalars { xs: xs.to_vec() }, vec![v])
    }

    pub fn scale(&mut self, x: NodeRef, c: f64) -> NodeRef {
        let val = self.vals[x.0].iter().map(|&v| v * c).collect();
        self.push(Op::Scale { x, c }, val)
    }

    /// One LSTM cell update composed from primitive ops.  Gate layout
    /// matches the raw kernel: `[input; forget; output; cell]` stacked in
    /// the weight rows, so checkpoints mean the same thing on both paths.
    pub fn lstm(
        &mut self,
        wx: ParamId,
        wh: ParamId,
        b: ParamId,
        x: NodeRef,
        h: NodeRef,
        c: NodeRef,
    ) -> (NodeRef, NodeRef) {
        let hidden = self.store.tensor(b).len() / 4;
        assert_eq!(self.vals[h.0].len(), hidden);
        assert_eq!(self.vals[c.0].len(), hidden);
        let gx = self.matvec(wx, x);
        let gh = self.matvec(wh, h);
        let bias = self.param(b);
        let s = self.add(gx, gh);
        let pre = self.add(s, bias);
        let gi_pre = self.slice(pre, 0, hidden);
        let gf_pre = self.slice(pre, hidden, hidden);
        let go_pre = self.slice(pre, 2 * hidden, hidden);
        let gc_pre = self.slice(pre, 3 * hidden, hidden);
        let gi = self.sigmoid(gi_pre);
        let gf = self.sigmoid(gf_pre);
        let go = self.sigmoid(go_pre);
        let gc = self.tanh(gc_pre);
        let keep = self.mul(gf, c);
        let write = self.mul(gi, gc);
        let c2 = self.add(keep, write);
        let c2t = self.tanh(c2);
        let h2 = self.mul(go, c2t);
        (c2, h2)
    }

    /// Reverse pass from a scalar loss node.  Returns parameter gradients;
    /// the tape and its values are left intact.
    pub fn backward(&self, loss: NodeRef) -> ParamGrads {
        assert_eq!(self.vals[loss.0].len(), 1, "backward expects a scalar loss node");
        let mut grads = ParamGrads::zeros(self.store);
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.ops.len()];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let g = match adj[i].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.ops[i] {
                Op::Input => {}
                Op::Param { id, row } => {
                    let slot = grads.slot_mut(*id);
                    let off = match row {
                        Some(r) => r * self.store.tensor(*id).cols(),
                        None => 0,
                    };
                    for (j, gv) in g.iter().enumerate() {
                        slot[off + j] += gv;
                    }
                }
                Op::Concat { parts } => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.vals[p.0].len();
                        let dst = Self::adj_slot(&mut adj, *p, len);
                        for j in 0..len {
                            dst[j] += g[off + j];
                        }
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let len = self.vals[x.0].len();
                    let dst = Self::adj_slot(&mut adj, *x, len);
                    for (j, gv) in g.iter().enumerate() {
                        dst[start + j] += gv;
                    }
                }
                Op::Add { a, b } => {
                    for n in [a, b] {
                        let dst = Self::adj_slot(&mut adj, *n, g.len());
                        for j in 0..g.len() {
                            dst[j] += g[j];
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (self.vals[a.0].clone(), self.vals[b.0].clone());
                    let da = Self::adj_slot(&mut adj, *a, g.len());
                    for j in 0..g.len() {
                        da[j] += g[j] * vb[j];
                    }
                    let db = Self::adj_slot(&mut adj, *b, g.len());
                    for j in 0..g.len() {
                        db[j] += g[j] * va[j];
                    }
                }
                Op::Sigmoid { x } => {
                    let y = &self.vals[i];
                    let dx = Self::adj_slot(&mut adj, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                }
                Op::Tanh { x } => {
                    let y = &self.vals[i];
                    let dx = Self::adj_slot(&mut adj, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * (1.0 - y[j] * y[j]);
                    }
                }
                Op::MatVec { m, x } => {
                    let t = self.store.tensor(*m);
                    let (rows, cols) = (t.rows(), t.cols());
                    let xv = self.vals[x.0].clone();
                    {
                        let dm = grads.slot_mut(*m);
                        for r in 0..rows {
                            let gr = g[r];
                            for cidx in 0..cols {
                                dm[r * cols + cidx] += gr * xv[cidx];
                            }
                        }
                    }
                    let dx = Self::adj_slot(&mut adj, *x, cols);
                    kernels::matvec_t_accum(dx, &t.data, rows, cols, &g);
                }
                Op::RowsAffine { w, b, rows, x } => {
                    let wt = self.store.tensor(*w);
                    let cols = wt.cols();
                    let xv = self.vals[x.0].clone();
                    {
                        let dw = grads.slot_mut(*w);
                        for (i_r, &r) in rows.iter().enumerate() {
                            let gr = g[i_r];
                            for cidx in 0..cols {
                                dw[r * cols + cidx] += gr * xv[cidx];
                            }
                        }
                    }
                    {
                        let db = grads.slot_mut(*b);
                        for (i_r, &r) in rows.iter().enumerate() {
                            db[r] += g[i_r];
                        }
                    }
                    let dx = Self::adj_slot(&mut adj, *x, cols);
                    for (i_r, &r) in rows.iter().enumerate() {
                        let wrow = wt.row(r);
                        let gr = g[i_r];
                        for cidx in 0..cols {
                            dx[cidx] += gr * wrow[cidx];
                        }
                    }
                }
                Op::DotStack { rows, x } => {
                    let xv = self.vals[x.0].clone();
                    for (i_r, r) in rows.iter().enumerate() {
                        let gr = g[i_r];
                        let dr = Self::adj_slot(&mut adj, *r, xv.len());
                        for j in 0..xv.len() {
                            dr[j] += gr * xv[j];
                        }
                    }
                    let row_vals: Vec<Vec<f64>> =
                        rows.iter().map(|r| self.vals[r.0].clone()).collect();
                    let dx = Self::adj_slot(&mut adj, *x, xv.len());
                    for (i_r, rv) in row_vals.iter().enumerate() {
                        let gr = g[i_r];
                        for j in 0..xv.len() {
                            dx[j] += gr * rv[j];
                        }
                    }
                }
                Op::WeightedSum { weights, rows } => {
                    let wv = self.vals[weights.0].clone();
                    let width = g.len();
                    let mut dw = vec![0.0; rows.len()];
                    for (i_r, r) in rows.iter().enumerate() {
                        let rv = self.vals[r.0].clone();
                        dw[i_r] = kernels::dot(&g, &rv);
                        let dr = Self::adj_slot(&mut adj, *r, width);
                        for j in 0..width {
                            dr[j] += wv[i_r] * g[j];
                        }
                    }
                    let dst = Self::adj_slot(&mut adj, *weights, rows.len());
                    for j in 0..rows.len() {
                        dst[j] += dw[j];
                    }
                }
                Op::Softmax { x } => {
                    let y = &self.vals[i];
                    let inner = kernels::dot(&g, y);
                    let dx = Self::adj_slot(&mut adj, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += y[j] * (g[j] - inner);
                    }
                }
                Op::NllPick { x, pick } => {
                    let up = g[0];
                    let xv = &self.vals[x.0];
                    let mut p = vec![0.0; xv.len()];
                    kernels::softmax_into(&mut p, xv);
                    let dx = Self::adj_slot(&mut adj, *x, p.len());
                    for j in 0..p.len() {
                        let ind = if j == *pick { 1.0 } else { 0.0 };
                        dx[j] += up * (p[j] - ind);
                    }
                }
                Op::SqDiffConst { x, target } => {
                    let up = g[0];
                    let xv = self.vals[x.0].clone();
                    let dx = Self::adj_slot(&mut adj, *x, xv.len());
                    for j in 0..xv.len() {
                        dx[j] += up * 2.0 * (xv[j] - target[j]);
                    }
                }
                Op::SumScalars { xs } => {
                    let up = g[0];
                    for x in xs {
                        let dst = Self::adj_slot(&mut adj, *x, 1);
                        dst[0] += up;
                    }
                }
                Op::Scale { x, c } => {
                    let dx = Self::adj_slot(&mut adj, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * c;
                    }
                }
            }
        }
        grads
    }

    fn adj_slot(adj: &mut [Option<Vec<f64>>], n: NodeRef, len: usize) -> &mut Vec<f64> {
        adj[n.0].get_or_insert_with(|| vec![0.0; len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Tensor;
    use crate::rng::DetRng;
    use alloc::string::String;

    fn store_with(entries: &[(&str, &[usize])], seed: u64) -> ParameterStore {
        let mut rng = DetRng::new(seed);
        let mut s = ParameterStore::new();
        for (name, dims) in entries {
            s.add_uniform(name, dims, &mut rng);
        }
        s
    }

    /// Central finite difference over every coordinate of every tensor.
    fn fd_grads(
        store: &mut ParameterStore,
        f: &dyn Fn(&ParameterStore) -> f64,
        eps: f64,
    ) -> ParamGrads {
        let ids: Vec<ParamId> = store.iter().map(|(id, _, _)| id).collect();
        let mut out = ParamGrads::zeros(store);
        for id in ids {
            for idx in 0..store.tensor(id).len() {
                let orig = store.value(id, idx);
                store.set_value(id, idx, orig + eps);
                let fp = f(store);
                store.set_value(id, idx, orig - eps);
                let fm = f(store);
                store.set_value(id, idx, orig);
                out.slot_mut(id)[idx] = (fp - fm) / (2.0 * eps);
            }
        }
        out
    }

    fn assert_close(analytic: &ParamGrads, fd: &ParamGrads, store: &ParameterStore, tol: f64) {
        for (id, name, t) in store.iter() {
            for idx in 0..t.len() {
                let a = analytic.slot(id)[idx];
                let n = fd.slot(id)[idx];
                let rel = (a - n).abs() / (a.abs() + n.abs() + 1e-12);
                assert!(rel < tol, "{name}[{idx}]: analytic {a} vs fd {n} (rel {rel})");
            }
        }
    }

    #[test]
    fn param_nodes_mirror_store_values() {
        let s = store_with(&[("v", &[3]), ("m", &[2, 3])], 1);
        let mut t = Tape::new(&s);
        let v = t.param(s.id("v").unwrap());
        let r1 = t.param_row(s.id("m").unwrap(), 1);
        assert_eq!(t.value(v), s.data(s.id("v").unwrap()));
        assert_eq!(t.value(r1), s.row(s.id("m").unwrap(), 1));
    }

    #[test]
    fn elementwise_forward_values() {
        let s = ParameterStore::new();
        let mut t = Tape::new(&s);
        let a = t.input(alloc::vec![1.0, -2.0]);
        let b = t.input(alloc::vec![0.5, 4.0]);
        let sum = t.add(a, b);
        let prod = t.mul(a, b);
        assert_eq!(t.value(sum), &[1.5, 2.0]);
        assert_eq!(t.value(prod), &[0.5, -8.0]);
        let sg = t.sigmoid(a);
        assert!((t.value(sg)[0] - 1.0 / (1.0 + libm::exp(-1.0))).abs() < 1e-15);
        let th = t.tanh(a);
        assert!((t.value(th)[1] - libm::tanh(-2.0)).abs() < 1e-15);
        let cat = t.concat(&[a, b]);
        assert_eq!(t.value(cat), &[1.0, -2.0, 0.5, 4.0]);
        let sl = t.slice(cat, 1, 2);
        assert_eq!(t.value(sl), &[-2.0, 0.5]);
    }

    #[test]
    fn linear_map_gradient_matches_finite_differences() {
        let mut s = store_with(&[("w", &[3, 4]), ("b", &[3])], 2);
        let x = alloc::vec![0.3, -0.7, 1.1, 0.2];
        let target = alloc::vec![0.1, 0.0, -0.2];
        let build = |store: &ParameterStore, xv: &[f64], tv: &[f64]| -> (f64, ParamGrads) {
            let mut t = Tape::new(store);
            let xn = t.input(xv.to_vec());
            let wx = t.matvec(store.id("w").unwrap(), xn);
            let bn = t.param(store.id("b").unwrap());
            let y = t.add(wx, bn);
            let loss = t.sq_diff_const(y, tv.to_vec());
            let g = t.backward(loss);
            (t.scalar(loss), g)
        };
        let (_, analytic) = build(&s, &x, &target);
        let fx = x.clone();
        let ft = target.clone();
        let fd = fd_grads(&mut s, &move |st| build(st, &fx, &ft).0, 1e-5);
        assert_close(&analytic, &fd, &s, 1e-7);
    }

    #[test]
    fn softmax_weighted_sum_gradients_match_finite_differences() {
        let mut s = store_with(&[("wm", &[3, 2]), ("emb", &[4, 3])], 3);
        let build = |store: &ParameterStore| -> (f64, ParamGrads) {
            let mut t = Tape::new(store);
            let h = t.input(alloc::vec![0.4, -0.9]);
            let u = t.matvec(store.id("wm").unwrap(), h);
            let emb = store.id("emb").unwrap();
            let rows: Vec<NodeRef> = (0..4).map(|i| t.param_row(emb, i)).collect();
            let scores = t.dot_stack(&rows, u);
            let p = t.softmax(scores);
            let z = t.weighted_sum(p, &rows);
            let loss = t.sq_diff_const(z, alloc::vec![0.2, -0.1, 0.3]);
            let g = t.backward(loss);
            (t.scalar(loss), g)
        };
        let (_, analytic) = build(&s);
        let fd = fd_grads(&mut s, &|st| build(st).0, 1e-5);
        assert_close(&analytic, &fd, &s, 1e-6);
    }

    #[test]
    fn nll_pick_value_and_gradient() {
        // Uniform logits over k candidates give exactly ln k.
        let s = ParameterStore::new();
        let mut t = Tape::new(&s);
        let logits = t.input(alloc::vec![0.3; 5]);
        let nll = t.nll_pick(logits, 2);
        assert!((t.scalar(nll) - libm::log(5.0)).abs() < 1e-12);

        let mut s2 = store_with(&[("w", &[4, 2]), ("b", &[4])], 4);
        let build = |store: &ParameterStore| -> (f64, ParamGrads) {
            let mut t = Tape::new(store);
            let x = t.input(alloc::vec![0.7, -0.3]);
            let logits = t.rows_affine(
                store.id("w").unwrap(),
                store.id("b").unwrap(),
                alloc::vec![0, 2, 3],
                x,
            );
            let loss = t.nll_pick(logits, 1);
            let g = t.backward(loss);
            (t.scalar(loss), g)
        };
        let (_, analytic) = build(&s2);
        // Candidate row 1 is excluded, so its weight and bias must have no
        // gradient at all.
        let w = s2.id("w").unwrap();
        let b = s2.id("b").unwrap();
        assert!(analytic.slot(w)[2..4].iter().all(|&v| v == 0.0));
        assert_eq!(analytic.slot(b)[1], 0.0);
        let fd = fd_grads(&mut s2, &|st| build(st).0, 1e-5);
        assert_close(&analytic, &fd, &s2, 1e-6);
    }

    #[test]
    fn lstm_composite_zero_weights_give_zero_hidden() {
        let mut s = ParameterStore::new();
        s.add("wx", Tensor::zeros(&[8, 3]));
        s.add("wh", Tensor::zeros(&[8, 2]));
        s.add("b", Tensor::zeros(&[8]));
        let mut t = Tape::new(&s);
        let x = t.input(alloc::vec![1.0, 2.0, 3.0]);
        let h = t.input(alloc::vec![0.4, -0.4]);
        let c = t.input(alloc::vec![0.0, 0.0]);
        let (c2, h2) = t.lstm(s.id("wx").unwrap(), s.id("wh").unwrap(), s.id("b").unwrap(), x, h, c);
        assert_eq!(t.value(c2), &[0.0, 0.0]);
        assert_eq!(t.value(h2), &[0.0, 0.0]);
    }

    #[test]
    fn lstm_composite_gradient_matches_finite_differences() {
        let mut s = store_with(&[("wx", &[8, 3]), ("wh", &[8, 2]), ("b", &[8])], 5);
        let build = |store: &ParameterStore| -> (f64, ParamGrads) {
            let mut t = Tape::new(store);
            let x = t.input(alloc::vec![0.5, -1.0, 0.25]);
            let h0 = t.input(alloc::vec![0.1, 0.2]);
            let c0 = t.input(alloc::vec![-0.3, 0.05]);
            let (c1, h1) = t.lstm(
                store.id("wx").unwrap(),
                store.id("wh").unwrap(),
                store.id("b").unwrap(),
                x,
                h0,
                c0,
            );
            let x2 = t.input(alloc::vec![-0.2, 0.8, 0.0]);
            let (_c2, h2) = t.lstm(
                store.id("wx").unwrap(),
                store.id("wh").unwrap(),
                store.id("b").unwrap(),
                x2,
                h1,
                c1,
            );
            let loss = t.sq_diff_const(h2, alloc::vec![0.3, -0.2]);
            let g = t.backward(loss);
            (t.scalar(loss), g)
        };
        let (_, analytic) = build(&s);
        let fd = fd_grads(&mut s, &|st| build(st).0, 1e-5);
        assert_close(&analytic, &fd, &s, 1e-6);
    }

    #[test]
    fn scalar_combinators() {
        let s = ParameterStore::new();
        let mut t = Tape::new(&s);
        let a = t.input(alloc::vec![2.0]);
        let b = t.input(alloc::vec![3.0]);
        let sum = t.sum_scalars(&[a, b]);
        let scaled = t.scale(sum, 0.5);
        assert_eq!(t.scalar(scaled), 2.5);
    }

    #[test]
    fn single_element_softmax_is_exactly_one() {
        let s = ParameterStore::new();
        let mut t = Tape::new(&s);
        let x = t.input(alloc::vec![-3.7]);
        let p = t.softmax(x);
        assert_eq!(t.value(p), &[1.0]);
    }

    #[test]
    fn backward_ignores_nodes_off_the_loss_path() {
        let s = store_with(&[("w", &[2, 2])], 6);
        let mut t = Tape::new(&s);
        let x = t.input(alloc::vec![1.0, 1.0]);
        let _unused = t.matvec(s.id("w").unwrap(), x);
        let y = t.input(alloc::vec![0.5]);
        let loss = t.scale(y, 2.0);
        let g = t.backward(loss);
        let w = s.id("w").unwrap();
        assert!(g.slot(w).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tape_replay_is_deterministic() {
        let s = store_with(&[("w", &[4, 4]), ("b", &[4])], 7);
        let run = || -> (f64, String) {
            let mut t = Tape::new(&s);
            let x = t.input(alloc::vec![0.1, 0.2, 0.3, 0.4]);
            let y = t.matvec(s.id("w").unwrap(), x);
            let p = t.softmax(y);
            let loss = t.nll_pick(p, 0);
            let g = t.backward(loss);
            (t.scalar(loss), alloc::format!("{:?}", g.slot(s.id("w").unwrap())))
        };
        let (l1, g1) = run();
        let (l2, g2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }
}
