//! Shared numeric kernels.
//!
//! Every code path that evaluates the model — the training tape, unbatched
//! greedy decoding, and batched multi-row decoding — goes through the
//! functions in this file.  Each kernel fixes one accumulation order, and the
//! batched variants apply exactly the same per-row operation sequence as a
//! single-row call.  That is what makes "batched result row `k` is bitwise
//! equal to the unbatched call on row `k`" hold by construction: identical
//! IEEE-754 operations on identical values in an identical order.

use alloc::vec;
use alloc::vec::Vec;

/// Logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Hyperbolic tangent.
#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

/// Dot product with a fixed left-to-right accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// `out[i] = dot(m[i, ..], x)` for a row-major matrix `m` of `rows × cols`.
pub fn matvec_into(out: &mut [f64], m: &[f64], rows: usize, cols: usize, x: &[f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(out.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for i in 0..rows {
        out[i] = dot(&m[i * cols..(i + 1) * cols], x);
    }
}

/// `out[j] += dot(m[.., j], y)`, i.e. accumulates `mᵀ·y` into `out`.
///
/// Used by backward passes; iterates rows in order so the accumulation into
/// each output coordinate is deterministic.
pub fn matvec_t_accum(out: &mut [f64], m: &[f64], rows: usize, cols: usize, y: &[f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(out.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let yi = y[i];
        for j in 0..cols {
            out[j] += yi * row[j];
        }
    }
}

/// Numerically stable softmax: shifts by the row maximum before
/// exponentiating.  A uniform input yields an exactly uniform output up to
/// the usual division rounding.
pub fn softmax_into(out: &mut [f64], logits: &[f64]) {
    debug_assert_eq!(out.len(), logits.len());
    debug_assert!(!logits.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &v in logits {
        if v > max {
            max = v;
        }
    }
    let mut sum = 0.0;
    for i in 0..logits.len() {
        let e = libm::exp(logits[i] - max);
        out[i] = e;
        sum += e;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
}

/// `log(Σᵢ exp(xᵢ))`, max-shifted for stability.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &v in xs {
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &v in xs {
        sum += libm::exp(v - max);
    }
    max + libm::log(sum)
}

/// Index of the largest element; ties resolve to the lowest index, which
/// keeps greedy decoding deterministic.
pub fn argmax(xs: &[f64]) -> usize {
    debug_assert!(!xs.is_empty());
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Weight views for one LSTM cell with input dimension `input_dim` and
/// hidden dimension `hidden`.
///
/// Gate preactivations are stored stacked as `[input; forget; output; cell]`,
/// so `wx` is `(4·hidden) × input_dim`, `wh` is `(4·hidden) × hidden`, and
/// `b` has length `4·hidden`.
pub struct LstmWeights<'a> {
    pub wx: &'a [f64],
    pub wh: &'a [f64],
    pub b: &'a [f64],
    pub input_dim: usize,
    pub hidden: usize,
}

impl<'a> LstmWeights<'a> {
    fn check(&self) {
        debug_assert_eq!(self.wx.len(), 4 * self.hidden * self.input_dim);
        debug_assert_eq!(self.wh.len(), 4 * self.hidden * self.hidden);
        debug_assert_eq!(self.b.len(), 4 * self.hidden);
    }
}

/// One LSTM cell update for a batch of `K` independent rows.
///
/// `xs`, `hs`, `cs` hold `K` slices each; `c_out[k]` and `h_out[k]` receive
/// the updated state of row `k`.  The weight-row loop is on the outside so a
/// loaded weight row serves every batch row before the next row of the
/// matrix is touched; per `(gate-row, k)` the arithmetic is identical to a
/// `K = 1` call, so batching never changes any row's result.
pub fn lstm_cell_batched(
    w: &LstmWeights<'_>,
    xs: &[&[f64]],
    hs: &[&[f64]],
    cs: &[&[f64]],
    c_out: &mut [Vec<f64>],
    h_out: &mut [Vec<f64>],
) {
    w.check();
    let k_rows = xs.len();
    debug_assert_eq!(hs.len(), k_rows);
    debug_assert_eq!(cs.len(), k_rows);
    let h = w.hidden;
    let mut pre = vec![0.0; k_rows * 4 * h];
    for i in 0..4 * h {
        let wx_row = &w.wx[i * w.input_dim..(i + 1) * w.input_dim];
        let wh_row = &w.wh[i * h..(i + 1) * h];
        let bi = w.b[i];
        for k in 0..k_rows {
            pre[k * 4 * h + i] = bi + dot(wx_row, xs[k]) + dot(wh_row, hs[k]);
        }
    }
    for k in 0..k_rows {
        let p = &pre[k * 4 * h..(k + 1) * 4 * h];
        let co = &mut c_out[k];
        let ho = &mut h_out[k];
        debug_assert_eq!(co.len(), h);
        debug_assert_eq!(ho.len(), h);
        for e in 0..h {
            let gi = sigmoid(p[e]);
            let gf = sigmoid(p[h + e]);
            let go = sigmoid(p[2 * h + e]);
            let gc = tanh(p[3 * h + e]);
            let c_new = gf * cs[k][e] + gi * gc;
            co[e] = c_new;
            ho[e] = go * tanh(c_new);
        }
    }
}

/// Single-row LSTM cell update; defined as the batched kernel at `K = 1`.
pub fn lstm_cell(
    w: &LstmWeights<'_>,
    x: &[f64],
    h: &[f64],
    c: &[f64],
    c_out: &mut Vec<f64>,
    h_out: &mut Vec<f64>,
) {
    let mut c_outs = [core::mem::take(c_out)];
    let mut h_outs = [core::mem::take(h_out)];
    lstm_cell_batched(w, &[x], &[h], &[c], &mut c_outs, &mut h_outs);
    let [c1] = c_outs;
    let [h1] = h_outs;
    *c_out = c1;
    *h_out = h1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dot_is_sequential() {
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 32.0);
    }

    #[test]
    fn matvec_matches_manual() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2 × 3
        let mut out = [0.0; 2];
        matvec_into(&mut out, &m, 2, 3, &[1.0, 0.0, -1.0]);
        assert_eq!(out, [-2.0, -2.0]);
    }

    #[test]
    fn matvec_t_accumulates_transpose() {
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2 × 3
        let mut out = [0.0; 3];
        matvec_t_accum(&mut out, &m, 2, 3, &[1.0, 1.0]);
        assert_eq!(out, [5.0, 7.0, 9.0]);
    }

    #[test]
    fn softmax_sums_to_one_and_is_uniform_on_equal_logits() {
        let mut out = [0.0; 4];
        softmax_into(&mut out, &[0.7, 0.7, 0.7, 0.7]);
        for &p in &out {
            assert_eq!(p, 0.25);
        }
        softmax_into(&mut out, &[0.1, -2.0, 3.5, 0.0]);
        let sum: f64 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_handles_large_logits() {
        let mut out = [0.0; 2];
        softmax_into(&mut out, &[1000.0, 999.0]);
        assert!(out[0] > 0.7 && out[0] < 0.74);
        assert!((out[0] + out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.1, 0.2, -0.4];
        let direct = libm::log(xs.iter().map(|&v| libm::exp(v)).sum::<f64>());
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_lstm_gives_zero_hidden() {
        let h = 3;
        let d = 2;
        let wx = vec![0.0; 4 * h * d];
        let wh = vec![0.0; 4 * h * h];
        let b = vec![0.0; 4 * h];
        let w = LstmWeights { wx: &wx, wh: &wh, b: &b, input_dim: d, hidden: h };
        let mut c_out = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        lstm_cell(&w, &[1.0, -1.0], &[0.5; 3], &[0.0; 3], &mut c_out, &mut h_out);
        // All gate preactivations are 0: input gate 0.5, cell candidate 0,
        // so the new cell is 0 and the new hidden is 0.
        for e in 0..h {
            assert_eq!(c_out[e], 0.0);
            assert_eq!(h_out[e], 0.0);
        }
    }

    #[test]
    fn batched_lstm_rows_are_bitwise_equal_to_unbatched() {
        let h = 4;
        let d = 5;
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let wx: Vec<f64> = (0..4 * h * d).map(|_| next()).collect();
        let wh: Vec<f64> = (0..4 * h * h).map(|_| next()).collect();
        let b: Vec<f64> = (0..4 * h).map(|_| next()).collect();
        let w = LstmWeights { wx: &wx, wh: &wh, b: &b, input_dim: d, hidden: h };
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..d).map(|_| next()).collect()).collect();
        let hs: Vec<Vec<f64>> = (0..6).map(|_| (0..h).map(|_| next()).collect()).collect();
        let cs: Vec<Vec<f64>> = (0..6).map(|_| (0..h).map(|_| next()).collect()).collect();

        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let hr: Vec<&[f64]> = hs.iter().map(|v| v.as_slice()).collect();
        let cr: Vec<&[f64]> = cs.iter().map(|v| v.as_slice()).collect();
        let mut c_out = vec![vec![0.0; h]; 6];
        let mut h_out = vec![vec![0.0; h]; 6];
        lstm_cell_batched(&w, &xr, &hr, &cr, &mut c_out, &mut h_out);

        for k in 0..6 {
            let mut c1 = vec![0.0; h];
            let mut h1 = vec![0.0; h];
            lstm_cell(&w, &xs[k], &hs[k], &cs[k], &mut c1, &mut h1);
            for e in 0..h {
                assert_eq!(c_out[k][e].to_bits(), c1[e].to_bits(), "cell row {k} elem {e}");
                assert_eq!(h_out[k][e].to_bits(), h1[e].to_bits(), "hidden row {k} elem {e}");
            }
        }
    }
}
