//! Finite-difference verification of tape gradients.
//!
//! [`grad_check`] compares the analytic gradient of a scalar loss against
//! central finite differences at a seeded random sample of coordinates per
//! tensor.  The relative error of a coordinate is
//! `|a − n| / (|a| + |n| + 1e-12)`.
//!
//! Central differences with step `ε = 1e-4` on an O(1) loss have an absolute
//! noise floor near `1e-12` (roundoff `~1e-16/2ε` plus `O(ε²)` truncation),
//! so coordinates where both the analytic and numeric values are below
//! [`NOISE_FLOOR`] carry no signal; they are counted as `skipped` rather
//! than compared.  A coordinate the loss genuinely never reads produces an
//! exactly zero difference and passes with error 0.

use alloc::string::String;
use alloc::vec::Vec;

use super::params::{ParamId, ParameterStore};
use super::tape::{NodeRef, Tape};
use crate::rng::DetRng;

/// Both-sides magnitude below which a coordinate is pure finite-difference
/// noise and is not compared.
pub const NOISE_FLOOR: f64 = 1e-8;

/// Outcome of a [`grad_check`] run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over all compared coordinates.
    pub max_rel_err: f64,
    /// Parameter name and flat index where it occurred.
    pub worst_param: String,
    pub worst_index: usize,
    /// Coordinates actually compared.
    pub checked: usize,
    /// Coordinates below the noise floor on both sides.
    pub skipped: usize,
}

/// Compares tape gradients with central finite differences.
///
/// `build` must construct the same computation each time it is called (it is
/// invoked once for the analytic pass and twice per probed coordinate) and
/// return the scalar loss node.  `samples_per_tensor` coordinates are drawn
/// per tensor with replacement from a generator seeded by `seed`; a tensor
/// smaller than the sample count is swept exhaustively instead.
pub fn grad_check<F>(
    store: &mut ParameterStore,
    eps: f64,
    samples_per_tensor: usize,
    seed: u64,
    build: F,
) -> GradCheckReport
where
    F: Fn(&mut Tape<'_>) -> NodeRef,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape);
        tape.backward(loss)
    };

    let eval = |store: &ParameterStore| -> f64 {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape);
        tape.scalar(loss)
    };

    let mut rng = DetRng::new(seed);
    let ids: Vec<(ParamId, usize)> =
        store.iter().map(|(id, _, t)| (id, t.len())).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
        skipped: 0,
    };

    for (id, len) in ids {
        let coords: Vec<usize> = if len <= samples_per_tensor {
            (0..len).collect()
        } else {
            (0..samples_per_tensor).map(|_| rng.below(len)).collect()
        };
        for idx in coords {
            let orig = store.value(id, idx);
            store.set_value(id, idx, orig + eps);
            let fp = eval(store);
            store.set_value(id, idx, orig - eps);
            let fm = eval(store);
            store.set_value(id, idx, orig);
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic.slot(id)[idx];
            if a.abs() < NOISE_FLOOR && numeric.abs() < NOISE_FLOOR {
                report.skipped += 1;
                continue;
            }
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = String::from(store.name(id));
                report.worst_index = idx;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn demo_store(seed: u64) -> ParameterStore {
        let mut rng = DetRng::new(seed);
        let mut s = ParameterStore::new();
        s.add_uniform("w1", &[6, 4], &mut rng);
        s.add_uniform("b1", &[6], &mut rng);
        s.add_uniform("w2", &[3, 6], &mut rng);
        s
    }

    fn demo_loss(t: &mut Tape<'_>) -> NodeRef {
        let s = t.store();
        let (w1, b1, w2) =
            (s.id("w1").unwrap(), s.id("b1").unwrap(), s.id("w2").unwrap());
        let x = t.input(vec![0.2, -0.4, 0.9, 0.1]);
        let lin = t.matvec(w1, x);
        let b = t.param(b1);
        let pre = t.add(lin, b);
        let hid = t.tanh(pre);
        let out = t.matvec(w2, hid);
        t.nll_pick(out, 1)
    }

    #[test]
    fn correct_gradients_pass_with_tiny_error() {
        let mut s = demo_store(11);
        let report = grad_check(&mut s, 1e-4, 64, 99, demo_loss);
        assert!(report.checked > 0);
        assert!(
            report.max_rel_err < 1e-6,
            "max {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
    }

    #[test]
    fn a_wrong_gradient_is_detected() {
        // A loss whose tape omits part of the true dependency: evaluate
        // f(w) = Σ (w·x)² but pretend x is half as large on the analytic
        // pass by scaling the node after the matvec on one path only.
        // Simplest honest construction: compare against a deliberately
        // perturbed analytic gradient.
        let mut s = demo_store(12);
        let analytic = {
            let mut t = Tape::new(&s);
            let loss = demo_loss(&mut t);
            let mut g = t.backward(loss);
            // Corrupt one coordinate.
            let w1 = s.id("w1").unwrap();
            g.slot_mut(w1)[3] += 0.5;
            g
        };
        // Re-run the same FD probes grad_check would use and confirm the
        // corrupted coordinate shows a large relative error.
        let eps = 1e-4;
        let w1 = s.id("w1").unwrap();
        let orig = s.value(w1, 3);
        let eval = |st: &ParameterStore| {
            let mut t = Tape::new(st);
            let l = demo_loss(&mut t);
            t.scalar(l)
        };
        s.set_value(w1, 3, orig + eps);
        let fp = eval(&s);
        s.set_value(w1, 3, orig - eps);
        let fm = eval(&s);
        s.set_value(w1, 3, orig);
        let numeric = (fp - fm) / (2.0 * eps);
        let a = analytic.slot(w1)[3];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        assert!(rel > 1e-2, "corruption not visible: rel {rel}");
    }

    #[test]
    fn small_tensors_are_swept_exhaustively() {
        let mut s = demo_store(13);
        let report = grad_check(&mut s, 1e-4, 1000, 7, demo_loss);
        // 24 + 6 + 18 coordinates in total; every coordinate either checked
        // or noise-floor skipped.
        assert_eq!(report.checked + report.skipped, 24 + 6 + 18);
    }

    #[test]
    fn report_is_seed_deterministic() {
        let run = |seed| {
            let mut s = demo_store(14);
            let r = grad_check(&mut s, 1e-4, 8, seed, demo_loss);
            (r.max_rel_err.to_bits(), r.checked, r.skipped)
        };
        assert_eq!(run(5), run(5));
    }
}
