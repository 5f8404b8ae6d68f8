//! Adam optimizer with global-norm gradient clipping.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamGrads, ParameterStore};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global-norm clipping bound applied to the whole gradient before the
    /// moment updates.
    pub clip: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip: 5.0 }
    }
}

/// Adam state: first and second moment estimates per parameter value.
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParameterStore, cfg: AdamConfig) -> Self {
        let m = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect::<Vec<_>>();
        let v = m.clone();
        Adam { cfg, t: 0, m, v }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update.  The gradient is first rescaled so its global
    /// norm never exceeds `clip` (gradients at or below the bound pass
    /// through untouched); `grads` is left holding the clipped values.
    pub fn step(&mut self, store: &mut ParameterStore, grads: &mut ParamGrads) {
        let norm = grads.global_norm();
        if norm > self.cfg.clip {
            grads.scale(self.cfg.clip / norm);
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.cfg.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.cfg.beta2, self.t as f64);
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            let g = grads.slot(id).to_vec();
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let data = &mut store.tensor_mut(id).data;
            for i in 0..g.len() {
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g[i];
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.cfg.lr * m_hat / (libm::sqrt(v_hat) + self.cfg.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Tensor;

    #[test]
    fn first_step_moves_by_roughly_lr() {
        let mut s = ParameterStore::new();
        let w = s.add("w", Tensor::from_data(&[1], vec![1.0]));
        let mut adam = Adam::new(&s, AdamConfig::default());
        let mut g = ParamGrads::zeros(&s);
        g.slot_mut(w)[0] = 0.5;
        adam.step(&mut s, &mut g);
        // With bias correction, the very first update is lr·g/(|g| + ε·√bc2/…)
        // ≈ lr regardless of the gradient's magnitude.
        let moved = 1.0 - s.value(w, 0);
        assert!((moved - 1e-3).abs() < 1e-5, "moved {moved}");
    }

    #[test]
    fn clipping_bounds_the_global_norm_exactly() {
        let mut s = ParameterStore::new();
        let a = s.add_zeros("a", &[3]);
        let b = s.add_zeros("b", &[1]);
        let mut adam = Adam::new(&s, AdamConfig { clip: 5.0, ..AdamConfig::default() });
        let mut g = ParamGrads::zeros(&s);
        g.slot_mut(a).copy_from_slice(&[30.0, 40.0, 0.0]);
        g.slot_mut(b)[0] = 0.0;
        assert_eq!(g.global_norm(), 50.0);
        adam.step(&mut s, &mut g);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
        // Directions are preserved by clipping.
        assert!((g.slot(a)[0] - 3.0).abs() < 1e-12);
        assert!((g.slot(a)[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn small_gradients_are_not_rescaled() {
        let mut s = ParameterStore::new();
        let a = s.add_zeros("a", &[2]);
        let mut adam = Adam::new(&s, AdamConfig::default());
        let mut g = ParamGrads::zeros(&s);
        g.slot_mut(a).copy_from_slice(&[0.3, -0.4]);
        adam.step(&mut s, &mut g);
        assert_eq!(g.slot(a), &[0.3, -0.4]);
    }

    #[test]
    fn converges_on_a_quadratic() {
        // Minimize f(w) = Σ (w_i − target_i)²; the gradient is 2(w − t).
        let mut s = ParameterStore::new();
        let w = s.add("w", Tensor::from_data(&[2], vec![1.0, -1.0]));
        let target = [0.25, 0.75];
        let mut adam = Adam::new(&s, AdamConfig { lr: 0.05, ..AdamConfig::default() });
        for _ in 0..400 {
            let mut g = ParamGrads::zeros(&s);
            for (i, t) in target.iter().enumerate() {
                g.slot_mut(w)[i] = 2.0 * (s.value(w, i) - t);
            }
            adam.step(&mut s, &mut g);
        }
        for (i, t) in target.iter().enumerate() {
            assert!((s.value(w, i) - t).abs() < 1e-3, "coord {i} = {}", s.value(w, i));
        }
    }

    #[test]
    fn deterministic_given_same_gradients() {
        let run = || {
            let mut s = ParameterStore::new();
            let w = s.add("w", Tensor::from_data(&[1], vec![0.5]));
            let mut adam = Adam::new(&s, AdamConfig::default());
            for k in 0..10 {
                let mut g = ParamGrads::zeros(&s);
                g.slot_mut(w)[0] = 0.1 * (k as f64 + 1.0);
                adam.step(&mut s, &mut g);
            }
            s.value(w, 0)
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
