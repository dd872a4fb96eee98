//! Adam with bias correction and L2-style weight decay.
//!
//! ```text
//! g  = grad + weight_decay * theta
//! m  = b1 * m + (1 - b1) * g
//! v  = b2 * v + (1 - b2) * g^2
//! theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```

use serde::{Deserialize, Serialize};

use super::param::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.5, beta2: 0.999, eps: 1e-8, weight_decay: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(config: AdamConfig, store: &ParamStore<F>) -> Self {
        let zeros: Vec<Vec<F>> = store.iter().map(|p| vec![F::zero(); p.len()]).collect();
        Self { config, m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, id: ParamId) -> &[F] {
        &self.m[id.index()]
    }

    pub fn second_moment(&self, id: ParamId) -> &[F] {
        &self.v[id.index()]
    }

    /// Clears the moment estimates of one parameter, leaving the step count alone.
    pub fn reset_moments(&mut self, id: ParamId) {
        self.m[id.index()].iter_mut().for_each(|x| *x = F::zero());
        self.v[id.index()].iter_mut().for_each(|x| *x = F::zero());
    }

    /// Applies one update using the gradients currently held by `store`.
    pub fn step(&mut self, store: &mut ParamStore<F>) {
        self.t += 1;
        let c = &self.config;
        let (lr, b1, b2, eps, wd) =
            (F::lit(c.lr), F::lit(c.beta1), F::lit(c.beta2), F::lit(c.eps), F::lit(c.weight_decay));
        let one = F::one();
        let bc1 = one - b1.powi(self.t as i32);
        let bc2 = one - b2.powi(self.t as i32);
        for (p, (m, v)) in store.iter_mut().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.values.len() {
                let g = p.grad[i] + wd * p.values[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> (ParamStore<f64>, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("p", vec![1], vec![v]).unwrap();
        (s, id)
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = scalar_store(0.0);
        s.get_mut(id).grad[0] = 1.0;
        let mut adam = AdamState::new(AdamConfig { weight_decay: 0.0, ..Default::default() }, &s);
        adam.step(&mut s);
        // m_hat = 1, v_hat = 1: step = lr / (1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((s.values(id)[0] - expected).abs() < 1e-15);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let (mut s, id) = scalar_store(0.7);
        let mut adam = AdamState::new(AdamConfig { weight_decay: 0.0, ..Default::default() }, &s);
        for _ in 0..5 {
            adam.step(&mut s);
        }
        assert_eq!(s.values(id)[0], 0.7);
    }

    #[test]
    fn zero_lr_is_identity() {
        let (mut s, id) = scalar_store(-1.5);
        s.get_mut(id).grad[0] = 3.0;
        let mut adam = AdamState::new(AdamConfig { lr: 0.0, ..Default::default() }, &s);
        adam.step(&mut s);
        assert_eq!(s.values(id)[0], -1.5);
    }

    #[test]
    fn identical_sets_update_identically() {
        let (mut a, ia) = scalar_store(0.25);
        let (mut b, ib) = scalar_store(0.25);
        let mut sa = AdamState::new(AdamConfig::default(), &a);
        let mut sb = AdamState::new(AdamConfig::default(), &b);
        for k in 0..10 {
            let g = (k as f64).sin();
            a.get_mut(ia).grad[0] = g;
            b.get_mut(ib).grad[0] = g;
            sa.step(&mut a);
            sb.step(&mut b);
        }
        assert_eq!(a.values(ia), b.values(ib));
        assert!(sa.second_moment(ia)[0] >= 0.0);
    }

    #[test]
    fn reference_two_steps() {
        // Hand-unrolled reference with b1=0.5, b2=0.999, wd=0.1.
        let (mut s, id) = scalar_store(1.0);
        let cfg = AdamConfig { lr: 0.1, beta1: 0.5, beta2: 0.999, eps: 1e-8, weight_decay: 0.1 };
        let mut adam = AdamState::new(cfg, &s);
        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            let raw = 2.0 * p;
            s.get_mut(id).grad[0] = raw;
            adam.step(&mut s);
            let g = raw + 0.1 * p;
            m = 0.5 * m + 0.5 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.5f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            p -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((s.values(id)[0] - p).abs() < 1e-14);
    }
}
