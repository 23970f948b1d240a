//! Adam optimizer with a warmup + linear-decay learning-rate schedule.

use super::matrix::Matrix;
use super::store::{GradStore, ParamStore};

/// Adam moment-decay hyperparameters. The base learning rate is supplied per
/// step so a schedule can modulate it.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam state: first/second moment estimates per parameter plus a step count.
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let zeros: Vec<Matrix> =
            store.iter().map(|(_, _, p)| Matrix::zeros(p.rows(), p.cols())).collect();
        Adam { cfg, t: 0, m: zeros.clone(), v: zeros }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update: `p -= lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected
    /// moment estimates.
    pub fn step(&mut self, store: &mut ParamStore, grads: &GradStore, lr: f64) {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            let g = grads.get(id);
            let i = id.index();
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.value_mut(id);
            for k in 0..p.len() {
                let gk = g.data()[k];
                let mk = b1 * m.data()[k] + (1.0 - b1) * gk;
                let vk = b2 * v.data()[k] + (1.0 - b2) * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let m_hat = mk / bc1;
                let v_hat = vk / bc2;
                p.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
    }
}

/// Warmup followed by linear decay to zero.
///
/// With total steps `S` and warmup steps `W` (1-based step `s`):
/// multiplier = `s / W` while `s <= W`, then `(S - s) / (S - W)`.
/// The final step's multiplier is exactly 0.
#[derive(Debug, Clone, Copy)]
pub struct WarmupLinearDecay {
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl WarmupLinearDecay {
    /// Build from a warmup fraction of total steps (rounded up).
    pub fn from_fraction(total_steps: usize, warmup_fraction: f64) -> Self {
        assert!(total_steps > 0, "schedule needs at least one step");
        assert!(
            (0.0..=1.0).contains(&warmup_fraction),
            "warmup fraction must be in [0, 1], got {}",
            warmup_fraction
        );
        let warmup_steps = (warmup_fraction * total_steps as f64).ceil() as usize;
        WarmupLinearDecay { total_steps, warmup_steps }
    }

    /// Learning-rate multiplier for 1-based `step`.
    pub fn multiplier(&self, step: usize) -> f64 {
        assert!(step >= 1 && step <= self.total_steps, "step {} out of schedule", step);
        if self.warmup_steps > 0 && step <= self.warmup_steps {
            step as f64 / self.warmup_steps as f64
        } else if self.total_steps == self.warmup_steps {
            1.0
        } else {
            (self.total_steps - step) as f64 / (self.total_steps - self.warmup_steps) as f64
        }
    }
}
