//! Adam with per-tensor learning-rate multipliers, and the cosine schedule.

use std::f64::consts::PI;

use stylecurve_nn::{ModelWeights, Tensor};

use crate::error::{invalid, Result};

/// `lr_min + (lr0 - lr_min) (1 + cos(pi t / T)) / 2`, one decaying cycle.
pub fn cosine_lr(step: usize, total: usize, lr0: f64, lr_min: f64) -> Result<f64> {
    if step > total {
        return Err(invalid(format!(
            "step {step} is past the schedule end {total}"
        )));
    }
    if total == 0 {
        return Ok(lr0);
    }
    let phase = PI * step as f64 / total as f64;
    Ok(lr_min + 0.5 * (lr0 - lr_min) * (1.0 + phase.cos()))
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// State for every tensor of `weights`, with the usual (0.9, 0.999, 1e-8).
    pub fn new(weights: &ModelWeights) -> Self {
        let zeros: Vec<Vec<f64>> = weights
            .tensors()
            .values()
            .map(|t| vec![0.0; t.len()])
            .collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; `lr_of(name)` gives the tensor's learning rate.
    pub fn step(
        &mut self,
        weights: &mut ModelWeights,
        grads: &[Tensor],
        lr_of: impl Fn(&str) -> f64,
    ) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(invalid(format!(
                "{} gradients for {} tensors",
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (name, values)) in weights.values_mut().enumerate() {
            let g = grads[k].data();
            if g.len() != values.len() {
                return Err(invalid(format!("gradient for {name} has the wrong size")));
            }
            let lr = lr_of(name);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..values.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                values[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(cosine_lr(0, 100, 1e-3, 1e-5).unwrap(), 1e-3);
        assert!((cosine_lr(100, 100, 1e-3, 1e-5).unwrap() - 1e-5).abs() < 1e-18);
        let mid = cosine_lr(50, 100, 1e-3, 1e-5).unwrap();
        assert!((mid - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
        assert!(cosine_lr(101, 100, 1e-3, 1e-5).is_err());
    }

    #[test]
    fn schedule_is_nonincreasing() {
        let mut prev = f64::INFINITY;
        for t in 0..=1000 {
            let lr = cosine_lr(t, 1000, 0.01, 0.0).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
    }
}
