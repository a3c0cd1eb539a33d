use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Adam {
            config,
            lr: config.learning_rate,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One Adam update of `theta` in place. A non-finite gradient leaves
    /// both the parameters and the moments untouched.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != grad.len() || theta.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "optimizer holds {} parameters, got theta {} and gradient {}",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient entry {k} is {} at optimizer step {}",
                grad[k],
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, epsilon, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            theta[i] -= self.lr * mh / (vh.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    /// Relative improvement needed to reset the patience counter.
    pub threshold: f64,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 10,
            threshold: 1e-3,
            min_lr: 1e-6,
        }
    }
}

impl PlateauConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || !(self.factor > 0.0 && self.factor < 1.0) || !(self.min_lr >= 0.0) || !(self.threshold >= 0.0) {
            return Err(Error::Config(format!("bad plateau scheduler settings {self:?}")));
        }
        Ok(())
    }
}

/// Halves (by `factor`) the learning rate when the monitored loss stops
/// improving for more than `patience` evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct Plateau {
    pub config: PlateauConfig,
    best: f64,
    bad: usize,
}

impl Plateau {
    pub fn new(config: PlateauConfig) -> Self {
        Plateau {
            config,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Returns the learning rate to use from now on.
    pub fn update(&mut self, loss: f64, lr: f64) -> f64 {
        if !loss.is_finite() {
            return lr;
        }
        if loss < self.best * (1.0 - self.config.threshold) {
            self.best = loss;
            self.bad = 0;
            return lr;
        }
        self.bad += 1;
        if self.bad > self.config.patience {
            self.bad = 0;
            return (lr * self.config.factor).max(self.config.min_lr);
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut theta = [1.0, -2.0, 3.0];
        for _ in 0..5 {
            adam.step(&mut theta, &[0.0; 3]).unwrap();
        }
        assert_eq!(theta, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, 3);
        let g = [0.5, -2.0, 1e-3];
        let mut theta = [0.0; 3];
        adam.step(&mut theta, &g).unwrap();
        for i in 0..3 {
            let want = -cfg.learning_rate * g[i] / (g[i].abs() + cfg.epsilon);
            assert!((theta[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut theta = [1.0, 1.0];
        assert!(matches!(adam.step(&mut theta, &[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert_eq!(theta, [1.0, 1.0]);
        assert_eq!(adam.steps(), 0);
        assert!(adam.step(&mut theta, &[0.0]).is_err());
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::default(), 2);
            let mut th = [0.3, -0.1];
            for k in 0..100 {
                let g = [2.0 * th[0] - 1.0, (k as f64).sin() * th[1]];
                adam.step(&mut th, &g).unwrap();
            }
            th
        };
        assert_eq!(run().map(f64::to_bits), run().map(f64::to_bits));
    }

    #[test]
    fn decreasing_loss_keeps_rate() {
        let mut p = Plateau::new(PlateauConfig::default());
        let mut lr = 1e-3;
        for k in 0..50 {
            lr = p.update(1.0 / (k + 1) as f64, lr);
        }
        assert_eq!(lr, 1e-3);
    }

    #[test]
    fn flat_loss_halves_once_after_patience() {
        let cfg = PlateauConfig {
            patience: 5,
            ..Default::default()
        };
        let mut p = Plateau::new(cfg);
        let mut lr = 1e-3;
        // first call sets the best value, then patience + 1 flat calls
        lr = p.update(1.0, lr);
        for _ in 0..5 {
            lr = p.update(1.0, lr);
        }
        assert_eq!(lr, 1e-3);
        lr = p.update(1.0, lr);
        assert_eq!(lr, 5e-4);
        for _ in 0..1000 {
            lr = p.update(1.0, lr);
        }
        assert_eq!(lr, cfg.min_lr);
    }
}
