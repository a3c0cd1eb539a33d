use serde::{Deserialize, Serialize};

/// The seven loss components, in logging order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Obs,
    Pressure,
    NsX,
    NsY,
    NsZ,
    Cont,
    Bc,
}

pub const COMPONENTS: [Component; 7] = [
    Component::Obs,
    Component::Pressure,
    Component::NsX,
    Component::NsY,
    Component::NsZ,
    Component::Cont,
    Component::Bc,
];

impl Component {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Obs => "obs",
            Component::Pressure => "p",
            Component::NsX => "ns_x",
            Component::NsY => "ns_y",
            Component::NsZ => "ns_z",
            Component::Cont => "cont",
            Component::Bc => "bc",
        }
    }
}

/// Population standard deviation of the entries of a gradient.
pub fn gradient_std(g: &[f64]) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Outcome of one weight update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BalanceOutcome {
    Updated,
    /// Every component gradient vanished; weights unchanged.
    Skipped,
}

/// Inverse-Dirichlet loss weights with an exponential moving average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossState {
    pub weights: [f64; 7],
    /// Gradient standard deviations from the last update.
    pub stds: [f64; 7],
    /// Components that take part in balancing.
    pub active: [bool; 7],
    pub alpha: f64,
    pub update_period: usize,
}

impl LossState {
    pub fn new(alpha: f64, update_period: usize) -> Self {
        LossState {
            weights: [1.0; 7],
            stds: [0.0; 7],
            active: [true; 7],
            alpha,
            update_period: update_period.max(1),
        }
    }

    pub fn weight(&self, c: Component) -> f64 {
        self.weights[c.index()]
    }

    /// Target weights max_j std_j / std_i for active components with a
    /// nonzero std; other components keep their current weight.
    pub fn targets(&self, stds: &[f64; 7]) -> Option<[f64; 7]> {
        let max = (0..7).filter(|&i| self.active[i]).map(|i| stds[i]).fold(0.0, f64::max);
        if !(max > 0.0) || !max.is_finite() {
            return None;
        }
        Some(std::array::from_fn(|i| {
            if self.active[i] && stds[i] > 0.0 {
                max / stds[i]
            } else {
                self.weights[i]
            }
        }))
    }

    /// Updates the weights from per-component parameter gradients of the
    /// unweighted losses, using the given smoothing factor.
    pub fn update_with(&mut self, grads: &[Vec<f64>; 7], alpha: f64) -> BalanceOutcome {
        let stds: [f64; 7] = std::array::from_fn(|i| gradient_std(&grads[i]));
        self.update_from_stds(stds, alpha)
    }

    pub fn update_from_stds(&mut self, stds: [f64; 7], alpha: f64) -> BalanceOutcome {
        self.stds = stds;
        match self.targets(&stds) {
            Some(hat) => {
                for i in 0..7 {
                    self.weights[i] = alpha * self.weights[i] + (1.0 - alpha) * hat[i];
                }
                BalanceOutcome::Updated
            }
            None => {
                log::warn!("all loss gradients vanished; loss weights left unchanged");
                BalanceOutcome::Skipped
            }
        }
    }

    pub fn update(&mut self, grads: &[Vec<f64>; 7]) -> BalanceOutcome {
        let alpha = self.alpha;
        self.update_with(grads, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two(stds: (f64, f64)) -> LossState {
        let mut s = LossState::new(0.99, 10);
        s.active = [true, true, false, false, false, false, false];
        s.stds = [stds.0, stds.1, 0.0, 0.0, 0.0, 0.0, 0.0];
        s
    }

    #[test]
    fn equal_stds_give_unit_targets() {
        let s = LossState::new(0.0, 10);
        assert_eq!(s.targets(&[0.3; 7]).unwrap(), [1.0; 7]);
    }

    #[test]
    fn cold_update_equalizes() {
        let mut s = two((2.0, 1.0));
        let stds = s.stds;
        s.update_from_stds(stds, 0.0);
        assert_eq!(&s.weights[..2], &[1.0, 2.0]);
        assert_eq!(s.weights[0] * 2.0, s.weights[1] * 1.0);
    }

    #[test]
    fn ema_arithmetic() {
        let mut s = two((2.0, 1.0));
        let stds = s.stds;
        s.update_from_stds(stds, 0.99);
        assert!((s.weights[1] - 1.01).abs() < 1e-15);
        assert_eq!(s.weights[0], 1.0);
    }

    #[test]
    fn vanishing_gradients_skip() {
        let mut s = LossState::new(0.0, 10);
        let grads: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; 5]);
        assert_eq!(s.update(&grads), BalanceOutcome::Skipped);
        assert_eq!(s.weights, [1.0; 7]);
    }

    #[test]
    fn std_is_population() {
        assert_eq!(gradient_std(&[1.0, 3.0]), 1.0);
        assert_eq!(gradient_std(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn cold_update_balances_all(stds in prop::array::uniform7(1e-6..1e3f64)) {
            let mut s = LossState::new(0.0, 10);
            s.update_from_stds(stds, 0.0);
            let scaled: Vec<f64> = (0..7).map(|i| s.weights[i] * stds[i]).collect();
            for v in &scaled {
                prop_assert!((v / scaled[0] - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn ema_stays_between(w in prop::array::uniform7(0.1..10.0f64), stds in prop::array::uniform7(1e-3..1e2f64)) {
            let mut s = LossState::new(0.99, 10);
            s.weights = w;
            let hat = s.targets(&stds).unwrap();
            s.update_from_stds(stds, 0.99);
            for i in 0..7 {
                let (lo, hi) = (w[i].min(hat[i]), w[i].max(hat[i]));
                prop_assert!(s.weights[i] >= lo - 1e-12 && s.weights[i] <= hi + 1e-12);
                prop_assert!(s.weights[i] > 0.0);
                prop_assert!((s.weights[i] - w[i]).abs() <= 0.01 * (hat[i] - w[i]).abs() + 1e-12);
            }
        }
    }
}
