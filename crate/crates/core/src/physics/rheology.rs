use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};

/// Blood density [g/cm^3].
pub const BLOOD_DENSITY: f64 = 1.06;
pub const DEFAULT_GAMMA_MIN: f64 = 1e-6;

/// Power-law pairs per hematocrit: (Hct %, m [Pa s^n], n).
pub const HEMATOCRIT_TABLE: [(f64, f64, f64); 5] = [
    (20.0, 0.6850e-2, 0.7113),
    (32.5, 1.7271e-2, 0.6339),
    (45.0, 2.4208e-2, 0.7146),
    (57.5, 4.1933e-2, 0.6349),
    (70.0, 5.3985e-2, 0.6313),
];

/// Power-law fluid in CGS units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RheologyModel {
    /// Consistency index [g cm^-1 s^(n-2)], i.e. poise times s^(n-1).
    pub m: f64,
    pub n: f64,
    pub hematocrit: Option<f64>,
    /// Density [g/cm^3].
    pub density: f64,
    /// Strain-rate floor [1/s].
    pub gamma_min: f64,
}

impl RheologyModel {
    /// `m_si` in Pa s^n.
    pub fn from_si(m_si: f64, n: f64) -> Result<Self> {
        let model = RheologyModel {
            m: 10.0 * m_si,
            n,
            hematocrit: None,
            density: BLOOD_DENSITY,
            gamma_min: DEFAULT_GAMMA_MIN,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_hematocrit(hct: f64) -> Result<Self> {
        let &(h, m, n) = HEMATOCRIT_TABLE
            .iter()
            .find(|(h, _, _)| (h - hct).abs() < 1e-9)
            .ok_or_else(|| Error::Config(format!("no rheology tabulated for hematocrit {hct}")))?;
        let mut model = Self::from_si(m, n)?;
        model.hematocrit = Some(h);
        Ok(model)
    }

    pub fn newtonian(mu: f64, density: f64) -> Result<Self> {
        let model = RheologyModel {
            m: mu,
            n: 1.0,
            hematocrit: None,
            density,
            gamma_min: DEFAULT_GAMMA_MIN,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.n > 0.0 && self.n <= 1.0 && self.density > 0.0 && self.gamma_min > 0.0) {
            return Err(Error::invalid(format!(
                "rheology needs m > 0, 0 < n <= 1, density > 0, floor > 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// Apparent viscosity [P] at strain rate `gamma` [1/s].
    pub fn viscosity(&self, gamma: f64) -> f64 {
        self.m * gamma.max(self.gamma_min).powf(self.n - 1.0)
    }

    /// Viscosity and (dmu/dgamma)/gamma from the squared strain rate, with
    /// the floor applied. Below the floor the viscosity is constant.
    pub fn viscosity_from_squared<R: Real>(&self, gamma_sq: R) -> (R, R) {
        if gamma_sq.value() <= self.gamma_min * self.gamma_min {
            let mu = gamma_sq.lift(self.m * self.gamma_min.powf(self.n - 1.0));
            (mu, gamma_sq.zero_like())
        } else {
            let mu = gamma_sq.powf(0.5 * (self.n - 1.0)) * self.m;
            let slope = gamma_sq.powf(0.5 * (self.n - 3.0)) * (self.m * (self.n - 1.0));
            (mu, slope)
        }
    }
}

pub fn apparent_viscosity(model: &RheologyModel, gamma: f64) -> f64 {
    model.viscosity(gamma)
}

/// Symmetric strain-rate tensor and its magnitude sqrt(2 e:e) for a
/// velocity gradient `g[i][j] = du_i/dx_j`.
pub fn strain_rate(g: [[f64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let mut e = [[0.0; 3]; 3];
    let mut contraction = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = 0.5 * (g[i][j] + g[j][i]);
            contraction += e[i][j] * e[i][j];
        }
    }
    (e, (2.0 * contraction).sqrt())
}
