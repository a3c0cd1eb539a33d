use serde::{Deserialize, Serialize};

use super::optim::{AdamConfig, PlateauConfig};
use crate::error::{Error, Result};
use crate::observation::DEFAULT_FRACTIONS;

/// Data-only stage: voxel-center point fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreconditionConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub scheduler: PlateauConfig,
}

impl Default for PreconditionConfig {
    fn default() -> Self {
        PreconditionConfig {
            epochs: 200,
            batch_size: 256,
            optimizer: AdamConfig::default(),
            scheduler: PlateauConfig {
                patience: 10,
                ..Default::default()
            },
        }
    }
}

/// Full stage with all four loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub epochs: usize,
    /// Hard cap on optimizer steps in this stage, if any.
    pub max_steps: Option<usize>,
    pub batch_observations: usize,
    pub points_per_voxel: usize,
    pub batch_interior: usize,
    pub batch_refinement: usize,
    pub refinement_resample: usize,
    pub refinement_capacity: usize,
    pub batch_boundary: usize,
    /// Share of boundary points taken on the wall; the rest come from the
    /// band outside it.
    pub wall_fraction: f64,
    /// Band thickness in units of the largest voxel edge.
    pub band_factor: f64,
    pub interior_pool: usize,
    pub boundary_pool: usize,
    pub pressure_points: usize,
    pub optimizer: AdamConfig,
    pub scheduler: PlateauConfig,
    pub alpha: f64,
    pub update_period: usize,
    /// Points per voxel used when scoring the validation split.
    pub validation_points_per_voxel: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            epochs: 200,
            max_steps: None,
            batch_observations: 128,
            points_per_voxel: 16,
            batch_interior: 256,
            batch_refinement: 64,
            refinement_resample: 16,
            refinement_capacity: 160,
            batch_boundary: 128,
            wall_fraction: 0.5,
            band_factor: 1.5,
            interior_pool: 1 << 15,
            boundary_pool: 1 << 14,
            pressure_points: 256,
            optimizer: AdamConfig::default(),
            scheduler: PlateauConfig {
                patience: 5,
                ..Default::default()
            },
            alpha: 0.99,
            update_period: 10,
            validation_points_per_voxel: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub precondition: PreconditionConfig,
    pub physics: PhysicsConfig,
    /// Whether the physics stage runs at all.
    pub run_physics: bool,
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            precondition: PreconditionConfig::default(),
            physics: PhysicsConfig::default(),
            run_physics: true,
            split: DEFAULT_FRACTIONS,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Batch and pool sizes of the full-scale reference setup.
    pub fn reference() -> Self {
        TrainingConfig {
            precondition: PreconditionConfig {
                epochs: 200,
                batch_size: 1024,
                ..Default::default()
            },
            physics: PhysicsConfig {
                epochs: 200,
                batch_observations: 512,
                points_per_voxel: 16,
                batch_interior: 4096,
                batch_refinement: 2048,
                refinement_resample: 128,
                refinement_capacity: 1280,
                batch_boundary: 4096,
                interior_pool: 20_000_000,
                boundary_pool: 14_000_000,
                pressure_points: 4096,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        let sizes = [
            ("precondition.batch_size", self.precondition.batch_size),
            ("physics.batch_observations", p.batch_observations),
            ("physics.points_per_voxel", p.points_per_voxel),
            ("physics.batch_interior", p.batch_interior),
            ("physics.refinement_capacity", p.refinement_capacity),
            ("physics.interior_pool", p.interior_pool),
            ("physics.boundary_pool", p.boundary_pool),
            ("physics.pressure_points", p.pressure_points),
            ("physics.update_period", p.update_period),
            ("physics.validation_points_per_voxel", p.validation_points_per_voxel),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        self.precondition.scheduler.validate()?;
        p.scheduler.validate()?;
        if !(0.0..=1.0).contains(&p.alpha) || !(0.0..=1.0).contains(&p.wall_fraction) || !(p.band_factor > 0.0) {
            return Err(Error::Config("alpha and wall_fraction must lie in [0, 1], band_factor > 0".into()));
        }
        if p.refinement_resample > p.refinement_capacity {
            return Err(Error::Config("refinement_resample exceeds refinement_capacity".into()));
        }
        for lr in [self.precondition.optimizer.learning_rate, p.optimizer.learning_rate] {
            if !(lr > 0.0) {
                return Err(Error::Config("learning rates must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainingConfig::default().validate().unwrap();
        let r = TrainingConfig::reference();
        r.validate().unwrap();
        assert_eq!(r.physics.batch_observations, 512);
        assert_eq!(r.physics.refinement_capacity, 10 * r.physics.refinement_resample);
        assert_eq!((r.precondition.scheduler.patience, r.physics.scheduler.patience), (10, 5));
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c = TrainingConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainingConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<TrainingConfig>(r#"{"precondition":{"epoch":3}}"#).is_err());
        let partial: TrainingConfig = serde_json::from_str(r#"{"physics":{"alpha":0.5}}"#).unwrap();
        assert_eq!(partial.physics.alpha, 0.5);
        assert_eq!(partial.physics.update_period, 10);
    }

    #[test]
    fn rejects_zero_sizes() {
        let mut c = TrainingConfig::default();
        c.physics.batch_interior = 0;
        assert!(c.validate().is_err());
        let mut c = TrainingConfig::default();
        c.physics.scheduler.patience = 0;
        assert!(c.validate().is_err());
    }
}
