//! Loss assembly, loss balancing, adaptive refinement, optimization and the
//! two-stage curriculum.

mod balance;
mod config;
mod loss;
mod optim;
mod refine;
mod trainer;

pub use balance::{gradient_std, BalanceOutcome, Component, LossState, COMPONENTS};
pub use config::{PhysicsConfig, PreconditionConfig, TrainingConfig};
pub use loss::{
    boundary_loss, observation_loss, physics_loss, pressure_loss, GradSink, LossScales, ObsTarget, PhysicsGrad,
    PhysicsOutcome, PressureTarget, Scratch, Source,
};
pub use optim::{Adam, AdamConfig, Plateau, PlateauConfig};
pub use refine::RefinementSet;
pub use trainer::{train, Components, EpochRecord, Stage, TrainingIo, TrainingOutcome, TrainingProblem};
