//! Power-law rheology, Navier-Stokes residuals and reference flows.

mod flows;
mod residual;
mod rheology;

pub use flows::{pipe_flow_rate, ReferenceFlow};
pub use residual::{
    manufactured_source, momentum_residual, residual_adjoint, residual_channel_jacobian, residual_terms, wall_shear_from_gradient,
    wall_shear_stress, ChannelJacobian, FlowJet, ManufacturedSource, ResidualAdjoint, ResidualSample,
};
pub use rheology::{
    apparent_viscosity, strain_rate, RheologyModel, BLOOD_DENSITY, DEFAULT_GAMMA_MIN, HEMATOCRIT_TABLE,
};
