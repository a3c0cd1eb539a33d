//! Virtual work-energy pressure-drop estimation on tetrahedral meshes.

mod estimator;
mod mesh;
mod sample;
mod stokes;

pub use estimator::{pressure_drop_error, vwerp_pressure_drop, vwerp_pressure_drop_forced, Scheme, VelocityHistory, VwerpSeries};
pub use mesh::{build_pipe_mesh, BoundaryFacet, FacetTag, PipeMeshSpec, SimplexMesh, TetGeometry};
pub use sample::{sample_field, sample_voxels, VoxelSampling};
pub use stokes::{boundary_flux, divergence_ratio, solve_auxiliary_stokes, RimAssignment, StokesConfig, StokesTestField};
