//! Scrambled Halton sequences and sampling on implicit geometries.

mod domain;
mod halton;
pub(crate) mod sampling;

pub use domain::{ChartSample, Domain, ImplicitDomain, Patch};
pub use halton::{halton, hash_words, qmc_integrate, HaltonSampler, Region, Scrambling, MAX_DIM};
pub use sampling::{
    sample_boundary_band, sample_boundary_band_spacetime, sample_interior, sample_interior_spacetime, sample_wall,
    sample_wall_spacetime, CollocationPool, Point4, PoolKind, RejectionStats,
};
