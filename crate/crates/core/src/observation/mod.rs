//! Voxel-averaged velocity acquisition and the pressure-mean observer.

mod dataset;
mod grid;
mod io;

pub use dataset::{
    generate_dataset, observe_pressure, observe_voxel, split_dataset, split_observations, voxel_seed, voxel_stencil,
    DatasetSplit, ObservationIndex, PressureRegion, SynthesisInfo, SynthesisOptions, VoxelDataset, VoxelStencil,
    DEFAULT_FRACTIONS,
};
pub use grid::{VoxelClass, VoxelGrid};
pub use io::{read_dataset, write_dataset, F4DV_MAGIC, F4DV_VERSION};
