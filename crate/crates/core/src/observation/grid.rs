use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmc::ImplicitDomain;

/// Regular space-time acquisition grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxelGrid {
    /// (nx, ny, nz).
    pub dims: [usize; 3],
    /// Voxel edge lengths [mm].
    pub voxel_size: [f64; 3],
    /// Lower corner of voxel (0, 0, 0) [cm].
    pub origin: [f64; 3],
    pub phases: usize,
    /// [ms].
    pub phase_duration: f64,
    /// Start of the first phase [s].
    pub t0: f64,
}

/// Voxel classification stored in the mask block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelClass {
    Exterior = 0,
    Lumen = 1,
    Boundary = 2,
}

impl VoxelClass {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(VoxelClass::Exterior),
            1 => Some(VoxelClass::Lumen),
            2 => Some(VoxelClass::Boundary),
            _ => None,
        }
    }

    pub fn observed(self) -> bool {
        self != VoxelClass::Exterior
    }
}

impl VoxelGrid {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) || self.phases == 0 {
            return Err(Error::invalid(format!("grid dims and phases must be >= 1: {:?}", self.dims)));
        }
        if !(self.phase_duration > 0.0) || self.voxel_size.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::invalid("phase duration and voxel size must be positive"));
        }
        if !self.origin.iter().all(|v| v.is_finite()) || !self.t0.is_finite() {
            return Err(Error::invalid("grid origin and start time must be finite"));
        }
        Ok(())
    }

    /// Grid of `voxel_mm` voxels covering the domain box grown by `margin` [cm].
    pub fn covering<D: ImplicitDomain + ?Sized>(
        domain: &D,
        voxel_mm: [f64; 3],
        margin: f64,
        phases: usize,
        phase_duration_ms: f64,
        t0: f64,
    ) -> Result<Self> {
        let (lo, hi) = domain.bounding_box();
        let mut dims = [0; 3];
        let mut origin = [0.0; 3];
        for d in 0..3 {
            let h = voxel_mm[d] / 10.0;
            let extent = hi[d] - lo[d] + 2.0 * margin;
            dims[d] = ((extent / h) - 1e-9).ceil().max(1.0) as usize;
            let center = 0.5 * (lo[d] + hi[d]);
            origin[d] = center - 0.5 * dims[d] as f64 * h;
        }
        let grid = VoxelGrid {
            dims,
            voxel_size: voxel_mm,
            origin,
            phases,
            phase_duration: phase_duration_ms,
            t0,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Voxel edge lengths [cm].
    pub fn spacing(&self) -> [f64; 3] {
        self.voxel_size.map(|h| h / 10.0)
    }

    /// Voxel volume [cm^3].
    pub fn voxel_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    /// Phase duration [s].
    pub fn phase_seconds(&self) -> f64 {
        self.phase_duration / 1000.0
    }

    /// Acquired time window [t0, t0 + phases * duration) [s].
    pub fn time_window(&self) -> (f64, f64) {
        (self.t0, self.t0 + self.phases as f64 * self.phase_seconds())
    }

    pub fn phase_interval(&self, phase: usize) -> (f64, f64) {
        let dt = self.phase_seconds();
        (self.t0 + phase as f64 * dt, self.t0 + (phase + 1) as f64 * dt)
    }

    /// Linear index with x fastest, matching the [z][y][x] storage order.
    pub fn linear(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * self.dims[1] + ijk[1]) * self.dims[0] + ijk[0]
    }

    pub fn unravel(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn check(&self, ijk: [usize; 3], phase: usize) -> Result<()> {
        if (0..3).any(|d| ijk[d] >= self.dims[d]) || phase >= self.phases {
            return Err(Error::invalid(format!(
                "voxel {ijk:?} phase {phase} outside grid {:?} x {}",
                self.dims, self.phases
            )));
        }
        Ok(())
    }

    pub fn bounds(&self, ijk: [usize; 3]) -> ([f64; 3], [f64; 3]) {
        let h = self.spacing();
        let lo: [f64; 3] = std::array::from_fn(|d| self.origin[d] + ijk[d] as f64 * h[d]);
        let hi: [f64; 3] = std::array::from_fn(|d| lo[d] + h[d]);
        (lo, hi)
    }

    pub fn center(&self, ijk: [usize; 3]) -> [f64; 3] {
        let (lo, hi) = self.bounds(ijk);
        std::array::from_fn(|d| 0.5 * (lo[d] + hi[d]))
    }

    /// Center of voxel and phase interval.
    pub fn centroid(&self, ijk: [usize; 3], phase: usize) -> [f64; 4] {
        let c = self.center(ijk);
        let (a, b) = self.phase_interval(phase);
        [c[0], c[1], c[2], 0.5 * (a + b)]
    }

    /// Lumen when the center is inside and no corner disagrees, boundary
    /// when the center and corners disagree in sign, exterior otherwise.
    pub fn classify<D: ImplicitDomain + ?Sized>(&self, domain: &D, ijk: [usize; 3]) -> VoxelClass {
        let (lo, hi) = self.bounds(ijk);
        let inside = domain.sdf(self.center(ijk)) < 0.0;
        for corner in 0..8 {
            let x = std::array::from_fn(|d| if corner >> d & 1 == 0 { lo[d] } else { hi[d] });
            if (domain.sdf(x) < 0.0) != inside {
                return VoxelClass::Boundary;
            }
        }
        if inside {
            VoxelClass::Lumen
        } else {
            VoxelClass::Exterior
        }
    }

    pub fn mask<D: ImplicitDomain + ?Sized>(&self, domain: &D) -> Vec<VoxelClass> {
        (0..self.voxel_count()).map(|v| self.classify(domain, self.unravel(v))).collect()
    }
}
