use super::estimator::VelocityHistory;
use super::mesh::SimplexMesh;
use crate::autodiff::DifferentiableField;
use crate::error::Result;
use crate::observation::VoxelDataset;

/// Direct evaluation of a field at every vertex and requested time.
pub fn sample_field<F: DifferentiableField + ?Sized>(field: &F, mesh: &SimplexMesh, times: &[f64]) -> Result<VelocityHistory> {
    let velocities = times
        .iter()
        .map(|&t| {
            mesh.vertices
                .iter()
                .map(|x| {
                    let o = field.eval([x[0], x[1], x[2], t]);
                    [o[0], o[1], o[2]]
                })
                .collect()
        })
        .collect();
    VelocityHistory::new(times.to_vec(), velocities)
}

/// Voxel history at the phase mid-times plus the number of vertices that
/// fell outside the hull of voxel centers.
pub struct VoxelSampling {
    pub history: VelocityHistory,
    pub fallback_vertices: usize,
}

/// Trilinear interpolation between voxel centers; outside their hull each
/// axis is clamped to the nearest center.
pub fn sample_voxels(dataset: &VoxelDataset, mesh: &SimplexMesh) -> Result<VoxelSampling> {
    let grid = &dataset.grid;
    let h = grid.spacing();
    let mut fallback = 0;
    // per vertex: 8 (voxel, weight) pairs
    let stencils: Vec<Vec<(usize, f64)>> = mesh
        .vertices
        .iter()
        .map(|x| {
            let mut outside = false;
            let mut lo = [0usize; 3];
            let mut w = [0.0; 3];
            for d in 0..3 {
                let s = (x[d] - grid.origin[d]) / h[d] - 0.5;
                let max = (grid.dims[d] - 1) as f64;
                if s < 0.0 || s > max {
                    outside = true;
                }
                let s = s.clamp(0.0, max);
                let i = (s.floor() as usize).min(grid.dims[d].saturating_sub(2));
                lo[d] = i;
                w[d] = if grid.dims[d] == 1 { 0.0 } else { s - i as f64 };
            }
            if outside {
                fallback += 1;
            }
            let mut st = Vec::with_capacity(8);
            for corner in 0..8 {
                let mut ijk = lo;
                let mut weight = 1.0;
                for d in 0..3 {
                    let up = corner >> d & 1 == 1;
                    if up {
                        if grid.dims[d] == 1 {
                            weight = 0.0;
                            break;
                        }
                        ijk[d] += 1;
                        weight *= w[d];
                    } else {
                        weight *= 1.0 - w[d];
                    }
                }
                if weight != 0.0 {
                    st.push((grid.linear(ijk), weight));
                }
            }
            st
        })
        .collect();
    if fallback > 0 {
        log::warn!("{fallback} mesh vertices lie outside the voxel-center hull; using nearest values");
    }
    let times: Vec<f64> = (0..grid.phases).map(|p| grid.centroid([0, 0, 0], p)[3]).collect();
    let velocities = (0..grid.phases)
        .map(|p| {
            stencils
                .iter()
                .map(|st| {
                    let mut u = [0.0; 3];
                    for &(v, w) in st {
                        let val = dataset.velocity(p, v);
                        for c in 0..3 {
                            u[c] += w * val[c];
                        }
                    }
                    u
                })
                .collect()
        })
        .collect();
    Ok(VoxelSampling {
        history: VelocityHistory::new(times, velocities)?,
        fallback_vertices: fallback,
    })
}
