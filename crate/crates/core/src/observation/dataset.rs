use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{VoxelClass, VoxelGrid};
use crate::autodiff::DifferentiableField;
use crate::error::{Error, Result};
use crate::physics::RheologyModel;
use crate::qmc::{hash_words, HaltonSampler, ImplicitDomain, Point4};

/// Quadrature points of one voxel and phase. Only the points inside the
/// lumen are kept; the rest contribute zero velocity to the average.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelStencil {
    pub inside: Vec<Point4>,
    pub total: usize,
}

impl VoxelStencil {
    pub fn lumen_fraction(&self) -> f64 {
        self.inside.len() as f64 / self.total as f64
    }
}

/// Scrambling seed of a voxel. It does not depend on the phase, so every
/// phase uses the same spatial points and a steady field repeats exactly.
pub fn voxel_seed(seed: u64, voxel: usize) -> u64 {
    hash_words(&[seed, voxel as u64])
}

pub fn voxel_stencil<D: ImplicitDomain + ?Sized>(
    domain: &D,
    grid: &VoxelGrid,
    ijk: [usize; 3],
    phase: usize,
    n_points: usize,
    seed: u64,
) -> Result<VoxelStencil> {
    grid.check(ijk, phase)?;
    if n_points == 0 {
        return Err(Error::invalid("a voxel needs at least one quadrature point"));
    }
    let sampler = HaltonSampler::owen(4, seed)?;
    let (lo, hi) = grid.bounds(ijk);
    let (ta, tb) = grid.phase_interval(phase);
    let mut inside = Vec::new();
    for k in 0..n_points as u64 {
        let u = sampler.point4(k);
        let x = std::array::from_fn(|d| lo[d] + u[d] * (hi[d] - lo[d]));
        if domain.sdf(x) < 0.0 {
            inside.push([x[0], x[1], x[2], ta + u[3] * (tb - ta)]);
        }
    }
    Ok(VoxelStencil {
        inside,
        total: n_points,
    })
}

/// Mean velocity over a voxel and phase interval.
pub fn observe_voxel<F: DifferentiableField + ?Sized, D: ImplicitDomain + ?Sized>(
    field: &F,
    domain: &D,
    grid: &VoxelGrid,
    ijk: [usize; 3],
    phase: usize,
    n_points: usize,
    seed: u64,
) -> Result<[f64; 3]> {
    let stencil = voxel_stencil(domain, grid, ijk, phase, n_points, seed)?;
    let mut sum = [0.0; 3];
    for p in &stencil.inside {
        let v = field.eval(*p);
        for d in 0..3 {
            sum[d] += v[d];
        }
    }
    Ok(sum.map(|s| s / stencil.total as f64))
}

/// A space-time region over which pressure is averaged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureRegion {
    /// The whole lumen over a time window.
    Lumen { times: (f64, f64) },
    /// The part of the lumen inside a box over a time window.
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
        times: (f64, f64),
    },
}

impl PressureRegion {
    pub fn stencil<D: ImplicitDomain + ?Sized>(&self, domain: &D, n_points: usize, seed: u64) -> Result<Vec<Point4>> {
        match self {
            PressureRegion::Lumen { times } => {
                Ok(crate::qmc::sample_interior_spacetime(domain, *times, n_points, seed)?.0)
            }
            PressureRegion::Box { lo, hi, times } => {
                let (dlo, dhi) = domain.bounding_box();
                let blo: [f64; 3] = std::array::from_fn(|d| lo[d].max(dlo[d]));
                let bhi: [f64; 3] = std::array::from_fn(|d| hi[d].min(dhi[d]));
                if (0..3).any(|d| blo[d] >= bhi[d]) {
                    return Err(Error::invalid("pressure region does not meet the domain"));
                }
                Ok(crate::qmc::sampling::rejection((blo, bhi), *times, n_points, seed, |x| domain.sdf(x) < 0.0)?.0)
            }
        }
    }
}

/// Mean pressure of the field over each region.
pub fn observe_pressure<F: DifferentiableField + ?Sized, D: ImplicitDomain + ?Sized>(
    field: &F,
    domain: &D,
    regions: &[PressureRegion],
    n_points: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_points == 0 {
        return Err(Error::invalid("pressure averages need at least one point"));
    }
    regions
        .iter()
        .enumerate()
        .map(|(k, region)| {
            let pts = region.stencil(domain, n_points, hash_words(&[seed, k as u64]))?;
            Ok(pts.iter().map(|p| field.eval(*p)[3]).sum::<f64>() / n_points as f64)
        })
        .collect()
}

/// Where a synthetic dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisInfo {
    pub seed: u64,
    pub points_per_voxel: usize,
    pub pressure_points: usize,
    pub rheology: Option<RheologyModel>,
    pub source: String,
}

/// Voxel-averaged velocities over a phase-resolved grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelDataset {
    pub grid: VoxelGrid,
    /// [phase][z][y][x][component] in cm/s.
    pub velocities: Vec<f32>,
    pub mask: Vec<VoxelClass>,
    /// Space-time mean pressure [Ba].
    pub p_mean: f64,
    pub info: SynthesisInfo,
}

/// One observation: a masked-in voxel at one phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObservationIndex {
    pub phase: usize,
    pub voxel: usize,
}

impl VoxelDataset {
    pub fn zeros(grid: VoxelGrid, mask: Vec<VoxelClass>, info: SynthesisInfo) -> Result<Self> {
        grid.validate()?;
        if mask.len() != grid.voxel_count() {
            return Err(Error::invalid("mask length differs from the voxel count"));
        }
        Ok(VoxelDataset {
            velocities: vec![0.0; grid.phases * grid.voxel_count() * 3],
            grid,
            mask,
            p_mean: 0.0,
            info,
        })
    }

    fn offset(&self, phase: usize, voxel: usize) -> usize {
        (phase * self.grid.voxel_count() + voxel) * 3
    }

    pub fn velocity(&self, phase: usize, voxel: usize) -> [f64; 3] {
        let o = self.offset(phase, voxel);
        [self.velocities[o] as f64, self.velocities[o + 1] as f64, self.velocities[o + 2] as f64]
    }

    pub fn set_velocity(&mut self, phase: usize, voxel: usize, v: [f64; 3]) {
        let o = self.offset(phase, voxel);
        for d in 0..3 {
            self.velocities[o + d] = v[d] as f32;
        }
    }

    /// Masked-in (phase, voxel) pairs in storage order.
    pub fn observations(&self) -> Vec<ObservationIndex> {
        let mut out = Vec::new();
        for phase in 0..self.grid.phases {
            for (voxel, class) in self.mask.iter().enumerate() {
                if class.observed() {
                    out.push(ObservationIndex { phase, voxel });
                }
            }
        }
        out
    }

    /// Sum of |u|^2 times voxel volume, over all phases.
    pub fn kinetic_sum(&self) -> f64 {
        let v = self.grid.voxel_volume();
        self.velocities.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() * v
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities
            .chunks_exact(3)
            .map(|c| ((c[0] as f64).powi(2) + (c[1] as f64).powi(2) + (c[2] as f64).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Settings for synthesizing a dataset from a reference field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisOptions {
    pub points_per_voxel: usize,
    pub pressure_points: usize,
    pub seed: u64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            points_per_voxel: 512,
            pressure_points: 8192,
            seed: 0,
        }
    }
}

pub fn generate_dataset<F: DifferentiableField + ?Sized, D: ImplicitDomain + ?Sized>(
    field: &F,
    domain: &D,
    grid: &VoxelGrid,
    rheology: Option<RheologyModel>,
    options: SynthesisOptions,
) -> Result<VoxelDataset> {
    grid.validate()?;
    let mask = grid.mask(domain);
    if !mask.iter().any(|c| c.observed()) {
        return Err(Error::EmptyMask);
    }
    let info = SynthesisInfo {
        seed: options.seed,
        points_per_voxel: options.points_per_voxel,
        pressure_points: options.pressure_points,
        rheology,
        source: String::new(),
    };
    let mut ds = VoxelDataset::zeros(grid.clone(), mask, info)?;
    for obs in ds.observations() {
        let ijk = grid.unravel(obs.voxel);
        let seed = voxel_seed(options.seed, obs.voxel);
        let v = observe_voxel(field, domain, grid, ijk, obs.phase, options.points_per_voxel, seed)?;
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite(format!("velocity in voxel {ijk:?} phase {}", obs.phase)));
        }
        ds.set_velocity(obs.phase, obs.voxel, v);
    }
    let region = PressureRegion::Lumen {
        times: grid.time_window(),
    };
    ds.p_mean = observe_pressure(field, domain, &[region], options.pressure_points, hash_words(&[options.seed, u64::MAX]))?[0];
    Ok(ds)
}

/// Disjoint train / validation / test index lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<ObservationIndex>,
    pub validation: Vec<ObservationIndex>,
    pub test: Vec<ObservationIndex>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.90, 0.05, 0.05];

pub fn split_dataset(dataset: &VoxelDataset, fractions: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    split_observations(dataset.observations(), fractions, seed)
}

pub fn split_observations(mut obs: Vec<ObservationIndex>, fractions: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if fractions.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::invalid(format!("split fractions must be non-negative: {fractions:?}")));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions must sum to 1: {fractions:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    obs.shuffle(&mut rng);
    let n = obs.len();
    let n_val = (fractions[1] * n as f64).round() as usize;
    let n_test = ((fractions[2] * n as f64).round() as usize).min(n - n_val);
    let test = obs.split_off(n - n_test);
    let validation = obs.split_off(obs.len() - n_val);
    Ok(DatasetSplit {
        train: obs,
        validation,
        test,
        fractions,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ReferenceFlow;
    use crate::qmc::Domain;
    use std::collections::HashSet;

    fn slab() -> Domain {
        Domain::Slab {
            length: 2.0,
            half_height: 0.5,
            depth: 1.0,
        }
    }

    fn slab_grid(phases: usize) -> VoxelGrid {
        VoxelGrid {
            dims: [10, 6, 1],
            voxel_size: [2.0, 2.0, 2.0],
            origin: [0.0, -0.6, -0.1],
            phases,
            phase_duration: 42.6,
            t0: 0.0,
        }
    }

    #[test]
    fn uniform_field_in_interior_voxel() {
        let f = ReferenceFlow::Uniform {
            velocity: [3.5, 0.0, 0.0],
            pressure: 0.0,
        };
        let g = slab_grid(2);
        let v = observe_voxel(&f, &slab(), &g, [4, 2, 0], 1, 16, 3).unwrap();
        assert_eq!(v, [3.5, 0.0, 0.0]);
    }

    #[test]
    fn linear_field_gives_centroid_value() {
        let f = ReferenceFlow::Linear {
            u0: [1.0, 0.0, 0.0],
            gradient: [[2.0, 0.0, 0.0], [0.0; 3], [0.0; 3]],
            rate: [5.0, 0.0, 0.0],
            p0: 0.0,
            p_gradient: [0.0; 4],
        };
        let g = slab_grid(3);
        let c = g.centroid([4, 2, 0], 1);
        let v = observe_voxel(&f, &slab(), &g, [4, 2, 0], 1, 512, 11).unwrap();
        let expect = 1.0 + 2.0 * c[0] + 5.0 * c[3];
        assert!((v[0] - expect).abs() < 1e-3 * 2.0 * 0.2, "{} vs {expect}", v[0]);
    }

    #[test]
    fn partial_volume_fraction() {
        // constant inside, zero outside; a voxel half in the lumen sees half
        let f = ReferenceFlow::Uniform {
            velocity: [0.0, 0.0, 4.0],
            pressure: 0.0,
        };
        let d = slab();
        let g = VoxelGrid {
            dims: [1, 1, 1],
            voxel_size: [2.0, 2.0, 2.0],
            origin: [0.5, 0.4, -0.1],
            phases: 1,
            phase_duration: 10.0,
            t0: 0.0,
        };
        assert_eq!(g.classify(&d, [0, 0, 0]), VoxelClass::Boundary);
        let v = observe_voxel(&f, &d, &g, [0, 0, 0], 0, 4096, 5).unwrap();
        assert!((v[2] - 2.0).abs() < 4.0 * 2e-3, "{v:?}");
    }

    #[test]
    fn wall_voxel_matches_dense_quadrature() {
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let f = ReferenceFlow::plane_poiseuille_with_peak(&model, 0.5, 40.0);
        let d = slab();
        let g = VoxelGrid {
            dims: [1, 1, 1],
            voxel_size: [2.0, 2.0, 2.0],
            origin: [1.0, 0.35, -0.1],
            phases: 1,
            phase_duration: 10.0,
            t0: 0.0,
        };
        let coarse = observe_voxel(&f, &d, &g, [0, 0, 0], 0, 512, 1).unwrap()[0];
        // u depends on y only, so the dense reference is a 1D midpoint sum
        // over 10^6 sub-intervals with exterior contributing zero
        let n = 1_000_000;
        let dense: f64 = (0..n)
            .map(|k| {
                let y = 0.35 + 0.2 * (k as f64 + 0.5) / n as f64;
                if y < 0.5 {
                    f.eval([1.1, y, 0.0, 0.0])[0]
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / n as f64;
        assert!((coarse / dense - 1.0).abs() < 0.01, "{coarse} vs {dense}");
    }

    #[test]
    fn zero_field_dataset() {
        let ds = generate_dataset(&ReferenceFlow::Zero, &slab(), &slab_grid(2), None, SynthesisOptions::default()).unwrap();
        assert!(ds.velocities.iter().all(|v| *v == 0.0));
        assert_eq!(ds.p_mean, 0.0);
    }

    #[test]
    fn steady_field_repeats_over_phases() {
        let model = RheologyModel::from_hematocrit(20.0).unwrap();
        let f = ReferenceFlow::plane_poiseuille_with_peak(&model, 0.5, 30.0);
        let opts = SynthesisOptions {
            points_per_voxel: 64,
            ..Default::default()
        };
        let ds = generate_dataset(&f, &slab(), &slab_grid(22), Some(model), opts).unwrap();
        let n = ds.grid.voxel_count() * 3;
        let first = &ds.velocities[..n];
        assert!(first.iter().any(|v| *v != 0.0));
        for k in 1..22 {
            let block = &ds.velocities[k * n..(k + 1) * n];
            assert_eq!(first, block);
        }
        for (v, class) in ds.mask.iter().enumerate() {
            if !class.observed() {
                assert_eq!(ds.velocity(3, v), [0.0; 3]);
            }
        }
    }

    #[test]
    fn pipe_kinetic_energy_matches_profile_integral() {
        let model = RheologyModel::from_hematocrit(45.0).unwrap();
        let (radius, length, peak) = (0.5, 1.0, 50.0);
        let f = ReferenceFlow::pipe_poiseuille_with_peak(&model, radius, peak);
        let d = Domain::Cylinder { radius, length };
        let g = VoxelGrid {
            dims: [20, 20, 5],
            voxel_size: [0.5, 0.5, 2.0],
            origin: [-0.5, -0.5, 0.0],
            phases: 1,
            phase_duration: 10.0,
            t0: 0.0,
        };
        let ds = generate_dataset(&f, &d, &g, Some(model), SynthesisOptions::default()).unwrap();
        // u = U (1 - s^k), k = (n+1)/n, so the area integral of u^2 is
        // pi R^2 U^2 (1 - 4/(k+2) + 1/(k+1))
        let k = (model.n + 1.0) / model.n;
        let exact = std::f64::consts::PI * radius * radius * peak * peak * length * (1.0 - 4.0 / (k + 2.0) + 1.0 / (k + 1.0));
        let got = ds.kinetic_sum();
        assert!((got / exact - 1.0).abs() < 0.02, "{got} vs {exact}");
    }

    #[test]
    fn generation_is_deterministic() {
        let f = ReferenceFlow::Manufactured;
        let opts = SynthesisOptions {
            points_per_voxel: 16,
            pressure_points: 256,
            seed: 9,
        };
        let a = generate_dataset(&f, &slab(), &slab_grid(3), None, opts).unwrap();
        let b = generate_dataset(&f, &slab(), &slab_grid(3), None, opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disjoint_grid_is_empty() {
        let mut g = slab_grid(1);
        g.origin = [10.0, 10.0, 10.0];
        let err = generate_dataset(&ReferenceFlow::Zero, &slab(), &g, None, SynthesisOptions::default());
        assert!(matches!(err, Err(Error::EmptyMask)));
    }

    #[test]
    fn constant_and_linear_pressure_means() {
        let d = slab();
        let c = ReferenceFlow::Uniform {
            velocity: [0.0; 3],
            pressure: 42.0,
        };
        let r = [PressureRegion::Lumen { times: (0.0, 1.0) }];
        assert!((observe_pressure(&c, &d, &r, 64, 1).unwrap()[0] - 42.0).abs() < 1e-12);
        let lin = ReferenceFlow::Linear {
            u0: [0.0; 3],
            gradient: [[0.0; 3]; 3],
            rate: [0.0; 3],
            p0: 100.0,
            p_gradient: [0.0, 0.0, 0.0, 50.0],
        };
        let got = observe_pressure(&lin, &d, &r, 4096, 2).unwrap()[0];
        assert!((got / 125.0 - 1.0).abs() < 1e-3);
        let boxed = [PressureRegion::Box {
            lo: [0.0, -0.5, -0.5],
            hi: [0.5, 0.5, 0.5],
            times: (0.0, 0.2),
        }];
        let got = observe_pressure(&lin, &d, &boxed, 4096, 2).unwrap()[0];
        assert!((got / 105.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn manufactured_pressure_golden() {
        let d = Domain::Cylinder {
            radius: 1.0,
            length: 2.0,
        };
        let r = [PressureRegion::Lumen { times: (0.0, 1.0) }];
        let got = observe_pressure(&ReferenceFlow::Manufactured, &d, &r, 1024, 77).unwrap()[0];
        assert_eq!(got, 0.8792588173345137);
        // the exact mean of cos x over the unit disc is 2 J1(1) = 0.880101...
        assert!((got - 0.880_101_171_057_2).abs() < 2e-3);
    }

    #[test]
    fn zero_mean_pressure() {
        // p = cos x has zero mean over x in [0, pi]
        let d = Domain::Slab {
            length: std::f64::consts::PI,
            half_height: 0.5,
            depth: 1.0,
        };
        let r = [PressureRegion::Lumen { times: (0.0, 1.0) }];
        let got = observe_pressure(&ReferenceFlow::Manufactured, &d, &r, 4096, 3).unwrap()[0];
        assert!(got.abs() < 1e-3, "{got}");
    }

    #[test]
    fn split_sizes_and_determinism() {
        let obs: Vec<_> = (0..1000).map(|v| ObservationIndex { phase: 0, voxel: v }).collect();
        let s = split_observations(obs.clone(), DEFAULT_FRACTIONS, 4).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (900, 50, 50));
        assert_eq!(s, split_observations(obs.clone(), DEFAULT_FRACTIONS, 4).unwrap());
        let mut all: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        let unique: HashSet<_> = all.iter().copied().collect();
        assert_eq!(unique.len(), 1000);
        all.sort();
        assert_eq!(all, obs);
        assert!(split_observations(obs.clone(), [1.1, -0.1, 0.0], 0).is_err());
        assert!(split_observations(obs, [0.5, 0.2, 0.2], 0).is_err());
    }
}
