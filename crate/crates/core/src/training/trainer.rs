use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::balance::{LossState, COMPONENTS};
use super::config::TrainingConfig;
use super::loss::{
    boundary_loss, observation_loss, physics_loss, pressure_loss, LossScales, ObsTarget, PhysicsGrad, PressureTarget,
    Scratch, Source,
};
use super::optim::{Adam, Plateau};
use super::refine::RefinementSet;
use crate::error::{Error, Result};
use crate::network::{save_checkpoint, NeuralField};
use crate::observation::{split_dataset, voxel_stencil, ObservationIndex, PressureRegion, VoxelDataset};
use crate::physics::RheologyModel;
use crate::qmc::{hash_words, CollocationPool, ImplicitDomain, Point4, PoolKind};

/// Everything the curriculum needs besides its settings.
pub struct TrainingProblem<'a, D: ImplicitDomain + ?Sized> {
    pub dataset: &'a VoxelDataset,
    pub domain: &'a D,
    pub model: RheologyModel,
    /// Momentum forcing, for manufactured problems.
    pub source: Source<'a>,
}

/// Optional log sink and checkpoint directory.
#[derive(Default)]
pub struct TrainingIo<'w> {
    pub log: Option<&'w mut dyn Write>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Precondition,
    Physics,
}

/// Per-component numbers in logging order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub obs: f64,
    pub p: f64,
    pub ns_x: f64,
    pub ns_y: f64,
    pub ns_z: f64,
    pub cont: f64,
    pub bc: f64,
}

impl Components {
    pub fn from_array(a: [f64; 7]) -> Self {
        Components {
            obs: a[0],
            p: a[1],
            ns_x: a[2],
            ns_y: a[3],
            ns_z: a[4],
            cont: a[5],
            bc: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.obs, self.p, self.ns_x, self.ns_y, self.ns_z, self.cont, self.bc]
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    pub epoch: usize,
    /// Optimizer steps taken in this stage so far.
    pub steps: usize,
    pub lr: f64,
    /// Epoch means of the unweighted loss components.
    pub losses: Components,
    pub weights: Components,
    pub total: f64,
    pub validation: f64,
    pub refinement_points: usize,
    pub refinement_mean_score: f64,
}

pub struct TrainingOutcome {
    pub field: NeuralField,
    /// Parameters with the lowest validation loss of the last stage run.
    pub best: NeuralField,
    pub best_validation: f64,
    pub log: Vec<EpochRecord>,
    pub weights: LossState,
    pub steps: [usize; 2],
}

fn center_targets(ds: &VoxelDataset, obs: &[ObservationIndex]) -> Vec<ObsTarget> {
    obs.iter()
        .map(|o| ObsTarget {
            points: vec![ds.grid.centroid(ds.grid.unravel(o.voxel), o.phase)],
            total: 1,
            value: ds.velocity(o.phase, o.voxel),
        })
        .collect()
}

fn stencil_targets<D: ImplicitDomain + ?Sized>(
    domain: &D,
    ds: &VoxelDataset,
    obs: &[ObservationIndex],
    n: usize,
    seed: u64,
) -> Result<Vec<ObsTarget>> {
    obs.iter()
        .map(|o| {
            let s = voxel_stencil(domain, &ds.grid, ds.grid.unravel(o.voxel), o.phase, n, hash_words(&[seed, o.voxel as u64, o.phase as u64]))?;
            Ok(ObsTarget {
                points: s.inside,
                total: s.total,
                value: ds.velocity(o.phase, o.voxel),
            })
        })
        .collect()
}

fn shuffled(obs: &[ObservationIndex], seed: u64) -> Vec<ObservationIndex> {
    let mut v = obs.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

fn ensure_finite(value: f64, what: &str, step: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} loss is {value} at step {step}")))
    }
}

struct Recorder<'w> {
    io: TrainingIo<'w>,
    log: Vec<EpochRecord>,
}

impl Recorder<'_> {
    fn push(&mut self, record: EpochRecord) -> Result<()> {
        log::info!(
            "{:?} epoch {} step {} total {:.4e} validation {:.4e} lr {:.2e}",
            record.stage,
            record.epoch,
            record.steps,
            record.total,
            record.validation,
            record.lr
        );
        if let Some(w) = self.io.log.as_mut() {
            let line = serde_json::to_string(&record)?;
            writeln!(w, "{line}").map_err(|e| Error::io("training log", e))?;
        }
        self.log.push(record);
        Ok(())
    }

    fn checkpoint(&self, net: &NeuralField, name: &str) -> Result<()> {
        if let Some(dir) = &self.io.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            save_checkpoint(net, dir.join(name))?;
        }
        Ok(())
    }
}

/// Runs the data-only stage and then, if enabled, the physics stage.
pub fn train<D: ImplicitDomain + ?Sized>(
    config: &TrainingConfig,
    problem: &TrainingProblem<'_, D>,
    mut net: NeuralField,
    io: TrainingIo<'_>,
) -> Result<TrainingOutcome> {
    config.validate()?;
    let ds = problem.dataset;
    let split = split_dataset(ds, config.split, config.seed)?;
    if split.train.is_empty() {
        return Err(Error::EmptyMask);
    }
    let validation = if split.validation.is_empty() {
        split.train.clone()
    } else {
        split.validation.clone()
    };
    let scales = LossScales::from_scales(net.scales());
    let mut rec = Recorder { io, log: Vec::new() };
    let mut scratch = Scratch::default();
    let n_params = net.parameter_count();
    let mut grad = vec![0.0; n_params];

    // data-only stage
    let pre = &config.precondition;
    let mut adam = Adam::new(pre.optimizer, n_params);
    let mut plateau = Plateau::new(pre.scheduler);
    let val_centers = center_targets(ds, &validation);
    let mut best = (f64::INFINITY, net.clone());
    let mut steps = [0usize; 2];
    for epoch in 0..pre.epochs {
        let order = shuffled(&split.train, hash_words(&[config.seed, 1, epoch as u64]));
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(pre.batch_size) {
            let targets = center_targets(ds, chunk);
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = observation_loss(&net, &mut scratch, &targets, &scales, Some((1.0, &mut grad)))?;
            ensure_finite(loss, "observation", steps[0])?;
            adam.step(net.parameters_mut(), &grad)?;
            steps[0] += 1;
            sum += loss;
            batches += 1;
        }
        let val = observation_loss(&net, &mut scratch, &val_centers, &scales, None)?;
        ensure_finite(val, "validation", steps[0])?;
        adam.lr = plateau.update(val, adam.lr);
        if val < best.0 {
            best = (val, net.clone());
            rec.checkpoint(&net, "best.ckpt")?;
        }
        rec.checkpoint(&net, "last.ckpt")?;
        let mut losses = [0.0; 7];
        losses[0] = sum / batches as f64;
        let mut weights = [0.0; 7];
        weights[0] = 1.0;
        rec.push(EpochRecord {
            stage: Stage::Precondition,
            epoch,
            steps: steps[0],
            lr: adam.lr,
            losses: Components::from_array(losses),
            weights: Components::from_array(weights),
            total: losses[0],
            validation: val,
            refinement_points: 0,
            refinement_mean_score: 0.0,
        })?;
    }

    let mut state = LossState::new(config.physics.alpha, config.physics.update_period);
    if config.run_physics && config.physics.epochs > 0 {
        best = (f64::INFINITY, net.clone());
        let phy = &config.physics;
        let domain = problem.domain;
        let times = ds.grid.time_window();
        let h = ds.grid.spacing();
        let band = phy.band_factor * h[0].max(h[1]).max(h[2]);
        let mut interior = CollocationPool::new(domain, PoolKind::Interior, times, phy.interior_pool, hash_words(&[config.seed, 10]))?;
        let mut wall = CollocationPool::new(domain, PoolKind::Wall, times, phy.boundary_pool, hash_words(&[config.seed, 11]))?;
        let mut outer = CollocationPool::new(
            domain,
            PoolKind::Band { thickness: band },
            times,
            phy.boundary_pool,
            hash_words(&[config.seed, 12]),
        )?;
        let n_wall = (phy.wall_fraction * phy.batch_boundary as f64).round() as usize;
        let n_band = phy.batch_boundary - n_wall;
        let mut rar = RefinementSet::new(phy.refinement_capacity, phy.refinement_resample);
        let mut rar_cursor = 0usize;
        let region = PressureRegion::Lumen { times };
        let val_targets = stencil_targets(domain, ds, &validation, phy.validation_points_per_voxel, hash_words(&[config.seed, 13]))?;
        let mut adam = Adam::new(phy.optimizer, n_params);
        let mut plateau = Plateau::new(phy.scheduler);
        let mut per: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n_params]);
        let mut first = true;
        'epochs: for epoch in 0..phy.epochs {
            let order = shuffled(&split.train, hash_words(&[config.seed, 2, epoch as u64]));
            let chunks: Vec<&[ObservationIndex]> = order.chunks(phy.batch_observations).collect();
            let mut sums = [0.0; 7];
            let mut count = 0usize;
            let mut last_interior: Vec<Point4> = Vec::new();
            let mut last_scores: Vec<f64> = Vec::new();
            for chunk in chunks {
                if phy.max_steps.is_some_and(|m| steps[1] >= m) {
                    break;
                }
                let step = steps[1];
                let obs = stencil_targets(domain, ds, chunk, phy.points_per_voxel, hash_words(&[config.seed, 3, step as u64]))?;
                let pressure = [PressureTarget {
                    points: region.stencil(domain, phy.pressure_points, hash_words(&[config.seed, 4, step as u64]))?,
                    value: ds.p_mean,
                }];
                let pts = interior.next_batch(domain, phy.batch_interior)?;
                let ref_idx = rar.batch(phy.batch_refinement, rar_cursor);
                rar_cursor += ref_idx.len();
                let mut colloc = pts.clone();
                colloc.extend(ref_idx.iter().map(|&i| rar.points()[i]));
                let mut bnd = wall.next_batch(domain, n_wall)?;
                bnd.extend(outer.next_batch(domain, n_band)?);

                let update = step % state.update_period == 0;
                let mut values = [0.0; 7];
                let magnitudes;
                if update {
                    for g in per.iter_mut() {
                        g.iter_mut().for_each(|v| *v = 0.0);
                    }
                    let [g_obs, g_p, g_x, g_y, g_z, g_c, g_bc] = &mut per;
                    values[0] = observation_loss(&net, &mut scratch, &obs, &scales, Some((1.0, g_obs)))?;
                    values[1] = pressure_loss(&net, &mut scratch, &pressure, &scales, Some((1.0, g_p)))?;
                    let mut chan = [std::mem::take(g_x), std::mem::take(g_y), std::mem::take(g_z), std::mem::take(g_c)];
                    let out = physics_loss(&net, &mut scratch, &problem.model, &colloc, problem.source, &scales, PhysicsGrad::PerChannel(&mut chan))?;
                    let [cx, cy, cz, cc] = chan;
                    (*g_x, *g_y, *g_z, *g_c) = (cx, cy, cz, cc);
                    values[2..6].copy_from_slice(&out.values);
                    magnitudes = out.magnitudes;
                    values[6] = boundary_loss(&net, &mut scratch, &bnd, &scales, Some((1.0, g_bc)))?;
                    let alpha = if first { 0.0 } else { phy.alpha };
                    state.update_with(&per, alpha);
                    first = false;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for (c, g) in per.iter().enumerate() {
                        let w = state.weights[c];
                        for (a, b) in grad.iter_mut().zip(g) {
                            *a += w * b;
                        }
                    }
                } else {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let w = state.weights;
                    values[0] = observation_loss(&net, &mut scratch, &obs, &scales, Some((w[0], &mut grad)))?;
                    values[1] = pressure_loss(&net, &mut scratch, &pressure, &scales, Some((w[1], &mut grad)))?;
                    let out = physics_loss(
                        &net,
                        &mut scratch,
                        &problem.model,
                        &colloc,
                        problem.source,
                        &scales,
                        PhysicsGrad::Combined {
                            weights: [w[2], w[3], w[4], w[5]],
                            grad: &mut grad,
                        },
                    )?;
                    values[2..6].copy_from_slice(&out.values);
                    magnitudes = out.magnitudes;
                    values[6] = boundary_loss(&net, &mut scratch, &bnd, &scales, Some((w[6], &mut grad)))?;
                }
                for (c, v) in values.iter().enumerate() {
                    ensure_finite(*v, COMPONENTS[c].name(), step)?;
                }
                adam.step(net.parameters_mut(), &grad)?;
                steps[1] += 1;
                for (j, &i) in ref_idx.iter().enumerate() {
                    rar.rescore(i, magnitudes[pts.len() + j]);
                }
                last_scores = magnitudes[..pts.len()].to_vec();
                last_interior = pts;
                for c in 0..7 {
                    sums[c] += values[c];
                }
                count += 1;
            }
            if count == 0 {
                break 'epochs;
            }
            rar.refine(&last_interior, &last_scores);
            let val = observation_loss(&net, &mut scratch, &val_targets, &scales, None)?;
            ensure_finite(val, "validation", steps[1])?;
            adam.lr = plateau.update(val, adam.lr);
            if val < best.0 {
                best = (val, net.clone());
                rec.checkpoint(&net, "best.ckpt")?;
            }
            rec.checkpoint(&net, "last.ckpt")?;
            let losses = sums.map(|s| s / count as f64);
            let total = (0..7).map(|c| losses[c] * state.weights[c]).sum();
            rec.push(EpochRecord {
                stage: Stage::Physics,
                epoch,
                steps: steps[1],
                lr: adam.lr,
                losses: Components::from_array(losses),
                weights: Components::from_array(state.weights),
                total,
                validation: val,
                refinement_points: rar.len(),
                refinement_mean_score: rar.mean_score(),
            })?;
        }
    }
    rec.checkpoint(&net, "final.ckpt")?;
    Ok(TrainingOutcome {
        field: net,
        best: best.1,
        best_validation: best.0,
        log: rec.log,
        weights: state,
        steps,
    })
}
