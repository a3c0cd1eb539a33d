use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::network::{NetworkArchitecture, ScaleSet};
use crate::observation::{SynthesisOptions, VoxelGrid};
use crate::physics::{ReferenceFlow, RheologyModel};
use crate::qmc::{Domain, ImplicitDomain};
use crate::training::TrainingConfig;
use crate::vwerp::{PipeMeshSpec, StokesConfig};
use crate::windkessel::WindkesselParams;

/// Ground-truth flow, sized from the domain and rheology.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowSpec {
    PlanePoiseuille { u_max: f64 },
    PipePoiseuille { u_max: f64 },
    PulsatilePipe { u_max: f64, period: f64, peak: f64 },
}

impl FlowSpec {
    pub fn build(&self, domain: &Domain, model: &RheologyModel) -> Result<ReferenceFlow> {
        match (*self, *domain) {
            (FlowSpec::PlanePoiseuille { u_max }, Domain::Slab { half_height, .. }) => {
                Ok(ReferenceFlow::plane_poiseuille_with_peak(model, half_height, u_max))
            }
            (FlowSpec::PipePoiseuille { u_max }, Domain::Cylinder { radius, .. }) => {
                Ok(ReferenceFlow::pipe_poiseuille_with_peak(model, radius, u_max))
            }
            (FlowSpec::PulsatilePipe { u_max, period, peak }, Domain::Cylinder { radius, .. }) => {
                Ok(ReferenceFlow::pulsatile_pipe(model, radius, u_max, period, peak))
            }
            (flow, domain) => Err(Error::Config(format!("flow {flow:?} does not fit domain {domain:?}"))),
        }
    }

    pub fn peak_velocity(&self) -> f64 {
        match *self {
            FlowSpec::PlanePoiseuille { u_max } | FlowSpec::PipePoiseuille { u_max } | FlowSpec::PulsatilePipe { u_max, .. } => u_max,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            FlowSpec::PulsatilePipe { period, .. } => Some(period),
            _ => None,
        }
    }
}

/// Acquisition grid covering the domain bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub voxel_mm: [f64; 3],
    /// Margin [cm] added around the bounding box.
    pub margin: f64,
    pub phases: usize,
    pub phase_duration_ms: f64,
    pub t0: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            voxel_mm: [2.0, 2.0, 2.0],
            margin: 0.1,
            phases: 1,
            phase_duration_ms: 100.0,
            t0: 0.0,
        }
    }
}

impl GridSpec {
    pub fn grid(&self, domain: &Domain) -> Result<VoxelGrid> {
        VoxelGrid::covering(domain, self.voxel_mm, self.margin, self.phases, self.phase_duration_ms, self.t0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Evenly spaced evaluation times over the acquisition window.
    pub times: usize,
    pub interior_points: usize,
    pub wall_points: usize,
    pub section_points: usize,
    /// Section distance from the inlet and outlet planes, in voxel edges.
    pub section_inset_voxels: f64,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            times: 200,
            interior_points: 256,
            wall_points: 256,
            section_points: 1024,
            section_inset_voxels: 2.0,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VwerpConfig {
    /// Mesh parameters; the benchmark mesh for the cylinder when absent.
    pub mesh: Option<PipeMeshSpec>,
    pub stokes: StokesConfig,
    pub outlet: u32,
    /// Times at which a trained field is queried over the acquisition window.
    pub field_samples: usize,
}

impl Default for VwerpConfig {
    fn default() -> Self {
        VwerpConfig {
            mesh: None,
            stokes: StokesConfig::default(),
            outlet: 0,
            field_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindkesselConfig {
    pub params: WindkesselParams,
    pub dt: f64,
    /// CSV with columns t, Q; the outlet flow of the reference field when absent.
    pub flow_csv: Option<PathBuf>,
    /// Flow samples per acquisition window when taken from the reference field.
    pub samples: usize,
}

impl Default for WindkesselConfig {
    fn default() -> Self {
        WindkesselConfig {
            params: WindkesselParams {
                r_p: 100.0,
                r_d: 1000.0,
                c: 1e-4,
                p_d0: 0.0,
            },
            dt: 1e-3,
            flow_csv: None,
            samples: 101,
        }
    }
}

/// Everything one run needs; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub hematocrit: f64,
    /// Strain-rate floor [1/s] of the viscosity law; the library default when absent.
    pub viscosity_floor: Option<f64>,
    pub flow: FlowSpec,
    pub grid: GridSpec,
    pub synthesis: SynthesisOptions,
    pub network: NetworkArchitecture,
    /// Network scales; fitted to the domain and flow when absent.
    pub scales: Option<ScaleSet>,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
    pub vwerp: VwerpConfig,
    pub windkessel: WindkesselConfig,
    pub output_dir: PathBuf,
    /// Dataset base path; `<output_dir>/dataset` when absent.
    pub dataset: Option<PathBuf>,
    /// Checkpoint to evaluate; `<output_dir>/checkpoints/best.ckpt` when absent.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: Domain::Cylinder {
                radius: 0.5,
                length: 3.0,
            },
            hematocrit: 45.0,
            viscosity_floor: None,
            flow: FlowSpec::PipePoiseuille { u_max: 30.0 },
            grid: GridSpec::default(),
            synthesis: SynthesisOptions {
                points_per_voxel: 64,
                pressure_points: 1024,
                seed: 0,
            },
            network: NetworkArchitecture::new(4, 64, 0),
            scales: None,
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
            vwerp: VwerpConfig::default(),
            windkessel: WindkesselConfig::default(),
            output_dir: PathBuf::from("out"),
            dataset: None,
            checkpoint: None,
        }
    }
}

impl ExperimentConfig {
    /// Steady power-law channel at Hct 20 on 2 mm voxels with a budget
    /// that trains in minutes on one core.
    pub fn desk_channel() -> Self {
        let mut training = TrainingConfig::default();
        training.precondition.epochs = 150;
        training.precondition.batch_size = 32;
        let p = &mut training.physics;
        p.epochs = 560;
        p.batch_observations = 32;
        p.points_per_voxel = 8;
        p.batch_interior = 128;
        p.batch_refinement = 32;
        p.refinement_resample = 8;
        p.refinement_capacity = 96;
        p.batch_boundary = 64;
        p.interior_pool = 8192;
        p.boundary_pool = 4096;
        p.pressure_points = 64;
        p.validation_points_per_voxel = 32;
        p.wall_fraction = 1.0;
        p.scheduler.patience = 100;
        ExperimentConfig {
            domain: Domain::Slab {
                length: 2.0,
                half_height: 0.5,
                depth: 0.4,
            },
            hematocrit: 20.0,
            flow: FlowSpec::PlanePoiseuille { u_max: 2.0 },
            grid: GridSpec {
                phases: 5,
                phase_duration_ms: 200.0,
                ..Default::default()
            },
            network: NetworkArchitecture::new(3, 32, 0),
            training,
            evaluation: EvaluationConfig {
                times: 4,
                interior_points: 1024,
                wall_points: 256,
                section_points: 1024,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    /// Desk-scale pulsatile pipe sampled at 22 phases over one period.
    pub fn desk_pulsatile() -> Self {
        let mut c = Self::desk_channel();
        c.domain = Domain::Cylinder { radius: 0.5, length: 2.0 };
        c.hematocrit = 45.0;
        c.flow = FlowSpec::PulsatilePipe {
            u_max: 2.0,
            period: 1.0,
            peak: 0.3,
        };
        c.grid = GridSpec {
            phases: 22,
            phase_duration_ms: 1000.0 / 22.0,
            ..Default::default()
        };
        c.training.precondition.epochs = 40;
        c.training.physics.epochs = 240;
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Applies `a.b.c=value` overrides. Values parse as JSON, falling back
    /// to a plain string.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut root = serde_json::to_value(&self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut root, key, value)?;
        }
        serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.network.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.training.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.model()?;
        self.reference_flow()?;
        if let Some(s) = &self.scales {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.evaluation.times == 0 || self.evaluation.interior_points == 0 || self.evaluation.section_points == 0 {
            return Err(Error::Config("evaluation sample counts must be positive".into()));
        }
        if self.vwerp.field_samples < 3 {
            return Err(Error::Config("vwerp.field_samples must be at least 3".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<RheologyModel> {
        let mut model = RheologyModel::from_hematocrit(self.hematocrit).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(floor) = self.viscosity_floor {
            model.gamma_min = floor;
            model.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(model)
    }

    pub fn reference_flow(&self) -> Result<ReferenceFlow> {
        self.flow.build(&self.domain, &self.model()?)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.output_dir.join("dataset"))
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output_dir.join("checkpoints")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.checkpoint_dir().join("best.ckpt"))
    }

    /// Configured scales, or the domain box with the peak velocity and the
    /// largest reference pressure drop over the domain.
    pub fn resolved_scales(&self) -> Result<ScaleSet> {
        if let Some(s) = self.scales {
            return Ok(s);
        }
        let (lo, hi) = self.domain.bounding_box();
        let flow = self.reference_flow()?;
        let length = match self.domain {
            Domain::Slab { length, .. } | Domain::Cylinder { length, .. } => length,
            Domain::Torus { .. } => hi[0] - lo[0],
        };
        let (t0, t1) = self.grid.grid(&self.domain)?.time_window();
        let drop = (0..=20)
            .filter_map(|k| flow.pressure_drop(length, t0 + (t1 - t0) * k as f64 / 20.0))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let frequency = self.flow.period().map_or(1.0 / (t1 - t0), |p| 1.0 / p);
        Ok(ScaleSet::for_box(lo, hi, frequency, t0, self.flow.peak_velocity(), drop.max(1.0)))
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{key}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range {len} in `{key}`")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a scalar"))),
        };
    }
    Err(Error::Config("empty override key".into()))
}
