use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use crate::autodiff::DifferentiableField;
use crate::error::{Error, Result};
use crate::metrics::{
    bytes_hash, compare_fields, file_hash, flow_rate, mass_imbalance, pressure_drop_direct, wss_map, CrossSection, EvaluationReport,
    Provenance, Record, ReportFormat, ReportMetadata,
};
use crate::network::{init_network, load_checkpoint, NeuralField};
use crate::observation::{generate_dataset, read_dataset, write_dataset, VoxelDataset};
use crate::physics::ReferenceFlow;
use crate::qmc::{sample_wall, Domain, Point4};
use crate::training::{train, TrainingIo, TrainingOutcome, TrainingProblem};
use crate::vwerp::{
    build_pipe_mesh, pressure_drop_error, sample_field, sample_voxels, solve_auxiliary_stokes, vwerp_pressure_drop_forced, PipeMeshSpec,
    Scheme, VwerpSeries,
};
use crate::windkessel::{simulate, FlowSeries, PressureSeries};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes the resolved configuration next to a command's outputs.
pub fn write_resolved_config(config: &ExperimentConfig, command: &str) -> Result<PathBuf> {
    ensure_dir(&config.output_dir)?;
    let path = config.output_dir.join(format!("{command}.config.json"));
    fs::write(&path, config.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Hash of the configuration with its file locations cleared, so that the
/// same experiment in another directory hashes the same.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    c.dataset = None;
    c.checkpoint = None;
    c.windkessel.flow_csv = None;
    Ok(bytes_hash(serde_json::to_string(&c)?.as_bytes()))
}

pub fn dataset_hash(base: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    for ext in ["json", "bin"] {
        let p = sibling(base, ext);
        bytes.extend(fs::read(&p).map_err(|e| Error::io(&p, e))?);
    }
    Ok(bytes_hash(&bytes))
}

/// Voxelizes the reference flow and writes the dataset pair.
pub fn run_synth(config: &ExperimentConfig) -> Result<(VoxelDataset, PathBuf)> {
    config.validate()?;
    let flow = config.reference_flow()?;
    let grid = config.grid.grid(&config.domain)?;
    let mut ds = generate_dataset(&flow, &config.domain, &grid, Some(config.model()?), config.synthesis)?;
    ds.info.source = serde_json::to_string(&flow)?;
    let path = config.dataset_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_dataset(&ds, &path)?;
    write_resolved_config(config, "synth")?;
    Ok((ds, path))
}

fn source_of(flow: &ReferenceFlow) -> bool {
    !matches!(flow, ReferenceFlow::PlanePoiseuille { .. } | ReferenceFlow::PipePoiseuille { .. })
}

/// Trains on an in-memory dataset.
pub fn train_on<W: Write>(config: &ExperimentConfig, dataset: &VoxelDataset, log: Option<&mut W>, checkpoints: Option<PathBuf>) -> Result<TrainingOutcome> {
    config.validate()?;
    let model = config.model()?;
    let flow = config.reference_flow()?;
    let body = |p: Point4| flow.source(p, &model);
    let problem = TrainingProblem {
        dataset,
        domain: &config.domain,
        model,
        source: if source_of(&flow) { Some(&body) } else { None },
    };
    let net = init_network(config.network, config.resolved_scales()?)?;
    let io = TrainingIo {
        log: log.map(|w| w as &mut dyn Write),
        checkpoint_dir: checkpoints,
    };
    train(&config.training, &problem, net, io)
}

/// Reads the dataset, trains, and writes checkpoints and a JSON-lines log.
pub fn run_train(config: &ExperimentConfig) -> Result<TrainingOutcome> {
    let ds = read_dataset(config.dataset_path())?;
    ensure_dir(&config.output_dir)?;
    write_resolved_config(config, "train")?;
    let log_path = config.output_dir.join("train_log.jsonl");
    let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log = std::io::BufWriter::new(file);
    let outcome = train_on(config, &ds, Some(&mut log), Some(config.checkpoint_dir()))?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    Ok(outcome)
}

/// Midpoints of `n` equal slices of the acquisition window.
pub fn evaluation_times(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let (t0, t1) = config.grid.grid(&config.domain)?.time_window();
    let n = config.evaluation.times;
    Ok((0..n).map(|k| t0 + (t1 - t0) * (k as f64 + 0.5) / n as f64).collect())
}

fn axial_length(domain: &Domain) -> f64 {
    match *domain {
        Domain::Slab { length, .. } | Domain::Cylinder { length, .. } => length,
        Domain::Torus {
            major_radius, sweep, ..
        } => major_radius * sweep,
    }
}

/// Evaluation records of an estimated field against the configured reference.
pub fn evaluate_field<F: DifferentiableField + ?Sized>(config: &ExperimentConfig, field: &F, provenance: Provenance) -> Result<EvaluationReport> {
    config.validate()?;
    let ev = config.evaluation;
    let model = config.model()?;
    let flow = config.reference_flow()?;
    let times = evaluation_times(config)?;
    let mut report = EvaluationReport {
        provenance,
        ..Default::default()
    };

    let cmp = compare_fields(&config.domain, field, &flow, &times, ev.interior_points, ev.seed)?;
    for (c, axis) in ["x", "y", "z"].iter().enumerate() {
        report.push(Record::scalar(format!("r2_u_{axis}"), "1", cmp.r2_velocity[c]));
    }
    report.push(Record::scalar("r2_velocity", "1", cmp.r2_velocity_all));
    report.push(Record::scalar("r2_pressure", "1", cmp.r2_pressure));
    report.push(Record::scalar("epsilon_u", "1", cmp.velocity_error));
    report.push(Record::scalar("epsilon_p", "1", cmp.pressure_error));
    report.push(Record::scalar("epsilon_p_unshifted", "1", cmp.pressure_error_raw));
    report.push(Record::series("epsilon_p_per_time", "1", times.clone(), cmp.pressure_error_per_time.clone()));

    let h = config.grid.grid(&config.domain)?.spacing();
    let inset = ev.section_inset_voxels * h.iter().cloned().fold(0.0, f64::max);
    let inlet = CrossSection::for_domain(&config.domain, false, inset)?.with_points(ev.section_points, ev.seed);
    let outlet = CrossSection::for_domain(&config.domain, true, inset)?.with_points(ev.section_points, ev.seed + 1);
    let q_in = flow_rate(field, &inlet, &times)?;
    let q_out = flow_rate(field, &outlet, &times)?;
    let q_ref = flow_rate(&flow, &inlet, &times)?;
    report.push(Record::series("flow_rate/inlet", "cm^3/s", times.clone(), q_in));
    report.push(Record::series("flow_rate/outlet", "cm^3/s", times.clone(), q_out));
    report.push(Record::series("flow_rate/reference_inlet", "cm^3/s", times.clone(), q_ref));
    let imbalance = mass_imbalance(field, &inlet, &[outlet.clone()], &times).unwrap_or(f64::NAN);
    report.push(Record::scalar("mass_imbalance", "%", imbalance));

    let dp = pressure_drop_direct(field, &inlet, &outlet, &times)?;
    let dp_ref = pressure_drop_direct(&flow, &inlet, &outlet, &times)?;
    let e_dp = pressure_drop_error(&dp, &dp_ref).unwrap_or(f64::NAN);
    report.push(Record::series("delta_p/direct", "Ba", times.clone(), dp));
    report.push(Record::series("delta_p/reference", "Ba", times.clone(), dp_ref));
    report.push(Record::scalar("e_delta_p/direct", "1", e_dp));

    let (wall, normals) = sample_wall(&config.domain, ev.wall_points, ev.seed)?;
    let wss = wss_map(field, &model, &wall, &normals, &times)?;
    let wss_ref = wss_map(&flow, &model, &wall, &normals, &times)?;
    let k_peak = wss.times.iter().position(|t| *t == wss.peak_time).unwrap_or(0);
    let k_ref = wss_ref.times.iter().position(|t| *t == wss_ref.peak_time).unwrap_or(0);
    report.push(Record::scalar("wss/peak_time", "s", wss.peak_time));
    report.push(Record::scalar("wss/peak_mean", "Ba", wss.mean_at(k_peak)));
    report.push(Record::scalar("wss/reference_peak_time", "s", wss_ref.peak_time));
    report.push(Record::scalar("wss/reference_peak_mean", "Ba", wss_ref.mean_at(k_ref)));
    let means: Vec<f64> = (0..times.len()).map(|k| wss.mean_at(k)).collect();
    report.push(Record::series("wss/mean", "Ba", times.clone(), means));

    let mut speed = 0.0;
    for &t in &times {
        for x in &wall {
            let o = field.eval([x[0], x[1], x[2], t]);
            speed += (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt();
        }
    }
    speed /= (times.len() * wall.len()) as f64;
    report.push(Record::scalar("wall_speed_mean", "cm/s", speed));
    report.push(Record::scalar("wall_speed_ratio", "1", speed / config.flow.peak_velocity()));
    report.push(Record::scalar("axial_length", "cm", axial_length(&config.domain)));
    Ok(report)
}

fn load_inputs(config: &ExperimentConfig) -> Result<(NeuralField, Provenance)> {
    let ckpt = config.checkpoint_path();
    let net = load_checkpoint(&ckpt)?;
    let dataset = dataset_hash(&config.dataset_path()).ok();
    Ok((
        net,
        Provenance {
            dataset,
            checkpoint: Some(file_hash(&ckpt)?),
            config: Some(config_hash(config)?),
        },
    ))
}

/// Evaluates the trained checkpoint and writes `eval.json` and `eval.csv`.
pub fn run_eval(config: &ExperimentConfig) -> Result<EvaluationReport> {
    let start = std::time::Instant::now();
    let (net, provenance) = load_inputs(config)?;
    let mut report = evaluate_field(config, &net, provenance)?;
    report.metadata = ReportMetadata {
        elapsed_s: Some(start.elapsed().as_secs_f64()),
        ..ReportMetadata::now()
    };
    write_resolved_config(config, "eval")?;
    report.write(config.output_dir.join("eval.json"), ReportFormat::Json)?;
    report.write(config.output_dir.join("eval.csv"), ReportFormat::Csv)?;
    Ok(report)
}

/// One pressure-drop strategy and its series.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyResult {
    pub name: String,
    pub times: Vec<f64>,
    pub delta_p: Vec<f64>,
    pub reference: Vec<f64>,
    pub error: f64,
}

fn reference_drops(flow: &ReferenceFlow, length: f64, times: &[f64]) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| flow.pressure_drop(length, t).ok_or_else(|| Error::Undefined("reference flow has no pressure drop".into())))
        .collect()
}

impl StrategyResult {
    /// `error` compares peaks against the reference on `peak_times`.
    fn new(name: &str, times: Vec<f64>, delta_p: Vec<f64>, flow: &ReferenceFlow, length: f64, peak_times: &[f64]) -> Result<Self> {
        let reference = reference_drops(flow, length, &times)?;
        let error = pressure_drop_error(&delta_p, &reference_drops(flow, length, peak_times)?)?;
        Ok(StrategyResult {
            name: name.into(),
            times,
            delta_p,
            reference,
            error,
        })
    }
}

/// Pressure-drop strategies on a pipe: the voxel data through the
/// estimator, and, given a trained field, the direct section difference and
/// the field through the estimator.
pub fn vwerp_strategies(config: &ExperimentConfig, dataset: &VoxelDataset, field: Option<&NeuralField>) -> Result<Vec<StrategyResult>> {
    config.validate()?;
    let Domain::Cylinder { radius, length } = config.domain else {
        return Err(Error::UnsupportedDomain("the pressure-drop strategies need a cylinder".into()));
    };
    let model = config.model()?;
    let flow = config.reference_flow()?;
    let spec = config.vwerp.mesh.unwrap_or_else(|| PipeMeshSpec::benchmark(radius, length));
    let mesh = build_pipe_mesh(&spec)?;
    let test = solve_auxiliary_stokes(&mesh, config.vwerp.outlet, &config.vwerp.stokes)?;
    let voxels = sample_voxels(dataset, &mesh)?;
    let (t0, t1) = dataset.grid.time_window();
    let n = config.vwerp.field_samples;
    let fine: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * (k as f64 + 0.5) / n as f64).collect();
    let mut out = Vec::new();
    let body = |p: Point4| flow.source(p, &model);
    let force: Option<&dyn Fn(Point4) -> [f64; 3]> = if source_of(&flow) { Some(&body) } else { None };
    let run = |history, scheme| -> Result<VwerpSeries> { vwerp_pressure_drop_forced(history, &mesh, &test, &model, scheme, force) };
    for scheme in [Scheme::First, Scheme::Second] {
        let s = run(&voxels.history, scheme)?;
        out.push(StrategyResult::new(&format!("vWERP_{}", scheme.label()), s.times, s.delta_p, &flow, length, &fine)?);
    }
    if let Some(net) = field {
        let times = fine.clone();
        let inlet = CrossSection::for_domain(&config.domain, false, 0.0)?.with_points(config.evaluation.section_points, config.evaluation.seed);
        let outlet = CrossSection::for_domain(&config.domain, true, 0.0)?.with_points(config.evaluation.section_points, config.evaluation.seed + 1);
        let direct = pressure_drop_direct(net, &inlet, &outlet, &times)?;
        out.insert(0, StrategyResult::new("PINN", times.clone(), direct, &flow, length, &fine)?);
        let history = sample_field(net, &mesh, &times)?;
        for scheme in [Scheme::First, Scheme::Second] {
            let s = run(&history, scheme)?;
            out.push(StrategyResult::new(&format!("PINN+vWERP_{}", scheme.label()), s.times, s.delta_p, &flow, length, &fine)?);
        }
    }
    Ok(out)
}

pub fn strategies_report(strategies: &[StrategyResult], provenance: Provenance) -> EvaluationReport {
    let mut report = EvaluationReport {
        provenance,
        ..Default::default()
    };
    for s in strategies {
        report.push(Record::series(format!("delta_p/{}", s.name), "Ba", s.times.clone(), s.delta_p.clone()));
        report.push(Record::series(format!("delta_p_reference/{}", s.name), "Ba", s.times.clone(), s.reference.clone()));
        report.push(Record::scalar(format!("e_delta_p/{}", s.name), "1", s.error));
    }
    report
}

/// Runs all available strategies and writes `vwerp_delta_p.csv` (long
/// format) and `vwerp.json`. The trained strategies are skipped when no
/// checkpoint exists.
pub fn run_vwerp(config: &ExperimentConfig) -> Result<Vec<StrategyResult>> {
    let ds = read_dataset(config.dataset_path())?;
    let ckpt = config.checkpoint_path();
    let (net, provenance) = if ckpt.exists() {
        let (n, p) = load_inputs(config)?;
        (Some(n), p)
    } else {
        log::warn!("no checkpoint at {}; running the voxel strategies only", ckpt.display());
        let p = Provenance {
            dataset: Some(dataset_hash(&config.dataset_path())?),
            checkpoint: None,
            config: Some(config_hash(config)?),
        };
        (None, p)
    };
    let strategies = vwerp_strategies(config, &ds, net.as_ref())?;
    ensure_dir(&config.output_dir)?;
    write_resolved_config(config, "vwerp")?;
    let path = config.output_dir.join("vwerp_delta_p.csv");
    let err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(["strategy", "t_s", "delta_p_Ba", "reference_Ba"]).map_err(err)?;
    for s in &strategies {
        for k in 0..s.times.len() {
            w.serialize((&s.name, s.times[k], s.delta_p[k], s.reference[k])).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut report = strategies_report(&strategies, provenance);
    report.metadata = ReportMetadata::now();
    report.write(config.output_dir.join("vwerp.json"), ReportFormat::Json)?;
    Ok(strategies)
}

/// Outlet pressure from the configured flow CSV, or from the reference
/// outlet flow over the acquisition window; writes `windkessel.csv`.
pub fn run_wk(config: &ExperimentConfig) -> Result<PressureSeries> {
    let wk = &config.windkessel;
    let series = match &wk.flow_csv {
        Some(path) => FlowSeries::read_csv(path)?,
        None => {
            config.validate()?;
            let flow = config.reference_flow()?;
            let (t0, t1) = config.grid.grid(&config.domain)?.time_window();
            FlowSeries::sampled(t0, t1, wk.samples, |t| flow.flow_rate(t).unwrap_or(0.0))?
        }
    };
    let out = simulate(&wk.params, &series, wk.dt)?;
    ensure_dir(&config.output_dir)?;
    write_resolved_config(config, "wk")?;
    out.write_csv(config.output_dir.join("windkessel.csv"))?;
    Ok(out)
}

/// Concatenates the records of several reports.
pub fn merge_reports(inputs: &[PathBuf]) -> Result<EvaluationReport> {
    let mut merged = EvaluationReport::default();
    for p in inputs {
        merged.extend(EvaluationReport::read(p)?);
    }
    merged.metadata = ReportMetadata::now();
    Ok(merged)
}
