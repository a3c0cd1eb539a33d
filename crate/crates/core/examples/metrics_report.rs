//! Scores a slightly wrong pipe flow against the reference: R^2, mean-shift
//! pressure error, flow rates, WSS, then writes the report as JSON and CSV
//! and a VTK slice of the velocity error.

use hemopinn::autodiff::DifferentiableField;
use hemopinn::experiment::{evaluate_field, ExperimentConfig};
use hemopinn::metrics::{write_vtk_structured, EvaluationReport, Provenance, RecordValue, ReportFormat, VtkField};
use hemopinn::physics::ReferenceFlow;

fn main() -> hemopinn::Result<()> {
    let config = ExperimentConfig::default();
    let model = config.model()?;
    let reference = config.reference_flow()?;
    let estimate = match ReferenceFlow::pipe_poiseuille_with_peak(&model, 0.5, 28.5) {
        ReferenceFlow::PipePoiseuille { radius, g, m, n, .. } => ReferenceFlow::PipePoiseuille {
            radius,
            g,
            m,
            n,
            p_ref: 40.0,
        },
        _ => unreachable!(),
    };

    let report = evaluate_field(&config, &estimate, Provenance::default())?;
    for r in &report.records {
        match &r.value {
            RecordValue::Scalar { value } => println!("{:>28} {value:>12.5} {}", r.name, r.unit),
            RecordValue::Series { values, .. } => println!("{:>28} {:>12} {} ({} samples)", r.name, "series", r.unit, values.len()),
        }
    }

    let dir = std::env::temp_dir().join("hemopinn_metrics_example");
    std::fs::create_dir_all(&dir).map_err(|e| hemopinn::Error::io(&dir, e))?;
    report.write(dir.join("eval.json"), ReportFormat::Json)?;
    report.write(dir.join("eval.csv"), ReportFormat::Csv)?;
    let back = EvaluationReport::read(dir.join("eval.json"))?;
    println!("JSON round trip identical: {}", back.canonical_json()? == report.canonical_json()?);

    let dims = [41, 41, 1];
    let mut points = Vec::new();
    let mut error = Vec::new();
    for j in 0..dims[1] {
        for i in 0..dims[0] {
            let x = [-0.5 + i as f64 / 40.0, -0.5 + j as f64 / 40.0, 1.5];
            let t = [x[0], x[1], x[2], 0.0];
            let inside = x[0].hypot(x[1]) <= 0.5;
            let (a, b) = (reference.eval(t), estimate.eval(t));
            error.push(if inside { b[2] - a[2] } else { 0.0 });
            points.push(x);
        }
    }
    let vtk = dir.join("slice.vtk");
    write_vtk_structured(&vtk, dims, &points, &[VtkField { name: "w_error".into(), components: 1, values: &error }])?;
    println!("wrote {}, {} and {}", dir.join("eval.json").display(), dir.join("eval.csv").display(), vtk.display());
    Ok(())
}
