//! Steady power-law pipe: auxiliary Stokes field, virtual powers and the
//! estimated pressure drop against the closed form.

use std::time::Instant;

use hemopinn::physics::{ReferenceFlow, RheologyModel};
use hemopinn::vwerp::{
    build_pipe_mesh, divergence_ratio, sample_field, solve_auxiliary_stokes, vwerp_pressure_drop, PipeMeshSpec, RimAssignment,
    Scheme, StokesConfig,
};

fn main() -> hemopinn::Result<()> {
    let (radius, length) = (1.0, 4.0);
    let model = RheologyModel::from_hematocrit(45.0)?;
    let flow = ReferenceFlow::pipe_poiseuille_with_peak(&model, radius, 20.0);
    let exact = flow.pressure_drop(length, 0.0).expect("pipe flow has a drop");

    let spec = PipeMeshSpec::benchmark(radius, length);
    for (label, spec, rim) in [
        ("coarse", spec, RimAssignment::Wall),
        ("refined", spec.refined(), RimAssignment::Wall),
        ("coarse", spec, RimAssignment::Inlet),
        ("refined", spec.refined(), RimAssignment::Inlet),
    ] {
        let start = Instant::now();
        let mesh = build_pipe_mesh(&spec)?;
        let config = StokesConfig {
            inlet_rim: rim,
            ..Default::default()
        };
        let test = solve_auxiliary_stokes(&mesh, 0, &config)?;
        let history = sample_field(&flow, &mesh, &[0.0, 0.01, 0.02])?;
        let series = vwerp_pressure_drop(&history, &mesh, &test, &model, Scheme::Second)?;
        println!(
            "{label:>8}, rim on {rim:?}: {} tets, div ratio {:.3e}, inlet area {:.4}",
            mesh.tets.len(),
            divergence_ratio(&mesh, &test.xi),
            test.inlet_area
        );
        println!(
            "          kinetic {:.3e}  convective {:.3e}  viscous {:.4e}",
            series.kinetic[0], series.convective[0], series.viscous[0]
        );
        let dp = series.delta_p[0];
        println!(
            "          delta p {dp:.3} Ba vs exact {exact:.3} Ba ({:+.2}%), {:.1} s",
            100.0 * (dp - exact) / exact,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
