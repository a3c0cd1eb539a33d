//! Two-stage training on a voxelized power-law channel, then evaluation
//! against the closed-form flow.
//!
//! Usage: train_channel [physics_epochs] [--set key=value ...]

use std::time::Instant;

use hemopinn::experiment::{evaluate_field, train_on, ExperimentConfig};
use hemopinn::metrics::Provenance;
use hemopinn::observation::generate_dataset;

fn main() -> hemopinn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut config = ExperimentConfig::desk_channel();
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--set" {
            overrides.extend(it.next().cloned());
        } else if let Ok(epochs) = a.parse() {
            config.training.physics.epochs = epochs;
        }
    }
    let config = config.with_overrides(&overrides)?;

    let flow = config.reference_flow()?;
    let grid = config.grid.grid(&config.domain)?;
    let dataset = generate_dataset(&flow, &config.domain, &grid, Some(config.model()?), config.synthesis)?;
    println!("{} voxels on a {:?} grid", dataset.observations().len(), grid.dims);

    let start = Instant::now();
    let outcome = train_on::<std::io::Sink>(&config, &dataset, None, None)?;
    println!(
        "trained {} + {} steps in {:.1} s, best validation {:.3e}",
        outcome.steps[0],
        outcome.steps[1],
        start.elapsed().as_secs_f64(),
        outcome.best_validation
    );

    if let Some(last) = outcome.log.last() {
        println!("final losses {:?}", last.losses);
        println!("final weights {:?}", last.weights);
    }

    for (label, field) in [("best", &outcome.best), ("final", &outcome.field)] {
        let report = evaluate_field(&config, field, Provenance::default())?;
        println!("{label} checkpoint");
        for name in ["r2_velocity", "r2_pressure", "epsilon_p", "e_delta_p/direct", "wall_speed_ratio", "mass_imbalance"] {
            println!("{name:>18} {:.4}", report.scalar(name).unwrap_or(f64::NAN));
        }
    }
    Ok(())
}
