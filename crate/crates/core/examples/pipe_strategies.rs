//! Pressure-drop strategies on a voxelized pulsatile pipe: vWERP on the
//! voxels, direct sections through a trained field, and vWERP on the field.
//!
//! Usage: pipe_strategies [--set key=value ...]

use std::time::Instant;

use hemopinn::experiment::{train_on, vwerp_strategies, ExperimentConfig};
use hemopinn::observation::generate_dataset;

fn main() -> hemopinn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let overrides: Vec<String> = std::env::args().skip(1).filter(|a| a != "--set").collect();
    let config = ExperimentConfig::desk_pulsatile().with_overrides(&overrides)?;

    let flow = config.reference_flow()?;
    let grid = config.grid.grid(&config.domain)?;
    let dataset = generate_dataset(&flow, &config.domain, &grid, Some(config.model()?), config.synthesis)?;
    println!("{} voxels x {} phases", grid.voxel_count(), grid.phases);

    let start = Instant::now();
    let outcome = train_on::<std::io::Sink>(&config, &dataset, None, None)?;
    println!("trained {} + {} steps in {:.1} s", outcome.steps[0], outcome.steps[1], start.elapsed().as_secs_f64());

    let strategies = vwerp_strategies(&config, &dataset, Some(&outcome.best))?;
    println!("{:>16} {:>8} {:>14} {:>14}", "strategy", "samples", "peak est [Ba]", "e_delta_p");
    for s in &strategies {
        let peak = s.delta_p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        println!("{:>16} {:>8} {:>14.4} {:>14.4}", s.name, s.times.len(), peak, s.error);
    }
    let reference = strategies[0].reference.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("reference peak drop {reference:.4} Ba");
    Ok(())
}
