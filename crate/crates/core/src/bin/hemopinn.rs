use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hemopinn::experiment::{merge_reports, run_eval, run_synth, run_train, run_vwerp, run_wk, ExperimentConfig};
use hemopinn::metrics::ReportFormat;
use hemopinn::Error;

#[derive(Parser)]
#[command(name = "hemopinn", version, about = "Flow-field reconstruction and pressure-drop estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Dotted override such as `training.physics.epochs=10`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> hemopinn::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let c = base.with_overrides(&self.overrides)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize the reference flow into a dataset.
    Synth(ConfigArgs),
    /// Train a network on the dataset.
    Train(ConfigArgs),
    /// Evaluate a checkpoint against the reference flow.
    Eval(ConfigArgs),
    /// Pressure-drop strategies on a pipe.
    Vwerp(ConfigArgs),
    /// Three-element Windkessel outlet pressure.
    Wk(ConfigArgs),
    /// Merge JSON reports.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file; `.csv` selects CSV, anything else JSON.
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> hemopinn::Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let (ds, path) = run_synth(&a.load()?)?;
            println!("wrote {} ({} voxels, {} phases)", path.display(), ds.grid.voxel_count(), ds.grid.phases);
        }
        Command::Train(a) => {
            let out = run_train(&a.load()?)?;
            println!("best validation {:.4e} after {} + {} steps", out.best_validation, out.steps[0], out.steps[1]);
        }
        Command::Eval(a) => {
            let c = a.load()?;
            let r = run_eval(&c)?;
            for name in ["r2_velocity", "epsilon_p", "e_delta_p/direct", "mass_imbalance", "wall_speed_ratio"] {
                if let Some(v) = r.scalar(name) {
                    println!("{name:>18} {v:.4e}");
                }
            }
            println!("wrote {}", c.output_dir.join("eval.json").display());
        }
        Command::Vwerp(a) => {
            for s in run_vwerp(&a.load()?)? {
                println!("{:>16} e_dp {:.4}", s.name, s.error);
            }
        }
        Command::Wk(a) => {
            let c = a.load()?;
            let out = run_wk(&c)?;
            println!("{} steps, wrote {}", out.times.len(), c.output_dir.join("windkessel.csv").display());
        }
        Command::Report { inputs, output } => {
            let merged = merge_reports(&inputs)?;
            merged.write(&output, ReportFormat::from_path(&output))?;
            println!("{} records to {}", merged.records.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_failure(&e),
    }
}

fn report_failure(e: &Error) -> ExitCode {
    let kind = e.kind();
    let record = serde_json::json!({
        "error": kind.name(),
        "message": e.to_string(),
        "exit_code": kind.exit_code(),
    });
    eprintln!("{record}");
    ExitCode::from(kind.exit_code() as u8)
}
