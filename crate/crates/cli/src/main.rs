mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "diffmon", version, about = "Similarity-monitored diffusion augmentation runs")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalArgs {
    /// Config file with `key = value` lines.
    #[arg(long, global = true, env = "DIFFMON_CONFIG")]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic corpus as per-participant CSVs.
    SynthData,
    /// Calibrate the GAK sigma per held-out participant and class.
    Calibrate,
    /// Train one diffusion model per held-out participant and class.
    Train {
        /// Train to the epoch cap without a monitor.
        #[arg(long)]
        no_monitor: bool,
    },
    /// Sample trained checkpoints.
    Sample {
        /// Checkpoint to sample: `final` or `monitored`.
        #[arg(long, default_value = "monitored")]
        model: String,
    },
    /// Run the leave-one-subject-out evaluation over every training set.
    Experiment,
    /// Print the resolved config.
    ShowConfig,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = commands::resolve_config(&cli.global).and_then(|cfg| match cli.command {
        Command::SynthData => commands::synth_data(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Train { no_monitor } => commands::train(&cfg, no_monitor),
        Command::Sample { model } => commands::sample(&cfg, &model),
        Command::Experiment => commands::experiment(&cfg),
        Command::ShowConfig => {
            print!("{}", cfg.render());
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
