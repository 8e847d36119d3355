use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curbsight::pipeline::{
    cmd_evaluate, cmd_geolocate, cmd_measure, cmd_simulate, cmd_train, load_report, render_text_report, run_all,
    PipelineError, RunConfig,
};

#[derive(Parser)]
#[command(name = "curbsight", version, about = "Roadside object geolocation and measurement from dashcam observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene and render every configured drive
    Simulate(Common),
    /// Fit the depth-correction model
    Train(Common),
    /// Locate objects in every configured drive
    Geolocate(Common),
    /// Estimate heights, widths and crown widths
    Measure(Common),
    /// Compare results with ground truth and write the report
    Evaluate(Common),
    /// Print the text form of an existing report
    Report(Common),
    /// Run every stage in order
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn report(out: &Path) -> Result<(), PipelineError> {
    print!("{}", render_text_report(&load_report(out)?));
    Ok(())
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Train(c)
            | Command::Geolocate(c)
            | Command::Measure(c)
            | Command::Evaluate(c)
            | Command::Report(c)
            | Command::Run(c) => c,
        }
    }
}

fn run(command: &Command) -> Result<(), PipelineError> {
    let c = command.common();
    let out = c.out.as_path();
    if let Command::Report(_) = command {
        return report(out);
    }
    let cfg = c.load()?;
    match command {
        Command::Simulate(_) => cmd_simulate(&cfg, out),
        Command::Train(_) => cmd_train(&cfg, out).map(|_| ()),
        Command::Geolocate(_) => cmd_geolocate(&cfg, out).map(|_| ()),
        Command::Measure(_) => cmd_measure(&cfg, out).map(|_| ()),
        Command::Evaluate(_) => cmd_evaluate(&cfg, out).map(|r| print!("{}", render_text_report(&r))),
        Command::Run(_) => run_all(&cfg, out).map(|r| print!("{}", render_text_report(&r))),
        Command::Report(_) => report(out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
