use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "enclosure",
    version,
    about = "Time-domain enclosure method experiments"
)]
struct Cli {
    /// Only report errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Debug logging on standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PipelineArg {
    /// Split elliptic pipeline with the comparison solution.
    Elliptic,
    /// Obstacle-free reference wave run, no elliptic solve.
    Reference,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, compute the indicator sweep and classify.
    ///
    /// Writes series_<pipeline>.csv, verdict_<pipeline>.json, summary.txt and
    /// manifest.json into the output directory.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "elliptic")]
        pipeline: PipelineArg,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Evaluate the two-sided bound certificates (keeps full fields).
        #[arg(long)]
        certificates: bool,
        /// Gaussian noise on the measured traces, overriding the scenario.
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
    /// Run the property checks; exits with 3 naming the first failing check.
    Validate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        /// Also write validation.json here.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_w: bool,
    },
    /// Run one scenario per parameter value and aggregate into batch.csv.
    Sweep {
        scenario: PathBuf,
        /// T, contrast, k0 or position.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value = "elliptic")]
        pipeline: PipelineArg,
        #[arg(short, long, default_value = "sweep")]
        out: PathBuf,
        /// Concurrent runs.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print derived quantities of a scenario.
    Info {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        "error"
    } else if cli.verbose {
        "debug"
    } else {
        "info"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let result = match cli.command {
        Command::Run {
            scenario,
            pipeline,
            out,
            certificates,
            noise_sigma,
            noise_seed,
        } => commands::run(&commands::RunArgs {
            scenario,
            pipeline,
            out,
            certificates,
            noise: noise_sigma.map(|s| (s, noise_seed)),
        }),
        Command::Validate {
            scenario,
            level,
            out,
            corrupt_w,
        } => commands::validate(&scenario, level, out.as_deref(), corrupt_w),
        Command::Sweep {
            scenario,
            parameter,
            values,
            pipeline,
            out,
            jobs,
        } => commands::sweep(&scenario, &parameter, &values, pipeline, &out, jobs),
        Command::Info { scenario, json } => commands::info(&scenario, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.family().exit_code() as u8)
        }
    }
}
