//! `viewset` command-line tool: build and inspect generation plans, run the
//! toy sampling experiment, evaluate TSED and export encoded rays.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "viewset", version, about = "Set-based view synthesis planning and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Strategy {
    Chain,
    Keyframed,
    Grouped,
    Zigzag,
    Unordered,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Adjacent,
    FirstLast,
    SameSided,
    CrossSided,
}

#[derive(Subcommand)]
enum Command {
    /// Build a generation plan from a trajectory; the first camera is observed.
    Plan {
        trajectory: PathBuf,
        #[arg(long, value_enum)]
        strategy: Strategy,
        /// In-between views separating keyframes (keyframed).
        #[arg(long, default_value_t = 2)]
        spacing: usize,
        /// Keyframes generated per stage (keyframed).
        #[arg(long, default_value_t = 4)]
        chunk: usize,
        /// Conditioning views per in-between stage (keyframed, unordered).
        #[arg(long, default_value_t = 2)]
        cond_count: usize,
        /// Generated keyframes (unordered).
        #[arg(long, default_value_t = 4)]
        keyframes: usize,
        /// Weight of the rotation angle in camera distances (unordered).
        #[arg(long, default_value_t = 0.0)]
        rotation_weight: f64,
        /// Consecutive generated views per group (grouped).
        #[arg(long, default_value_t = 2)]
        group_size: usize,
        /// Plan file; without it the plan goes to stdout and the depth table
        /// to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a plan file and print its depth table.
    Validate { plan: PathBuf },
    /// Run the toy sampling experiment; writes `seed,view,depth,kl` CSV.
    Experiment {
        config: PathBuf,
        /// Comma-separated seeds overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Conditioning window overriding the configuration.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate TSED over match files; writes `threshold,percent` CSV.
    Tsed {
        /// Directory of match files (`*.json`).
        matches: PathBuf,
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value = "adjacent")]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        t_matches: usize,
        /// Comma-separated thresholds in pixels.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-pair CSV detail.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Export the Fourier-encoded ray map of one camera.
    EncodeRays {
        trajectory: PathBuf,
        view: String,
        #[arg(long, default_value_t = 8)]
        frequencies: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            trajectory,
            strategy,
            spacing,
            chunk,
            cond_count,
            keyframes,
            rotation_weight,
            group_size,
            out,
        } => commands::plan(&commands::PlanArgs {
            trajectory,
            strategy,
            spacing,
            chunk,
            cond_count,
            keyframes,
            rotation_weight,
            group_size,
            out,
        }),
        Command::Validate { plan } => commands::validate(&plan),
        Command::Experiment { config, seeds, window, out } => commands::experiment(&config, seeds, window, out),
        Command::Tsed { matches, trajectory, mode, t_matches, sweep, out, pairs_out } => {
            commands::tsed(&matches, &trajectory, mode, t_matches, sweep, out, pairs_out)
        }
        Command::EncodeRays { trajectory, view, frequencies, out } => {
            commands::encode_rays(&trajectory, &view, frequencies, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.kind.code())
        }
    }
}
