//! `sps`: simulate, correlate and analyse pulsed single-photon source experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sps_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "sps",
    version,
    about = "Digital twin of a pulsed Purcell-enhanced single-photon source"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, env = "SPS_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hbt,
    Hom,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate emission, bench and detection; writes one timetag file per output.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the truth-level photon table.
        #[arg(long)]
        truth: bool,
    },
    /// Correlate two timetag files into a histogram CSV.
    Correlate {
        /// Start channel file.
        a: PathBuf,
        /// Stop channel file.
        b: PathBuf,
        /// [ps]
        #[arg(long, default_value_t = 4)]
        bin_width: u64,
        /// Half-range [ps].
        #[arg(long, default_value_t = 50_000)]
        range: u64,
        #[arg(long, env = "SPS_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Extract g2(0), HOM visibility and fits from timetag files.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Mode::Hbt)]
        mode: Mode,
        /// Output-1 file (co-polarised run for HOM).
        #[arg(long)]
        a: PathBuf,
        /// Output-2 file (co-polarised run for HOM).
        #[arg(long)]
        b: PathBuf,
        /// Cross-polarised output-1 file (HOM).
        #[arg(long)]
        cross_a: Option<PathBuf>,
        /// Cross-polarised output-2 file (HOM).
        #[arg(long)]
        cross_b: Option<PathBuf>,
        /// g2(0) used for the multi-photon correction (HOM).
        #[arg(long, default_value_t = 0.0)]
        g2: f64,
    },
    /// Repetition-rate sweep normalised by the single-pulse rate.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated multipliers.
        #[arg(long, value_delimiter = ',', default_values_t = (1..=16).collect::<Vec<u32>>())]
        multipliers: Vec<u32>,
        /// Also measure the HOM visibility at every multiplier.
        #[arg(long)]
        hom: bool,
    },
    /// Re-run a figure preset and write its tables.
    Reproduce {
        /// fig4a, fig4d, fig5f, fig2e or all.
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "SPS_OUT", default_value = "out")]
        out: PathBuf,
    },
}

/// 0 success, 2 configuration or usage error, 3 numeric failure, 4 I/O error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Io(_) | Error::Format(_) | Error::Unsorted { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate { common, truth } => commands::simulate_cmd(&common, truth),
        Command::Correlate {
            a,
            b,
            bin_width,
            range,
            out,
        } => commands::correlate(&a, &b, bin_width, range, &out),
        Command::Analyze {
            common,
            mode,
            a,
            b,
            cross_a,
            cross_b,
            g2,
        } => {
            let cross = match (mode, cross_a, cross_b) {
                (Mode::Hbt, _, _) => None,
                (Mode::Hom, Some(x), Some(y)) => Some((x, y)),
                (Mode::Hom, _, _) => {
                    eprintln!("error: HOM analysis needs both --cross-a and --cross-b");
                    return ExitCode::from(2);
                }
            };
            commands::analyze(&common, &a, &b, cross.as_ref(), g2)
        }
        Command::Sweep {
            common,
            multipliers,
            hom,
        } => commands::sweep(&common, &multipliers, hom),
        Command::Reproduce { preset, seed, out } => commands::reproduce(&preset, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
