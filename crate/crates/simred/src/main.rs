use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simred::config::{ExperimentConfig, Scenario};
use simred::experiments::{
    offline_command, run_experiment, run_phase, stream_command, ExperimentOptions, PhaseOptions,
};
use simred::offline::RegularizerKind;
use simred::report::format_float;

/// Adaptive similarity-matching dimensionality reduction: offline solvers,
/// streaming Hebbian/anti-Hebbian networks, and the signal/noise phase
/// analysis.
#[derive(Parser)]
#[command(name = "simred", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one offline problem on an explicit input spectrum.
    Offline(OfflineArgs),
    /// Generate an input stream and dump it to CSV.
    Stream(StreamArgs),
    /// Run the three online networks over one stream, writing metric CSVs.
    Experiment(ExperimentArgs),
    /// Sweep the signal/noise grid: fraction curves and coefficient ranges.
    Phase(PhaseArgs),
}

#[derive(Args)]
struct OfflineArgs {
    /// Regularizer: scale-dependent | input-output | squared-output.
    #[arg(long, value_parser = parse_kind)]
    kind: RegularizerKind,
    /// Comma-separated descending eigenvalues, e.g. `6,5,4`.
    #[arg(long, value_parser = parse_spectrum)]
    spectrum: Spectrum,
    #[arg(long)]
    alpha: f64,
    /// Output dimensionality.
    #[arg(long)]
    k: usize,
    /// Sample count the spectrum refers to (1 for per-sample spectra).
    #[arg(long, default_value_t = 1)]
    samples: usize,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_scenario, default_value = "stationary")]
    scenario: Scenario,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of samples (default: the config's iteration count).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = "stream.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_scenario, default_value = "stationary")]
    scenario: Scenario,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output.dir`, else `out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also write SVG eigenvalue-tracking plots.
    #[arg(long)]
    svg: bool,
    /// Replay a recorded stream CSV instead of generating.
    #[arg(long)]
    stream: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    /// Comma-separated regularizers (default: all three).
    #[arg(long, value_parser = parse_kind, value_delimiter = ',')]
    kinds: Vec<RegularizerKind>,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Signal multiplicity.
    #[arg(long, default_value_t = 1)]
    n1: usize,
    /// Noise multiplicity.
    #[arg(long, default_value_t = 1)]
    n2: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Clone)]
struct Spectrum(Vec<f64>);

fn parse_spectrum(text: &str) -> Result<Spectrum, String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| format!("'{field}' is not a number"))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("spectrum must contain at least one eigenvalue".to_string());
    }
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err("spectrum must be sorted descending".to_string());
    }
    Ok(Spectrum(values))
}

fn parse_kind(text: &str) -> Result<RegularizerKind, String> {
    text.parse().map_err(|e| format!("{e}"))
}

fn parse_scenario(text: &str) -> Result<Scenario, String> {
    text.parse().map_err(|e| format!("{e}"))
}

fn load_config(path: &Option<PathBuf>) -> simred::Result<ExperimentConfig> {
    match path {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> simred::Result<()> {
    match cli.command {
        Command::Offline(args) => {
            let line = offline_command(
                args.kind,
                args.spectrum.0,
                args.k,
                args.alpha,
                args.samples,
            )?;
            println!("{line}");
        }
        Command::Stream(args) => {
            let config = load_config(&args.config)?;
            let written = stream_command(
                &config,
                args.scenario,
                args.seed,
                args.samples,
                &args.out,
            )?;
            println!("wrote {written} samples to {}", args.out.display());
        }
        Command::Experiment(args) => {
            let config = load_config(&args.config)?;
            let out_dir = args
                .out_dir
                .or_else(|| config.output.dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = run_experiment(
                &config,
                &ExperimentOptions {
                    scenario: args.scenario,
                    out_dir,
                    seed: args.seed,
                    svg: args.svg,
                    stream_file: args.stream,
                },
            )?;
            for (kind, alpha) in &report.alphas {
                println!("{}: alpha = {}", kind.slug(), format_float(*alpha));
            }
            for (kind, log) in &report.logs {
                if let Some(last) = log.last() {
                    let shown: Vec<String> = last
                        .output_spectrum
                        .iter()
                        .take(4)
                        .map(|v| format_float(*v))
                        .collect();
                    let retained = last.output_spectrum.iter().filter(|v| **v > 0.1).count();
                    println!(
                        "{}: final windowed output spectrum [{}] ({} modes > 0.1)",
                        kind.slug(),
                        shown.join(", "),
                        retained
                    );
                }
            }
            for path in &report.csv_paths {
                println!("wrote {}", path.display());
            }
        }
        Command::Phase(args) => {
            let kinds = if args.kinds.is_empty() {
                RegularizerKind::ALL.to_vec()
            } else {
                args.kinds
            };
            let report = run_phase(&PhaseOptions {
                kinds,
                grid_step: args.grid_step,
                multiplicities: (args.n1, args.n2),
                out_dir: args.out_dir,
                svg: args.svg,
            })?;
            for (kind, found) in &report.universal {
                match found {
                    simred::analysis::UniversalAlpha::Found { alpha } => println!(
                        "{}: universal alpha exists, e.g. {}",
                        kind.slug(),
                        format_float(*alpha)
                    ),
                    simred::analysis::UniversalAlpha::None { max_low, min_high } => println!(
                        "{}: no universal alpha (binding bounds {} >= {})",
                        kind.slug(),
                        format_float(*max_low),
                        format_float(*min_high)
                    ),
                }
            }
            for path in &report.csv_paths {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
