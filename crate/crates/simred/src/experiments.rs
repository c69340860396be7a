//! Config-driven experiment runners behind the `simred` binary and the
//! runnable examples. Each runner is deterministic given its arguments:
//! repeated runs with the same seed write byte-identical CSV files.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::analysis::{
    evaluation_grid, fraction_curve, phase_diagram, universal_alpha, write_fraction_curves_csv,
    write_phase_diagram_csv, AlphaRange, FractionPoint, UniversalAlpha,
};
use crate::config::{ExperimentConfig, Scenario};
use crate::datagen::{read_stream_csv, write_stream_csv, Sample, StreamGenerator};
use crate::error::{Error, Result};
use crate::metrics::{write_metrics_csv, MetricsLog};
use crate::offline::{output_spectrum_and_rank, OfflineProblem, RegularizerKind};
use crate::online::{run_stream, MonitorConfig, NetworkConfig, RunReference};
use crate::report::{format_float, write_line_plot, Series};

/// Solve one offline problem and format the result as
/// `"<eigenvalues...> (rank N)"`.
pub fn offline_command(
    kind: RegularizerKind,
    spectrum: Vec<f64>,
    k: usize,
    alpha: f64,
    samples: usize,
) -> Result<String> {
    let problem = OfflineProblem::from_spectrum(spectrum, k, alpha, kind, samples)?;
    let solution = crate::offline::solve_offline(&problem)?;
    let values: Vec<String> = solution
        .output_eigenvalues
        .iter()
        .map(|v| format_float(*v))
        .collect();
    Ok(format!("{} (rank {})", values.join(" "), solution.rank))
}

/// Generate a stream per the config/scenario and dump it to CSV.
pub fn stream_command(
    config: &ExperimentConfig,
    scenario: Scenario,
    seed: Option<u64>,
    count: Option<usize>,
    out: &Path,
) -> Result<usize> {
    let schedule = config.schedule(scenario, seed);
    let count = count.unwrap_or(config.stream.iterations);
    let samples = StreamGenerator::take(schedule, count)?;
    write_stream_csv(out, &samples)?;
    Ok(samples.len())
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub svg: bool,
    /// Replay a recorded stream instead of generating one. The ground
    /// truth for error metrics still comes from the config's schedule.
    pub stream_file: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    /// Per-regularizer resolved coefficients.
    pub alphas: Vec<(RegularizerKind, f64)>,
    /// Per-regularizer metric logs, in [`RegularizerKind::ALL`] order.
    pub logs: Vec<(RegularizerKind, MetricsLog)>,
    pub csv_paths: Vec<PathBuf>,
}

/// Run the three networks over one recorded stream and write per-network
/// metric CSVs (plus optional SVG eigenvalue-tracking plots).
///
/// The networks run on separate threads; each writes its own files, so
/// output is deterministic. If a network fails numerically, the others
/// still complete and write their CSVs; the first failure (which names
/// the offending iteration) is then returned.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &ExperimentOptions,
) -> Result<ExperimentReport> {
    config.validate()?;
    let schedule = config.schedule(options.scenario, options.seed);
    let generator = StreamGenerator::new(schedule.clone())?;
    let ground = generator.ground_truth().clone();

    let samples: Vec<Sample> = match &options.stream_file {
        Some(path) => {
            let samples = read_stream_csv(path)?;
            if samples.first().map(|s| s.x.len()) != Some(config.stream.dim) {
                return Err(Error::InvalidInput(format!(
                    "recorded stream dimension does not match config dim {}",
                    config.stream.dim
                )));
            }
            samples
        }
        None => {
            let mut generator = generator;
            (0..config.stream.iterations)
                .map(|_| generator.next_sample())
                .collect()
        }
    };

    let k = config.network.k;
    let beta = config.beta(options.scenario);
    let default_threshold = options.scenario.default_threshold();
    let mut runs: Vec<(RegularizerKind, NetworkConfig, MonitorConfig)> = Vec::new();
    let mut alphas = Vec::new();
    for (index, kind) in RegularizerKind::ALL.into_iter().enumerate() {
        let alpha = config
            .alpha
            .resolve(kind, &ground.eigenvalues, default_threshold)?;
        alphas.push((kind, alpha));
        let mut network = NetworkConfig::new(config.stream.dim, k, alpha, kind)
            .with_eta(config.network.eta)
            .with_beta(beta)
            .with_seed(config.network.init_seed.wrapping_add(index as u64));
        network.dynamics_tol = config.network.dynamics_tol;
        network.dynamics_max_iters = config.network.dynamics_max_iters;

        // Offline optimum per schedule segment, in per-sample units.
        let optimal_by_segment = schedule
            .segments
            .iter()
            .map(|segment| {
                let scaled: Vec<f64> =
                    ground.eigenvalues.iter().map(|v| v * segment.scale).collect();
                let (optimal, _) = output_spectrum_and_rank(kind, &scaled, k, alpha, 1)?;
                Ok((segment.start, optimal))
            })
            .collect::<Result<Vec<_>>>()?;
        let principal_basis = leading_columns(&ground.eigenvectors, k);
        let monitor = MonitorConfig {
            snapshot_period: config.metrics.snapshot_period,
            window: config.window(options.scenario),
            input_track: config.metrics.input_track,
            reference: Some(RunReference {
                optimal_by_segment,
                principal_basis,
            }),
        };
        runs.push((kind, network, monitor));
    }

    // The three networks consume the same recorded stream concurrently.
    let results: Vec<(RegularizerKind, Result<MetricsLog>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(kind, network, monitor)| {
                let samples = &samples;
                let kind = *kind;
                scope.spawn(move || (kind, run_stream(network, samples.iter().cloned(), monitor)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("runner thread")).collect()
    });

    std::fs::create_dir_all(&options.out_dir)?;
    let mut report = ExperimentReport {
        alphas: alphas.clone(),
        logs: Vec::new(),
        csv_paths: Vec::new(),
    };
    let mut first_failure: Option<Error> = None;
    for ((kind, outcome), (_, network, _)) in results.into_iter().zip(&runs) {
        match outcome {
            Ok(log) => {
                let path = options
                    .out_dir
                    .join(format!("metrics_{}_{}.csv", options.scenario.slug(), kind.slug()));
                let comments = provenance(config, options, kind, network.alpha, beta);
                write_metrics_csv(&path, &log, &comments)?;
                if options.svg {
                    let svg_path = path.with_extension("svg");
                    write_tracking_svg(&svg_path, kind, &log)?;
                }
                report.csv_paths.push(path);
                report.logs.push((kind, log));
            }
            Err(err) => {
                if first_failure.is_none() {
                    first_failure = Some(err);
                }
            }
        }
    }
    match first_failure {
        Some(err) => Err(err),
        None => Ok(report),
    }
}

fn leading_columns(basis: &Array2<f64>, count: usize) -> Array2<f64> {
    let n = basis.nrows();
    let count = count.min(basis.ncols());
    let mut out = Array2::zeros((n, count));
    for j in 0..count {
        for i in 0..n {
            out[(i, j)] = basis[(i, j)];
        }
    }
    out
}

fn provenance(
    config: &ExperimentConfig,
    options: &ExperimentOptions,
    kind: RegularizerKind,
    alpha: f64,
    beta: f64,
) -> Vec<String> {
    let threshold = config
        .alpha
        .threshold
        .unwrap_or_else(|| options.scenario.default_threshold());
    vec![
        format!("simred experiment scenario={}", options.scenario.slug()),
        format!(
            "stream: dim={} head={:?} tail=[{}, {}] seed={}",
            config.stream.dim,
            config.stream.head,
            format_float(config.stream.tail_low),
            format_float(config.stream.tail_high),
            options.seed.unwrap_or(config.stream.seed)
        ),
        format!(
            "network: kind={} alpha={} (threshold target {}) eta={} beta={} k={}",
            kind.slug(),
            format_float(alpha),
            format_float(threshold),
            format_float(config.network.eta),
            format_float(beta),
            config.network.k
        ),
        format!(
            "metrics: window={} snapshot_period={} iterations={}",
            config.window(options.scenario),
            config.metrics.snapshot_period,
            config.stream.iterations
        ),
    ]
}

fn write_tracking_svg(path: &Path, kind: RegularizerKind, log: &MetricsLog) -> Result<()> {
    let mut series = Vec::new();
    let tracked_out = log.records.first().map_or(0, |r| r.output_spectrum.len().min(4));
    let tracked_in = log.records.first().map_or(0, |r| r.input_spectrum.len().min(4));
    for mode in 0..tracked_in {
        series.push(Series {
            label: format!("input λ{}", mode + 1),
            points: log
                .records
                .iter()
                .map(|r| (r.t as f64, r.input_spectrum[mode]))
                .collect(),
        });
    }
    for mode in 0..tracked_out {
        series.push(Series {
            label: format!("output λ{}", mode + 1),
            points: log
                .records
                .iter()
                .map(|r| (r.t as f64, r.output_spectrum[mode]))
                .collect(),
        });
    }
    write_line_plot(
        path,
        &format!("windowed spectra ({})", kind.slug()),
        "iteration",
        "eigenvalue",
        &series,
    )
}

#[derive(Debug, Clone)]
pub struct PhaseOptions {
    pub kinds: Vec<RegularizerKind>,
    pub grid_step: f64,
    pub multiplicities: (usize, usize),
    pub out_dir: PathBuf,
    pub svg: bool,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            kinds: RegularizerKind::ALL.to_vec(),
            grid_step: 0.01,
            multiplicities: (1, 1),
            out_dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

#[derive(Debug)]
pub struct PhaseReport {
    pub curves: Vec<(RegularizerKind, Vec<FractionPoint>)>,
    pub ranges: Vec<(RegularizerKind, Vec<(f64, AlphaRange)>)>,
    pub universal: Vec<(RegularizerKind, UniversalAlpha)>,
    pub csv_paths: Vec<PathBuf>,
}

/// Sweep the signal/noise grid: fraction curves over a log-spaced
/// coefficient grid (augmented with the binding analytic endpoints so
/// narrow windows are not missed), per-ratio coefficient ranges, and the
/// universal-coefficient search.
pub fn run_phase(options: &PhaseOptions) -> Result<PhaseReport> {
    let grid = evaluation_grid(options.grid_step)?;
    let mut report = PhaseReport {
        curves: Vec::new(),
        ranges: Vec::new(),
        universal: Vec::new(),
        csv_paths: Vec::new(),
    };

    let ratios: Vec<f64> = {
        let steps = (1.0 / options.grid_step).round() as usize;
        (1..steps)
            .map(|i| i as f64 * options.grid_step)
            .collect()
    };

    for &kind in &options.kinds {
        let found = universal_alpha(kind, &grid, options.multiplicities)?;
        let mut alphas = log_grid(1e-3, 1e3, 25);
        if let UniversalAlpha::None { max_low, min_high } = found {
            alphas.push(max_low);
            if min_high.is_finite() {
                alphas.push(min_high);
            }
        }
        if let UniversalAlpha::Found { alpha } = found {
            alphas.push(alpha);
        }
        alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        alphas.dedup();

        report
            .curves
            .push((kind, fraction_curve(kind, &grid, options.multiplicities, &alphas)?));
        report
            .ranges
            .push((kind, phase_diagram(kind, &ratios, options.multiplicities)?));
        report.universal.push((kind, found));
    }

    std::fs::create_dir_all(&options.out_dir)?;
    let fractions_path = options.out_dir.join("fraction_curves.csv");
    write_fraction_curves_csv(&fractions_path, &report.curves)?;
    let ranges_path = options.out_dir.join("phase_diagram.csv");
    write_phase_diagram_csv(&ranges_path, &report.ranges)?;
    report.csv_paths.push(fractions_path);
    report.csv_paths.push(ranges_path);

    if options.svg {
        let curve_series: Vec<Series> = report
            .curves
            .iter()
            .map(|(kind, points)| Series {
                label: kind.slug().to_string(),
                points: points
                    .iter()
                    .map(|p| (p.noise_fraction, p.signal_fraction))
                    .collect(),
            })
            .collect();
        let svg_path = options.out_dir.join("fraction_curves.svg");
        write_line_plot(
            &svg_path,
            "signal vs noise transmission",
            "fraction of pairs transmitting all noise",
            "fraction of pairs transmitting all signal",
            &curve_series,
        )?;
        let range_series: Vec<Series> = report
            .ranges
            .iter()
            .flat_map(|(kind, rows)| {
                [
                    Series {
                        label: format!("{} low", kind.slug()),
                        points: rows.iter().map(|(r, range)| (*r, range.low)).collect(),
                    },
                    Series {
                        label: format!("{} high", kind.slug()),
                        points: rows
                            .iter()
                            .filter(|(_, range)| range.high.is_finite())
                            .map(|(r, range)| (*r, range.high))
                            .collect(),
                    },
                ]
            })
            .collect();
        let ranges_svg = options.out_dir.join("phase_diagram.svg");
        write_line_plot(
            &ranges_svg,
            "separating coefficient ranges",
            "noise-to-signal ratio",
            "alpha",
            &range_series,
        )?;
    }
    Ok(report)
}

/// `points_per_decade` log-spaced values covering `[low, high]`.
fn log_grid(low: f64, high: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (high / low).log10();
    let count = (decades * points_per_decade as f64).round() as usize;
    (0..=count)
        .map(|i| low * 10f64.powf(i as f64 / points_per_decade as f64))
        .collect()
}
