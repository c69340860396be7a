//! Streaming Hebbian/anti-Hebbian networks.
//!
//! Each incoming sample is processed in two phases. Neural dynamics first
//! compute the output by relaxing a weighted Jacobi iteration
//!
//! ```text
//! y ← (1−η)·y + η·(W_ff·x − W_lat·y)
//! ```
//!
//! to the fixed point of `(I + W_lat)·y = W_ff·x`. The synapses are then
//! updated by local rules whose per-neuron learning rate is the reciprocal
//! of a cumulative activity `μ_i`:
//!
//! ```text
//! μ_i   ← β²·μ_i + r + y_i²
//! W_ff  ← W_ff  + (y_i·x_j − (r + y_i²)·W_ff)  / μ_i
//! W_lat ← W_lat + (y_i·y_j − (r + y_i²)·W_lat) / μ_i       (diagonal pinned to 0)
//! ```
//!
//! where the regularizer enters only through the scalar `r`: `α` for the
//! scale-dependent kind, `α·‖x‖²` for input-output, `α·‖y‖²` for
//! squared-output. The discount `β ∈ (0, 1]` caps `μ_i`, keeping the
//! learning rate from vanishing so the network tracks non-stationary
//! statistics; `β = 1` recovers the non-discounted rules exactly (the
//! formulas are identical, not merely equivalent in the limit).

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::metrics::{
    eigenvalue_error, learned_basis, subspace_error, MetricsLog, MetricsRecord, GramWindow,
};
use crate::offline::RegularizerKind;
use crate::spectral::SeededRng;

/// Hyper-parameters of one online network.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Input dimensionality.
    pub n: usize,
    /// Number of output neurons.
    pub k: usize,
    /// Regularization coefficient.
    pub alpha: f64,
    /// Jacobi relaxation weight, in `(0, 1]`.
    pub eta: f64,
    /// Forgetting discount in `(0, 1]`; 1 disables forgetting. The
    /// effective memory is `−1/ln β` samples.
    pub beta: f64,
    pub kind: RegularizerKind,
    /// Dynamics stop when the sup-norm step drops to this. The fixed-point
    /// residual is then at most `dynamics_tol / eta`.
    pub dynamics_tol: f64,
    pub dynamics_max_iters: usize,
    /// Seed for the feedforward weight initialization.
    pub init_seed: u64,
}

impl NetworkConfig {
    pub fn new(n: usize, k: usize, alpha: f64, kind: RegularizerKind) -> Self {
        Self {
            n,
            k,
            alpha,
            eta: 0.1,
            beta: 1.0,
            kind,
            dynamics_tol: 1e-6,
            dynamics_max_iters: 500,
            init_seed: 0,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::InvalidInput("n and k must be >= 1".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.dynamics_tol > 0.0) {
            return Err(Error::InvalidInput("dynamics tolerance must be > 0".into()));
        }
        if self.dynamics_max_iters == 0 {
            return Err(Error::InvalidInput("dynamics iteration cap must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective forgetting memory `−1/ln β` (infinite at `β = 1`).
    pub fn forgetting_timescale(&self) -> f64 {
        let log_beta = self.beta.ln();
        if log_beta == 0.0 {
            f64::INFINITY
        } else {
            -1.0 / log_beta
        }
    }
}

/// Mutable state of one network: feedforward weights (k×n), lateral
/// weights (k×k, zero diagonal), per-neuron cumulative activities, and
/// the number of samples seen.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    feedforward: Array2<f64>,
    lateral: Array2<f64>,
    mu: Array1<f64>,
    t: usize,
}

impl NetworkState {
    /// Fresh state: feedforward entries i.i.d. uniform in `[−1/√n, 1/√n]`
    /// from the config seed, zero lateral weights (so the first dynamics
    /// trivially converge), unit cumulative activities.
    pub fn init(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SeededRng::new(cfg.init_seed);
        let scale = 1.0 / (cfg.n as f64).sqrt();
        let feedforward =
            Array2::from_shape_fn((cfg.k, cfg.n), |_| rng.uniform_in(-scale, scale));
        Ok(Self {
            feedforward,
            lateral: Array2::zeros((cfg.k, cfg.k)),
            mu: Array1::ones(cfg.k),
            t: 0,
        })
    }

    /// Assemble a state from explicit parts, checking the invariants
    /// (zero lateral diagonal, strictly positive activities, finiteness).
    pub fn from_parts(
        feedforward: Array2<f64>,
        lateral: Array2<f64>,
        mu: Array1<f64>,
        t: usize,
    ) -> Result<Self> {
        let k = feedforward.nrows();
        if lateral.dim() != (k, k) || mu.len() != k {
            return Err(Error::InvalidInput(
                "weight/activity shapes do not agree".into(),
            ));
        }
        let state = Self {
            feedforward,
            lateral,
            mu,
            t,
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn feedforward(&self) -> &Array2<f64> {
        &self.feedforward
    }

    pub fn lateral(&self) -> &Array2<f64> {
        &self.lateral
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn output_dim(&self) -> usize {
        self.feedforward.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.feedforward.ncols()
    }

    /// Bit-exact equality, for checkpoint and reduction tests.
    pub fn bits_eq(&self, other: &Self) -> bool {
        self.t == other.t
            && bits_eq_iter(self.mu.iter(), other.mu.iter())
            && bits_eq_iter(self.feedforward.iter(), other.feedforward.iter())
            && bits_eq_iter(self.lateral.iter(), other.lateral.iter())
    }

    /// Write a versioned text checkpoint with exact float round-trip
    /// (values stored as hex bit patterns).
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        writeln!(out, "{} {} {}", self.output_dim(), self.input_dim(), self.t)?;
        writeln!(out, "{}", hex_line(self.mu.iter()))?;
        for row in self.feedforward.rows() {
            writeln!(out, "{}", hex_line(row.iter()))?;
        }
        for row in self.lateral.rows() {
            writeln!(out, "{}", hex_line(row.iter()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::InvalidInput("truncated checkpoint".into()))
        };
        let magic = next_line()?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::InvalidInput(format!(
                "unrecognized checkpoint header '{magic}'"
            )));
        }
        let dims = next_line()?;
        let mut parts = dims.split_whitespace();
        let k: usize = parse_dim(parts.next())?;
        let n: usize = parse_dim(parts.next())?;
        let t: usize = parse_dim(parts.next())?;
        let mu = Array1::from(parse_hex_line(&next_line()?, k)?);
        let mut feedforward = Array2::zeros((k, n));
        for i in 0..k {
            let row = parse_hex_line(&next_line()?, n)?;
            for (j, value) in row.into_iter().enumerate() {
                feedforward[(i, j)] = value;
            }
        }
        let mut lateral = Array2::zeros((k, k));
        for i in 0..k {
            let row = parse_hex_line(&next_line()?, k)?;
            for (j, value) in row.into_iter().enumerate() {
                lateral[(i, j)] = value;
            }
        }
        let state = Self {
            feedforward,
            lateral,
            mu,
            t,
        };
        state.check_invariants()?;
        Ok(state)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.mu.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvariantViolation(
                "cumulative activities must be strictly positive".into(),
            ));
        }
        for i in 0..self.output_dim() {
            if self.lateral[(i, i)] != 0.0 {
                return Err(Error::InvariantViolation(
                    "lateral diagonal must be exactly zero".into(),
                ));
            }
        }
        if self.feedforward.iter().any(|v| !v.is_finite())
            || self.lateral.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvariantViolation("non-finite weights".into()));
        }
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &str = "simred-checkpoint v1";

fn bits_eq_iter<'a>(
    a: impl Iterator<Item = &'a f64>,
    b: impl Iterator<Item = &'a f64>,
) -> bool {
    a.zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn hex_line<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    let mut line = String::new();
    for (idx, value) in values.enumerate() {
        if idx > 0 {
            line.push(' ');
        }
        write!(line, "{:016x}", value.to_bits()).expect("string write");
    }
    line
}

fn parse_dim(field: Option<&str>) -> Result<usize> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::InvalidInput("malformed checkpoint dimensions".into()))
}

fn parse_hex_line(line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|word| {
            u64::from_str_radix(word, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::InvalidInput("malformed checkpoint row".into()))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::InvalidInput(format!(
            "checkpoint row has {} values, expected {expected}",
            values.len()
        )));
    }
    Ok(values)
}

/// Outcome of one dynamics relaxation.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub y: Array1<f64>,
    pub dynamics_iters: usize,
    pub converged: bool,
}

/// Relax the output for one input by weighted Jacobi iteration, starting
/// from `y = 0`. Non-convergence within the cap is flagged, not fatal;
/// non-finite values are an error.
pub fn neural_dynamics(
    state: &NetworkState,
    x: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<StepResult> {
    if x.len() != state.input_dim() {
        return Err(Error::InvalidInput(format!(
            "input has length {}, network expects {}",
            x.len(),
            state.input_dim()
        )));
    }
    let k = state.output_dim();
    let drive = state.feedforward.dot(x);
    let mut y = Array1::zeros(k);
    let mut iters = 0;
    let mut converged = false;
    while iters < cfg.dynamics_max_iters {
        iters += 1;
        let lateral_drive = state.lateral.dot(&y);
        let mut max_step = 0.0f64;
        for i in 0..k {
            let updated = (1.0 - cfg.eta) * y[i] + cfg.eta * (drive[i] - lateral_drive[i]);
            let step = (updated - y[i]).abs();
            if step > max_step {
                max_step = step;
            }
            y[i] = updated;
        }
        if !max_step.is_finite() {
            return Err(Error::NumericalFailure(
                "neural dynamics produced non-finite activity".into(),
            ));
        }
        if max_step <= cfg.dynamics_tol {
            converged = true;
            break;
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "neural dynamics produced non-finite activity".into(),
        ));
    }
    Ok(StepResult {
        y,
        dynamics_iters: iters,
        converged,
    })
}

/// Apply the local learning rules for one (input, output) pair.
pub fn update_weights(
    state: &mut NetworkState,
    x: &Array1<f64>,
    y: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<()> {
    let k = state.output_dim();
    let n = state.input_dim();
    if x.len() != n || y.len() != k {
        return Err(Error::InvalidInput(
            "sample/output dimensions do not match the network".into(),
        ));
    }
    let r = match cfg.kind {
        RegularizerKind::ScaleDependent => cfg.alpha,
        RegularizerKind::InputOutput => cfg.alpha * x.dot(x),
        RegularizerKind::SquaredOutput => cfg.alpha * y.dot(y),
    };
    let beta_sq = cfg.beta * cfg.beta;
    let mut finite = true;
    for i in 0..k {
        let yi = y[i];
        let fade = r + yi * yi;
        let mu_next = beta_sq * state.mu[i] + fade;
        if !(mu_next > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "cumulative activity of neuron {i} became {mu_next}"
            )));
        }
        state.mu[i] = mu_next;
        for j in 0..n {
            let w = state.feedforward[(i, j)];
            let next = w + (yi * x[j] - fade * w) / mu_next;
            finite &= next.is_finite();
            state.feedforward[(i, j)] = next;
        }
        for j in 0..k {
            if j == i {
                continue;
            }
            let w = state.lateral[(i, j)];
            let next = w + (yi * y[j] - fade * w) / mu_next;
            finite &= next.is_finite();
            state.lateral[(i, j)] = next;
        }
    }
    state.t += 1;
    if !finite {
        return Err(Error::NumericalFailure(
            "weight update produced non-finite entries".into(),
        ));
    }
    Ok(())
}

/// What [`run_stream`] records and how often.
#[derive(Debug, Clone)]
pub struct MonitorConfig {
    /// Record a snapshot every this many samples (0: only at the end).
    pub snapshot_period: usize,
    /// Sliding-window length for spectra; 0 means cumulative.
    pub window: usize,
    /// How many leading input-gram eigenvalues to record per snapshot.
    pub input_track: usize,
    pub reference: Option<RunReference>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            snapshot_period: 100,
            window: 1000,
            input_track: 4,
            reference: None,
        }
    }
}

/// Ground truth for error metrics: the offline-optimal per-sample output
/// spectrum per schedule segment, and the true principal eigenbasis.
#[derive(Debug, Clone)]
pub struct RunReference {
    /// `(start_iteration, optimal output spectrum)`, starts ascending.
    pub optimal_by_segment: Vec<(usize, Vec<f64>)>,
    /// Ground-truth eigenvectors (columns, leading modes first).
    pub principal_basis: Array2<f64>,
}

impl RunReference {
    /// Stationary reference: one segment from iteration 0.
    pub fn stationary(optimal: Vec<f64>, principal_basis: Array2<f64>) -> Self {
        Self {
            optimal_by_segment: vec![(0, optimal)],
            principal_basis,
        }
    }

    fn optimal_at(&self, t: usize) -> &[f64] {
        let mut current: &[f64] = &[];
        for (start, optimal) in &self.optimal_by_segment {
            if *start <= t {
                current = optimal;
            } else {
                break;
            }
        }
        current
    }
}

/// Drive one network over a sample stream, alternating dynamics and
/// weight updates, recording periodic metric snapshots.
///
/// Deterministic given `(cfg, samples, monitor)`. Numerical failures are
/// reported with the offending iteration index; an empty stream yields an
/// empty log.
pub fn run_stream(
    cfg: &NetworkConfig,
    samples: impl IntoIterator<Item = Sample>,
    monitor: &MonitorConfig,
) -> Result<MetricsLog> {
    let mut state = NetworkState::init(cfg)?;
    run_stream_with_state(cfg, &mut state, samples, monitor)
}

/// [`run_stream`] continuing from an existing state (e.g. a checkpoint).
pub fn run_stream_with_state(
    cfg: &NetworkConfig,
    state: &mut NetworkState,
    samples: impl IntoIterator<Item = Sample>,
    monitor: &MonitorConfig,
) -> Result<MetricsLog> {
    cfg.validate()?;
    let mut log = MetricsLog::new(monitor.window);
    let mut y_window = GramWindow::new(cfg.k, monitor.window);
    let mut x_window = GramWindow::new(cfg.n, monitor.window);
    let mut dynamics_failures = 0usize;
    let mut processed = 0usize;
    let mut last_snapshot = 0usize;

    for sample in samples {
        let step = neural_dynamics(state, &sample.x, cfg)
            .map_err(|e| at_iteration(sample.t, e))?;
        if !step.converged {
            dynamics_failures += 1;
        }
        update_weights(state, &sample.x, &step.y, cfg)
            .map_err(|e| at_iteration(sample.t, e))?;
        x_window.push(&sample.x);
        y_window.push(&step.y);
        processed += 1;

        let due = monitor.snapshot_period > 0 && processed % monitor.snapshot_period == 0;
        if due {
            last_snapshot = processed;
            let record = snapshot(
                processed,
                sample.t,
                &y_window,
                &x_window,
                state,
                monitor,
                dynamics_failures,
            )?;
            log.push(record)?;
        }
    }
    if processed > 0 && last_snapshot != processed {
        let record = snapshot(
            processed,
            processed - 1,
            &y_window,
            &x_window,
            state,
            monitor,
            dynamics_failures,
        )?;
        log.push(record)?;
    }
    Ok(log)
}

fn at_iteration(t: usize, err: Error) -> Error {
    match err {
        Error::NumericalFailure(msg) => {
            Error::NumericalFailure(format!("at stream iteration {t}: {msg}"))
        }
        Error::InvariantViolation(msg) => {
            Error::InvariantViolation(format!("at stream iteration {t}: {msg}"))
        }
        other => other,
    }
}

fn snapshot(
    processed: usize,
    last_sample_t: usize,
    y_window: &GramWindow,
    x_window: &GramWindow,
    state: &NetworkState,
    monitor: &MonitorConfig,
    dynamics_failures: usize,
) -> Result<MetricsRecord> {
    let y_spec = y_window.spectrum()?;
    let x_spec = x_window.spectrum()?;
    let input_spectrum: Vec<f64> = x_spec
        .eigenvalues
        .iter()
        .take(monitor.input_track)
        .copied()
        .collect();

    let mut record = MetricsRecord {
        t: processed,
        output_spectrum: y_spec.eigenvalues.clone(),
        input_spectrum,
        eigenvalue_error: None,
        subspace_error: None,
        window_full: y_spec.full,
        dynamics_failures,
    };

    if let Some(reference) = &monitor.reference {
        let optimal = reference.optimal_at(last_sample_t);
        record.eigenvalue_error = Some(eigenvalue_error(&record.output_spectrum, optimal));
        let optimal_rank = optimal.iter().filter(|v| **v > 0.0).count();
        let variances = y_window.diagonal_means();
        if let Some(learned) = learned_basis(state.feedforward(), &variances, optimal_rank) {
            let rank = learned.ncols();
            if rank > 0 && rank <= reference.principal_basis.ncols() {
                let mut truth = Array2::zeros((reference.principal_basis.nrows(), rank));
                for j in 0..rank {
                    for i in 0..truth.nrows() {
                        truth[(i, j)] = reference.principal_basis[(i, j)];
                    }
                }
                record.subspace_error = Some(subspace_error(&learned, &truth)?);
            }
        }
    }
    Ok(record)
}
