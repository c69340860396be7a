//! Exact offline solutions of the regularized similarity-matching problem.
//!
//! All three regularizers admit closed-form optima over the input
//! eigenbasis. Writing `λ_1 ≥ λ_2 ≥ ...` for the input Gram eigenvalues,
//! the output Gram eigenvalues are:
//!
//! - scale-dependent: `ST(λ_i, α·T)` — an absolute threshold that scales
//!   with the sample count;
//! - input-output: `ST(λ_i, α·Σ_j λ_j)` — threshold proportional to the
//!   total input energy;
//! - squared-output: the nonnegative least squares minimizer of
//!   `‖λ − d‖² + α(Σ d)²`, whose support is always the top-`p` modes and
//!   whose entries are `λ_i − α·S_p/(1 + α·p)` with `S_p` the retained
//!   input eigenvalue sum.
//!
//! Solvers operate on the n-dimensional covariance spectrum rather than
//! the T×T Gram (the nonzero eigenvalues coincide, and T is usually much
//! larger than n). Output eigenvalues are reported in the same units as
//! the spectrum passed in: hand in a per-sample covariance spectrum with
//! `samples = 1` and the results match the per-sample normalization.
//!
//! A solution is an equivalence class under left-rotation of the output;
//! only `YᵀY` is determined, so solutions store (eigenvalues, basis) and
//! never an explicit output matrix.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{soft_threshold, sym_eig, SymMatrix, ZERO_SNAP};

/// Largest spectrum length accepted by [`nnls_bruteforce`].
pub const NNLS_BRUTEFORCE_LIMIT: usize = 12;

/// The three output-rank regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    /// `2αT·Tr(YᵀY)`: absolute eigenvalue threshold `αT`.
    ScaleDependent,
    /// `2α·Tr(XᵀX)·Tr(YᵀY)`: threshold relative to total input energy.
    InputOutput,
    /// `α·[Tr(YᵀY)]²`: threshold set implicitly by the retained output energy.
    SquaredOutput,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 3] = [
        RegularizerKind::ScaleDependent,
        RegularizerKind::InputOutput,
        RegularizerKind::SquaredOutput,
    ];

    /// Short identifier used in file names and CSV columns.
    pub fn slug(self) -> &'static str {
        match self {
            RegularizerKind::ScaleDependent => "scale_dependent",
            RegularizerKind::InputOutput => "input_output",
            RegularizerKind::SquaredOutput => "squared_output",
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scale" | "scale-dependent" | "scale_dependent" | "ty" => {
                Ok(RegularizerKind::ScaleDependent)
            }
            "io" | "input-output" | "input_output" | "xy" => Ok(RegularizerKind::InputOutput),
            "squared" | "squared-output" | "squared_output" | "yy" => {
                Ok(RegularizerKind::SquaredOutput)
            }
            other => Err(Error::InvalidInput(format!(
                "unknown regularizer kind '{other}' \
                 (expected scale-dependent | input-output | squared-output)"
            ))),
        }
    }
}

/// One offline problem instance: input spectrum, output dimensionality,
/// regularization coefficient and kind, and the sample count the spectrum
/// refers to.
///
/// `samples` only enters the scale-dependent threshold `α·samples`; use 1
/// when the spectrum is already per-sample normalized. (It is a threshold
/// timescale, not a rank bound: `k` may exceed it.)
#[derive(Debug, Clone)]
pub struct OfflineProblem {
    spectrum: Vec<f64>,
    basis: Option<Array2<f64>>,
    k: usize,
    alpha: f64,
    kind: RegularizerKind,
    samples: usize,
}

impl OfflineProblem {
    /// Problem over a known input spectrum (descending eigenvalues of the
    /// input Gram or covariance). The principal basis defaults to the
    /// standard basis, i.e. spectrum coordinates.
    pub fn from_spectrum(
        spectrum: Vec<f64>,
        k: usize,
        alpha: f64,
        kind: RegularizerKind,
        samples: usize,
    ) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::InvalidInput("empty input spectrum".into()));
        }
        if spectrum.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite input spectrum".into()));
        }
        if spectrum.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "input spectrum must be sorted descending".into(),
            ));
        }
        if k == 0 {
            return Err(Error::InvalidInput("output dimension k must be >= 1".into()));
        }
        if !(alpha >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "regularization coefficient must be >= 0, got {alpha}"
            )));
        }
        if samples == 0 {
            return Err(Error::InvalidInput("sample count must be >= 1".into()));
        }
        Ok(Self {
            spectrum,
            basis: None,
            k,
            alpha,
            kind,
            samples,
        })
    }

    /// Problem over an explicit covariance/Gram matrix; eigendecomposes and
    /// keeps the eigenvector basis so the solution carries the true
    /// principal subspace.
    pub fn from_covariance(
        covariance: &SymMatrix,
        k: usize,
        alpha: f64,
        kind: RegularizerKind,
        samples: usize,
    ) -> Result<Self> {
        let spec = sym_eig(covariance)?;
        let mut problem = Self::from_spectrum(spec.eigenvalues, k, alpha, kind, samples)?;
        problem.basis = Some(spec.eigenvectors);
        Ok(problem)
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> RegularizerKind {
        self.kind
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn principal_basis(&self) -> Array2<f64> {
        let n = self.spectrum.len();
        let cols = self.k.min(n);
        match &self.basis {
            Some(basis) => {
                let mut out = Array2::zeros((n, cols));
                for j in 0..cols {
                    for i in 0..n {
                        out[(i, j)] = basis[(i, j)];
                    }
                }
                out
            }
            None => {
                let mut out = Array2::zeros((n, cols));
                for j in 0..cols {
                    out[(j, j)] = 1.0;
                }
                out
            }
        }
    }
}

/// Offline optimum: output Gram eigenvalues (descending, length `k`), the
/// top input eigenvectors they live on, and the retained rank (count of
/// strictly positive output eigenvalues).
///
/// The optimum is an equivalence class: any left-rotation of an output
/// matrix leaves its Gram unchanged, so only (eigenvalues, basis) is
/// stored and comparisons should always go through the Gram.
#[derive(Debug, Clone)]
pub struct OfflineSolution {
    pub output_eigenvalues: Vec<f64>,
    pub principal_basis: Array2<f64>,
    pub rank: usize,
}

impl OfflineSolution {
    /// One representative output matrix, `diag(√d)·Vᵀ` (k×n), with the
    /// free rotation fixed to the identity.
    pub fn output_matrix(&self) -> Array2<f64> {
        let k = self.output_eigenvalues.len();
        let n = self.principal_basis.nrows();
        let cols = self.principal_basis.ncols();
        let mut out = Array2::zeros((k, n));
        for i in 0..k.min(cols) {
            let root = self.output_eigenvalues[i].max(0.0).sqrt();
            for j in 0..n {
                out[(i, j)] = root * self.principal_basis[(j, i)];
            }
        }
        out
    }
}

/// Output eigenvalues and rank only, without the basis. This is the cheap
/// path used by grid sweeps.
pub fn output_spectrum_and_rank(
    kind: RegularizerKind,
    spectrum: &[f64],
    k: usize,
    alpha: f64,
    samples: usize,
) -> Result<(Vec<f64>, usize)> {
    let snap = ZERO_SNAP * spectrum.first().map_or(1.0, |v| v.abs().max(1.0));
    let mut output = match kind {
        RegularizerKind::ScaleDependent => {
            threshold_spectrum(spectrum, k, alpha * samples as f64)
        }
        RegularizerKind::InputOutput => {
            let total: f64 = spectrum.iter().sum();
            threshold_spectrum(spectrum, k, alpha * total)
        }
        RegularizerKind::SquaredOutput => squared_output_spectrum(spectrum, k, alpha, snap)?,
    };
    for value in &mut output {
        if value.abs() <= snap {
            *value = 0.0;
        }
    }
    let rank = output.iter().filter(|v| **v > 0.0).count();
    Ok((output, rank))
}

fn threshold_spectrum(spectrum: &[f64], k: usize, threshold: f64) -> Vec<f64> {
    (0..k)
        .map(|i| soft_threshold(spectrum.get(i).copied().unwrap_or(0.0), threshold))
        .collect()
}

/// The squared-output closed form: scan the retained-mode count `p` from
/// `k` down and keep the largest `p` whose shrunk eigenvalues
/// `λ_i − α·S_p/(1+αp)` are all nonnegative.
fn squared_output_spectrum(spectrum: &[f64], k: usize, alpha: f64, snap: f64) -> Result<Vec<f64>> {
    let at = |i: usize| spectrum.get(i).copied().unwrap_or(0.0);
    let mut prefix_sum = vec![0.0; k + 1];
    for p in 1..=k {
        prefix_sum[p] = prefix_sum[p - 1] + at(p - 1);
    }
    for p in (1..=k).rev() {
        let shrink = alpha * prefix_sum[p] / (1.0 + alpha * p as f64);
        // Entries share the subtracted scalar, so only the smallest matters.
        let smallest = at(p - 1) - shrink;
        if smallest >= -snap {
            let mut output = vec![0.0; k];
            for (i, slot) in output.iter_mut().enumerate().take(p) {
                *slot = (at(i) - shrink).max(0.0);
            }
            return Ok(output);
        }
    }
    Err(Error::InvariantViolation(format!(
        "no feasible retained-mode count for squared-output problem \
         (top eigenvalue {}); input spectrum must be nonnegative",
        at(0)
    )))
}

fn solve(problem: &OfflineProblem) -> Result<OfflineSolution> {
    let (output_eigenvalues, rank) = output_spectrum_and_rank(
        problem.kind,
        &problem.spectrum,
        problem.k,
        problem.alpha,
        problem.samples,
    )?;
    Ok(OfflineSolution {
        output_eigenvalues,
        rank,
        principal_basis: problem.principal_basis(),
    })
}

/// Offline optimum for the scale-dependent regularizer:
/// `d_i = ST(λ_i, α·T)`.
pub fn solve_scale_dependent(problem: &OfflineProblem) -> Result<OfflineSolution> {
    expect_kind(problem, RegularizerKind::ScaleDependent)?;
    solve(problem)
}

/// Offline optimum for the input-output regularizer:
/// `d_i = ST(λ_i, α·Tr(XᵀX))`.
pub fn solve_input_output(problem: &OfflineProblem) -> Result<OfflineSolution> {
    expect_kind(problem, RegularizerKind::InputOutput)?;
    solve(problem)
}

/// Offline optimum for the squared-output regularizer (retained-mode scan).
pub fn solve_squared_output(problem: &OfflineProblem) -> Result<OfflineSolution> {
    expect_kind(problem, RegularizerKind::SquaredOutput)?;
    solve(problem)
}

/// Dispatch on the problem's regularizer kind.
pub fn solve_offline(problem: &OfflineProblem) -> Result<OfflineSolution> {
    solve(problem)
}

fn expect_kind(problem: &OfflineProblem, expected: RegularizerKind) -> Result<()> {
    if problem.kind != expected {
        return Err(Error::InvalidInput(format!(
            "problem kind is {}, expected {}",
            problem.kind, expected
        )));
    }
    Ok(())
}

/// Brute-force oracle for the squared-output problem: minimize
/// `‖d_x − d‖² + α(Σ d)²` over `d ≥ 0` by enumerating all `2^n` supports
/// and solving each unconstrained restriction through the rank-one
/// (Sherman–Morrison) inverse `I − α/(1+αp)·11ᵀ`.
///
/// Desk-scale only (`n ≤ 12`); serves as the independent check for
/// [`solve_squared_output`].
pub fn nnls_bruteforce(d_x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let n = d_x.len();
    if n > NNLS_BRUTEFORCE_LIMIT {
        return Err(Error::SizeLimit {
            limit: NNLS_BRUTEFORCE_LIMIT,
            requested: n,
        });
    }
    if d_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite target vector".into()));
    }
    if d_x.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "target vector must be sorted descending".into(),
        ));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularization coefficient must be >= 0, got {alpha}"
        )));
    }

    let mut best = vec![0.0; n];
    let mut best_objective = squared_output_objective(d_x, &best, alpha);
    let mut candidate = vec![0.0; n];
    for mask in 1u32..(1u32 << n) {
        let p = mask.count_ones() as f64;
        let mut support_sum = 0.0;
        for (i, &value) in d_x.iter().enumerate() {
            if mask & (1 << i) != 0 {
                support_sum += value;
            }
        }
        let shrink = alpha * support_sum / (1.0 + alpha * p);
        let mut feasible = true;
        for (i, &value) in d_x.iter().enumerate() {
            candidate[i] = if mask & (1 << i) != 0 {
                let entry = value - shrink;
                if entry < 0.0 {
                    feasible = false;
                    break;
                }
                entry
            } else {
                0.0
            };
        }
        if !feasible {
            continue;
        }
        let objective = squared_output_objective(d_x, &candidate, alpha);
        if objective < best_objective {
            best_objective = objective;
            best.copy_from_slice(&candidate);
        }
    }
    Ok(best)
}

/// `‖d_x − d_y‖² + α(Σ d_y)²`, zero-padding the shorter vector.
pub fn squared_output_objective(d_x: &[f64], d_y: &[f64], alpha: f64) -> f64 {
    let len = d_x.len().max(d_y.len());
    let mut fit = 0.0;
    let mut total = 0.0;
    for i in 0..len {
        let x = d_x.get(i).copied().unwrap_or(0.0);
        let y = d_y.get(i).copied().unwrap_or(0.0);
        fit += (x - y) * (x - y);
        total += y;
    }
    fit + alpha * total * total
}

/// The regularized objective in eigenvalue coordinates (valid once the
/// output eigenbasis is aligned with the input's):
/// `Σ(λ_i − d_i)² + R(d)` with the regularizer matching `kind`.
pub fn eigen_objective(
    kind: RegularizerKind,
    input_spectrum: &[f64],
    output_spectrum: &[f64],
    alpha: f64,
    samples: usize,
) -> f64 {
    let len = input_spectrum.len().max(output_spectrum.len());
    let mut fit = 0.0;
    let mut total_out = 0.0;
    for i in 0..len {
        let x = input_spectrum.get(i).copied().unwrap_or(0.0);
        let y = output_spectrum.get(i).copied().unwrap_or(0.0);
        fit += (x - y) * (x - y);
        total_out += y;
    }
    let total_in: f64 = input_spectrum.iter().sum();
    match kind {
        RegularizerKind::ScaleDependent => fit + 2.0 * alpha * samples as f64 * total_out,
        RegularizerKind::InputOutput => fit + 2.0 * alpha * total_in * total_out,
        RegularizerKind::SquaredOutput => fit + alpha * total_out * total_out,
    }
}
