//! Closed-form analysis of the two-level degenerate spectrum: `n1` signal
//! modes at eigenvalue `a` and `n2` noise modes at `b < a`.
//!
//! For each regularizer there is an interval of coefficients that
//! transmits exactly the signal modes:
//!
//! | regularizer     | coefficient range                | top output eigenvalue |
//! |-----------------|----------------------------------|-----------------------|
//! | scale-dependent | `[b, a]`                         | `a − α`               |
//! | input-output    | `[b/(n1·a+n2·b), a/(n1·a+n2·b)]` | `a − α(n1·a+n2·b)`    |
//! | squared-output  | `[b/((a−b)·n1), ∞)`              | `a/(1+α·n1)`          |
//!
//! Boundary convention: a mode whose output eigenvalue is exactly zero
//! counts as rejected. An α at the *lower* edge therefore still rejects
//! the noise, while an α at the *upper* edge zeroes the signal too, so
//! the set of coefficients that actually separates signal from noise is
//! the half-open `[low, high)`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::offline::{output_spectrum_and_rank, RegularizerKind};
use crate::report::{format_float, CsvWriter};

/// Two-level input spectrum: `n1` signal eigenvalues `a`, `n2` noise
/// eigenvalues `b`, with a gap `a > b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateCase {
    pub a: f64,
    pub b: f64,
    pub n1: usize,
    pub n2: usize,
}

impl DegenerateCase {
    pub fn new(a: f64, b: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput("non-finite eigenvalues".into()));
        }
        if !(a > b && b >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "need signal > noise >= 0, got a={a}, b={b}"
            )));
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidInput(
                "signal and noise multiplicities must be >= 1".into(),
            ));
        }
        Ok(Self { a, b, n1, n2 })
    }

    pub fn dim(&self) -> usize {
        self.n1 + self.n2
    }

    /// The spectrum as a descending eigenvalue list.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut values = vec![self.a; self.n1];
        values.extend(std::iter::repeat(self.b).take(self.n2));
        values
    }

    /// `Tr` of the per-sample input similarity: `n1·a + n2·b`.
    pub fn trace(&self) -> f64 {
        self.n1 as f64 * self.a + self.n2 as f64 * self.b
    }
}

/// Closed interval of regularization coefficients; `high` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaRange {
    pub low: f64,
    pub high: f64,
}

impl AlphaRange {
    /// Closed containment, matching the printed summary-table ranges.
    pub fn contains(&self, alpha: f64) -> bool {
        alpha >= self.low && alpha <= self.high
    }

    /// Whether `alpha` actually separates signal from noise under the
    /// zero-output-counts-as-rejected convention: `[low, high)`.
    pub fn separates(&self, alpha: f64) -> bool {
        alpha >= self.low && alpha < self.high
    }

    pub fn is_unbounded(&self) -> bool {
        self.high.is_infinite()
    }
}

/// The coefficient range for which exactly the `n1` signal modes are
/// transmitted.
pub fn alpha_range(case: &DegenerateCase, kind: RegularizerKind) -> AlphaRange {
    match kind {
        RegularizerKind::ScaleDependent => AlphaRange {
            low: case.b,
            high: case.a,
        },
        RegularizerKind::InputOutput => {
            let trace = case.trace();
            AlphaRange {
                low: case.b / trace,
                high: case.a / trace,
            }
        }
        RegularizerKind::SquaredOutput => AlphaRange {
            low: case.b / ((case.a - case.b) * case.n1 as f64),
            high: f64::INFINITY,
        },
    }
}

/// Top output eigenvalue at a coefficient inside [`alpha_range`].
pub fn top_output_eigenvalue(
    case: &DegenerateCase,
    kind: RegularizerKind,
    alpha: f64,
) -> Result<f64> {
    let range = alpha_range(case, kind);
    if !range.contains(alpha) {
        return Err(Error::Domain(format!(
            "alpha {alpha} outside [{}, {}] for {kind}",
            range.low, range.high
        )));
    }
    Ok(match kind {
        RegularizerKind::ScaleDependent => case.a - alpha,
        RegularizerKind::InputOutput => case.a - alpha * case.trace(),
        RegularizerKind::SquaredOutput => case.a / (1.0 + alpha * case.n1 as f64),
    })
}

/// Transmit/reject decision for one case at one coefficient, made by the
/// offline solver's retained rank (not by the closed forms above).
#[derive(Debug, Clone, Copy)]
pub struct Transmission {
    pub rank: usize,
    /// All `n1` signal modes have strictly positive output eigenvalues.
    pub all_signal: bool,
    /// All `n2` noise modes have strictly positive output eigenvalues.
    pub all_noise: bool,
}

impl Transmission {
    /// Exactly the signal is kept: every signal mode in, every noise mode out.
    pub fn separates(&self) -> bool {
        self.all_signal && !self.all_noise
    }
}

pub fn transmission(
    case: &DegenerateCase,
    kind: RegularizerKind,
    alpha: f64,
) -> Result<Transmission> {
    let spectrum = case.spectrum();
    let dim = case.dim();
    let (_, rank) = output_spectrum_and_rank(kind, &spectrum, dim, alpha, 1)?;
    Ok(Transmission {
        rank,
        all_signal: rank >= case.n1,
        all_noise: rank == dim,
    })
}

/// One point of a transmitted-fraction curve.
#[derive(Debug, Clone, Copy)]
pub struct FractionPoint {
    pub alpha: f64,
    /// Fraction of pairs whose signal modes are all transmitted.
    pub signal_fraction: f64,
    /// Fraction of pairs whose noise modes are all transmitted.
    pub noise_fraction: f64,
}

/// Transmitted fractions over a grid of `(a, b)` pairs for each coefficient
/// in `alphas`.
///
/// Pairs without a gap (`a ≤ b`) carry no signal/noise distinction — no
/// coefficient can separate them — so they are skipped; fractions are over
/// the remaining pairs. Decisions come from the offline solver's rank.
pub fn fraction_curve(
    kind: RegularizerKind,
    grid: &[(f64, f64)],
    multiplicities: (usize, usize),
    alphas: &[f64],
) -> Result<Vec<FractionPoint>> {
    let (n1, n2) = multiplicities;
    let cases: Vec<DegenerateCase> = grid
        .iter()
        .filter(|(a, b)| a > b)
        .map(|&(a, b)| DegenerateCase::new(a, b, n1, n2))
        .collect::<Result<_>>()?;
    if cases.is_empty() {
        return Err(Error::InvalidInput(
            "grid contains no pairs with a > b".into(),
        ));
    }
    let total = cases.len() as f64;
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut signal = 0usize;
        let mut noise = 0usize;
        for case in &cases {
            let decision = transmission(case, kind, alpha)?;
            if decision.all_signal {
                signal += 1;
            }
            if decision.all_noise {
                noise += 1;
            }
        }
        points.push(FractionPoint {
            alpha,
            signal_fraction: signal as f64 / total,
            noise_fraction: noise as f64 / total,
        });
    }
    Ok(points)
}

/// Coefficient ranges achieving all-signal/no-noise per noise-to-signal
/// ratio, with the signal eigenvalue normalized to 1.
pub fn phase_diagram(
    kind: RegularizerKind,
    noise_ratios: &[f64],
    multiplicities: (usize, usize),
) -> Result<Vec<(f64, AlphaRange)>> {
    let (n1, n2) = multiplicities;
    noise_ratios
        .iter()
        .map(|&ratio| {
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "noise-to-signal ratio must lie in (0, 1), got {ratio}"
                )));
            }
            let case = DegenerateCase::new(1.0, ratio, n1, n2)?;
            Ok((ratio, alpha_range(&case, kind)))
        })
        .collect()
}

/// The signal/noise evaluation grid: all `(a, b)` with `a ≥ b` drawn from
/// `{step, 2·step, ..., 1.0}`. At the canonical `step = 0.01` this yields
/// 5050 pairs.
pub fn evaluation_grid(step: f64) -> Result<Vec<(f64, f64)>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "grid step must lie in (0, 1], got {step}"
        )));
    }
    let count = (1.0 / step).round() as usize;
    let value = |i: usize| i as f64 * step;
    let mut grid = Vec::with_capacity(count * (count + 1) / 2);
    for i in 1..=count {
        for j in 1..=i {
            grid.push((value(i), value(j)));
        }
    }
    Ok(grid)
}

/// Outcome of the search for a single coefficient that separates every
/// pair of a grid.
#[derive(Debug, Clone, Copy)]
pub enum UniversalAlpha {
    /// `alpha` separates signal from noise on every separable grid pair
    /// (verified against the offline solver).
    Found { alpha: f64 },
    /// No coefficient works: the binding lower bound meets or exceeds the
    /// binding upper bound.
    None { max_low: f64, min_high: f64 },
}

/// Search for a universal coefficient over a grid: intersect the per-pair
/// ranges `[low, high)` analytically, then verify the witness pairwise
/// with the offline solver.
pub fn universal_alpha(
    kind: RegularizerKind,
    grid: &[(f64, f64)],
    multiplicities: (usize, usize),
) -> Result<UniversalAlpha> {
    let (n1, n2) = multiplicities;
    let mut max_low = 0.0f64;
    let mut min_high = f64::INFINITY;
    let mut cases = Vec::new();
    for &(a, b) in grid.iter().filter(|(a, b)| a > b) {
        let case = DegenerateCase::new(a, b, n1, n2)?;
        let range = alpha_range(&case, kind);
        max_low = max_low.max(range.low);
        min_high = min_high.min(range.high);
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(Error::InvalidInput(
            "grid contains no pairs with a > b".into(),
        ));
    }
    if max_low >= min_high {
        return Ok(UniversalAlpha::None { max_low, min_high });
    }
    // The lower envelope is inclusive, so the witness is max_low itself.
    let alpha = max_low;
    for case in &cases {
        let decision = transmission(case, kind, alpha)?;
        if !decision.separates() {
            return Err(Error::InvariantViolation(format!(
                "analytic universal alpha {alpha} for {kind} fails on \
                 (a={}, b={}): solver rank {}",
                case.a, case.b, decision.rank
            )));
        }
    }
    Ok(UniversalAlpha::Found { alpha })
}

/// Write fraction curves as `kind,alpha,signal_fraction,noise_fraction`.
pub fn write_fraction_curves_csv(
    path: &Path,
    curves: &[(RegularizerKind, Vec<FractionPoint>)],
) -> Result<()> {
    let mut csv = CsvWriter::create(path)?;
    csv.header(&["kind", "alpha", "signal_fraction", "noise_fraction"])?;
    for (kind, points) in curves {
        for point in points {
            writeln!(
                csv.raw(),
                "{},{},{},{}",
                kind.slug(),
                format_float(point.alpha),
                format_float(point.signal_fraction),
                format_float(point.noise_fraction)
            )?;
        }
    }
    csv.finish()
}

/// Write phase-diagram rows as `kind,ratio,alpha_low,alpha_high`
/// (`alpha_high` prints as `inf` for the unbounded range).
pub fn write_phase_diagram_csv(
    path: &Path,
    rows: &[(RegularizerKind, Vec<(f64, AlphaRange)>)],
) -> Result<()> {
    let mut csv = CsvWriter::create(path)?;
    csv.header(&["kind", "ratio", "alpha_low", "alpha_high"])?;
    for (kind, entries) in rows {
        for (ratio, range) in entries {
            writeln!(
                csv.raw(),
                "{},{},{},{}",
                kind.slug(),
                format_float(*ratio),
                format_float(range.low),
                format_float(range.high)
            )?;
        }
    }
    csv.finish()
}
