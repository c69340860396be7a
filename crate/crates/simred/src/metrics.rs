//! Evaluation metrics for streaming runs: deviation of the output
//! spectrum from the offline optimum, deviation of the learned subspace
//! from the true principal subspace, and sliding-window spectra for
//! non-stationary input.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::report::{format_float, CsvWriter};
use crate::spectral::{orthonormality_defect, sym_eig, SymMatrix};

/// Neurons whose windowed output variance falls below this do not count
/// towards the learned subspace.
pub const VARIANCE_FLOOR: f64 = 1e-3;

/// Sum of squared differences between two descending spectra, zero-padded
/// to a common length. Inputs are re-sorted descending, so the metric is
/// permutation-safe.
pub fn eigenvalue_error(output_spectrum: &[f64], optimal_spectrum: &[f64]) -> f64 {
    let mut lhs = output_spectrum.to_vec();
    let mut rhs = optimal_spectrum.to_vec();
    lhs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    rhs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let len = lhs.len().max(rhs.len());
    let mut total = 0.0;
    for i in 0..len {
        let a = lhs.get(i).copied().unwrap_or(0.0);
        let b = rhs.get(i).copied().unwrap_or(0.0);
        total += (a - b) * (a - b);
    }
    total
}

/// Squared Frobenius distance between the orthogonal projectors of two
/// bases: `‖L Lᵀ − T Tᵀ‖_F²`. Invariant under rotation of either basis
/// within its span; ranges over `[0, 2k]` for rank-k bases.
pub fn subspace_error(learned: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    if learned.nrows() != truth.nrows() {
        return Err(Error::InvalidInput(format!(
            "ambient dimensions differ: {} vs {}",
            learned.nrows(),
            truth.nrows()
        )));
    }
    if learned.ncols() != truth.ncols() {
        return Err(Error::InvalidInput(format!(
            "bases must have equal rank (truncate to the smaller first): {} vs {}",
            learned.ncols(),
            truth.ncols()
        )));
    }
    for (name, basis) in [("learned", learned), ("true", truth)] {
        if orthonormality_defect(basis) > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "{name} basis is not column-orthonormal"
            )));
        }
    }
    let p_learned = projector(learned);
    let p_truth = projector(truth);
    let mut total = 0.0;
    for (a, b) in p_learned.iter().zip(p_truth.iter()) {
        total += (a - b) * (a - b);
    }
    Ok(total)
}

/// `B Bᵀ` with a fixed accumulation order, so bases differing only by
/// column permutation or sign give bit-identical projectors.
fn projector(basis: &Array2<f64>) -> Array2<f64> {
    let (n, k) = basis.dim();
    let mut p = Array2::zeros((n, n));
    for j in 0..k {
        for i in 0..n {
            let vij = basis[(i, j)];
            for l in 0..n {
                p[(i, l)] += vij * basis[(l, j)];
            }
        }
    }
    p
}

/// Read the learned subspace off the feedforward weights: keep neurons
/// whose windowed output variance clears [`VARIANCE_FLOOR`], order them by
/// variance, cap at `max_rank`, and orthonormalize their weight rows.
/// Returns `None` when no neuron qualifies.
pub fn learned_basis(
    feedforward: &Array2<f64>,
    output_variances: &[f64],
    max_rank: usize,
) -> Option<Array2<f64>> {
    let mut active: Vec<usize> = (0..feedforward.nrows())
        .filter(|&i| output_variances.get(i).copied().unwrap_or(0.0) > VARIANCE_FLOOR)
        .collect();
    active.sort_by(|&a, &b| {
        output_variances[b]
            .partial_cmp(&output_variances[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    active.truncate(max_rank);
    if active.is_empty() || max_rank == 0 {
        return None;
    }
    let n = feedforward.ncols();
    let mut columns = Array2::zeros((n, active.len()));
    for (col, &neuron) in active.iter().enumerate() {
        for j in 0..n {
            columns[(j, col)] = feedforward[(neuron, j)];
        }
    }
    let basis = orthonormalize_dropping(columns);
    if basis.ncols() == 0 {
        None
    } else {
        Some(basis)
    }
}

/// Modified Gram–Schmidt that drops (rather than replaces) columns which
/// become numerically dependent, run twice for precision.
fn orthonormalize_dropping(matrix: Array2<f64>) -> Array2<f64> {
    let n = matrix.nrows();
    let mut kept: Vec<Array1<f64>> = Vec::with_capacity(matrix.ncols());
    for col in matrix.columns() {
        let original_norm = col.dot(&col).sqrt();
        let mut v = col.to_owned();
        for _ in 0..2 {
            for basis in &kept {
                let dot = basis.dot(&v);
                v = v - basis * dot;
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-10 * original_norm.max(1.0) {
            kept.push(v / norm);
        }
    }
    let mut out = Array2::zeros((n, kept.len()));
    for (j, basis) in kept.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = basis[i];
        }
    }
    out
}

/// Eigenvalues of the (1/T)·Σ v vᵀ Gram over a window of vectors.
#[derive(Debug, Clone)]
pub struct WindowedSpectrum {
    pub eigenvalues: Vec<f64>,
    pub samples_used: usize,
    /// False when fewer than the requested window of vectors was available.
    pub full: bool,
}

/// Spectrum of the scaled Gram of the last `t0` vectors (all vectors when
/// `t0 == 0`). A short window is flagged, not an error.
pub fn windowed_spectrum(vectors: &[Array1<f64>], t0: usize) -> Result<WindowedSpectrum> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput("no vectors in window".into()));
    }
    let take = if t0 == 0 { vectors.len() } else { t0.min(vectors.len()) };
    let window = &vectors[vectors.len() - take..];
    let dim = window[0].len();
    let mut gram = Array2::zeros((dim, dim));
    for v in window {
        accumulate_outer(&mut gram, v);
    }
    gram.mapv_inplace(|g| g / take as f64);
    let spectrum = sym_eig(&SymMatrix::new(gram)?)?;
    Ok(WindowedSpectrum {
        eigenvalues: spectrum.eigenvalues,
        samples_used: take,
        full: t0 == 0 || take >= t0,
    })
}

fn accumulate_outer(gram: &mut Array2<f64>, v: &Array1<f64>) {
    let dim = v.len();
    for i in 0..dim {
        let vi = v[i];
        for j in 0..dim {
            gram[(i, j)] += vi * v[j];
        }
    }
}

/// Incremental window of vectors exposing the spectrum and per-coordinate
/// variances of their scaled Gram. `window == 0` accumulates the Gram
/// cumulatively instead of buffering.
#[derive(Debug, Clone)]
pub struct GramWindow {
    dim: usize,
    window: usize,
    buffer: VecDeque<Array1<f64>>,
    cumulative: Array2<f64>,
    count: usize,
}

impl GramWindow {
    pub fn new(dim: usize, window: usize) -> Self {
        Self {
            dim,
            window,
            buffer: VecDeque::with_capacity(if window > 0 { window + 1 } else { 0 }),
            cumulative: if window == 0 {
                Array2::zeros((dim, dim))
            } else {
                Array2::zeros((0, 0))
            },
            count: 0,
        }
    }

    pub fn push(&mut self, v: &Array1<f64>) {
        debug_assert_eq!(v.len(), self.dim);
        if self.window > 0 {
            self.buffer.push_back(v.clone());
            if self.buffer.len() > self.window {
                self.buffer.pop_front();
            }
        } else {
            accumulate_outer(&mut self.cumulative, v);
        }
        self.count += 1;
    }

    pub fn samples_seen(&self) -> usize {
        self.count
    }

    fn used(&self) -> usize {
        if self.window > 0 {
            self.buffer.len()
        } else {
            self.count
        }
    }

    /// Scaled Gram eigenvalues over the current window.
    pub fn spectrum(&self) -> Result<WindowedSpectrum> {
        let used = self.used();
        if used == 0 {
            return Err(Error::InvalidInput("no samples in window".into()));
        }
        let mut gram = if self.window > 0 {
            let mut gram = Array2::zeros((self.dim, self.dim));
            for v in &self.buffer {
                accumulate_outer(&mut gram, v);
            }
            gram
        } else {
            self.cumulative.clone()
        };
        gram.mapv_inplace(|g| g / used as f64);
        let spectrum = sym_eig(&SymMatrix::new(gram)?)?;
        Ok(WindowedSpectrum {
            eigenvalues: spectrum.eigenvalues,
            samples_used: used,
            full: self.window == 0 || used >= self.window,
        })
    }

    /// Mean of `v_i²` per coordinate over the window (the Gram diagonal).
    pub fn diagonal_means(&self) -> Vec<f64> {
        let used = self.used();
        if used == 0 {
            return vec![0.0; self.dim];
        }
        let mut diag = vec![0.0; self.dim];
        if self.window > 0 {
            for v in &self.buffer {
                for (slot, value) in diag.iter_mut().zip(v.iter()) {
                    *slot += value * value;
                }
            }
        } else {
            for (i, slot) in diag.iter_mut().enumerate() {
                *slot = self.cumulative[(i, i)];
            }
        }
        for slot in &mut diag {
            *slot /= used as f64;
        }
        diag
    }
}

/// One periodic snapshot of a streaming run.
#[derive(Debug, Clone)]
pub struct MetricsRecord {
    /// Samples processed so far.
    pub t: usize,
    /// Windowed output-gram eigenvalues, descending (length k).
    pub output_spectrum: Vec<f64>,
    /// Leading windowed input-gram eigenvalues.
    pub input_spectrum: Vec<f64>,
    pub eigenvalue_error: Option<f64>,
    pub subspace_error: Option<f64>,
    /// False while the sliding window is still filling.
    pub window_full: bool,
    /// Cumulative count of dynamics relaxations that hit the iteration cap.
    pub dynamics_failures: usize,
}

/// Append-only log of snapshots from one streaming run.
#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    pub records: Vec<MetricsRecord>,
    /// Sliding-window length the spectra were computed over (0: cumulative).
    pub window: usize,
}

impl MetricsLog {
    pub fn new(window: usize) -> Self {
        Self {
            records: Vec::new(),
            window,
        }
    }

    pub fn push(&mut self, record: MetricsRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.t <= last.t {
                return Err(Error::InvariantViolation(format!(
                    "snapshot times must increase: {} after {}",
                    record.t, last.t
                )));
            }
        }
        for (name, value) in [
            ("eigenvalue", record.eigenvalue_error),
            ("subspace", record.subspace_error),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvariantViolation(format!(
                        "{name} error must be finite and nonnegative, got {v}"
                    )));
                }
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// The record at exactly `t`, if one was taken.
    pub fn at(&self, t: usize) -> Option<&MetricsRecord> {
        self.records.iter().find(|r| r.t == t)
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }
}

/// Write a log as CSV: `t,y_1..y_k,x_1..x_m,eigenvalue_error,subspace_error`
/// (error cells are empty when no reference was supplied). `comments`
/// become `#`-prefixed provenance lines above the header.
pub fn write_metrics_csv(path: &Path, log: &MetricsLog, comments: &[String]) -> Result<()> {
    let mut csv = CsvWriter::create(path)?;
    for comment in comments {
        csv.comment(comment)?;
    }
    let k = log.records.first().map_or(0, |r| r.output_spectrum.len());
    let m = log.records.first().map_or(0, |r| r.input_spectrum.len());
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=k).map(|i| format!("y_{i}")));
    columns.extend((1..=m).map(|i| format!("x_{i}")));
    columns.push("eigenvalue_error".to_string());
    columns.push("subspace_error".to_string());
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    csv.header(&column_refs)?;
    for record in &log.records {
        let mut cells = vec![record.t.to_string()];
        cells.extend(record.output_spectrum.iter().map(|v| format_float(*v)));
        cells.extend(record.input_spectrum.iter().map(|v| format_float(*v)));
        cells.push(record.eigenvalue_error.map(format_float).unwrap_or_default());
        cells.push(record.subspace_error.map(format_float).unwrap_or_default());
        writeln!(csv.raw(), "{}", cells.join(","))?;
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{SpectrumSpec, StreamGenerator, StreamSchedule};
    use crate::spectral::{random_orthonormal, SeededRng};

    #[test]
    fn eigenvalue_error_cases() {
        assert_eq!(eigenvalue_error(&[4.0, 3.0], &[4.0, 3.0]), 0.0);
        assert_eq!(eigenvalue_error(&[3.0, 0.0], &[2.0, 1.0]), 2.0);
        // Zero padding and permutation safety.
        assert_eq!(eigenvalue_error(&[2.0], &[2.0, 1.0]), 1.0);
        assert_eq!(eigenvalue_error(&[0.0, 3.0], &[3.0]), 0.0);
    }

    #[test]
    fn subspace_error_cases() {
        let mut e1 = Array2::zeros((2, 1));
        e1[(0, 0)] = 1.0;
        let mut e2 = Array2::zeros((2, 1));
        e2[(1, 0)] = 1.0;
        assert_eq!(subspace_error(&e1, &e1).unwrap(), 0.0);
        assert_eq!(subspace_error(&e1, &e2).unwrap(), 2.0);
    }

    #[test]
    fn subspace_error_rotation_invariant() {
        let mut rng = SeededRng::new(41);
        let q = random_orthonormal(5, &mut rng);
        let mut basis = Array2::zeros((5, 2));
        for j in 0..2 {
            for i in 0..5 {
                basis[(i, j)] = q[(i, j)];
            }
        }
        // Column permutation and sign flips change nothing at all.
        let mut permuted = Array2::zeros((5, 2));
        for i in 0..5 {
            permuted[(i, 0)] = -basis[(i, 1)];
            permuted[(i, 1)] = basis[(i, 0)];
        }
        assert_eq!(subspace_error(&permuted, &basis).unwrap(), 0.0);

        // A generic in-span rotation agrees to rounding error.
        let angle = 0.77f64;
        let mut rotated = Array2::zeros((5, 2));
        for i in 0..5 {
            rotated[(i, 0)] = angle.cos() * basis[(i, 0)] + angle.sin() * basis[(i, 1)];
            rotated[(i, 1)] = -angle.sin() * basis[(i, 0)] + angle.cos() * basis[(i, 1)];
        }
        assert!(subspace_error(&rotated, &basis).unwrap() < 1e-12);

        // Range bound for rank-k bases.
        let mut other = Array2::zeros((5, 2));
        for j in 0..2 {
            for i in 0..5 {
                other[(i, j)] = q[(i, j + 2)];
            }
        }
        let err = subspace_error(&other, &basis).unwrap();
        assert!(err >= 0.0 && err <= 4.0 + 1e-9);
        assert!((err - 4.0).abs() < 1e-10, "orthogonal spans maximize: {err}");
    }

    #[test]
    fn subspace_error_validates() {
        let e1 = Array2::eye(3);
        let e2 = Array2::eye(2);
        assert!(subspace_error(&e1, &e2).is_err());
        let skewed = Array2::from_shape_fn((3, 2), |_| 0.5);
        assert!(subspace_error(&skewed, &e1.slice(ndarray::s![.., ..2]).to_owned()).is_err());
    }

    #[test]
    fn windowed_spectrum_constant_vector() {
        let vectors: Vec<Array1<f64>> = (0..50)
            .map(|_| Array1::from(vec![1.0, 0.0, 0.0]))
            .collect();
        let spec = windowed_spectrum(&vectors, 50).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(spec.eigenvalues[1].abs() < 1e-12);
        assert!(spec.full);

        let partial = windowed_spectrum(&vectors, 100).unwrap();
        assert!(!partial.full);
        assert_eq!(partial.samples_used, 50);
    }

    #[test]
    fn windowed_spectrum_matches_generator_covariance() {
        let schedule = StreamSchedule::stationary(
            4,
            SpectrumSpec {
                head: vec![3.0, 2.0],
                tail_count: 2,
                tail_range: (0.1, 0.3),
            },
            19,
        );
        let mut generator = StreamGenerator::new(schedule).unwrap();
        let truth = generator.ground_truth().eigenvalues.clone();
        let vectors: Vec<Array1<f64>> = (0..10_000).map(|_| generator.next_sample().x).collect();
        let spec = windowed_spectrum(&vectors, 10_000).unwrap();
        for i in 0..2 {
            let rel = (spec.eigenvalues[i] - truth[i]).abs() / truth[i];
            assert!(rel < 0.05, "mode {i}: {rel}");
        }
    }

    #[test]
    fn window_straddling_scale_change_is_convex_mixture() {
        let mut vectors: Vec<Array1<f64>> = Vec::new();
        let mut rng = SeededRng::new(3);
        for i in 0..2000 {
            let scale = if i < 1000 { 1.0f64 } else { 2.0 };
            let mut v = vec![0.0];
            rng.fill_standard_normal(&mut v);
            vectors.push(Array1::from(vec![v[0] * scale.sqrt()]));
        }
        let spec = windowed_spectrum(&vectors, 1500).unwrap();
        assert!(spec.eigenvalues[0] > 1.0 && spec.eigenvalues[0] < 2.2);
    }

    #[test]
    fn gram_window_matches_batch() {
        let mut rng = SeededRng::new(55);
        let vectors: Vec<Array1<f64>> =
            (0..120).map(|_| Array1::from_shape_fn(3, |_| rng.uniform_in(-1.0, 1.0))).collect();
        let mut incremental = GramWindow::new(3, 100);
        for v in &vectors {
            incremental.push(v);
        }
        let inc = incremental.spectrum().unwrap();
        let batch = windowed_spectrum(&vectors, 100).unwrap();
        for (a, b) in inc.eigenvalues.iter().zip(&batch.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(inc.samples_used, 100);

        let mut cumulative = GramWindow::new(3, 0);
        for v in &vectors {
            cumulative.push(v);
        }
        let cum = cumulative.spectrum().unwrap();
        let batch_all = windowed_spectrum(&vectors, 0).unwrap();
        for (a, b) in cum.eigenvalues.iter().zip(&batch_all.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn learned_basis_filters_by_variance() {
        let mut w = Array2::zeros((3, 4));
        w[(0, 0)] = 2.0; // active neuron
        w[(1, 1)] = 3.0; // most active neuron
        w[(2, 2)] = 1.0; // silent neuron
        let basis = learned_basis(&w, &[0.5, 0.9, 1e-5], 3).unwrap();
        assert_eq!(basis.ncols(), 2);
        // Highest-variance neuron comes first.
        assert!((basis[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((basis[(0, 1)].abs() - 1.0).abs() < 1e-12);
        assert!(learned_basis(&w, &[0.0, 0.0, 0.0], 3).is_none());
        // Dependent rows collapse to a single column.
        let mut dup = Array2::zeros((2, 4));
        dup[(0, 0)] = 1.0;
        dup[(1, 0)] = 2.0;
        let collapsed = learned_basis(&dup, &[1.0, 1.0], 2).unwrap();
        assert_eq!(collapsed.ncols(), 1);
    }

    #[test]
    fn log_rejects_bad_records() {
        let mut log = MetricsLog::new(100);
        let record = MetricsRecord {
            t: 100,
            output_spectrum: vec![1.0],
            input_spectrum: vec![1.0],
            eigenvalue_error: Some(0.1),
            subspace_error: None,
            window_full: true,
            dynamics_failures: 0,
        };
        log.push(record.clone()).unwrap();
        assert!(log.push(record.clone()).is_err());
        let mut negative = record;
        negative.t = 200;
        negative.eigenvalue_error = Some(-1.0);
        assert!(log.push(negative).is_err());
    }
}
