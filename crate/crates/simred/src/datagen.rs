//! Synthetic colored Gaussian input streams with a controlled covariance
//! spectrum, stationary or with scheduled piecewise eigenvalue scaling.
//!
//! A [`SpectrumSpec`] fixes the covariance eigenvalues: an explicit head
//! (the "signal" modes) plus a tail drawn uniformly from an interval. The
//! eigenbasis is a seeded random orthonormal matrix, so correlations are
//! dense while the ground-truth spectrum is known exactly. Statistics
//! changes multiply the eigenvalues of the *same* eigenbasis by a
//! per-segment factor; the basis is never redrawn.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{format_float, CsvWriter};
use crate::spectral::{random_orthonormal, SeededRng, SymMatrix, SymmetricSpectrum};

/// Eigenvalue specification for a generated covariance: explicit head
/// values (descending) plus `tail_count` draws from `tail_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub head: Vec<f64>,
    pub tail_count: usize,
    pub tail_range: (f64, f64),
}

impl SpectrumSpec {
    pub fn validate(&self) -> Result<()> {
        if self.head.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "head eigenvalues must be sorted descending".into(),
            ));
        }
        if self.head.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "head eigenvalues must be finite and nonnegative".into(),
            ));
        }
        let (low, high) = self.tail_range;
        if !(low.is_finite() && high.is_finite() && 0.0 <= low && low <= high) {
            return Err(Error::InvalidInput(format!(
                "tail range must satisfy 0 <= low <= high, got [{low}, {high}]"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.head.len() + self.tail_count
    }
}

/// One stretch of a schedule: from `start` (inclusive) every covariance
/// eigenvalue is multiplied by `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSegment {
    pub start: usize,
    pub scale: f64,
}

/// Generative description of a (possibly non-stationary) input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSchedule {
    pub dim: usize,
    pub base: SpectrumSpec,
    pub segments: Vec<ScaleSegment>,
    pub seed: u64,
}

impl StreamSchedule {
    /// Stationary schedule: a single unit-scale segment from iteration 0.
    pub fn stationary(dim: usize, base: SpectrumSpec, seed: u64) -> Self {
        Self {
            dim,
            base,
            segments: vec![ScaleSegment {
                start: 0,
                scale: 1.0,
            }],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.base.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "spectrum covers {} modes but stream dimension is {}",
                self.base.dim(),
                self.dim
            )));
        }
        if self.segments.first().map(|s| s.start) != Some(0) {
            return Err(Error::InvalidInput(
                "first segment must start at iteration 0".into(),
            ));
        }
        if self.segments.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(Error::InvalidInput(
                "segment starts must be strictly increasing".into(),
            ));
        }
        if self.segments.iter().any(|s| !(s.scale > 0.0) || !s.scale.is_finite()) {
            return Err(Error::InvalidInput(
                "segment scales must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Eigenvalue scale of the segment active at iteration `t`.
    pub fn scale_at(&self, t: usize) -> f64 {
        let mut scale = 1.0;
        for segment in &self.segments {
            if segment.start <= t {
                scale = segment.scale;
            } else {
                break;
            }
        }
        scale
    }
}

/// One stream element.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub x: Array1<f64>,
}

/// Draw the covariance for a spectrum spec: `C = Q Λ Qᵀ` with `Q` a seeded
/// random orthonormal basis and `Λ` the head values plus sorted uniform
/// tail draws. Returns the covariance and its ground-truth spectrum.
pub fn realize_covariance(
    spec: &SpectrumSpec,
    dim: usize,
    rng: &mut SeededRng,
) -> Result<(SymMatrix, SymmetricSpectrum)> {
    spec.validate()?;
    if spec.dim() != dim {
        return Err(Error::InvalidInput(format!(
            "spectrum covers {} modes but requested dimension is {dim}",
            spec.dim()
        )));
    }
    let mut eigenvalues = spec.head.clone();
    let (low, high) = spec.tail_range;
    let mut tail: Vec<f64> = (0..spec.tail_count)
        .map(|_| rng.uniform_in(low, high))
        .collect();
    tail.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigenvalues.extend(tail);
    // A tail draw may exceed the smallest head value; keep the global
    // ordering canonical (stable, so head modes stay ahead of equal tails).
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let basis = random_orthonormal(dim, rng);
    let mut scaled = basis.clone();
    for (j, &value) in eigenvalues.iter().enumerate() {
        for i in 0..dim {
            scaled[(i, j)] *= value;
        }
    }
    let covariance = SymMatrix::new(scaled.dot(&basis.t()))?;
    Ok((
        covariance,
        SymmetricSpectrum {
            eigenvalues,
            eigenvectors: basis,
        },
    ))
}

/// Sequential sample generator for a schedule. Samples must be consumed
/// in order; the draw at iteration `t` is a deterministic function of
/// `(schedule, seed, t)`.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    schedule: StreamSchedule,
    truth: SymmetricSpectrum,
    covariance: SymMatrix,
    /// `Q Λ^{1/2}`: maps standard normal draws to the target covariance.
    factor: Array2<f64>,
    rng: SeededRng,
    next_t: usize,
    scratch: Vec<f64>,
}

impl StreamGenerator {
    pub fn new(schedule: StreamSchedule) -> Result<Self> {
        schedule.validate()?;
        let mut rng = SeededRng::new(schedule.seed);
        let (covariance, truth) = realize_covariance(&schedule.base, schedule.dim, &mut rng)?;
        let mut factor = truth.eigenvectors.clone();
        for (j, &value) in truth.eigenvalues.iter().enumerate() {
            let root = value.max(0.0).sqrt();
            for i in 0..schedule.dim {
                factor[(i, j)] *= root;
            }
        }
        Ok(Self {
            scratch: vec![0.0; schedule.dim],
            schedule,
            truth,
            covariance,
            factor,
            rng,
            next_t: 0,
        })
    }

    pub fn schedule(&self) -> &StreamSchedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim
    }

    /// Base covariance (unit segment scale).
    pub fn covariance(&self) -> &SymMatrix {
        &self.covariance
    }

    /// Ground-truth base spectrum and eigenbasis.
    pub fn ground_truth(&self) -> &SymmetricSpectrum {
        &self.truth
    }

    /// Ground-truth eigenvalues active at iteration `t` (base spectrum
    /// times the segment scale).
    pub fn spectrum_at(&self, t: usize) -> Vec<f64> {
        let scale = self.schedule.scale_at(t);
        self.truth.eigenvalues.iter().map(|v| v * scale).collect()
    }

    /// Draw the next sample: `x ~ N(0, s(t)·C)`.
    pub fn next_sample(&mut self) -> Sample {
        let t = self.next_t;
        self.next_t += 1;
        self.rng.fill_standard_normal(&mut self.scratch);
        let z = Array1::from(self.scratch.clone());
        let mut x = self.factor.dot(&z);
        let scale = self.schedule.scale_at(t).sqrt();
        if scale != 1.0 {
            x.mapv_inplace(|v| v * scale);
        }
        Sample { t, x }
    }

    /// Materialize the first `count` samples of a fresh realization.
    pub fn take(schedule: StreamSchedule, count: usize) -> Result<Vec<Sample>> {
        let mut generator = Self::new(schedule)?;
        Ok((0..count).map(|_| generator.next_sample()).collect())
    }
}

impl Iterator for StreamGenerator {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        Some(self.next_sample())
    }
}

/// Dump samples as CSV (`t,x_1,...,x_n`) for cross-implementation replay.
pub fn write_stream_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut csv = CsvWriter::create(path)?;
    let dim = samples.first().map_or(0, |s| s.x.len());
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=dim).map(|i| format!("x_{i}")));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    csv.header(&column_refs)?;
    for sample in samples {
        let cells: Vec<String> = sample.x.iter().map(|v| format_float(*v)).collect();
        writeln!(csv.raw(), "{},{}", sample.t, cells.join(","))?;
    }
    csv.finish()
}

/// Replay a stream dumped by [`write_stream_csv`].
pub fn read_stream_csv(path: &Path) -> Result<Vec<Sample>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::InvalidInput("empty stream file".into()))?;
    let dim = header.split(',').count().saturating_sub(1);
    if dim == 0 {
        return Err(Error::InvalidInput("stream file has no value columns".into()));
    }
    let mut samples = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: usize = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|_| bad_row(line_no))?;
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad_row(line_no)))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(bad_row(line_no));
        }
        samples.push(Sample {
            t,
            x: Array1::from(values),
        });
    }
    Ok(samples)
}

fn bad_row(line_no: usize) -> Error {
    Error::InvalidInput(format!("malformed stream row at data line {line_no}"))
}
