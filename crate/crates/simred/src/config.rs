//! TOML experiment configuration.
//!
//! A config fully specifies a run: the input stream (dimension, head
//! eigenvalues, tail interval, schedule segments, seed), shared network
//! hyper-parameters, per-regularizer coefficients (explicit, or derived
//! from a common eigenvalue threshold), and metric settings. Unknown keys
//! are rejected. Fields left out fall back to the canonical synthetic
//! benchmark: a 64-dimensional stream with head eigenvalues {6, 5, 4, 2},
//! a uniform [0, 0.2] tail, and coefficients thresholding at 2.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{ScaleSegment, SpectrumSpec, StreamSchedule};
use crate::error::{Error, Result};
use crate::offline::RegularizerKind;

/// Which protocol the experiment follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Fixed statistics throughout.
    Stationary,
    /// Eigenvalues doubled at iteration 1000, reverted at 6000; networks
    /// run with forgetting.
    Nonstationary,
}

impl Scenario {
    pub fn slug(self) -> &'static str {
        match self {
            Scenario::Stationary => "stationary",
            Scenario::Nonstationary => "nonstationary",
        }
    }

    fn default_segments(self) -> Vec<ScaleSegment> {
        match self {
            Scenario::Stationary => vec![ScaleSegment { start: 0, scale: 1.0 }],
            Scenario::Nonstationary => vec![
                ScaleSegment { start: 0, scale: 1.0 },
                ScaleSegment { start: 1000, scale: 2.0 },
                ScaleSegment { start: 6000, scale: 1.0 },
            ],
        }
    }

    fn default_beta(self) -> f64 {
        match self {
            Scenario::Stationary => 1.0,
            // Forgetting timescale -1/ln(beta) of 1000 samples.
            Scenario::Nonstationary => (-1.0_f64 / 1000.0).exp(),
        }
    }

    /// Default spectra window: stationary statistics are best read from
    /// the cumulative `(1/T)` Gram (estimation error shrinks with T),
    /// while tracking changes needs a sliding window.
    pub fn default_window(self) -> usize {
        match self {
            Scenario::Stationary => 0,
            Scenario::Nonstationary => 1000,
        }
    }

    /// Default soft-threshold target for coefficient derivation.
    ///
    /// Stationary runs use the canonical 2. With scheduled statistics
    /// changes the threshold must sit strictly inside the gap: exactly at
    /// the fourth eigenvalue the obsolete mode has zero forgetting margin
    /// and decays power-law slow. The margins are split unevenly because
    /// the two transitions need very different e-fold counts: a newly
    /// significant mode grows from the suppressed noise floor (~10
    /// e-folds, rate proportional to the gap-side margin), while an
    /// obsolete mode only decays from order one (~2 e-folds). 2.3 keeps
    /// the growth margin large and still forgets within a few timescales.
    pub fn default_threshold(self) -> f64 {
        match self {
            Scenario::Stationary => 2.0,
            Scenario::Nonstationary => 2.3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stationary" => Ok(Scenario::Stationary),
            "nonstationary" | "non-stationary" => Ok(Scenario::Nonstationary),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario '{other}' (expected stationary | nonstationary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stream: StreamSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub alpha: AlphaSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSection {
    pub dim: usize,
    pub head: Vec<f64>,
    pub tail_count: usize,
    #[serde(default)]
    pub tail_low: f64,
    pub tail_high: f64,
    #[serde(default = "default_stream_seed")]
    pub seed: u64,
    /// Piecewise eigenvalue scaling; the scenario default applies if absent.
    #[serde(default)]
    pub segments: Option<Vec<ScaleSegment>>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub k: usize,
    pub eta: f64,
    /// Forgetting discount; the scenario default applies if absent.
    pub beta: Option<f64>,
    pub dynamics_tol: f64,
    pub dynamics_max_iters: usize,
    pub init_seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            k: 6,
            eta: 0.1,
            beta: None,
            dynamics_tol: 1e-6,
            dynamics_max_iters: 500,
            init_seed: 7,
        }
    }
}

/// Per-regularizer coefficients. Explicit values win; otherwise each is
/// derived from `threshold` so that input eigenvalues are soft-thresholded
/// by that amount on the realized ground-truth spectrum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaSection {
    pub threshold: Option<f64>,
    pub scale_dependent: Option<f64>,
    pub input_output: Option<f64>,
    pub squared_output: Option<f64>,
}

impl AlphaSection {
    /// Resolve the coefficient for one regularizer against the realized
    /// base spectrum; `default_threshold` applies when the section names
    /// neither an explicit coefficient nor a threshold.
    ///
    /// Derivations from a target threshold θ: the scale-dependent
    /// coefficient is θ itself; the input-output coefficient divides by
    /// the spectrum total so the product recovers θ; the squared-output
    /// coefficient solves `α·S_m/(1+α·m) = θ` with `m` the modes above θ
    /// and `S_m` their sum, putting the implicit cutoff at θ.
    pub fn resolve(
        &self,
        kind: RegularizerKind,
        ground_spectrum: &[f64],
        default_threshold: f64,
    ) -> Result<f64> {
        let explicit = match kind {
            RegularizerKind::ScaleDependent => self.scale_dependent,
            RegularizerKind::InputOutput => self.input_output,
            RegularizerKind::SquaredOutput => self.squared_output,
        };
        if let Some(alpha) = explicit {
            if !(alpha >= 0.0) {
                return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
            }
            return Ok(alpha);
        }
        let threshold = self.threshold.unwrap_or(default_threshold);
        if !(threshold > 0.0) {
            return Err(Error::Config(format!(
                "threshold must be > 0, got {threshold}"
            )));
        }
        match kind {
            RegularizerKind::ScaleDependent => Ok(threshold),
            RegularizerKind::InputOutput => {
                let total: f64 = ground_spectrum.iter().sum();
                if total <= 0.0 {
                    return Err(Error::Config("spectrum total must be positive".into()));
                }
                Ok(threshold / total)
            }
            RegularizerKind::SquaredOutput => {
                let retained: Vec<f64> = ground_spectrum
                    .iter()
                    .copied()
                    .filter(|v| *v > threshold)
                    .collect();
                let m = retained.len() as f64;
                let sum: f64 = retained.iter().sum();
                if retained.is_empty() || sum <= m * threshold {
                    return Err(Error::Config(format!(
                        "threshold {threshold} leaves no retainable modes"
                    )));
                }
                Ok(threshold / (sum - m * threshold))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Sliding-window length for spectra (0: cumulative); the scenario
    /// default applies if absent.
    pub window: Option<usize>,
    pub snapshot_period: usize,
    /// Leading input-gram eigenvalues recorded per snapshot.
    pub input_track: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            window: None,
            snapshot_period: 100,
            input_track: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

fn default_stream_seed() -> u64 {
    1
}

fn default_iterations() -> usize {
    10_000
}

impl Default for ExperimentConfig {
    /// The canonical synthetic benchmark.
    fn default() -> Self {
        Self {
            stream: StreamSection {
                dim: 64,
                head: vec![6.0, 5.0, 4.0, 2.0],
                tail_count: 60,
                tail_low: 0.0,
                tail_high: 0.2,
                seed: default_stream_seed(),
                segments: None,
                iterations: default_iterations(),
            },
            network: NetworkSection::default(),
            alpha: AlphaSection::default(),
            metrics: MetricsSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Canonical serialized form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serialize failure: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spectrum_spec();
        spec.validate()
            .and_then(|()| {
                if spec.dim() != self.stream.dim {
                    Err(Error::InvalidInput(format!(
                        "head ({}) + tail ({}) must equal dim ({})",
                        self.stream.head.len(),
                        self.stream.tail_count,
                        self.stream.dim
                    )))
                } else {
                    Ok(())
                }
            })
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.network.k == 0 {
            return Err(Error::Config("network.k must be >= 1".into()));
        }
        if self.stream.iterations == 0 {
            return Err(Error::Config("stream.iterations must be >= 1".into()));
        }
        if self.metrics.snapshot_period == 0 {
            return Err(Error::Config("metrics.snapshot_period must be >= 1".into()));
        }
        Ok(())
    }

    pub fn spectrum_spec(&self) -> SpectrumSpec {
        SpectrumSpec {
            head: self.stream.head.clone(),
            tail_count: self.stream.tail_count,
            tail_range: (self.stream.tail_low, self.stream.tail_high),
        }
    }

    /// The stream schedule for a scenario, optionally overriding the seed.
    pub fn schedule(&self, scenario: Scenario, seed_override: Option<u64>) -> StreamSchedule {
        StreamSchedule {
            dim: self.stream.dim,
            base: self.spectrum_spec(),
            segments: self
                .stream
                .segments
                .clone()
                .unwrap_or_else(|| scenario.default_segments()),
            seed: seed_override.unwrap_or(self.stream.seed),
        }
    }

    pub fn beta(&self, scenario: Scenario) -> f64 {
        self.network.beta.unwrap_or_else(|| scenario.default_beta())
    }

    pub fn window(&self, scenario: Scenario) -> usize {
        self.metrics
            .window
            .unwrap_or_else(|| scenario.default_window())
    }
}
