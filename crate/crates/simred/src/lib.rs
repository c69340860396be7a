//! Adaptive dimensionality reduction by similarity matching.
//!
//! The output of a dimensionality reduction step should preserve the
//! pairwise inner products of its inputs. Penalizing the output trace (or
//! its square) makes the retained rank adaptive: input modes whose
//! eigenvalues clear a threshold survive with shrunken eigenvalues, the
//! rest are cut. This crate implements that idea for three regularizers —
//! an absolute, scale-dependent threshold and two self-calibrating ones —
//! in both exact offline form and as streaming Hebbian/anti-Hebbian
//! networks with optional forgetting.
//!
//! Module map:
//!
//! - [`spectral`] — symmetric Jacobi eigendecomposition, soft-thresholding,
//!   seeded Gaussian/orthonormal sampling
//! - [`offline`] — closed-form solvers for the three regularized objectives
//!   plus a brute-force nonnegative least squares oracle
//! - [`analysis`] — closed-form two-level (signal/noise) spectra: valid
//!   coefficient ranges, transmitted-fraction curves, phase diagrams
//! - [`datagen`] — seeded colored Gaussian streams with piecewise scaling
//! - [`online`] — the streaming networks: weighted Jacobi neural dynamics
//!   and per-regularizer local learning rules, with discounting
//! - [`metrics`] — eigenvalue error, subspace error, sliding-window spectra
//! - [`config`] / [`experiments`] — TOML-driven experiment runner behind
//!   the `simred` binary
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --example offline_solvers        # the three closed-form solvers
//! cargo run --example phase_diagram          # coefficient-range sweeps -> CSV
//! cargo run --example stationary_tracking    # streaming run on stationary input
//! cargo run --example sudden_change          # forgetting under a statistics jump
//! cargo run --example stream_to_csv          # dump/replay a generated stream
//! cargo run --example checkpoint_roundtrip   # save/restore network state
//! ```
//!
//! The `simred` binary wraps the same entry points as subcommands
//! (`offline`, `stream`, `experiment`, `phase`); see the README.

pub mod analysis;
pub mod config;
pub mod datagen;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod offline;
pub mod online;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use offline::{OfflineProblem, OfflineSolution, RegularizerKind};
pub use online::{NetworkConfig, NetworkState, StepResult};
pub use spectral::{soft_threshold, sym_eig, SeededRng, SymMatrix, SymmetricSpectrum};
