//! Sweep the signal/noise evaluation grid: which coefficients transmit
//! every signal mode while rejecting every noise mode, per regularizer.
//! Writes fraction-curve and phase-diagram CSVs (plus SVG plots).
//!
//! Run: `cargo run --example phase_diagram`

use std::path::PathBuf;

use simred::analysis::UniversalAlpha;
use simred::experiments::{run_phase, PhaseOptions};
use simred::report::format_float;

fn main() -> simred::Result<()> {
    let options = PhaseOptions {
        out_dir: PathBuf::from("out/phase"),
        svg: true,
        ..PhaseOptions::default()
    };
    let report = run_phase(&options)?;

    println!("universal coefficient search over the (a, b) grid:");
    for (kind, found) in &report.universal {
        match found {
            UniversalAlpha::Found { alpha } => {
                println!("  {:<16} separates every pair at alpha = {}", kind.slug(), format_float(*alpha));
            }
            UniversalAlpha::None { max_low, min_high } => {
                println!(
                    "  {:<16} no single coefficient works: needs alpha >= {} and < {}",
                    kind.slug(),
                    format_float(*max_low),
                    format_float(*min_high)
                );
            }
        }
    }
    println!("\ncoefficient ranges at noise-to-signal ratio 0.5:");
    for (kind, rows) in &report.ranges {
        if let Some((_, range)) = rows.iter().find(|(r, _)| (r - 0.5).abs() < 1e-12) {
            println!(
                "  {:<16} [{}, {}]",
                kind.slug(),
                format_float(range.low),
                format_float(range.high)
            );
        }
    }
    for path in &report.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}
