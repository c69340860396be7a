//! Forgetting under a sudden statistics change: covariance eigenvalues
//! double at iteration 1000 and revert at 6000. The scale-dependent
//! network transiently transmits a fourth mode; the self-calibrating
//! regularizers keep tracking exactly three throughout.
//!
//! Run: `cargo run --example sudden_change`

use std::path::PathBuf;

use simred::config::{ExperimentConfig, Scenario};
use simred::experiments::{run_experiment, ExperimentOptions};
use simred::offline::RegularizerKind;
use simred::report::format_float;

fn main() -> simred::Result<()> {
    let config = ExperimentConfig::default();
    let report = run_experiment(
        &config,
        &ExperimentOptions {
            scenario: Scenario::Nonstationary,
            out_dir: PathBuf::from("out/nonstationary"),
            seed: Some(1),
            svg: true,
            stream_file: None,
        },
    )?;

    println!("fourth windowed output eigenvalue over the run:\n");
    println!("{:>6} {:>16} {:>16} {:>16}", "t", "scale_dependent", "input_output", "squared_output");
    let times: Vec<usize> = (1..=10).map(|i| i * 1000).collect();
    for t in times {
        print!("{t:>6}");
        for kind in RegularizerKind::ALL {
            let log = &report
                .logs
                .iter()
                .find(|(k, _)| *k == kind)
                .expect("all three networks ran")
                .1;
            let value = log
                .at(t)
                .map(|r| format_float(r.output_spectrum[3]))
                .unwrap_or_default();
            print!(" {value:>16}");
        }
        println!();
    }
    println!(
        "\nthe doubled phase runs over [1000, 6000); forgetting timescale is \
         ~1000 samples, so the transient fourth mode of the scale-dependent \
         network decays back below threshold in the final quarter of the run."
    );
    for path in &report.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}
