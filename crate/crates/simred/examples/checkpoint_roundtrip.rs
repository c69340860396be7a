//! Save a network mid-stream and continue from the checkpoint: the
//! resumed run is bit-identical to the uninterrupted one.
//!
//! Run: `cargo run --example checkpoint_roundtrip`

use std::path::Path;

use simred::datagen::{SpectrumSpec, StreamGenerator, StreamSchedule};
use simred::offline::RegularizerKind;
use simred::online::{neural_dynamics, update_weights, NetworkConfig, NetworkState};

fn main() -> simred::Result<()> {
    let schedule = StreamSchedule::stationary(
        16,
        SpectrumSpec {
            head: vec![5.0, 3.0],
            tail_count: 14,
            tail_range: (0.0, 0.2),
        },
        7,
    );
    let samples = StreamGenerator::take(schedule, 400)?;
    let cfg = NetworkConfig::new(16, 4, 1.0, RegularizerKind::SquaredOutput).with_seed(3);

    // Uninterrupted run.
    let mut reference = NetworkState::init(&cfg)?;
    for sample in &samples {
        let step = neural_dynamics(&reference, &sample.x, &cfg)?;
        update_weights(&mut reference, &sample.x, &step.y, &cfg)?;
    }

    // Same run, checkpointed halfway.
    let path = Path::new("out/network.ckpt");
    let mut state = NetworkState::init(&cfg)?;
    for sample in &samples[..200] {
        let step = neural_dynamics(&state, &sample.x, &cfg)?;
        update_weights(&mut state, &sample.x, &step.y, &cfg)?;
    }
    state.save_checkpoint(path)?;
    println!("saved checkpoint at t={} to {}", state.t(), path.display());

    let mut resumed = NetworkState::load_checkpoint(path)?;
    println!("loaded checkpoint: exact round-trip = {}", resumed.bits_eq(&state));
    for sample in &samples[200..] {
        let step = neural_dynamics(&resumed, &sample.x, &cfg)?;
        update_weights(&mut resumed, &sample.x, &step.y, &cfg)?;
    }

    println!(
        "resumed run matches the uninterrupted one bit-for-bit: {}",
        resumed.bits_eq(&reference)
    );
    Ok(())
}
