//! The three closed-form offline solvers on a small spectrum, checked
//! against the brute-force nonnegative least squares oracle.
//!
//! Run: `cargo run --example offline_solvers`

use simred::offline::{
    nnls_bruteforce, solve_offline, OfflineProblem, RegularizerKind,
};
use simred::report::format_float;

fn main() -> simred::Result<()> {
    let spectrum = vec![6.0, 5.0, 4.0, 2.0, 0.2, 0.1];
    println!("input spectrum: {spectrum:?}\n");

    for kind in RegularizerKind::ALL {
        // Coefficients picked so each method thresholds the top modes by
        // roughly 2: absolute threshold, fraction of the input trace, and
        // the implicit squared-output cutoff.
        let alpha = match kind {
            RegularizerKind::ScaleDependent => 2.0,
            RegularizerKind::InputOutput => 2.0 / spectrum.iter().sum::<f64>(),
            RegularizerKind::SquaredOutput => 2.0 / 9.0,
        };
        let problem =
            OfflineProblem::from_spectrum(spectrum.clone(), spectrum.len(), alpha, kind, 1)?;
        let solution = solve_offline(&problem)?;
        let values: Vec<String> = solution
            .output_eigenvalues
            .iter()
            .map(|v| format_float(*v))
            .collect();
        println!(
            "{:<16} alpha={:<16} output: [{}]  rank {}",
            kind.slug(),
            format_float(alpha),
            values.join(", "),
            solution.rank
        );
    }

    // The squared-output closed form equals exhaustive support search.
    let alpha = 1.0;
    let closed = solve_offline(&OfflineProblem::from_spectrum(
        vec![6.0, 5.0, 4.0],
        3,
        alpha,
        RegularizerKind::SquaredOutput,
        1,
    )?)?;
    let brute = nnls_bruteforce(&[6.0, 5.0, 4.0], alpha)?;
    println!("\nsquared-output closed form vs brute force at alpha=1:");
    println!("  closed: {:?}", closed.output_eigenvalues);
    println!("  brute:  {brute:?}");
    let worst = closed
        .output_eigenvalues
        .iter()
        .zip(&brute)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("  max deviation: {}", format_float(worst));
    Ok(())
}
