//! Monte-Carlo check of the estimation-error and SINR closed forms.
//!
//!     cargo run --release --example closed_form_validation -- [trials]

use mimo_pilot::harness::{run_experiment, ExperimentId, ExperimentPlan};
use mimo_pilot::SystemConfig;

fn main() -> mimo_pilot::Result<()> {
    let trials = std::env::args().nth(1).map_or(10_000, |a| a.parse().expect("trial count"));
    let plan = ExperimentPlan { n_small: trials, ..ExperimentPlan::desk(ExperimentId::Validate) };
    let report = run_experiment(&plan, &SystemConfig::default())?;
    println!("{:<9} {:>3} {:>5} {:>4} {:>11} {:>11} {:>8}", "quantity", "M", "est", "user", "monte-carlo", "closed", "rel.err");
    for r in &report.validation {
        println!(
            "{:<9} {:>3} {:>5} {:>4} {:>11.5} {:>11.5} {:>7.2}%{}",
            r.quantity,
            r.antennas,
            r.method.to_string(),
            r.user + 1,
            r.monte_carlo,
            r.closed_form,
            100.0 * r.relative_error(),
            if r.within_sigmas(3.0) { "" } else { "  (beyond 3 se)" }
        );
    }
    Ok(())
}
