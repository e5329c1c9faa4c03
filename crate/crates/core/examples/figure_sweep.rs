//! Any figure data set at desk scale, written as CSV.
//!
//!     cargo run --release --example figure_sweep -- 5a out.csv

use mimo_pilot::harness::{run_experiment, ExperimentId, ExperimentPlan};
use mimo_pilot::SystemConfig;

fn main() -> mimo_pilot::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: ExperimentId = args.next().as_deref().unwrap_or("4b").parse()?;
    let report = run_experiment(&ExperimentPlan::desk(id), &SystemConfig::default())?;
    let csv = report.to_csv()?;
    match args.next() {
        Some(path) => std::fs::write(&path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
