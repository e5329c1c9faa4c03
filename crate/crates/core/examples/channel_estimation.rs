//! LS and MMSE estimates of one user's channel under pilot contamination,
//! with the per-trial relative error averaged over many realizations.

use mimo_pilot::airlink::{pilot_phase, sample_channels};
use mimo_pilot::estimators::{estimate, mmse_coefficient, EstimationMethod};
use mimo_pilot::harness::synthetic_two_cell;
use mimo_pilot::metrics::{exp_rcee_closed, rcee_sample};
use mimo_pilot::rng::{seed_schedule, Purpose};
use mimo_pilot::stats::Accumulator;

fn main() -> mimo_pilot::Result<()> {
    let (beta, powers, _) = synthetic_two_cell();
    let antennas = 16;
    println!("MMSE shrinkage for user 1: {:.4}", mmse_coefficient(&powers, &beta, 0));

    for method in [EstimationMethod::Ls, EstimationMethod::Mmse] {
        let mut acc = Accumulator::default();
        for t in 0..5000 {
            let ch = sample_channels(&beta, antennas, &mut seed_schedule(9, t, Purpose::Channel))?;
            let mut noise = seed_schedule(9, t, Purpose::PilotNoise);
            let obs = pilot_phase(&ch, &powers, beta.users(), Some(&mut noise))?;
            let est = estimate(method, &obs, &beta)?;
            acc.push(rcee_sample(ch.get(0, 0), est.get(0))?);
        }
        let closed = exp_rcee_closed(method, antennas, &powers.column(0), &beta.column(0))?;
        println!("{method}: mean relative error {:.4} (closed form {closed})", acc.mean());
    }
    Ok(())
}
