//! Pilot powers for the bundled three-user table: grouping allocator,
//! equal power, and the reference solver side by side.

use mimo_pilot::estimators::EstimationMethod;
use mimo_pilot::harness::{scheme_allocation, Scheme};
use mimo_pilot::ppa::{objective_value, ppa_allocate, InterferenceProfile, ObjectiveForm, PowerBounds};
use mimo_pilot::scenario::parse_beta_csv;
use mimo_pilot::SystemConfig;

fn main() -> mimo_pilot::Result<()> {
    let cfg = SystemConfig::three_user();
    let beta = parse_beta_csv(mimo_pilot::cli::TABLE_FIXTURE)?.target_slice();
    let p = cfg.total_pilot_power;
    let profile = InterferenceProfile::equal_power(&beta, p)?;
    let bounds = PowerBounds::from_config(&cfg)?;
    println!("budget {p}, box [{}, {}]", bounds.min, bounds.max);

    for method in [EstimationMethod::Ls, EstimationMethod::Mmse] {
        let a = ppa_allocate(method, &profile, p, bounds)?;
        println!("\n{method}: free {:?} at_min {:?} at_max {:?}", a.groups.free, a.groups.at_min, a.groups.at_max);
        for scheme in [Scheme::Ppa, Scheme::Eppa, Scheme::Ref] {
            let rho = scheme_allocation(scheme, method, &cfg, &beta)?;
            let obj = objective_value(method, &rho, &profile, cfg.antennas, ObjectiveForm::Exact);
            let shown: Vec<String> = rho.iter().map(|r| format!("{r:7.1}")).collect();
            println!("  {:<4} rho [{}]  mean error {obj:.5}", scheme.to_string(), shown.join(" "));
        }
    }
    Ok(())
}
