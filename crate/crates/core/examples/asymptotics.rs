//! High-power behaviour: the allocator's estimation error as the budget
//! grows, against the limiting groups it converges to.

use mimo_pilot::estimators::EstimationMethod;
use mimo_pilot::metrics::{exp_rcee_eppa_high_power, exp_rcee_limit};
use mimo_pilot::ppa::{asymptotic_groups, equal_fractions, ppa_allocate, InterferenceProfile, PowerBounds};
use mimo_pilot::scenario::{parse_beta_csv, PowerMatrix};
use mimo_pilot::{db_to_linear, SystemConfig};

fn main() -> mimo_pilot::Result<()> {
    let cfg = SystemConfig::three_user();
    let beta = parse_beta_csv(mimo_pilot::cli::TABLE_FIXTURE)?.target_slice();
    let users = beta.users();
    for method in [EstimationMethod::Ls, EstimationMethod::Mmse] {
        let groups = asymptotic_groups(method, &beta, &equal_fractions(beta.cells(), users), cfg.mu)?;
        println!("{method}");
        for db in [20.0, 40.0, 60.0, 80.0, 100.0] {
            let p = db_to_linear(db);
            let profile = InterferenceProfile::equal_power(&beta, p)?;
            let a = ppa_allocate(method, &profile, p, PowerBounds::from_mu(users, p, cfg.mu)?)?;
            let pm = PowerMatrix::uniform(beta.cells(), users, p / users as f64).with_target(&a.rho);
            let errs: Vec<String> =
                (0..users).map(|k| format!("{:.5}", exp_rcee_limit(method, &pm.column(k), &beta.column(k)))).collect();
            println!("  {db:>5} dB  {}", errs.join("  "));
        }
        let limit: Vec<String> = (0..users).map(|k| format!("{:.5}", groups.exp_rcee(k))).collect();
        let equal: Vec<String> =
            (0..users).map(|k| format!("{:.5}", exp_rcee_eppa_high_power(method, &beta.column(k)))).collect();
        println!("  limit     {}\n  equal     {}", limit.join("  "), equal.join("  "));
    }
    Ok(())
}
