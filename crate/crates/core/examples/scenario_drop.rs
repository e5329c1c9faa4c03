//! One random drop: cell layout, user positions and the target cell's
//! large-scale coefficients.
//!
//!     cargo run --example scenario_drop -- [reuse] [seed]

use mimo_pilot::rng::{seed_schedule, Purpose};
use mimo_pilot::scenario::{beta_slice_csv, build_layout, drop_users, large_scale};
use mimo_pilot::SystemConfig;

fn main() -> mimo_pilot::Result<()> {
    let mut args = std::env::args().skip(1);
    let reuse = args.next().map_or(Ok(1), |a| a.parse()).expect("reuse factor");
    let seed = args.next().map_or(Ok(1), |a| a.parse()).expect("seed");
    let cfg = SystemConfig { reuse, seed, ..SystemConfig::default() };
    cfg.validate()?;

    let layout = build_layout(&cfg)?;
    println!("reuse {reuse}: co-channel distance {:.0} m", layout.reuse_distance);
    for (l, c) in layout.centers.iter().enumerate() {
        println!("  cell {l} at ({:8.1}, {:8.1})", c.x, c.y);
    }

    let positions = drop_users(&cfg, &layout, &mut seed_schedule(cfg.seed, 0, Purpose::Placement));
    let real = large_scale(&cfg, &layout, &positions, &mut seed_schedule(cfg.seed, 0, Purpose::Shadowing))?;
    println!("\ntarget-cell coefficients (row = cell, column = user):");
    print!("{}", beta_slice_csv(&real, 0));
    Ok(())
}
