//! Monte Carlo repair cost for a set of damaged columns: per-component
//! lognormal draws summed per realization, then a fitted lognormal curve.
//!
//! ```bash
//! cargo run -p rcdamage --release --example repair_cost
//! ```

use rcdamage::cost_model::{
    quantile, rc_column_entry, simulate_total, FragilityDatabase, PerformanceGroup, SimulationOptions,
};
use rcdamage::DamageState;

fn main() -> rcdamage::Result<()> {
    let db = FragilityDatabase::new([rc_column_entry(5.0, 50.0)])?;
    let mut states = vec![DamageState::DS1; 17];
    states.extend([DamageState::DS2; 26]);
    states.extend([DamageState::DS3; 14]);
    let groups = [PerformanceGroup {
        fragility_id: "B1041.031a".into(),
        quantity: 1.0,
        component_states: states,
    }];

    for costs_are_means in [false, true] {
        let opts = SimulationOptions {
            realizations: 10_000,
            seed: 0,
            costs_are_means,
        };
        let curve = simulate_total(&groups, &db, &opts, None)?;
        println!(
            "costs as {}: p10 {:.0}  median {:.0}  p90 {:.0}  fitted median {:.0} beta {:.4}",
            if costs_are_means { "means  " } else { "medians" },
            quantile(&curve, 0.1)?,
            quantile(&curve, 0.5)?,
            quantile(&curve, 0.9)?,
            curve.fitted_median.unwrap_or(f64::NAN),
            curve.fitted_dispersion.unwrap_or(f64::NAN)
        );
    }

    let total = simulate_total(
        &groups,
        &db,
        &SimulationOptions {
            realizations: 1000,
            seed: 0,
            costs_are_means: false,
        },
        Some(12.5e6),
    )?;
    println!("collapsed building: every realization = {:.0}", total.realizations[0]);
    Ok(())
}
