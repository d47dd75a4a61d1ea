//! The whole chain on the shipped 57-column building: load the inventory,
//! fuse evidence per column, and estimate the repair-cost distribution.
//!
//! ```bash
//! cargo run -p rcdamage --example case_study_pipeline
//! ```

use std::path::Path;

use rcdamage::cost_model::{quantile, simulate_total, SimulationOptions};
use rcdamage::formats::{FragilityFile, InventoryFile};
use rcdamage::fusion::assess_building;

fn main() -> rcdamage::Result<()> {
    let case = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/case");
    let inv_path = case.join("inventory.json");
    let inventory = InventoryFile::load(&inv_path)?;
    let located = inventory.component_inputs(&inv_path)?;
    let inputs: Vec<_> = located.iter().map(|l| l.input.clone()).collect();
    let assessment = assess_building(inventory.building.collapse_probability, 0.5, 0.5, &inputs)?;
    let [ds0, ds1, ds2, ds3] = assessment.state_counts();
    println!("{} columns: DS0 {ds0}, DS1 {ds1}, DS2 {ds2}, DS3 {ds3}", inputs.len());
    let upgraded = assessment
        .components
        .iter()
        .filter(|c| c.final_state != c.classifier_state)
        .count();
    println!("{upgraded} columns raised to DS3 by exposed steel");

    let groups = inventory.performance_groups(&located, &assessment);
    let replacement = assessment.collapsed.then_some(inventory.building.replacement_cost);
    let opts = SimulationOptions {
        realizations: 10_000,
        seed: 0,
        costs_are_means: false,
    };
    for name in ["fragility_zero_dispersion.json", "fragility.json"] {
        let db = FragilityFile::load(&case.join(name))?.database()?;
        let curve = simulate_total(&groups, &db, &opts, replacement)?;
        println!(
            "{name}: median {:.0}, 10-90% [{:.0}, {:.0}]",
            quantile(&curve, 0.5)?,
            quantile(&curve, 0.1)?,
            quantile(&curve, 0.9)?
        );
    }
    Ok(())
}
