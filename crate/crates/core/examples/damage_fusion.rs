//! Fuse classifier probabilities with exposed-steel detections into a final
//! damage state per column, and gate the building on collapse.
//!
//! ```bash
//! cargo run -p rcdamage --example damage_fusion
//! ```

use rcdamage::fusion::{assess_building, reduce_multiview, ClassificationOutput, ComponentInput};
use rcdamage::BoundingBox;

fn main() -> rcdamage::Result<()> {
    let steel = |s| BoundingBox::new(120.0, 80.0, 100.0, 160.0).and_then(|b| b.with_score(s));
    let inputs = vec![
        ComponentInput {
            component_id: "C1".into(),
            classification: ClassificationOutput::new([0.05, 0.80, 0.10, 0.05])?,
            detections: vec![],
        },
        ComponentInput {
            component_id: "C2".into(),
            classification: ClassificationOutput::new([0.0, 0.1, 0.7, 0.2])?,
            detections: vec![steel(0.86)?],
        },
        ComponentInput {
            component_id: "C3".into(),
            classification: ClassificationOutput::new([0.0, 0.1, 0.7, 0.2])?,
            detections: vec![steel(0.31)?],
        },
    ];

    let b = assess_building(0.02, 0.5, 0.5, &inputs)?;
    for c in &b.components {
        println!(
            "{}: classifier {} steel {} -> {}",
            c.component_id, c.classifier_state, c.steel_detected, c.final_state
        );
    }
    println!("state counts DS0..DS3: {:?}", b.state_counts());

    let two_views = reduce_multiview(&b.components[1..])?;
    println!("C2/C3 seen as one column from two views: {}", two_views.final_state);

    let collapsed = assess_building(0.97, 0.5, 0.5, &inputs)?;
    println!("collapse probability 0.97: collapsed = {}", collapsed.collapsed);
    Ok(())
}
