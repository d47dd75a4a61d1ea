//! IoU between boxes and class-aware non-maximum suppression.
//!
//! ```bash
//! cargo run -p rcdamage --example box_geometry
//! ```

use rcdamage::geometry::{iou, nms, shape_iou};
use rcdamage::BoundingBox;

fn main() -> rcdamage::Result<()> {
    let a = BoundingBox::new(0.0, 0.0, 100.0, 100.0)?;
    let b = BoundingBox::new(50.0, 0.0, 100.0, 100.0)?;
    println!("IoU of half-overlapping squares: {:.4}", iou(&a, &b));
    println!(
        "co-centered 104x98 vs 174x309: {:.4}",
        shape_iou(104.0, 98.0, 174.0, 309.0)
    );

    // three overlapping hits on one bar, plus a separate one of another class
    let raw = vec![
        BoundingBox::new(10.0, 10.0, 80.0, 40.0)?
            .with_score(0.92)?
            .with_class(0),
        BoundingBox::new(14.0, 12.0, 78.0, 38.0)?
            .with_score(0.88)?
            .with_class(0),
        BoundingBox::new(8.0, 9.0, 84.0, 44.0)?.with_score(0.61)?.with_class(0),
        BoundingBox::new(12.0, 10.0, 80.0, 40.0)?
            .with_score(0.70)?
            .with_class(1),
    ];
    for thr in [0.3, 0.5, 0.9] {
        let kept = nms(&raw, thr)?;
        println!("nms iou > {thr}: kept {} of {}", kept.len(), raw.len());
        for k in &kept {
            println!(
                "  class {:?} score {:.2} at ({:.0}, {:.0}) {}x{}",
                k.class_id,
                k.score.unwrap_or(f64::NAN),
                k.x_min,
                k.y_min,
                k.width,
                k.height
            );
        }
    }
    Ok(())
}
