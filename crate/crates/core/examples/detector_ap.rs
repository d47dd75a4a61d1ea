//! Precision-recall curve and average precision for a detector, from
//! greedy IoU matching to the all-points precision envelope.
//!
//! ```bash
//! cargo run -p rcdamage --example detector_ap
//! ```

use rcdamage::detector_eval::{average_precision, evaluate_by_class, mean_average_precision};
use rcdamage::yolo_loss::GroundTruthBox;
use rcdamage::BoundingBox;

fn main() -> rcdamage::Result<()> {
    let gt = |x, y| BoundingBox::new(x, y, 50.0, 50.0).map(|b| GroundTruthBox::new(b, 0));
    let det = |x, y, s| BoundingBox::new(x, y, 50.0, 50.0).and_then(|b| b.with_score(s));
    let truths = vec![vec![gt(0.0, 0.0)?, gt(200.0, 200.0)?], vec![gt(100.0, 40.0)?]];
    let dets = vec![
        vec![det(2.0, 1.0, 0.95)?, det(4.0, 3.0, 0.80)?, det(195.0, 205.0, 0.55)?],
        vec![det(300.0, 300.0, 0.70)?, det(101.0, 38.0, 0.40)?],
    ];

    let curves = evaluate_by_class(&dets, &truths, 0.5);
    for (class, c) in &curves {
        println!("class {class}: AP {:.4} over {} truths", c.ap, c.num_truths);
        for p in &c.points {
            println!("  recall {:.3} precision {:.3}", p.recall, p.precision);
        }
    }
    let all: Vec<_> = curves.into_iter().map(|(_, c)| c).collect();
    println!("mAP {:.4}", mean_average_precision(&all).unwrap_or(0.0));

    let hand = average_precision(&[true, false, true], 2);
    println!("[TP, FP, TP] with two truths: AP {:.6}", hand.ap);
    Ok(())
}
