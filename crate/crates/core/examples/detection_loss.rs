//! Evaluate the five-part detection loss for a tensor against ground truth,
//! showing which slot is responsible for each truth.
//!
//! ```bash
//! cargo run -p rcdamage --example detection_loss
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcdamage::yolo_decode::{DetectionTensor, STEEL_EXPOSURE_ANCHORS};
use rcdamage::yolo_loss::{assign_responsibility, compute_loss, GridMeta, GroundTruthBox, LossWeights};
use rcdamage::BoundingBox;

fn main() -> rcdamage::Result<()> {
    let anchors = STEEL_EXPOSURE_ANCHORS;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = DetectionTensor::expected_len(26, 26, 10, 1);
    let values = (0..n).map(|_| rng.random_range(-2.0f32..2.0)).collect();
    let t = DetectionTensor::new(26, 26, 10, 1, 416.0, 416.0, values)?;

    let truths = vec![
        GroundTruthBox::new(BoundingBox::new(40.0, 52.0, 100.0, 96.0)?, 0),
        GroundTruthBox::new(BoundingBox::new(220.0, 60.0, 120.0, 290.0)?, 0),
    ];
    let meta = GridMeta::for_tensor(&t, &anchors);
    for a in assign_responsibility(&truths, &meta)?.assignments {
        let anchor = anchors[a.anchor];
        println!(
            "truth {} -> cell (row {}, col {}), anchor {} ({}x{})",
            a.truth, a.row, a.col, a.anchor, anchor.width, anchor.height
        );
    }

    for w in [
        LossWeights::default(),
        LossWeights {
            lambda_coord: 1.0,
            lambda_noobj: 1.0,
        },
    ] {
        let l = compute_loss(&t, &anchors, &truths, w)?;
        println!(
            "lambda_coord {} lambda_noobj {}: xy {:.4} wh {:.4} obj {:.4} noobj {:.4} class {:.4} total {:.4}",
            w.lambda_coord, w.lambda_noobj, l.coord_xy, l.coord_wh, l.obj_conf, l.noobj_conf, l.class_prob, l.total
        );
    }
    Ok(())
}
