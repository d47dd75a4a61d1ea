//! Turn a raw 26x26x10x1 detector tensor into scored boxes: sigmoid
//! offsets, exponential anchor scaling, score threshold, then NMS.
//!
//! ```bash
//! cargo run -p rcdamage --example decode_tensor
//! ```

use rcdamage::yolo_decode::{decode_candidates, decode_tensor, DecodeConfig, DetectionTensor, STEEL_EXPOSURE_ANCHORS};

fn main() -> rcdamage::Result<()> {
    let mut t = DetectionTensor::zeros(26, 26, 10, 1, 416.0, 416.0)?;
    println!(
        "tensor {}x{}x{}x(5+{}) = {} floats, {} candidates",
        t.grid_h,
        t.grid_w,
        t.num_anchors,
        t.num_classes,
        t.values().len(),
        t.num_candidates()
    );
    for r in 0..26 {
        for c in 0..26 {
            for a in 0..10 {
                t.slot_mut(r, c, a)[4] = -8.0;
            }
        }
    }
    // one confident hit near cell (row 10, col 7) on anchor 4, and a weaker
    // duplicate from anchor 8 in the same cell
    t.slot_mut(10, 7, 4).copy_from_slice(&[0.4, -0.2, 0.1, 0.3, 3.0, 0.0]);
    t.slot_mut(10, 7, 8).copy_from_slice(&[0.3, -0.1, -0.2, -0.1, 1.5, 0.0]);

    let all = decode_candidates(&t, &STEEL_EXPOSURE_ANCHORS)?;
    let above: Vec<_> = all.iter().filter(|b| b.score.unwrap_or(0.0) >= 0.5).collect();
    println!("{} candidates above 0.5 before NMS", above.len());

    let config = DecodeConfig::new(STEEL_EXPOSURE_ANCHORS.to_vec());
    for b in decode_tensor(&t, &config)? {
        let (cx, cy) = b.center();
        println!(
            "exposed steel: center ({cx:.1}, {cy:.1}) size {:.1}x{:.1} score {:.3}",
            b.width,
            b.height,
            b.score.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
