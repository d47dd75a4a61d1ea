//! Choose anchor priors with IoU-distance k-means and sweep k to see the
//! accuracy/complexity trade-off.
//!
//! ```bash
//! cargo run -p rcdamage --example anchor_clustering
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcdamage::anchor_clustering::{kmeans_iou, sweep_k};
use rcdamage::yolo_decode::STEEL_EXPOSURE_ANCHORS;

fn main() -> rcdamage::Result<()> {
    // box sizes drawn around the shipped anchor preset, with 15% log-noise
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims: Vec<(f64, f64)> = (0..600)
        .map(|_| {
            let a = STEEL_EXPOSURE_ANCHORS[rng.random_range(0..10)];
            let jitter = |rng: &mut ChaCha8Rng| (rng.random_range(-0.15..0.15f64)).exp();
            (a.width * jitter(&mut rng), a.height * jitter(&mut rng))
        })
        .collect();

    let r = kmeans_iou(&dims, 10, 0, 10)?;
    println!(
        "k=10: mean IoU {:.4} after {} iterations (seed {})",
        r.mean_iou, r.iterations, r.seed
    );
    for a in &r.anchors {
        println!("  {:6.1} x {:6.1}", a.width, a.height);
    }

    println!("k,mean_iou");
    for (k, m) in sweep_k(&dims, 1..=12, 0, 5)? {
        println!("{k},{m:.4}");
    }
    Ok(())
}
