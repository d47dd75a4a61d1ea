//! K-means over box dimensions with `1 - IoU` as the distance, where every
//! box is compared to a centroid placed on the same center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::shape_iou;
use crate::yolo_decode::AnchorPrior;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterResult {
    /// Sorted by area, largest first.
    pub anchors: Vec<AnchorPrior>,
    pub mean_iou: f64,
    /// Index into `anchors` for each input box.
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Seed of the restart that produced this result.
    pub seed: u64,
}

fn validate(dims: &[(f64, f64)], k: usize) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::input("no box dimensions to cluster"));
    }
    if k == 0 {
        return Err(Error::input("k must be >= 1"));
    }
    if let Some((i, d)) = dims
        .iter()
        .enumerate()
        .find(|(_, (w, h))| !(w.is_finite() && *w > 0.0 && h.is_finite() && *h > 0.0))
    {
        return Err(Error::input(format!("box {i} has non-positive dimensions {d:?}")));
    }
    let mut distinct: Vec<(u64, u64)> = dims.iter().map(|(w, h)| (w.to_bits(), h.to_bits())).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::input(format!(
            "k = {k} exceeds the {} distinct box shapes",
            distinct.len()
        )));
    }
    Ok(())
}

fn nearest(centroids: &[(f64, f64)], (w, h): (f64, f64)) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &(cw, ch)) in centroids.iter().enumerate() {
        let v = shape_iou(w, h, cw, ch);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// k-means++ seeding with `(1 - IoU)^2` weights.
fn init_centroids(dims: &[(f64, f64)], k: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut centroids = vec![dims[rng.random_range(0..dims.len())]];
    while centroids.len() < k {
        let weights: Vec<f64> = dims
            .iter()
            .map(|&d| {
                let dist = 1.0 - nearest(&centroids, d).1;
                dist * dist
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 && target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // the fallthrough index may sit on an existing centroid
            if weights[chosen] == 0.0 {
                chosen = weights.iter().rposition(|w| *w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..dims.len())
        };
        centroids.push(dims[pick]);
    }
    centroids
}

struct Run {
    centroids: Vec<(f64, f64)>,
    assignments: Vec<usize>,
    mean_iou: f64,
    iterations: usize,
    seed: u64,
}

fn run_once(dims: &[(f64, f64)], k: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_centroids(dims, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        let scored: Vec<(usize, f64)> = dims.iter().map(|&d| nearest(&centroids, d)).collect();
        let next: Vec<usize> = scored.iter().map(|s| s.0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
        iterations += 1;

        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&(w, h), &c) in dims.iter().zip(&assignments) {
            sums[c].0 += w;
            sums[c].1 += h;
            sums[c].2 += 1;
        }
        // worst-fitting boxes first, for reseeding empty clusters
        let mut worst: Vec<usize> = (0..dims.len()).collect();
        worst.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1).then(a.cmp(&b)));
        let mut worst = worst.into_iter();
        for (c, &(sw, sh, n)) in sums.iter().enumerate() {
            if n > 0 {
                centroids[c] = (sw / n as f64, sh / n as f64);
            } else if let Some(i) = worst.next() {
                centroids[c] = dims[i];
            }
        }
    }

    let scored: Vec<(usize, f64)> = dims.iter().map(|&d| nearest(&centroids, d)).collect();
    let mean_iou = scored.iter().map(|s| s.1).sum::<f64>() / dims.len() as f64;
    Run {
        centroids,
        assignments: scored.into_iter().map(|s| s.0).collect(),
        mean_iou,
        iterations,
        seed,
    }
}

/// Cluster `dims` (width, height) into `k` anchor priors. Restart `r` uses
/// seed `seed + r`; the run with the highest mean IoU wins, ties going to the
/// lowest seed.
pub fn kmeans_iou(dims: &[(f64, f64)], k: usize, seed: u64, restarts: usize) -> Result<ClusterResult> {
    validate(dims, k)?;
    if restarts == 0 {
        return Err(Error::input("restarts must be >= 1"));
    }
    let runs: Vec<Run> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| run_once(dims, k, seed.wrapping_add(r)))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.mean_iou > best.mean_iou { run } else { best })
        .expect("restarts >= 1");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let (aw, ah) = best.centroids[a];
        let (bw, bh) = best.centroids[b];
        (bw * bh).total_cmp(&(aw * ah)).then(a.cmp(&b))
    });
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(ClusterResult {
        anchors: order
            .iter()
            .map(|&i| AnchorPrior {
                width: best.centroids[i].0,
                height: best.centroids[i].1,
            })
            .collect(),
        mean_iou: best.mean_iou,
        assignments: best.assignments.iter().map(|&c| rank[c]).collect(),
        iterations: best.iterations,
        seed: best.seed,
    })
}

/// Mean IoU for every `k` in `ks`, for plotting the accuracy/anchor-count
/// trade-off.
pub fn sweep_k(
    dims: &[(f64, f64)],
    ks: impl IntoIterator<Item = usize>,
    seed: u64,
    restarts: usize,
) -> Result<Vec<(usize, f64)>> {
    ks.into_iter()
        .map(|k| kmeans_iou(dims, k, seed, restarts).map(|r| (k, r.mean_iou)))
        .collect()
}
