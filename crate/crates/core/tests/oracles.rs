//! Independent oracles and property checks for the numerical modules.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rcdamage::anchor_clustering::kmeans_iou;
use rcdamage::classifier_eval::confusion;
use rcdamage::cost_model::{
    quantile, rc_column_entry, realization_rng, sample_cost, simulate_total, unit_cost, Distribution,
    FragilityDatabase, LossCurve, PerformanceGroup, SimulationOptions,
};
use rcdamage::detector_eval::average_precision;
use rcdamage::fusion::{determine_damage_state, ClassificationOutput};
use rcdamage::geometry::shape_iou;
use rcdamage::yolo_decode::{AnchorPrior, DetectionTensor};
use rcdamage::yolo_loss::{compute_loss, GroundTruthBox, LossBreakdown, LossWeights};
use rcdamage::{BoundingBox, DamageState};

// ------------------------------------------------------------------ AP oracle

/// Enumerate every score cut-off (ranked prefix), then integrate
/// `max{precision at cut-offs whose recall >= r}` over r in (0, 1]. Recall
/// only takes values m/N, so the integrand is constant on ((m-1)/N, m/N].
fn brute_force_ap(labels: &[bool], num_truths: usize) -> f64 {
    let cutoffs: Vec<(f64, f64)> = (1..=labels.len())
        .map(|k| {
            let tp = labels[..k].iter().filter(|&&l| l).count() as f64;
            (tp / num_truths as f64, tp / k as f64)
        })
        .collect();
    (1..=num_truths)
        .map(|m| {
            let r = m as f64 / num_truths as f64;
            let best = cutoffs
                .iter()
                .filter(|(rec, _)| *rec >= r - 1e-12)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max);
            best / num_truths as f64
        })
        .sum()
}

#[test]
fn brute_force_oracle_hand_case() {
    assert!((brute_force_ap(&[true, false, true], 2) - 5.0 / 6.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn ap_matches_brute_force(labels in prop::collection::vec(any::<bool>(), 0..=8), extra in 0usize..4) {
        let tp = labels.iter().filter(|&&l| l).count();
        let n = tp + extra;
        prop_assume!(n > 0);
        let curve = average_precision(&labels, n);
        prop_assert!((curve.ap - brute_force_ap(&labels, n)).abs() < 1e-9);
        for w in curve.points.windows(2) {
            prop_assert!(w[1].recall >= w[0].recall);
        }
        for p in &curve.points {
            prop_assert!((0.0..=1.0).contains(&p.recall) && (0.0..=1.0).contains(&p.precision));
        }
        // AP is 1 exactly when every truth is recalled before the first FP.
        let recalled_before_fp = labels.len() >= n && labels[..n].iter().all(|&l| l);
        prop_assert_eq!(curve.ap == 1.0, recalled_before_fp);
        if labels.iter().all(|&l| l) && tp == n && !labels.is_empty() {
            prop_assert_eq!(curve.ap, 1.0);
        }

        let mut longer = labels.clone();
        longer.push(false);
        prop_assert!(average_precision(&longer, n).ap <= curve.ap);
    }
}

// ------------------------------------------------------------------ loss

fn loss_fixture() -> (DetectionTensor, Vec<AnchorPrior>, Vec<GroundTruthBox>) {
    // 4x4 grid over 128x128, two anchors, two classes; dyadic values so
    // f32 storage is exact under the dyadic perturbations below.
    let anchors = vec![
        AnchorPrior::new(24.0, 40.0).unwrap(),
        AnchorPrior::new(60.0, 30.0).unwrap(),
    ];
    let mut t = DetectionTensor::zeros(4, 4, 2, 2, 128.0, 128.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for r in 0..4 {
        for c in 0..4 {
            for a in 0..2 {
                for v in t.slot_mut(r, c, a) {
                    *v = (rng.random_range(-16i32..16) as f32) / 16.0;
                }
            }
        }
    }
    let truths = vec![
        GroundTruthBox::new(BoundingBox::from_center(45.0, 77.0, 27.0, 36.0).unwrap(), 1),
        GroundTruthBox::new(BoundingBox::from_center(100.0, 20.0, 55.0, 33.0).unwrap(), 0),
    ];
    (t, anchors, truths)
}

fn loss_with(t: &DetectionTensor, anchors: &[AnchorPrior], truths: &[GroundTruthBox], idx: usize, delta: f32) -> f64 {
    let mut values = t.values().to_vec();
    values[idx] += delta;
    let p = DetectionTensor::new(
        t.grid_h,
        t.grid_w,
        t.num_anchors,
        t.num_classes,
        t.image_w,
        t.image_h,
        values,
    )
    .unwrap();
    compute_loss(&p, anchors, truths, LossWeights::default()).unwrap().total
}

#[test]
fn loss_second_differences_scale_quadratically() {
    let (t, anchors, truths) = loss_fixture();
    // truth 0 sits in cell (col 1, row 2), anchor 0
    let responsible = t.index(2, 1, 0, 0);
    let entries = [
        ("t_x", responsible),
        ("t_y", responsible + 1),
        ("t_w", responsible + 2),
        ("t_h", responsible + 3),
        ("t_0", responsible + 4),
        ("logit", responsible + 5),
        ("noobj t_0", t.index(0, 0, 1, 4)),
    ];
    for (name, idx) in entries {
        let base = loss_with(&t, &anchors, &truths, idx, 0.0);
        let curvature: Vec<f64> = [7, 10, 13]
            .iter()
            .map(|&k| {
                let eps = 2f32.powi(-k);
                let d2 = loss_with(&t, &anchors, &truths, idx, eps) + loss_with(&t, &anchors, &truths, idx, -eps)
                    - 2.0 * base;
                d2 / (eps as f64 * eps as f64)
            })
            .collect();
        let scale = curvature[2].abs().max(1e-3);
        for c in &curvature {
            assert!(c.is_finite(), "{name}: {curvature:?}");
            assert!((c - curvature[2]).abs() <= 0.05 * scale + 1e-3, "{name}: {curvature:?}");
        }
    }
}

fn components(l: &LossBreakdown) -> [f64; 5] {
    [l.coord_xy, l.coord_wh, l.obj_conf, l.noobj_conf, l.class_prob]
}

#[test]
fn responsible_offset_only_moves_xy_and_objectness() {
    let (t, anchors, truths) = loss_fixture();
    let base = compute_loss(&t, &anchors, &truths, LossWeights::default()).unwrap();
    let mut values = t.values().to_vec();
    values[t.index(2, 1, 0, 0)] += 0.125;
    let p = DetectionTensor::new(4, 4, 2, 2, 128.0, 128.0, values).unwrap();
    let moved = compute_loss(&p, &anchors, &truths, LossWeights::default()).unwrap();
    let (b, m) = (components(&base), components(&moved));
    assert_ne!(b[0], m[0]);
    assert_ne!(b[2], m[2]);
    assert_eq!(b[1], m[1]);
    assert_eq!(b[3], m[3]);
    assert_eq!(b[4], m[4]);
}

#[test]
fn loss_parts_nonnegative_and_sum() {
    let (t, anchors, truths) = loss_fixture();
    let l = compute_loss(&t, &anchors, &truths, LossWeights::default()).unwrap();
    assert!(components(&l).iter().all(|&c| c >= 0.0));
    let sum: f64 = components(&l).iter().sum();
    assert!((l.total - sum).abs() <= 1e-12 * l.total);
}

// ------------------------------------------------------------------ clustering

fn arb_dims() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1u32..60, 1u32..60), 6..40)
        .prop_map(|v| v.into_iter().map(|(w, h)| (w as f64 * 4.0, h as f64 * 4.0)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cluster_postconditions(dims in arb_dims(), k in 1usize..5, seed in 0u64..1000) {
        let mut distinct = dims.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        prop_assume!(k <= distinct.len());
        let r = kmeans_iou(&dims, k, seed, 2).unwrap();
        prop_assert_eq!(r.anchors.len(), k);
        let mut mean = 0.0;
        for (d, &a) in dims.iter().zip(&r.assignments) {
            let own = shape_iou(d.0, d.1, r.anchors[a].width, r.anchors[a].height);
            for other in &r.anchors {
                prop_assert!(shape_iou(d.0, d.1, other.width, other.height) <= own);
            }
            mean += own;
        }
        mean /= dims.len() as f64;
        prop_assert!((mean - r.mean_iou).abs() < 1e-12);
        prop_assert!(r.mean_iou > 0.0 && r.mean_iou <= 1.0);
        for w in r.anchors.windows(2) {
            prop_assert!(w[0].area() >= w[1].area());
        }
        prop_assert_eq!(&r, &kmeans_iou(&dims, k, seed, 2).unwrap());
        prop_assert!(kmeans_iou(&dims, k, seed, 3).unwrap().mean_iou >= r.mean_iou);
    }
}

// ------------------------------------------------------------------ classifier / fusion

proptest! {
    #[test]
    fn confusion_ignores_sample_order(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..50), rot in 0usize..50) {
        let names = ["DS0", "DS1", "DS2", "DS3"];
        let p: Vec<&str> = pairs.iter().map(|x| names[x.0]).collect();
        let t: Vec<&str> = pairs.iter().map(|x| names[x.1]).collect();
        let a = confusion(&p, &t, &names).unwrap();
        let mut rotated = pairs.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        let p2: Vec<&str> = rotated.iter().map(|x| names[x.0]).collect();
        let t2: Vec<&str> = rotated.iter().map(|x| names[x.1]).collect();
        prop_assert_eq!(a, confusion(&p2, &t2, &names).unwrap());
    }

    #[test]
    fn fusion_never_downgrades(raw in prop::array::uniform4(0.0..1.0f64), scores in prop::collection::vec(0.0..=1.0f64, 0..4), thr in 0.0..=1.0f64) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 1e-3);
        let cls = ClassificationOutput::new(raw.map(|r| r / sum)).unwrap();
        let dets: Vec<BoundingBox> = scores.iter().map(|&s| BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap().with_score(s).unwrap()).collect();
        let a = determine_damage_state("c", &cls, &dets, thr).unwrap();
        prop_assert!(a.final_state >= a.classifier_state);
        prop_assert_eq!(a.final_state == DamageState::DS3 && a.classifier_state != DamageState::DS3, a.steel_detected && a.classifier_state != DamageState::DS3);
        prop_assert_eq!(a.clone(), determine_damage_state("c", &cls, &dets, thr).unwrap());
    }
}

// ------------------------------------------------------------------ cost model

#[test]
fn lognormal_sampling_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_cost(1000.0, 0.3, Distribution::Lognormal, &mut rng).unwrap())
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let curve = LossCurve::from_realizations(draws, 0);
    let median = quantile(&curve, 0.5).unwrap();
    assert!((median / 1000.0 - 1.0).abs() < 0.01, "median {median}");
    let expected_mean = 1000.0 * (0.045f64).exp();
    assert!((mean / expected_mean - 1.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn quantile_of_lognormal_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| sample_cost(1000.0, 0.3, Distribution::Lognormal, &mut rng).unwrap())
        .collect();
    let q = quantile(&LossCurve::from_realizations(draws, 7), 0.5).unwrap();
    assert!((q / 1000.0 - 1.0).abs() < 0.01, "{q}");
}

#[test]
fn normal_option_mean_and_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<f64> = (0..200_000)
        .map(|_| sample_cost(1000.0, 0.1, Distribution::Normal, &mut rng).unwrap())
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!((mean - 1000.0).abs() < 2.0);
    assert!((sd - 100.0).abs() < 2.0);
}

proptest! {
    #[test]
    fn unit_cost_nonincreasing_and_continuous(q1 in 0.01..100.0f64, q2 in 0.01..100.0f64, ds in 0usize..4) {
        let e = rc_column_entry(5.0, 50.0);
        let ds = DamageState::from_index(ds).unwrap();
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(unit_cost(&e, ds, lo).unwrap() >= unit_cost(&e, ds, hi).unwrap());
        for edge in [5.0, 50.0] {
            let left = unit_cost(&e, ds, edge - 1e-9).unwrap();
            let right = unit_cost(&e, ds, edge + 1e-9).unwrap();
            prop_assert!((left - right).abs() < 1e-3);
        }
    }
}

fn column_db(dispersion: Option<f64>) -> FragilityDatabase {
    let mut e = rc_column_entry(5.0, 50.0);
    if let Some(d) = dispersion {
        for s in &mut e.states {
            s.dispersion = d;
        }
    }
    FragilityDatabase::new([e]).unwrap()
}

fn group(states: Vec<DamageState>) -> PerformanceGroup {
    PerformanceGroup {
        fragility_id: "B1041.031a".into(),
        quantity: 1.0,
        component_states: states,
    }
}

#[test]
fn upgrading_a_component_raises_deterministic_total() {
    use DamageState::*;
    let db = column_db(Some(0.0));
    let opts = SimulationOptions {
        realizations: 3,
        ..Default::default()
    };
    let states = vec![DS0, DS1, DS1, DS2, DS3];
    let base = simulate_total(&[group(states.clone())], &db, &opts, None)
        .unwrap()
        .realizations[0];
    for i in 0..states.len() {
        for up in DamageState::ALL.into_iter().filter(|&d| d > states[i]) {
            let mut s = states.clone();
            s[i] = up;
            let total = simulate_total(&[group(s)], &db, &opts, None).unwrap().realizations[0];
            assert!(total > base, "upgrading component {i} to {up}");
        }
    }
}

#[test]
fn simulation_is_independent_of_thread_count() {
    use DamageState::*;
    let db = column_db(None);
    let groups = [group(vec![DS1, DS2, DS3, DS3]), group(vec![DS2; 6])];
    let opts = SimulationOptions {
        realizations: 2000,
        seed: 99,
        costs_are_means: false,
    };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| simulate_total(&groups, &db, &opts, None).unwrap());
    let b = many.install(|| simulate_total(&groups, &db, &opts, None).unwrap());
    let bits = |c: &LossCurve| c.realizations.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.fitted_median.map(f64::to_bits), b.fitted_median.map(f64::to_bits));
}

#[test]
fn realization_streams_differ() {
    let a: u64 = realization_rng(0, 0).random();
    let b: u64 = realization_rng(0, 1).random();
    let c: u64 = realization_rng(1, 0).random();
    assert!(a != b && a != c && b != c);
}

#[test]
fn fitted_median_inside_bootstrap_interval() {
    use DamageState::*;
    let db = column_db(None);
    let mut states = vec![DS1; 17];
    states.extend(vec![DS2; 26]);
    states.extend(vec![DS3; 14]);
    let opts = SimulationOptions {
        realizations: 10_000,
        seed: 0,
        costs_are_means: false,
    };
    let curve = simulate_total(&[group(states)], &db, &opts, None).unwrap();
    let fitted = curve.fitted_median.unwrap();

    let xs = &curve.realizations;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut medians: Vec<f64> = (0..1000)
        .map(|_| {
            let mut resample: Vec<f64> = (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect();
            let (below, hi, _) = resample.select_nth_unstable_by(5000, f64::total_cmp);
            let lo = below.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo + *hi) / 2.0
        })
        .collect();
    medians.sort_by(f64::total_cmp);
    let (lo, hi) = (medians[5], medians[994]);
    assert!(lo <= fitted && fitted <= hi, "fitted {fitted} outside [{lo}, {hi}]");
}
