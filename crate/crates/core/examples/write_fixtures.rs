//! Regenerates the fixture set under `data/`: the 57-column case-study
//! building, small detector/classifier/anchor fixtures, and one invalid file
//! per validated invariant.
//!
//! ```bash
//! cargo run -p rcdamage --example write_fixtures [-- <output dir>]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rcdamage::cost_model::{rc_column_entry, FragilityEntry};
use rcdamage::formats::{
    anchors_to_csv, save_tensor, to_canonical_json, AnnotatedBox, AnnotatedImage, AnnotationFile, BuildingRecord,
    ComponentRecord, DetectionFile, DetectionSource, FragilityFile, GroupRecord, ImageDetections, InventoryFile,
    LabelFile,
};
use rcdamage::yolo_decode::{decode_tensor, DecodeConfig, DetectionTensor, STEEL_EXPOSURE_ANCHORS};
use rcdamage::{BoundingBox, DamageState};
use serde_json::json;

const QUANTITY_NOTE: &str = "q_min/q_max are placeholders: the published cost table gives no quantity thresholds";

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

/// 26x26 grid, ten anchors, one class, background everywhere except `hot`
/// slots `(row, col, anchor, [t_x, t_y, t_w, t_h, t_0])`.
fn case_tensor(hot: &[(usize, usize, usize, [f32; 5])]) -> DetectionTensor {
    let mut t = DetectionTensor::zeros(26, 26, 10, 1, 416.0, 416.0).unwrap();
    for r in 0..26 {
        for c in 0..26 {
            for a in 0..10 {
                t.slot_mut(r, c, a)[4] = -6.0;
            }
        }
    }
    for &(r, c, a, v) in hot {
        t.slot_mut(r, c, a)[..5].copy_from_slice(&v);
    }
    t
}

fn inline_det(x: f64, y: f64, w: f64, h: f64, score: f64) -> BoundingBox {
    BoundingBox::new(x, y, w, h)
        .unwrap()
        .with_score(score)
        .unwrap()
        .with_class(0)
}

fn case_study(dir: &Path) {
    use DamageState::*;

    write(&dir.join("anchors.csv"), &anchors_to_csv(&STEEL_EXPOSURE_ANCHORS));

    let ds1 = [[0.1, 0.7, 0.15, 0.05], [0.05, 0.6, 0.3, 0.05], [0.2, 0.5, 0.2, 0.1]];
    let ds2 = [[0.05, 0.15, 0.6, 0.2], [0.0, 0.2, 0.7, 0.1], [0.05, 0.1, 0.45, 0.4]];
    let ds3 = [[0.0, 0.05, 0.15, 0.8], [0.0, 0.1, 0.3, 0.6]];
    let masked_ds3 = [0.05, 0.2, 0.5, 0.25];

    // (classifier state, steel) for all 57 columns, interleaved over storeys.
    let mut plan: Vec<(DamageState, bool)> = Vec::new();
    plan.extend(std::iter::repeat_n((DS1, false), 17));
    plan.extend(std::iter::repeat_n((DS2, false), 26));
    plan.extend(std::iter::repeat_n((DS3, false), 10));
    plan.extend(std::iter::repeat_n((DS2, true), 4));
    let mut storeys: Vec<Vec<ComponentRecord>> = vec![Vec::new(); 3];
    let mut steel_seen = 0;
    let mut file_backed: Vec<String> = Vec::new();
    for (i, &(state, steel)) in plan.iter().enumerate() {
        let storey = i % 3;
        let id = format!("S{}-C{:02}", storey + 1, storeys[storey].len() + 1);
        let (probs, detections) = match (state, steel) {
            (DS1, _) if i % 6 == 0 => (
                ds1[i % 3],
                DetectionSource::Inline(vec![inline_det(150.0, 40.0, 60.0, 90.0, 0.31)]),
            ),
            (DS1, _) => (ds1[i % 3], DetectionSource::Inline(vec![])),
            (DS2, false) => (ds2[i % 3], DetectionSource::Inline(vec![])),
            (DS3, _) => (ds3[i % 2], DetectionSource::Inline(vec![])),
            (DS2, true) => {
                steel_seen += 1;
                match steel_seen {
                    1 | 2 => {
                        file_backed.push(id.clone());
                        (masked_ds3, DetectionSource::File(format!("detections/{id}.json")))
                    }
                    3 => (
                        masked_ds3,
                        DetectionSource::Inline(vec![inline_det(180.0, 210.0, 70.0, 140.0, 0.86)]),
                    ),
                    _ => (
                        masked_ds3,
                        DetectionSource::Inline(vec![inline_det(90.0, 120.0, 104.0, 98.0, 0.64)]),
                    ),
                }
            }
            _ => unreachable!(),
        };
        storeys[storey].push(ComponentRecord {
            component_id: id,
            classifier_probabilities: probs.to_vec(),
            detections,
        });
    }
    // Raw detector tensors for the two file-backed columns: classifier says
    // DS2 but the detector finds exposed bars.
    let tensors = [
        case_tensor(&[(12, 9, 3, [0.2, -0.4, 0.1, -0.2, 3.0])]),
        case_tensor(&[
            (10, 10, 4, [0.6, 0.0, 0.0, 0.0, 2.5]),
            (10, 11, 4, [-0.8, 0.0, 0.05, 0.0, 1.5]),
            (20, 4, 9, [0.0, 0.0, 0.0, 0.0, -0.5]),
        ]),
    ];
    let config = DecodeConfig::new(STEEL_EXPOSURE_ANCHORS.to_vec());
    fs::create_dir_all(dir.join("tensors")).unwrap();
    for (id, t) in file_backed.iter().zip(&tensors) {
        save_tensor(&dir.join(format!("tensors/{id}.json")), t, &format!("{id}.bin")).unwrap();
        let dets = decode_tensor(t, &config).unwrap();
        assert_eq!(dets.len(), 1);
        let file = DetectionFile {
            images: vec![ImageDetections {
                id: id.clone(),
                detections: dets,
            }],
        };
        write(&dir.join(format!("detections/{id}.json")), &to_canonical_json(&file));
    }

    let inventory = InventoryFile {
        building: BuildingRecord {
            replacement_cost: 12_500_000.0,
            collapse_probability: 0.02,
        },
        groups: storeys
            .into_iter()
            .map(|components| GroupRecord {
                fragility_id: "B1041.031a".into(),
                quantity: 1.0,
                components,
            })
            .collect(),
    };
    write(&dir.join("inventory.json"), &to_canonical_json(&inventory));

    let mut collapsed = inventory.clone();
    collapsed.building.collapse_probability = 0.97;
    write(&dir.join("inventory_collapsed.json"), &to_canonical_json(&collapsed));

    let entry = rc_column_entry(5.0, 50.0);
    let fragility = FragilityFile::from_entries(std::slice::from_ref(&entry), Some(QUANTITY_NOTE));
    write(&dir.join("fragility.json"), &to_canonical_json(&fragility));
    let mut zero = entry.clone();
    for s in &mut zero.states {
        s.dispersion = 0.0;
    }
    let zero = FragilityFile::from_entries(&[zero], Some(QUANTITY_NOTE));
    write(&dir.join("fragility_zero_dispersion.json"), &to_canonical_json(&zero));
}

fn ann_box(x: f64, y: f64, w: f64, h: f64) -> AnnotatedBox {
    AnnotatedBox {
        x_min: x,
        y_min: y,
        width: w,
        height: h,
        class_id: 0,
    }
}

fn detector(dir: &Path) {
    let annotations = AnnotationFile {
        images: vec![AnnotatedImage {
            id: "img0".into(),
            width: 416,
            height: 416,
            boxes: vec![ann_box(40.0, 40.0, 100.0, 80.0), ann_box(250.0, 200.0, 60.0, 150.0)],
        }],
    };
    write(&dir.join("annotations.json"), &to_canonical_json(&annotations));
    let dets = |d: Vec<BoundingBox>| DetectionFile {
        images: vec![ImageDetections {
            id: "img0".into(),
            detections: d,
        }],
    };
    let three = dets(vec![
        inline_det(42.0, 40.0, 100.0, 80.0, 0.9),
        inline_det(44.0, 42.0, 98.0, 80.0, 0.8),
        inline_det(250.0, 205.0, 60.0, 150.0, 0.7),
    ]);
    write(&dir.join("detections.json"), &to_canonical_json(&three));
    let perfect = dets(
        annotations.images[0]
            .boxes
            .iter()
            .map(|b| inline_det(b.x_min, b.y_min, b.width, b.height, 1.0))
            .collect(),
    );
    write(&dir.join("detections_perfect.json"), &to_canonical_json(&perfect));
    write(
        &dir.join("detections_none.json"),
        &to_canonical_json(&DetectionFile { images: vec![] }),
    );
}

fn classifier(dir: &Path) {
    let classes: Vec<String> = DamageState::ALL.iter().map(|d| d.label().to_string()).collect();
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let labels = LabelFile {
        classes: classes.clone(),
        labels: s(&["DS0", "DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS3", "DS3"]),
    };
    let preds = LabelFile {
        classes,
        labels: s(&["DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS2", "DS3", "DS3"]),
    };
    write(&dir.join("labels.json"), &to_canonical_json(&labels));
    write(&dir.join("predictions.json"), &to_canonical_json(&preds));
}

fn anchors(dir: &Path) {
    let mut images = Vec::new();
    for i in 0..10 {
        images.push(AnnotatedImage {
            id: format!("a{i}"),
            width: 416,
            height: 416,
            boxes: vec![
                ann_box(10.0 + i as f64, 20.0, 50.0, 50.0),
                ann_box(150.0, 100.0 + i as f64, 200.0, 100.0),
            ],
        });
    }
    write(
        &dir.join("two_shapes.json"),
        &to_canonical_json(&AnnotationFile { images }),
    );
    let identical = AnnotationFile {
        images: vec![AnnotatedImage {
            id: "same".into(),
            width: 416,
            height: 416,
            boxes: vec![ann_box(0.0, 0.0, 100.0, 200.0); 5],
        }],
    };
    write(&dir.join("identical.json"), &to_canonical_json(&identical));
}

/// One file per validated invariant, each derived from a valid document by
/// a single edit.
fn invalid(dir: &Path) {
    let ann = json!({"images": [{"id": "x", "width": 100, "height": 100, "boxes": [
        {"x_min": 10.0, "y_min": 10.0, "width": 20.0, "height": 20.0, "class_id": 0}]}]});
    let mut out_of_bounds = ann.clone();
    out_of_bounds["images"][0]["boxes"][0]["x_min"] = json!(90.0);
    let mut zero_width = ann.clone();
    zero_width["images"][0]["boxes"][0]["width"] = json!(0.0);
    let mut missing_key = ann.clone();
    missing_key["images"][0].as_object_mut().unwrap().remove("height");

    let det = json!({"images": [{"id": "x", "detections": [
        {"x_min": 1.0, "y_min": 1.0, "width": 5.0, "height": 5.0, "score": 0.5, "class_id": 0}]}]});
    let mut no_score = det.clone();
    no_score["images"][0]["detections"][0]
        .as_object_mut()
        .unwrap()
        .remove("score");
    let mut bad_score = det.clone();
    bad_score["images"][0]["detections"][0]["score"] = json!(1.5);

    let inv = json!({"building": {"replacement_cost": 1000.0, "collapse_probability": 0.1},
        "groups": [{"fragility_id": "B1041.031a", "quantity": 1.0, "components": [
            {"component_id": "c1", "classifier_probabilities": [0.1, 0.2, 0.3, 0.4], "detections": []}]}]});
    let mut prob_sum = inv.clone();
    prob_sum["groups"][0]["components"][0]["classifier_probabilities"] = json!([0.2, 0.2, 0.3, 0.4]);
    let mut prob_count = inv.clone();
    prob_count["groups"][0]["components"][0]["classifier_probabilities"] = json!([0.5, 0.5]);
    let mut collapse = inv.clone();
    collapse["building"]["collapse_probability"] = json!(1.2);
    let mut quantity = inv.clone();
    quantity["groups"][0]["quantity"] = json!(0.0);
    let mut replacement = inv.clone();
    replacement["building"]["replacement_cost"] = json!(-1.0);
    let mut wrong_type = inv.clone();
    wrong_type["groups"][0]["quantity"] = json!("one");

    let frag = |f: &dyn Fn(&mut FragilityEntry)| {
        let mut e = rc_column_entry(5.0, 50.0);
        f(&mut e);
        let file = FragilityFile::from_entries(&[e], None);
        to_canonical_json(&file)
    };

    let files: Vec<(&str, String)> = vec![
        ("annotation_box_out_of_bounds.json", to_canonical_json(&out_of_bounds)),
        ("annotation_zero_width.json", to_canonical_json(&zero_width)),
        ("annotation_missing_key.json", to_canonical_json(&missing_key)),
        ("detection_missing_score.json", to_canonical_json(&no_score)),
        ("detection_score_out_of_range.json", to_canonical_json(&bad_score)),
        ("inventory_probability_sum.json", to_canonical_json(&prob_sum)),
        ("inventory_probability_count.json", to_canonical_json(&prob_count)),
        ("inventory_collapse_probability.json", to_canonical_json(&collapse)),
        ("inventory_zero_quantity.json", to_canonical_json(&quantity)),
        ("inventory_negative_replacement.json", to_canonical_json(&replacement)),
        ("inventory_wrong_type.json", to_canonical_json(&wrong_type)),
        (
            "fragility_inverted_costs.json",
            frag(&|e| e.states[3].cost_at_max_qty = 50000.0),
        ),
        ("fragility_quantity_order.json", frag(&|e| e.q_max = e.q_min)),
        (
            "fragility_ds0_nonzero.json",
            frag(&|e| e.states[0].cost_at_min_qty = 10.0),
        ),
        (
            "fragility_negative_dispersion.json",
            frag(&|e| e.states[1].dispersion = -0.2),
        ),
        (
            "fragility_duplicate_state.json",
            frag(&|e| e.states[2].ds = DamageState::DS1),
        ),
        (
            "labels_unknown_label.json",
            to_canonical_json(&json!({"classes": ["DS0", "DS1"], "labels": ["DS0", "DS5"]})),
        ),
        ("anchors_nonpositive.csv", "width,height\n104,98\n0,77\n".to_string()),
        ("anchors_malformed.csv", "width,height\n104;98\n".to_string()),
    ];
    for (name, text) in files {
        write(&dir.join(name), &text);
    }

    fs::create_dir_all(dir).unwrap();
    // Tensor with a payload one float short of its 2x2x1x(5+1) header.
    let t = DetectionTensor::zeros(2, 2, 1, 1, 32.0, 32.0).unwrap();
    save_tensor(&dir.join("tensor_short_payload.json"), &t, "tensor_short_payload.bin").unwrap();
    let bin = dir.join("tensor_short_payload.bin");
    let bytes = fs::read(&bin).unwrap();
    fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
    let header = json!({"grid_h": 0, "grid_w": 2, "num_anchors": 1, "num_classes": 1,
        "image_w": 32, "image_h": 32, "data": "tensor_short_payload.bin"});
    write(&dir.join("tensor_zero_grid.json"), &to_canonical_json(&header));
}

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"));
    case_study(&root.join("case"));
    detector(&root.join("detector"));
    classifier(&root.join("classifier"));
    anchors(&root.join("anchors"));
    invalid(&root.join("invalid"));
}
