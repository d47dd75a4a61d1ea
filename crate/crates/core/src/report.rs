//! CSV renderings of results and a minimal SVG line plot.

use std::fmt::Write;

use crate::classifier_eval::ConfusionMatrix;
use crate::cost_model::LossCurve;
use crate::detector_eval::{MatchedDetection, PrCurve};
use crate::fusion::BuildingAssessment;
use crate::yolo_loss::LossBreakdown;

pub fn loss_breakdown_csv(l: &LossBreakdown) -> String {
    format!(
        "coord_xy,coord_wh,obj_conf,noobj_conf,class_prob,total\n{},{},{},{},{},{}\n",
        l.coord_xy, l.coord_wh, l.obj_conf, l.noobj_conf, l.class_prob, l.total
    )
}

pub fn sweep_csv(rows: &[(usize, f64)]) -> String {
    let mut s = String::from("k,mean_iou\n");
    for (k, m) in rows {
        writeln!(s, "{k},{m}").unwrap();
    }
    s
}

/// PR points for several classes. `ranked` holds the matched detections of
/// each class in rank order, parallel to `curves`.
pub fn pr_points_csv(curves: &[(u32, PrCurve)], ranked: &[Vec<MatchedDetection>]) -> String {
    let mut s = String::from("class_id,rank,score,true_positive,recall,precision\n");
    for ((class, curve), dets) in curves.iter().zip(ranked) {
        for (i, (p, d)) in curve.points.iter().zip(dets).enumerate() {
            writeln!(
                s,
                "{class},{},{},{},{},{}",
                i + 1,
                d.score,
                d.true_positive,
                p.recall,
                p.precision
            )
            .unwrap();
        }
    }
    s
}

/// Long-form confusion matrix: one row per (truth, prediction) cell.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut s = String::from("truth,prediction,count,normalized\n");
    for (i, t) in m.classes.iter().enumerate() {
        for (j, p) in m.classes.iter().enumerate() {
            writeln!(s, "{t},{p},{},{}", m.counts[i][j], m.normalized[i][j]).unwrap();
        }
    }
    s
}

/// Per-component fused states. A collapsed building is a single
/// `collapsed` row.
pub fn fused_states_csv(b: &BuildingAssessment, groups: &[(usize, &str)]) -> String {
    let mut s = String::from("status,group,fragility_id,component_id,classifier_state,steel_detected,final_state\n");
    if b.collapsed {
        s.push_str("collapsed,,,,,,\n");
        return s;
    }
    for (c, (g, frag)) in b.components.iter().zip(groups) {
        writeln!(
            s,
            "assessed,{g},{frag},{},{},{},{}",
            c.component_id, c.classifier_state, c.steel_detected, c.final_state
        )
        .unwrap();
    }
    s
}

pub fn cdf_csv(curve: &LossCurve) -> String {
    let mut s = String::from("cost,cumulative_probability\n");
    for (c, p) in curve.cdf() {
        writeln!(s, "{c},{p}").unwrap();
    }
    s
}

/// A single polyline on linear axes spanning the data range.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        s,
        r#"<path d="M{PAD},{PAD} L{PAD},{} L{},{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    )
    .unwrap();
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            H - PAD + 16.0,
            tick(v)
        )
        .unwrap();
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            PAD - 6.0,
            tick(v)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        W / 2.0,
        H - 18.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    )
    .unwrap();
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    if !path.is_empty() {
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
            path.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
