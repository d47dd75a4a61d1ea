//! On-disk formats. All structured files are JSON written in one canonical
//! form (two-space pretty printing, trailing newline), so saving a loaded
//! canonical file reproduces it byte for byte. Raw tensors use a JSON header
//! next to a little-endian `f32` payload. Coordinates are pixels, origin at
//! the top-left, y down.
//!
//! `formats.md` at the repository root is the normative description.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cost_model::{DamageStateCost, FragilityDatabase, FragilityEntry, PerformanceGroup};
use crate::error::{Error, Result};
use crate::fusion::{BuildingAssessment, ClassificationOutput, ComponentInput};
use crate::geometry::BoundingBox;
use crate::yolo_decode::{AnchorPrior, DetectionTensor};
use crate::yolo_loss::GroundTruthBox;

pub use crate::fusion::reduce_multiview;

fn format_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        location: location.into(),
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| format_err(path, format!("line {} column {}", e.line(), e.column()), e.to_string()))
}

/// Canonical JSON text for `value`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(path, &read_text(path)?)
}

fn finite_positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

// ---------------------------------------------------------------- annotations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
    pub class_id: u32,
}

impl AnnotatedBox {
    pub fn to_truth(&self) -> GroundTruthBox {
        GroundTruthBox::new(
            BoundingBox {
                x_min: self.x_min,
                y_min: self.y_min,
                width: self.width,
                height: self.height,
                score: None,
                class_id: Some(self.class_id),
            },
            self.class_id,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedImage {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<AnnotatedBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub images: Vec<AnnotatedImage>,
}

impl AnnotationFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: Self = parse_json(path, text)?;
        f.validate(path)?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &to_canonical_json(self))
    }

    pub fn validate(&self, path: &Path) -> Result<()> {
        for (i, img) in self.images.iter().enumerate() {
            if img.width == 0 || img.height == 0 {
                return Err(format_err(
                    path,
                    format!("images[{i}]"),
                    "image width and height must be positive",
                ));
            }
            for (j, b) in img.boxes.iter().enumerate() {
                let loc = format!("images[{i}].boxes[{j}]");
                if !(finite_positive(b.width) && finite_positive(b.height)) {
                    return Err(format_err(path, loc, "box width and height must be positive"));
                }
                let inside = b.x_min >= 0.0
                    && b.y_min >= 0.0
                    && b.x_min + b.width <= img.width as f64
                    && b.y_min + b.height <= img.height as f64;
                if !inside {
                    return Err(format_err(
                        path,
                        loc,
                        format!("box exceeds the {}x{} image bounds", img.width, img.height),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(width, height)` of every box, in file order.
    pub fn dims(&self) -> Vec<(f64, f64)> {
        self.images
            .iter()
            .flat_map(|i| i.boxes.iter().map(|b| (b.width, b.height)))
            .collect()
    }

    pub fn truths(&self) -> Vec<Vec<GroundTruthBox>> {
        self.images
            .iter()
            .map(|i| i.boxes.iter().map(AnnotatedBox::to_truth).collect())
            .collect()
    }
}

// ----------------------------------------------------------------- detections

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDetections {
    pub id: String,
    pub detections: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub images: Vec<ImageDetections>,
}

fn validate_detections(path: &Path, prefix: &str, dets: &[BoundingBox]) -> Result<()> {
    for (j, d) in dets.iter().enumerate() {
        let loc = format!("{prefix}[{j}]");
        d.validate().map_err(|e| format_err(path, loc.clone(), e.to_string()))?;
        if d.score.is_none() {
            return Err(format_err(path, loc, "detection has no score"));
        }
    }
    Ok(())
}

impl DetectionFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: Self = parse_json(path, text)?;
        for (i, img) in f.images.iter().enumerate() {
            validate_detections(path, &format!("images[{i}].detections"), &img.detections)?;
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &to_canonical_json(self))
    }

    pub fn all_detections(&self) -> Vec<BoundingBox> {
        self.images.iter().flat_map(|i| i.detections.iter().copied()).collect()
    }

    /// Detections aligned to the image order of `annotations`; images
    /// missing from this file get no detections.
    pub fn aligned_to(&self, annotations: &AnnotationFile) -> Vec<Vec<BoundingBox>> {
        let by_id: BTreeMap<&str, &Vec<BoundingBox>> =
            self.images.iter().map(|i| (i.id.as_str(), &i.detections)).collect();
        annotations
            .images
            .iter()
            .map(|img| by_id.get(img.id.as_str()).map(|d| d.to_vec()).unwrap_or_default())
            .collect()
    }
}

// --------------------------------------------------------------------- tensor

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorHeader {
    pub grid_h: usize,
    pub grid_w: usize,
    pub num_anchors: usize,
    pub num_classes: usize,
    pub image_w: u32,
    pub image_h: u32,
    /// Payload path, relative to the header's directory.
    pub data: String,
}

impl TensorHeader {
    pub fn payload_len(&self) -> usize {
        DetectionTensor::expected_len(self.grid_h, self.grid_w, self.num_anchors, self.num_classes)
    }
}

pub fn encode_payload(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_payload(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn relative_to(base: &Path, rel: &str) -> PathBuf {
    base.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Load a tensor from its header file.
pub fn load_tensor(header_path: &Path) -> Result<(TensorHeader, DetectionTensor)> {
    let header: TensorHeader = load_json(header_path)?;
    for (key, v) in [
        ("grid_h", header.grid_h),
        ("grid_w", header.grid_w),
        ("num_anchors", header.num_anchors),
        ("num_classes", header.num_classes),
    ] {
        if v == 0 {
            return Err(format_err(header_path, key, "must be >= 1"));
        }
    }
    if header.image_w == 0 || header.image_h == 0 {
        return Err(format_err(header_path, "image_w", "image dimensions must be positive"));
    }
    let payload_path = relative_to(header_path, &header.data);
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let expected = 4 * header.payload_len();
    if bytes.len() != expected {
        return Err(format_err(
            &payload_path,
            "payload",
            format!(
                "payload is {} bytes, expected {expected} ({} floats for {}x{}x{}x{})",
                bytes.len(),
                header.payload_len(),
                header.grid_h,
                header.grid_w,
                header.num_anchors,
                5 + header.num_classes
            ),
        ));
    }
    let tensor = DetectionTensor::new(
        header.grid_h,
        header.grid_w,
        header.num_anchors,
        header.num_classes,
        header.image_w as f64,
        header.image_h as f64,
        decode_payload(&bytes),
    )
    .map_err(|e| format_err(header_path, "", e.to_string()))?;
    Ok((header, tensor))
}

/// Write `tensor` as a header at `header_path` plus a payload named
/// `data_name` in the same directory.
pub fn save_tensor(header_path: &Path, tensor: &DetectionTensor, data_name: &str) -> Result<TensorHeader> {
    let header = TensorHeader {
        grid_h: tensor.grid_h,
        grid_w: tensor.grid_w,
        num_anchors: tensor.num_anchors,
        num_classes: tensor.num_classes,
        image_w: tensor.image_w as u32,
        image_h: tensor.image_h as u32,
        data: data_name.to_owned(),
    };
    write_text(header_path, &to_canonical_json(&header))?;
    let payload = relative_to(header_path, data_name);
    fs::write(&payload, encode_payload(tensor.values())).map_err(|e| Error::io(&payload, e))?;
    Ok(header)
}

// -------------------------------------------------------------------- anchors

pub fn anchors_to_csv(anchors: &[AnchorPrior]) -> String {
    let mut s = String::from("width,height\n");
    for a in anchors {
        s.push_str(&format!("{},{}\n", a.width, a.height));
    }
    s
}

pub fn parse_anchors_csv(path: &Path, text: &str) -> Result<Vec<AnchorPrior>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "width,height") {
            continue;
        }
        let loc = format!("line {}", n + 1);
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format_err(path, loc, "expected `width,height`"));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| format_err(path, loc.clone(), format!("{s:?}: {e}")))
        };
        let (w, h) = (parse(parts[0])?, parse(parts[1])?);
        out.push(AnchorPrior::new(w, h).map_err(|e| format_err(path, loc.clone(), e.to_string()))?);
    }
    if out.is_empty() {
        return Err(format_err(path, "", "no anchors in file"));
    }
    Ok(out)
}

pub fn load_anchors(path: &Path) -> Result<Vec<AnchorPrior>> {
    parse_anchors_csv(path, &read_text(path)?)
}

pub fn save_anchors(path: &Path, anchors: &[AnchorPrior]) -> Result<()> {
    write_text(path, &anchors_to_csv(anchors))
}

// ------------------------------------------------------------------ inventory

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingRecord {
    pub replacement_cost: f64,
    pub collapse_probability: f64,
}

/// Detections for a component: a detection file (relative to the inventory)
/// or an inline list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectionSource {
    File(String),
    Inline(Vec<BoundingBox>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentRecord {
    pub component_id: String,
    pub classifier_probabilities: Vec<f64>,
    pub detections: DetectionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupRecord {
    pub fragility_id: String,
    pub quantity: f64,
    pub components: Vec<ComponentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryFile {
    pub building: BuildingRecord,
    pub groups: Vec<GroupRecord>,
}

/// A component input tagged with the index of its performance group.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedComponent {
    pub group: usize,
    pub input: ComponentInput,
}

impl InventoryFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: Self = parse_json(path, text)?;
        f.validate(path)?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &to_canonical_json(self))
    }

    pub fn validate(&self, path: &Path) -> Result<()> {
        let b = &self.building;
        if !(b.replacement_cost.is_finite() && b.replacement_cost >= 0.0) {
            return Err(format_err(path, "building.replacement_cost", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&b.collapse_probability) {
            return Err(format_err(path, "building.collapse_probability", "must lie in [0,1]"));
        }
        for (g, group) in self.groups.iter().enumerate() {
            if !finite_positive(group.quantity) {
                return Err(format_err(path, format!("groups[{g}].quantity"), "must be > 0"));
            }
            for (c, comp) in group.components.iter().enumerate() {
                let loc = format!("groups[{g}].components[{c}]");
                ClassificationOutput::from_slice(&comp.classifier_probabilities)
                    .map_err(|e| format_err(path, format!("{loc}.classifier_probabilities"), e.to_string()))?;
                if let DetectionSource::Inline(dets) = &comp.detections {
                    validate_detections(path, &format!("{loc}.detections"), dets)?;
                }
            }
        }
        Ok(())
    }

    /// Resolve every component's classifier output and detections. Detection
    /// files are read relative to `inventory_path`.
    pub fn component_inputs(&self, inventory_path: &Path) -> Result<Vec<LocatedComponent>> {
        let mut out = Vec::new();
        for (g, group) in self.groups.iter().enumerate() {
            for comp in &group.components {
                let detections = match &comp.detections {
                    DetectionSource::Inline(d) => d.clone(),
                    DetectionSource::File(rel) => {
                        DetectionFile::load(&relative_to(inventory_path, rel))?.all_detections()
                    }
                };
                out.push(LocatedComponent {
                    group: g,
                    input: ComponentInput {
                        component_id: comp.component_id.clone(),
                        classification: ClassificationOutput::from_slice(&comp.classifier_probabilities)?,
                        detections,
                    },
                });
            }
        }
        Ok(out)
    }

    /// Every detection file referenced by the inventory, resolved.
    pub fn detection_paths(&self, inventory_path: &Path) -> Vec<PathBuf> {
        self.groups
            .iter()
            .flat_map(|g| &g.components)
            .filter_map(|c| match &c.detections {
                DetectionSource::File(rel) => Some(relative_to(inventory_path, rel)),
                DetectionSource::Inline(_) => None,
            })
            .collect()
    }

    /// Performance groups carrying the fused state of each component.
    /// `located` and `assessment.components` must be in the same order, as
    /// produced by [`InventoryFile::component_inputs`] and
    /// [`crate::fusion::assess_building`].
    pub fn performance_groups(
        &self,
        located: &[LocatedComponent],
        assessment: &BuildingAssessment,
    ) -> Vec<PerformanceGroup> {
        let mut groups: Vec<PerformanceGroup> = self
            .groups
            .iter()
            .map(|g| PerformanceGroup {
                fragility_id: g.fragility_id.clone(),
                quantity: g.quantity,
                component_states: Vec::new(),
            })
            .collect();
        for (loc, comp) in located.iter().zip(&assessment.components) {
            groups[loc.group].component_states.push(comp.final_state);
        }
        groups
    }
}

// ------------------------------------------------------------------ fragility

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragilityRecord {
    pub q_min: f64,
    pub q_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub states: Vec<DamageStateCost>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragilityFile {
    pub entries: BTreeMap<String, FragilityRecord>,
}

impl FragilityFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: Self = parse_json(path, text)?;
        f.database().map_err(|e| format_err(path, "entries", e.to_string()))?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &to_canonical_json(self))
    }

    pub fn from_entries(entries: &[FragilityEntry], note: Option<&str>) -> Self {
        FragilityFile {
            entries: entries
                .iter()
                .map(|e| {
                    (
                        e.component_id.clone(),
                        FragilityRecord {
                            q_min: e.q_min,
                            q_max: e.q_max,
                            note: note.map(str::to_owned),
                            states: e.states.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn database(&self) -> Result<FragilityDatabase> {
        FragilityDatabase::new(self.entries.iter().map(|(id, r)| FragilityEntry {
            component_id: id.clone(),
            q_min: r.q_min,
            q_max: r.q_max,
            states: r.states.clone(),
        }))
    }
}

// --------------------------------------------------------------- class labels

/// Labels for classifier evaluation: an ordered class list and one label per
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFile {
    pub classes: Vec<String>,
    pub labels: Vec<String>,
}

impl LabelFile {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: Self = parse_json(path, text)?;
        if f.classes.is_empty() {
            return Err(format_err(path, "classes", "class list is empty"));
        }
        if let Some((i, l)) = f.labels.iter().enumerate().find(|(_, l)| !f.classes.contains(l)) {
            return Err(format_err(path, format!("labels[{i}]"), format!("unknown label {l:?}")));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &to_canonical_json(self))
    }
}
