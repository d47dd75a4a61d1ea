//! Damage-state determination combining a four-way classifier with the
//! exposed-reinforcement detector, plus the building-level collapse branch.
//!
//! Rule: if any detection reaches the detector threshold the component is
//! DS3, otherwise the classifier's argmax stands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DEFAULT_DET_THRESHOLD: f64 = 0.5;
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DamageState {
    DS0,
    DS1,
    DS2,
    DS3,
}

impl DamageState {
    pub const ALL: [DamageState; 4] = [DamageState::DS0, DamageState::DS1, DamageState::DS2, DamageState::DS3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            DamageState::DS0 => "DS0",
            DamageState::DS1 => "DS1",
            DamageState::DS2 => "DS2",
            DamageState::DS3 => "DS3",
        }
    }
}

impl fmt::Display for DamageState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DamageState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.label() == s)
            .ok_or_else(|| Error::input(format!("unknown damage state {s:?}")))
    }
}

/// Classifier probabilities indexed by damage state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationOutput([f64; 4]);

impl ClassificationOutput {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(probabilities: [f64; 4]) -> Result<Self> {
        if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::input(format!("class probability {p} outside [0,1]")));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::input(format!("class probabilities sum to {sum}, expected 1")));
        }
        Ok(ClassificationOutput(probabilities))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let arr: [f64; 4] = p
            .try_into()
            .map_err(|_| Error::input(format!("expected 4 class probabilities, got {}", p.len())))?;
        Self::new(arr)
    }

    /// One-hot output for `ds`.
    pub fn certain(ds: DamageState) -> Self {
        let mut p = [0.0; 4];
        p[ds.index()] = 1.0;
        ClassificationOutput(p)
    }

    pub fn probabilities(&self) -> &[f64; 4] {
        &self.0
    }

    /// Most probable state; ties go to the more severe state.
    pub fn argmax(&self) -> DamageState {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] >= self.0[best] {
                best = i;
            }
        }
        DamageState::ALL[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAssessment {
    pub component_id: String,
    pub classifier_state: DamageState,
    pub steel_detected: bool,
    pub detections: Vec<BoundingBox>,
    pub final_state: DamageState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingAssessment {
    pub collapsed: bool,
    pub components: Vec<ComponentAssessment>,
}

impl BuildingAssessment {
    /// Number of components in each final state, DS0..DS3.
    pub fn state_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for comp in &self.components {
            c[comp.final_state.index()] += 1;
        }
        c
    }
}

fn check_threshold(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::input(format!("{name} must lie in [0,1], got {v}")));
    }
    Ok(())
}

/// Fuse classifier and detector evidence for one component. Unscored
/// detections count as present.
pub fn determine_damage_state(
    component_id: impl Into<String>,
    cls: &ClassificationOutput,
    dets: &[BoundingBox],
    det_threshold: f64,
) -> Result<ComponentAssessment> {
    check_threshold("detection threshold", det_threshold)?;
    let classifier_state = cls.argmax();
    let steel_detected = dets.iter().any(|d| d.score.unwrap_or(1.0) >= det_threshold);
    Ok(ComponentAssessment {
        component_id: component_id.into(),
        classifier_state,
        steel_detected,
        detections: dets.to_vec(),
        final_state: if steel_detected {
            DamageState::DS3
        } else {
            classifier_state
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInput {
    pub component_id: String,
    pub classification: ClassificationOutput,
    pub detections: Vec<BoundingBox>,
}

pub fn assess_building(
    collapse_prob: f64,
    collapse_threshold: f64,
    det_threshold: f64,
    components: &[ComponentInput],
) -> Result<BuildingAssessment> {
    check_threshold("collapse probability", collapse_prob)?;
    check_threshold("collapse threshold", collapse_threshold)?;
    check_threshold("detection threshold", det_threshold)?;
    if collapse_prob >= collapse_threshold {
        return Ok(BuildingAssessment {
            collapsed: true,
            components: Vec::new(),
        });
    }
    let components = components
        .iter()
        .map(|c| determine_damage_state(c.component_id.clone(), &c.classification, &c.detections, det_threshold))
        .collect::<Result<_>>()?;
    Ok(BuildingAssessment {
        collapsed: false,
        components,
    })
}

/// Combine several views of one component by keeping the most severe
/// evidence. Detections are concatenated in view order.
pub fn reduce_multiview(views: &[ComponentAssessment]) -> Result<ComponentAssessment> {
    let first = views
        .first()
        .ok_or_else(|| Error::input("multi-view reduction needs at least one view"))?;
    Ok(ComponentAssessment {
        component_id: first.component_id.clone(),
        classifier_state: views
            .iter()
            .map(|v| v.classifier_state)
            .max()
            .unwrap_or(first.classifier_state),
        steel_detected: views.iter().any(|v| v.steel_detected),
        detections: views.iter().flat_map(|v| v.detections.iter().copied()).collect(),
        final_state: views.iter().map(|v| v.final_state).max().unwrap_or(first.final_state),
    })
}
