//! Post-processing, evaluation, damage-state fusion and repair-cost
//! simulation for vision-based post-earthquake assessment of reinforced
//! concrete columns.
//!
//! The pipeline consumes model outputs from files: raw YOLOv2 tensors from
//! the exposed-reinforcement detector and damage-state probabilities from a
//! classifier. It produces fused damage states per component and a Monte
//! Carlo loss curve for the building.
//!
//! | module | purpose |
//! |---|---|
//! | [`geometry`] | boxes, IoU, NMS |
//! | [`yolo_decode`] | tensor to boxes |
//! | [`yolo_loss`] | multi-part detection loss |
//! | [`anchor_clustering`] | IoU k-means anchor priors |
//! | [`detector_eval`] | PR curves, AP, mAP |
//! | [`classifier_eval`] | confusion matrices, accuracy |
//! | [`fusion`] | classifier + detector damage state |
//! | [`cost_model`] | consequence functions, Monte Carlo cost |
//! | [`formats`] | file formats |
//! | [`cli`] | the `rcdamage` command line |

pub mod anchor_clustering;
pub mod classifier_eval;
pub mod cli;
pub mod cost_model;
pub mod detector_eval;
pub mod error;
pub mod formats;
pub mod fusion;
pub mod geometry;
pub mod report;
pub mod yolo_decode;
pub mod yolo_loss;

pub use error::{Error, Result};
pub use fusion::DamageState;
pub use geometry::BoundingBox;
