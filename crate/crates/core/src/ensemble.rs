//! Detection fusion: greedy NMS, affirmative multi-model merging, and
//! test-time-augmentation de-scaling.
//!
//! The affirmative strategy accepts a detection as soon as any single model
//! proposes it: all model outputs are pooled and NMS then removes redundant
//! overlapping boxes per image and class.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::{DetectionRecord, ObjectClass};
use crate::geometry::{iou, BoundingBox};
use crate::{Error, Result};

/// How model outputs are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionStrategy {
    /// Any model's detection is considered valid before suppression.
    #[default]
    Affirmative,
}

/// Fusion settings: suppression threshold and the scale factors used for
/// test-time augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub nms_iou_threshold: f64,
    pub tta_scales: Vec<f64>,
    pub strategy: FusionStrategy,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            nms_iou_threshold: 0.7,
            tta_scales: alloc::vec![0.8, 1.0, 1.2],
            strategy: FusionStrategy::Affirmative,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nms_iou_threshold > 0.0 && self.nms_iou_threshold < 1.0) {
            return Err(Error::InvalidParam {
                name: "nms_iou_threshold",
                reason: "must lie strictly between 0 and 1",
            });
        }
        if self.tta_scales.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidParam {
                name: "tta_scales",
                reason: "every scale factor must be positive",
            });
        }
        Ok(())
    }
}

/// Detection ordering used everywhere a score ranking is needed: descending
/// score, with exact ties broken by smaller `x_min`, then smaller `y_min`.
pub(crate) fn score_order(a: &DetectionRecord, b: &DetectionRecord) -> core::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
        .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
}

fn greedy_keep<'a>(dets: &[&'a DetectionRecord], iou_threshold: f64) -> Vec<&'a DetectionRecord> {
    let mut sorted: Vec<&DetectionRecord> = dets.to_vec();
    sorted.sort_by(|a, b| score_order(a, b));
    let mut kept: Vec<&DetectionRecord> = Vec::new();
    'candidates: for det in sorted {
        for k in &kept {
            if iou(&det.bbox, &k.bbox) > iou_threshold {
                continue 'candidates;
            }
        }
        kept.push(det);
    }
    kept
}

/// Greedy non-maximum suppression over detections of one image and class:
/// keep the highest-scoring box, drop every box overlapping a kept one with
/// IoU strictly above the threshold, repeat.
pub fn nms(dets: &[DetectionRecord], iou_threshold: f64) -> Vec<DetectionRecord> {
    let refs: Vec<&DetectionRecord> = dets.iter().collect();
    greedy_keep(&refs, iou_threshold)
        .into_iter()
        .cloned()
        .collect()
}

/// Affirmative fusion: the union of all models' detections, suppressed per
/// (image, class) at the configured threshold.
///
/// Every input must already be in the original image frame
/// (`scale_factor == 1`); run [`tta_deaugment`] first on augmented outputs.
/// The fused list is ordered by image id, then class, then score rank.
pub fn affirmative_merge(
    model_outputs: &[Vec<DetectionRecord>],
    cfg: &FusionConfig,
) -> Result<Vec<DetectionRecord>> {
    cfg.validate()?;
    let FusionStrategy::Affirmative = cfg.strategy;

    let mut groups: BTreeMap<(&str, ObjectClass), Vec<&DetectionRecord>> = BTreeMap::new();
    for output in model_outputs {
        for det in output {
            if det.scale_factor != 1.0 {
                return Err(Error::ScaledDetections {
                    model_tag: det.model_tag.clone(),
                });
            }
            groups
                .entry((det.image_id.as_str(), det.class))
                .or_default()
                .push(det);
        }
    }

    let mut fused = Vec::new();
    for dets in groups.values() {
        fused.extend(
            greedy_keep(dets, cfg.nms_iou_threshold)
                .into_iter()
                .cloned(),
        );
    }
    Ok(fused)
}

/// Maps detections produced on rescaled inputs back to the original image
/// frame by dividing every coordinate by the detection's scale factor, which
/// is then reset to 1.
pub fn tta_deaugment(dets: &[DetectionRecord]) -> Result<Vec<DetectionRecord>> {
    dets.iter()
        .map(|det| {
            let sf = det.scale_factor;
            if !(sf.is_finite() && sf > 0.0) {
                return Err(Error::InvalidParam {
                    name: "scale_factor",
                    reason: "must be positive and finite",
                });
            }
            Ok(DetectionRecord {
                bbox: BoundingBox::new(
                    det.bbox.x_min / sf,
                    det.bbox.y_min / sf,
                    det.bbox.x_max / sf,
                    det.bbox.y_max / sf,
                ),
                scale_factor: 1.0,
                ..det.clone()
            })
        })
        .collect()
}
