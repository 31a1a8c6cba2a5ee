//! Interpolated average precision for class-aware detection evaluation.
//!
//! Precision at recall `r` is interpolated to the maximum precision at any
//! recall `r' ≥ r`, and AP is the area under that staircase, accumulated as
//! `Σ p(k)·Δr(k)` over the ranked detections. Matching is the standard
//! greedy one-to-one scheme: detections in descending score order claim the
//! still-unmatched ground truth with the highest IoU, counting a true
//! positive when that IoU reaches the class threshold.
//!
//! Difficulty levels are cumulative: L2 evaluation uses the union of L1 and
//! L2 objects, while L1 evaluation targets only L1 objects and *ignores*
//! detections that instead hit an L2-only object (they are neither true nor
//! false positives).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::{AnnotationRecord, DetectionRecord, Difficulty, ObjectClass};
use crate::ensemble::score_order;
use crate::geometry::iou;

/// IoU threshold above which a detection of the class counts as correct:
/// 0.7 for vehicles, 0.5 for pedestrians and cyclists.
pub fn class_iou_threshold(class: ObjectClass) -> f64 {
    match class {
        ObjectClass::Vehicle => 0.7,
        ObjectClass::Pedestrian | ObjectClass::Cyclist => 0.5,
    }
}

/// AP and match counts for one (class, difficulty level) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApEntry {
    pub class: ObjectClass,
    pub level: Difficulty,
    pub ap: f64,
    pub gt_count: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Full evaluation output: one entry per (class, level) with ground truths,
/// plus the per-level mean over the classes that have a defined AP.
#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub entries: Vec<ApEntry>,
    pub mean_ap_l1: Option<f64>,
    pub mean_ap_l2: Option<f64>,
}

impl ApResult {
    pub fn entry(&self, class: ObjectClass, level: Difficulty) -> Option<&ApEntry> {
        self.entries
            .iter()
            .find(|e| e.class == class && e.level == level)
    }
}

/// Average precision of one class at one difficulty level.
///
/// Inputs are filtered to `class` internally; detections and annotations
/// relate through their `image_id`. Returns `None` when the class has no
/// ground truths at the level — AP is undefined there, not zero.
pub fn average_precision(
    class: ObjectClass,
    dets: &[DetectionRecord],
    gts: &[AnnotationRecord],
    iou_threshold: f64,
    level: Difficulty,
) -> Option<ApEntry> {
    // target objects count toward recall; at L1, the L2-only objects are
    // kept aside and merely absorb detections
    let mut targets: Vec<&AnnotationRecord> = Vec::new();
    let mut ignores: Vec<&AnnotationRecord> = Vec::new();
    for gt in gts.iter().filter(|g| g.class == class) {
        match (level, gt.difficulty) {
            (Difficulty::L2, _) | (Difficulty::L1, Difficulty::L1) => targets.push(gt),
            (Difficulty::L1, Difficulty::L2) => ignores.push(gt),
        }
    }
    if targets.is_empty() {
        return None;
    }

    let mut targets_by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, gt) in targets.iter().enumerate() {
        targets_by_image
            .entry(gt.image_id.as_str())
            .or_default()
            .push(i);
    }
    let mut ignores_by_image: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for gt in &ignores {
        ignores_by_image
            .entry(gt.image_id.as_str())
            .or_default()
            .push(gt);
    }

    let mut ranked: Vec<&DetectionRecord> = dets.iter().filter(|d| d.class == class).collect();
    ranked.sort_by(|a, b| score_order(a, b));

    let mut matched = alloc::vec![false; targets.len()];
    let mut outcomes: Vec<bool> = Vec::with_capacity(ranked.len());
    for det in ranked {
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = targets_by_image.get(det.image_id.as_str()) {
            for &t in candidates {
                if matched[t] {
                    continue;
                }
                let overlap = iou(&det.bbox, &targets[t].bbox);
                if best.map_or(true, |(_, b)| overlap > b) {
                    best = Some((t, overlap));
                }
            }
        }
        match best {
            Some((t, overlap)) if overlap >= iou_threshold => {
                matched[t] = true;
                outcomes.push(true);
            }
            _ => {
                let absorbed = ignores_by_image
                    .get(det.image_id.as_str())
                    .is_some_and(|igs| {
                        igs.iter()
                            .any(|gt| iou(&det.bbox, &gt.bbox) >= iou_threshold)
                    });
                if !absorbed {
                    outcomes.push(false);
                }
            }
        }
    }

    let n_pos = targets.len();
    let mut precisions = Vec::with_capacity(outcomes.len());
    let mut recalls = Vec::with_capacity(outcomes.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &is_tp in &outcomes {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / n_pos as f64);
    }

    // interpolate: precision at k becomes the maximum precision at any
    // deeper cut, then integrate over the recall increments
    let mut running_max = 0.0_f64;
    for p in precisions.iter_mut().rev() {
        running_max = running_max.max(*p);
        *p = running_max;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precisions.iter().zip(&recalls) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }

    Some(ApEntry {
        class,
        level,
        ap,
        gt_count: n_pos,
        true_positives: tp,
        false_positives: fp,
        false_negatives: n_pos - tp,
    })
}

/// Evaluates every class at both difficulty levels with the per-class IoU
/// thresholds, and averages AP across the classes that have ground truths.
pub fn evaluate_ap(dets: &[DetectionRecord], gts: &[AnnotationRecord]) -> ApResult {
    let mut entries = Vec::new();
    let mut sums = [(0.0, 0usize); 2];
    for class in ObjectClass::ALL {
        let threshold = class_iou_threshold(class);
        for (slot, level) in [(0, Difficulty::L1), (1, Difficulty::L2)] {
            if let Some(entry) = average_precision(class, dets, gts, threshold, level) {
                sums[slot].0 += entry.ap;
                sums[slot].1 += 1;
                entries.push(entry);
            }
        }
    }
    let mean = |(total, n): (f64, usize)| if n > 0 { Some(total / n as f64) } else { None };
    ApResult {
        entries,
        mean_ap_l1: mean(sums[0]),
        mean_ap_l2: mean(sums[1]),
    }
}
