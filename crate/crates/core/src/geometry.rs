//! Axis-aligned box geometry, IoU, and anchor decoding.
//!
//! Boxes live in pixel coordinates with the origin at the top-left of the
//! image. Anchors are parameterized by a dimensionless scale ratio `s` and an
//! aspect ratio `a = width / height`, both relative to a base side of 256 px,
//! and decode with the area-preserving convention
//! `w = 256·s·√a`, `h = 256·s/√a`, so the decoded area is `(256·s)²`
//! regardless of aspect.

use crate::math;
use crate::{Error, Result};

/// Side length, in pixels, that a scale ratio of 1.0 refers to.
pub const ANCHOR_BASE: f64 = 256.0;

/// Axis-aligned 2D box in pixel coordinates, origin at the top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// Builds a box from its corners.
    ///
    /// Panics if the corners are out of order (or NaN); parse layers must
    /// validate untrusted input before constructing boxes.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        assert!(
            x_min <= x_max && y_min <= y_max,
            "box corners out of order: ({x_min}, {y_min}, {x_max}, {y_max})"
        );
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Builds a box from its center and (non-negative) dimensions.
    pub fn from_center_size(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        assert!(
            width >= 0.0 && height >= 0.0,
            "box dimensions must be non-negative: {width}x{height}"
        );
        Self {
            x_min: cx - width / 2.0,
            y_min: cy - height / 2.0,
            x_max: cx + width / 2.0,
            y_max: cy + height / 2.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// The same box shifted by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Area of the overlap with `other`; 0 when they do not intersect.
    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    /// Clamps all corners into the `[0, width] x [0, height]` image frame.
    pub fn clamped_to(&self, width: f64, height: f64) -> Self {
        Self {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        }
    }

    /// True when every corner already lies inside `[0, width] x [0, height]`.
    pub fn fits_within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }
}

/// Intersection over union of two boxes.
///
/// Returns `area(a ∩ b) / area(a ∪ b)`, and 0 by convention when the union
/// has zero area (two degenerate boxes), so noisy zero-size annotations are
/// scored rather than rejected.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One anchor shape: a scale ratio and an aspect ratio over the 256 px base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSpec {
    scale_ratio: f64,
    aspect_ratio: f64,
}

impl AnchorSpec {
    /// Creates an anchor shape. Both ratios must be positive and finite.
    pub fn new(scale_ratio: f64, aspect_ratio: f64) -> Result<Self> {
        if !(scale_ratio > 0.0 && scale_ratio.is_finite()) {
            return Err(Error::InvalidParam {
                name: "scale_ratio",
                reason: "must be positive and finite",
            });
        }
        if !(aspect_ratio > 0.0 && aspect_ratio.is_finite()) {
            return Err(Error::InvalidParam {
                name: "aspect_ratio",
                reason: "must be positive and finite",
            });
        }
        Ok(Self {
            scale_ratio,
            aspect_ratio,
        })
    }

    pub fn scale_ratio(&self) -> f64 {
        self.scale_ratio
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.aspect_ratio
    }

    /// Decoded width in pixels: `256·s·√a`.
    pub fn width(&self) -> f64 {
        ANCHOR_BASE * self.scale_ratio * math::sqrt(self.aspect_ratio)
    }

    /// Decoded height in pixels: `256·s/√a`.
    pub fn height(&self) -> f64 {
        ANCHOR_BASE * self.scale_ratio / math::sqrt(self.aspect_ratio)
    }

    /// Decodes to a box centered at the origin.
    pub fn decode(&self) -> BoundingBox {
        self.centered_on(0.0, 0.0)
    }

    /// Decodes to a box centered at `(cx, cy)`.
    pub fn centered_on(&self, cx: f64, cy: f64) -> BoundingBox {
        BoundingBox::from_center_size(cx, cy, self.width(), self.height())
    }
}

/// Best overlap between a ground-truth box and any anchor of a configuration.
///
/// Each anchor is decoded and centered on the ground-truth box before the
/// overlap is computed: the search optimizes anchor sizes and shapes, not
/// positions, so the comparison is size-matching only.
pub fn max_iou_over_config(gt: &BoundingBox, config: &[AnchorSpec]) -> Result<f64> {
    if config.is_empty() {
        return Err(Error::EmptyInput("anchor configuration"));
    }
    let (cx, cy) = gt.center();
    let best = config
        .iter()
        .map(|spec| iou(gt, &spec.centered_on(cx, cy)))
        .fold(0.0, f64::max);
    Ok(best)
}
