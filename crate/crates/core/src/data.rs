//! Annotation and detection records plus per-object shape features.
//!
//! Records are plain values; parsing them from files (and the clamping of
//! slightly out-of-bounds boxes that comes with real exports) lives in the
//! companion crate. The string forms used by all file formats are defined
//! here, through `Display`/`FromStr`, so there is a single source of truth
//! for the spellings.

use core::fmt;
use core::str::FromStr;

use alloc::string::String;

use crate::geometry::{BoundingBox, ANCHOR_BASE};
use crate::math;
use crate::{Error, Result};

/// Camera that captured an image. Frontal cameras produce 1920x1280 frames,
/// lateral ones 1920x886.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Camera {
    Front,
    FrontLeft,
    FrontRight,
    SideLeft,
    SideRight,
}

impl Camera {
    pub fn is_frontal(&self) -> bool {
        matches!(self, Camera::Front | Camera::FrontLeft | Camera::FrontRight)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Camera::Front => "front",
            Camera::FrontLeft => "front_left",
            Camera::FrontRight => "front_right",
            Camera::SideLeft => "side_left",
            Camera::SideRight => "side_right",
        }
    }
}

impl fmt::Display for Camera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Camera {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "front" => Ok(Camera::Front),
            "front_left" => Ok(Camera::FrontLeft),
            "front_right" => Ok(Camera::FrontRight),
            "side_left" => Ok(Camera::SideLeft),
            "side_right" => Ok(Camera::SideRight),
            _ => Err(Error::InvalidParam {
                name: "camera",
                reason: "expected front, front_left, front_right, side_left or side_right",
            }),
        }
    }
}

/// Camera filter used when a pipeline stage runs on a subset of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CameraGroup {
    #[default]
    All,
    Frontal,
    Lateral,
}

impl CameraGroup {
    pub fn includes(&self, camera: Camera) -> bool {
        match self {
            CameraGroup::All => true,
            CameraGroup::Frontal => camera.is_frontal(),
            CameraGroup::Lateral => !camera.is_frontal(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CameraGroup::All => "all",
            CameraGroup::Frontal => "frontal",
            CameraGroup::Lateral => "lateral",
        }
    }
}

impl fmt::Display for CameraGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CameraGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CameraGroup::All),
            "frontal" => Ok(CameraGroup::Frontal),
            "lateral" => Ok(CameraGroup::Lateral),
            _ => Err(Error::InvalidParam {
                name: "camera_group",
                reason: "expected all, frontal or lateral",
            }),
        }
    }
}

/// Object category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 3] = [
        ObjectClass::Vehicle,
        ObjectClass::Pedestrian,
        ObjectClass::Cyclist,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Cyclist => "cyclist",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vehicle" => Ok(ObjectClass::Vehicle),
            "pedestrian" => Ok(ObjectClass::Pedestrian),
            "cyclist" => Ok(ObjectClass::Cyclist),
            _ => Err(Error::InvalidParam {
                name: "class",
                reason: "expected vehicle, pedestrian or cyclist",
            }),
        }
    }
}

/// Annotation difficulty. L2 metrics are cumulative: evaluating at L2 uses
/// the union of L1 and L2 objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    L1,
    L2,
}

impl Difficulty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::L1 => "L1",
            Difficulty::L2 => "L2",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" => Ok(Difficulty::L1),
            "L2" => Ok(Difficulty::L2),
            _ => Err(Error::InvalidParam {
                name: "difficulty",
                reason: "expected L1 or L2",
            }),
        }
    }
}

/// One labeled ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub camera: Camera,
    pub image_width: u32,
    pub image_height: u32,
    pub class: ObjectClass,
    pub difficulty: Difficulty,
    pub bbox: BoundingBox,
}

impl AnnotationRecord {
    /// Checks the record invariants: positive image dimensions and a box
    /// inside the image frame.
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidParam {
                name: "image dimensions",
                reason: "must be positive",
            });
        }
        if !self
            .bbox
            .fits_within(self.image_width as f64, self.image_height as f64)
        {
            return Err(Error::InvalidParam {
                name: "bbox",
                reason: "extends outside the image frame",
            });
        }
        Ok(())
    }

    /// Vertical center of the box as a fraction of the image height.
    pub fn y_center_norm(&self) -> f64 {
        self.bbox.center().1 / self.image_height as f64
    }
}

/// One scored model prediction. `scale_factor` is 1.0 unless the detection
/// was produced on a rescaled test-time-augmentation input.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class: ObjectClass,
    pub score: f64,
    pub bbox: BoundingBox,
    pub model_tag: String,
    pub scale_factor: f64,
}

/// Shape and position features of one annotated object.
///
/// `scale_ratio` is defined as `√(w·h) / 256`, so an object that exactly
/// matches a decoded anchor of scale `s` has `scale_ratio = s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectFeatures {
    pub scale_ratio: f64,
    pub aspect_ratio: f64,
    pub x_center_norm: f64,
    pub y_center_norm: f64,
    pub height_px: f64,
}

/// Derives shape features from an annotation.
///
/// Fails on boxes with zero width or height, where the aspect ratio is
/// undefined.
pub fn derive_features(record: &AnnotationRecord) -> Result<ObjectFeatures> {
    let w = record.bbox.width();
    let h = record.bbox.height();
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::DegenerateBox);
    }
    let (cx, cy) = record.bbox.center();
    Ok(ObjectFeatures {
        scale_ratio: math::sqrt(w * h) / ANCHOR_BASE,
        aspect_ratio: w / h,
        x_center_norm: cx / record.image_width as f64,
        y_center_norm: cy / record.image_height as f64,
        height_px: h,
    })
}

/// Sample Pearson correlation coefficient of two equally long series.
///
/// Fails with fewer than two points or when either series is constant.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParam {
            name: "series",
            reason: "series must have equal lengths",
        });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput("correlation needs at least two points"));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok(cov / math::sqrt(var_x * var_y))
}
