//! Reading and writing of the annotation and detection record files.
//!
//! Both record kinds come in two encodings sharing one flat column set:
//! JSONL (one object per line) and CSV (header row, UTF-8). Malformed rows
//! fail with their line number; boxes that poke slightly out of the image
//! frame are clamped and reported rather than rejected, since real exports
//! contain such noise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anchorkit_core::data::{AnnotationRecord, DetectionRecord};
use anchorkit_core::geometry::BoundingBox;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}:{line}: {message}")]
    Row {
        path: String,
        line: usize,
        message: String,
    },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LoadError {
    fn row(path: &Path, line: usize, message: impl Into<String>) -> Self {
        LoadError::Row {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        LoadError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Record file encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Jsonl,
    Csv,
}

impl FileFormat {
    /// Picks the encoding from the file extension; everything that is not
    /// `.csv` is treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => FileFormat::Csv,
            _ => FileFormat::Jsonl,
        }
    }
}

/// A box that had to be clamped into its image frame during loading.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedBox {
    pub line: usize,
    pub image_id: String,
}

/// Summary of one annotation load.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct LoadReport {
    pub rows: usize,
    pub clamped: Vec<ClampedBox>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    image_id: String,
    camera: String,
    image_width: u32,
    image_height: u32,
    class: String,
    difficulty: String,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRow {
    image_id: String,
    class: String,
    score: f64,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    model_tag: String,
    scale_factor: f64,
}

fn check_corners(
    path: &Path,
    line: usize,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
) -> Result<(), LoadError> {
    for (name, v) in [
        ("x_min", x_min),
        ("y_min", y_min),
        ("x_max", x_max),
        ("y_max", y_max),
    ] {
        if !v.is_finite() {
            return Err(LoadError::row(path, line, format!("{name} is not finite")));
        }
    }
    if x_max < x_min {
        return Err(LoadError::row(
            path,
            line,
            format!("x_max ({x_max}) < x_min ({x_min})"),
        ));
    }
    if y_max < y_min {
        return Err(LoadError::row(
            path,
            line,
            format!("y_max ({y_max}) < y_min ({y_min})"),
        ));
    }
    Ok(())
}

impl AnnotationRow {
    fn into_record(
        self,
        path: &Path,
        line: usize,
        report: &mut LoadReport,
    ) -> Result<AnnotationRecord, LoadError> {
        let camera = self
            .camera
            .parse()
            .map_err(|e| LoadError::row(path, line, format!("camera `{}`: {e}", self.camera)))?;
        let class = self
            .class
            .parse()
            .map_err(|e| LoadError::row(path, line, format!("class `{}`: {e}", self.class)))?;
        let difficulty = self.difficulty.parse().map_err(|e| {
            LoadError::row(path, line, format!("difficulty `{}`: {e}", self.difficulty))
        })?;
        if self.image_width == 0 || self.image_height == 0 {
            return Err(LoadError::row(
                path,
                line,
                "image dimensions must be positive",
            ));
        }
        check_corners(path, line, self.x_min, self.y_min, self.x_max, self.y_max)?;

        let raw = BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max);
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        let bbox = if raw.fits_within(w, h) {
            raw
        } else {
            report.clamped.push(ClampedBox {
                line,
                image_id: self.image_id.clone(),
            });
            raw.clamped_to(w, h)
        };

        let record = AnnotationRecord {
            image_id: self.image_id,
            camera,
            image_width: self.image_width,
            image_height: self.image_height,
            class,
            difficulty,
            bbox,
        };
        record
            .validate()
            .map_err(|e| LoadError::row(path, line, e.to_string()))?;
        Ok(record)
    }

    fn from_record(r: &AnnotationRecord) -> Self {
        Self {
            image_id: r.image_id.clone(),
            camera: r.camera.as_str().into(),
            image_width: r.image_width,
            image_height: r.image_height,
            class: r.class.as_str().into(),
            difficulty: r.difficulty.as_str().into(),
            x_min: r.bbox.x_min,
            y_min: r.bbox.y_min,
            x_max: r.bbox.x_max,
            y_max: r.bbox.y_max,
        }
    }
}

impl DetectionRow {
    fn into_record(self, path: &Path, line: usize) -> Result<DetectionRecord, LoadError> {
        let class = self
            .class
            .parse()
            .map_err(|e| LoadError::row(path, line, format!("class `{}`: {e}", self.class)))?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(LoadError::row(
                path,
                line,
                format!("score {} outside [0, 1]", self.score),
            ));
        }
        if !(self.scale_factor.is_finite() && self.scale_factor > 0.0) {
            return Err(LoadError::row(
                path,
                line,
                format!("scale_factor {} must be positive", self.scale_factor),
            ));
        }
        check_corners(path, line, self.x_min, self.y_min, self.x_max, self.y_max)?;
        Ok(DetectionRecord {
            image_id: self.image_id,
            class,
            score: self.score,
            bbox: BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max),
            model_tag: self.model_tag,
            scale_factor: self.scale_factor,
        })
    }

    fn from_record(r: &DetectionRecord) -> Self {
        Self {
            image_id: r.image_id.clone(),
            class: r.class.as_str().into(),
            score: r.score,
            x_min: r.bbox.x_min,
            y_min: r.bbox.y_min,
            x_max: r.bbox.x_max,
            y_max: r.bbox.y_max,
            model_tag: r.model_tag.clone(),
            scale_factor: r.scale_factor,
        }
    }
}

fn load_rows<T: for<'de> Deserialize<'de>>(
    path: &Path,
    format: FileFormat,
) -> Result<Vec<(usize, T)>, LoadError> {
    let text = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    let mut rows = Vec::new();
    match format {
        FileFormat::Jsonl => {
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row = serde_json::from_str(line)
                    .map_err(|e| LoadError::row(path, idx + 1, e.to_string()))?;
                rows.push((idx + 1, row));
            }
        }
        FileFormat::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            for (idx, result) in reader.deserialize().enumerate() {
                // line 1 is the header
                let line = idx + 2;
                let row = result.map_err(|e| LoadError::row(path, line, e.to_string()))?;
                rows.push((line, row));
            }
        }
    }
    Ok(rows)
}

/// Loads annotations, clamping out-of-frame boxes and reporting them.
pub fn load_annotations(
    path: &Path,
    format: FileFormat,
) -> Result<(Vec<AnnotationRecord>, LoadReport), LoadError> {
    let mut report = LoadReport::default();
    let rows: Vec<(usize, AnnotationRow)> = load_rows(path, format)?;
    let mut records = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        records.push(row.into_record(path, line, &mut report)?);
    }
    report.rows = records.len();
    Ok((records, report))
}

/// Loads detection records.
pub fn load_detections(path: &Path, format: FileFormat) -> Result<Vec<DetectionRecord>, LoadError> {
    let rows: Vec<(usize, DetectionRow)> = load_rows(path, format)?;
    rows.into_iter()
        .map(|(line, row)| row.into_record(path, line))
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], format: FileFormat) -> anyhow::Result<()> {
    let text = match format {
        FileFormat::Jsonl => {
            let mut out = String::new();
            for row in rows {
                writeln!(out, "{}", serde_json::to_string(row)?)?;
            }
            out
        }
        FileFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in rows {
                writer.serialize(row)?;
            }
            String::from_utf8(writer.into_inner()?)?
        }
    };
    fs::write(path, text)?;
    Ok(())
}

/// Writes annotations in the requested encoding.
pub fn save_annotations(
    path: &Path,
    records: &[AnnotationRecord],
    format: FileFormat,
) -> anyhow::Result<()> {
    let rows: Vec<AnnotationRow> = records.iter().map(AnnotationRow::from_record).collect();
    write_rows(path, &rows, format)
}

/// Writes detections in the requested encoding.
pub fn save_detections(
    path: &Path,
    records: &[DetectionRecord],
    format: FileFormat,
) -> anyhow::Result<()> {
    let rows: Vec<DetectionRow> = records.iter().map(DetectionRow::from_record).collect();
    write_rows(path, &rows, format)
}
