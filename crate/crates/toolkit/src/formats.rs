//! JSON artifact schemas produced and consumed by the pipeline commands:
//! `partition.json`, `anchors.json`, coverage and AP reports, and the
//! dataset analysis summary.

use std::fs;
use std::path::Path;

use anchorkit_core::anchor_opt::{AnchorChromosome, CoverageReport, CoverageStats, EvolveResult};
use anchorkit_core::data::CameraGroup;
use anchorkit_core::eval::ApResult;
use anchorkit_core::geometry::AnchorSpec;
use anchorkit_core::regions::RegionPartition;
use anyhow::Context;
use serde::{Deserialize, Serialize};

/// `partition.json`: the vertical region bounds, optionally split per
/// camera group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub bounds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_camera: Option<PerCameraFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCameraFile {
    pub frontal: Vec<f64>,
    pub lateral: Vec<f64>,
}

impl PartitionFile {
    pub fn from_partition(partition: &RegionPartition) -> Self {
        Self {
            bounds: partition.bounds().to_vec(),
            per_camera: partition.per_camera().map(|pc| PerCameraFile {
                frontal: pc.frontal.clone(),
                lateral: pc.lateral.clone(),
            }),
        }
    }

    pub fn to_partition(&self) -> anyhow::Result<RegionPartition> {
        let partition = RegionPartition::new(self.bounds.clone())?;
        Ok(match &self.per_camera {
            Some(pc) => partition.with_per_camera(pc.frontal.clone(), pc.lateral.clone())?,
            None => partition,
        })
    }
}

/// One region's anchor configuration inside `anchors.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnchors {
    /// Vertical span `[low, high]` of the region.
    pub bounds: [f64; 2],
    pub scales: [f64; 4],
    pub aspects: [f64; 3],
    /// True when the region had no ground truths and carries the default
    /// uniform configuration.
    #[serde(default)]
    pub fallback: bool,
}

/// Per-generation curves of one region's search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionHistory {
    pub region: usize,
    pub best_fitness: Vec<f64>,
    pub mean_max_iou: Vec<f64>,
}

/// Coverage numbers serialized into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStatsFile {
    pub count: usize,
    pub mean_max_iou: f64,
    pub frac_iou_ge_half: f64,
    pub fitness: f64,
}

impl From<CoverageStats> for CoverageStatsFile {
    fn from(s: CoverageStats) -> Self {
        Self {
            count: s.count,
            mean_max_iou: s.mean_max_iou,
            frac_iou_ge_half: s.frac_iou_ge_half,
            fitness: s.fitness,
        }
    }
}

/// A K-means anchor baseline: the clustered (scale, aspect) pairs and their
/// coverage of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansBaselineFile {
    pub scales: Vec<f64>,
    pub aspects: Vec<f64>,
    pub coverage: CoverageStatsFile,
}

impl KmeansBaselineFile {
    pub fn new(specs: &[AnchorSpec], coverage: CoverageStats) -> Self {
        Self {
            scales: specs.iter().map(|s| s.scale_ratio()).collect(),
            aspects: specs.iter().map(|s| s.aspect_ratio()).collect(),
            coverage: coverage.into(),
        }
    }
}

/// `anchors.json`: per-region optimized configurations with their search
/// history and final coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorsFile {
    pub regions: Vec<RegionAnchors>,
    pub camera_group: String,
    pub seed: u64,
    pub history: Vec<RegionHistory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReportFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<KmeansBaselineFile>,
}

impl AnchorsFile {
    pub fn from_result(result: &EvolveResult, camera_group: CameraGroup, seed: u64) -> Self {
        let regions = result
            .regions
            .iter()
            .map(|r| RegionAnchors {
                bounds: [r.span.0, r.span.1],
                scales: r.chromosome.scales(),
                aspects: r.chromosome.aspects(),
                fallback: r.fallback,
            })
            .collect();
        let history = result
            .regions
            .iter()
            .map(|r| RegionHistory {
                region: r.region,
                best_fitness: r.history.iter().map(|h| h.best_fitness).collect(),
                mean_max_iou: r.history.iter().map(|h| h.best_mean_iou).collect(),
            })
            .collect();
        Self {
            regions,
            camera_group: camera_group.as_str().to_owned(),
            seed,
            history,
            coverage: Some(CoverageReportFile::from_report(&result.report)),
            baseline: None,
        }
    }

    /// The per-region chromosomes, re-validated against the gene bounds.
    pub fn chromosomes(&self) -> anyhow::Result<Vec<AnchorChromosome>> {
        self.regions
            .iter()
            .map(|r| AnchorChromosome::new(r.aspects, r.scales).context("invalid anchor gene"))
            .collect()
    }

    /// The partition implied by the region spans (every span's upper edge
    /// except the last is a bound).
    pub fn to_partition(&self) -> anyhow::Result<RegionPartition> {
        let mut bounds: Vec<f64> = self
            .regions
            .iter()
            .take(self.regions.len().saturating_sub(1))
            .map(|r| r.bounds[1])
            .collect();
        bounds.dedup();
        Ok(RegionPartition::new(bounds)?)
    }
}

/// Coverage report for a dataset under per-region configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReportFile {
    pub per_region: Vec<Option<CoverageStatsFile>>,
    pub overall: CoverageStatsFile,
}

impl CoverageReportFile {
    pub fn from_report(report: &CoverageReport) -> Self {
        Self {
            per_region: report
                .per_region
                .iter()
                .map(|r| r.map(CoverageStatsFile::from))
                .collect(),
            overall: report.overall.into(),
        }
    }
}

/// One (class, level) row of `ap_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApEntryFile {
    pub class: String,
    pub level: String,
    pub ap: f64,
    pub gt_count: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// `ap_report.json`: per-class, per-level AP plus the class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReportFile {
    pub per_class: Vec<ApEntryFile>,
    pub mean_ap_l1: Option<f64>,
    pub mean_ap_l2: Option<f64>,
}

impl ApReportFile {
    pub fn from_result(result: &ApResult) -> Self {
        Self {
            per_class: result
                .entries
                .iter()
                .map(|e| ApEntryFile {
                    class: e.class.as_str().to_owned(),
                    level: e.level.as_str().to_owned(),
                    ap: e.ap,
                    gt_count: e.gt_count,
                    true_positives: e.true_positives,
                    false_positives: e.false_positives,
                    false_negatives: e.false_negatives,
                })
                .collect(),
            mean_ap_l1: result.mean_ap_l1,
            mean_ap_l2: result.mean_ap_l2,
        }
    }
}

/// Per-class share of the dataset, `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub class: String,
    pub count: usize,
    pub percentage: f64,
}

/// Position/height correlation of one camera group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCorrelation {
    pub camera_group: String,
    pub count: usize,
    pub pearson_r: f64,
}

/// `analysis.json`: dataset composition and the position-size correlation
/// per camera group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFile {
    pub total: usize,
    pub classes: Vec<ClassShare>,
    pub correlations: Vec<GroupCorrelation>,
    pub clamped_boxes: usize,
}

/// Writes a JSON artifact with a stable, pretty layout and trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads a JSON artifact.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_file_round_trips() {
        let partition = RegionPartition::new(vec![0.188, 0.392, 0.691])
            .unwrap()
            .with_per_camera(vec![0.2, 0.7], vec![0.4])
            .unwrap();
        let file = PartitionFile::from_partition(&partition);
        let json = serde_json::to_string(&file).unwrap();
        let parsed: PartitionFile = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_partition().unwrap(), partition);
    }

    #[test]
    fn partition_without_per_camera_omits_the_key() {
        let partition = RegionPartition::new(vec![0.5]).unwrap();
        let json = serde_json::to_string(&PartitionFile::from_partition(&partition)).unwrap();
        assert!(!json.contains("per_camera"));
    }

    #[test]
    fn anchors_file_region_spans_recover_the_partition() {
        let file = AnchorsFile {
            regions: vec![
                RegionAnchors {
                    bounds: [0.0, 0.3],
                    scales: [0.1, 0.2, 0.3, 0.4],
                    aspects: [0.5, 1.0, 2.0],
                    fallback: false,
                },
                RegionAnchors {
                    bounds: [0.3, 1.0],
                    scales: [0.5, 1.0, 1.5, 2.0],
                    aspects: [0.5, 1.0, 2.0],
                    fallback: false,
                },
            ],
            camera_group: "all".into(),
            seed: 42,
            history: vec![],
            coverage: None,
            baseline: None,
        };
        let partition = file.to_partition().unwrap();
        assert_eq!(partition.bounds(), &[0.3]);
        assert_eq!(file.chromosomes().unwrap().len(), 2);
    }
}
