//! Implementations of the pipeline commands.
//!
//! Every artifact-producing command is deterministic for a fixed
//! (inputs, config, seed) triple: re-runs write byte-identical primary
//! artifacts. The run manifest, which carries the wall-clock duration, is
//! the only file allowed to differ.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anchorkit_core::anchor_opt::{
    evaluate_coverage, evolve, group_by_region, kmeans_anchor_baseline, AnchorChromosome, EaParams,
    EvolveResult,
};
use anchorkit_core::data::{
    derive_features, pearson_correlation, AnnotationRecord, CameraGroup, DetectionRecord,
    ObjectClass,
};
use anchorkit_core::ensemble::{affirmative_merge, tta_deaugment};
use anchorkit_core::eval::evaluate_ap;
use anchorkit_core::geometry::{iou, BoundingBox};
use anchorkit_core::regions::{
    build_partition, density_bounds, select_k_by_silhouette, standardize, RegionPartition,
};
use anyhow::{bail, Context};
use thiserror::Error;

use crate::config::KvConfig;
use crate::formats::{
    self, AnalysisFile, AnchorsFile, ApReportFile, ClassShare, CoverageReportFile,
    GroupCorrelation, KmeansBaselineFile, PartitionFile,
};
use crate::io::{self, FileFormat, LoadReport};
use crate::manifest::ManifestBuilder;
use crate::svg::{Svg, Viewport};

/// A post-condition of the pipeline itself failed; mapped to exit code 2.
#[derive(Debug, Error)]
#[error("internal invariant breached: {0}")]
pub struct InternalError(pub String);

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct GlobalOpts {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub camera_group: CameraGroup,
    pub config: KvConfig,
    pub config_text: Option<String>,
}

impl GlobalOpts {
    fn manifest(&self, command: &str) -> ManifestBuilder {
        let mut builder = ManifestBuilder::new(command, self.seed);
        if let Some(text) = &self.config_text {
            builder.config_text(text);
        }
        builder
    }

    fn prepare_out_dir(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))
    }
}

fn load_annotations_filtered(
    path: &Path,
    group: CameraGroup,
) -> anyhow::Result<(Vec<AnnotationRecord>, LoadReport)> {
    let (records, report) = io::load_annotations(path, FileFormat::from_path(path))?;
    if !report.clamped.is_empty() {
        eprintln!(
            "warning: clamped {} out-of-frame box(es) in {}",
            report.clamped.len(),
            path.display()
        );
    }
    let filtered: Vec<AnnotationRecord> = records
        .into_iter()
        .filter(|r| group.includes(r.camera))
        .collect();
    Ok((filtered, report))
}

fn shape_features(records: &[AnnotationRecord]) -> anyhow::Result<Vec<[f64; 2]>> {
    records
        .iter()
        .map(|r| {
            let f = derive_features(r).map_err(|e| anyhow::anyhow!("image {}: {e}", r.image_id))?;
            Ok([f.aspect_ratio, f.scale_ratio])
        })
        .collect()
}

/// Dataset statistics: class shares and the vertical-position/height
/// correlation per camera group, with a scatter summary.
pub fn analyze(opts: &GlobalOpts, annotations: &Path) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("analyze");
    manifest.input(annotations)?;

    let (records, report) = load_annotations_filtered(annotations, opts.camera_group)?;
    if records.is_empty() {
        bail!("empty dataset: no annotations match the selected camera group");
    }

    let mut classes = Vec::new();
    for class in ObjectClass::ALL {
        let count = records.iter().filter(|r| r.class == class).count();
        classes.push(ClassShare {
            class: class.as_str().to_owned(),
            count,
            percentage: 100.0 * count as f64 / records.len() as f64,
        });
    }

    let mut correlations = Vec::new();
    let mut panels = Vec::new();
    for group in [CameraGroup::Frontal, CameraGroup::Lateral] {
        let points: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| group.includes(r.camera))
            .filter_map(|r| {
                derive_features(r)
                    .ok()
                    .map(|f| (f.y_center_norm, f.height_px))
            })
            .collect();
        if points.len() < 2 {
            continue;
        }
        let ys: Vec<f64> = points.iter().map(|p| p.0).collect();
        let heights: Vec<f64> = points.iter().map(|p| p.1).collect();
        match pearson_correlation(&ys, &heights) {
            Ok(r) => {
                correlations.push(GroupCorrelation {
                    camera_group: group.as_str().to_owned(),
                    count: points.len(),
                    pearson_r: r,
                });
                panels.push(CorrelationPanel { group, points, r });
            }
            Err(_) => eprintln!("warning: {group} correlation undefined (constant series)"),
        }
    }

    let analysis = AnalysisFile {
        total: records.len(),
        classes,
        correlations,
        clamped_boxes: report.clamped.len(),
    };
    let analysis_path = opts.out_dir.join("analysis.json");
    formats::write_json(&analysis_path, &analysis)?;
    manifest.output(&analysis_path);

    let svg_path = opts.out_dir.join("correlation.svg");
    std::fs::write(&svg_path, correlation_svg(&panels))?;
    manifest.output(&svg_path);
    manifest.write(&opts.out_dir)?;

    println!("analyzed {} annotations", analysis.total);
    for share in &analysis.classes {
        println!(
            "  {:<10} {:>8} ({:.2}%)",
            share.class, share.count, share.percentage
        );
    }
    for c in &analysis.correlations {
        println!(
            "  {} cameras: r = {:.3} over {} boxes",
            c.camera_group, c.pearson_r, c.count
        );
    }
    Ok(())
}

struct CorrelationPanel {
    group: CameraGroup,
    points: Vec<(f64, f64)>,
    r: f64,
}

fn correlation_svg(panels: &[CorrelationPanel]) -> String {
    let mut svg = Svg::new(820.0, 420.0);
    svg.rect(0.0, 0.0, 820.0, 420.0, "#ffffff");
    for (i, CorrelationPanel { group, points, r }) in panels.iter().enumerate() {
        let x0 = 40.0 + i as f64 * 400.0;
        let max_h = points.iter().map(|p| p.1).fold(1.0f64, f64::max);
        let vp = Viewport {
            x0,
            y0: 30.0,
            width: 340.0,
            height: 330.0,
            x_range: (0.0, 1.0),
            y_range: (0.0, max_h),
        };
        svg.rect(x0, 30.0, 340.0, 330.0, "#f7f7f7");
        // deterministic subsample: at most 400 points by stride
        let stride = (points.len() / 400).max(1);
        for (px, py) in points.iter().step_by(stride) {
            let (cx, cy) = vp.map(*px, *py);
            svg.circle(cx, cy, 1.2, "#1f77b4");
        }
        // least-squares trend through the scatter
        let n = points.len() as f64;
        let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            let at = |x: f64| mean_y + slope * (x - mean_x);
            let (x1, y1) = vp.map(0.0, at(0.0).clamp(0.0, max_h));
            let (x2, y2) = vp.map(1.0, at(1.0).clamp(0.0, max_h));
            svg.line(x1, y1, x2, y2, "#d62728");
        }
        svg.text(
            x0,
            390.0,
            12.0,
            &format!("{} cameras: r = {:.3} (n = {})", group, r, points.len()),
        );
        svg.text(x0, 20.0, 11.0, "height (px) vs normalized y center");
    }
    svg.finish()
}

fn partition_pipeline(
    records: &[AnnotationRecord],
    k_min: usize,
    k_max: usize,
    mass: f64,
    standardize_features: bool,
    seed: u64,
) -> anyhow::Result<(RegionPartition, usize, f64)> {
    let features = shape_features(records)?;
    let points = if standardize_features {
        standardize(&features)
    } else {
        features
    };
    let model = select_k_by_silhouette(&points, k_min, k_max, seed)?;

    let mut cluster_bounds = Vec::with_capacity(model.k());
    for cluster in 0..model.k() {
        let ys: Vec<f64> = records
            .iter()
            .zip(&model.assignments)
            .filter(|(_, &a)| a == cluster)
            .map(|(r, _)| r.y_center_norm())
            .collect();
        if ys.is_empty() {
            continue;
        }
        cluster_bounds.push(density_bounds(&ys, mass)?);
    }
    let partition = build_partition(&cluster_bounds);
    Ok((partition, model.k(), model.silhouette.unwrap_or(f64::NAN)))
}

/// Region division: cluster (aspect, scale), pick k by silhouette, take the
/// 99% vertical interval of each cluster, and merge the edges into
/// `partition.json`.
pub fn cluster(
    opts: &GlobalOpts,
    annotations: &Path,
    k_min: usize,
    k_max: usize,
    split_cameras: bool,
) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("cluster");
    manifest.input(annotations)?;

    let (records, _) = load_annotations_filtered(annotations, opts.camera_group)?;
    if records.is_empty() {
        bail!("empty dataset: no annotations match the selected camera group");
    }
    let mass = opts.config.get::<f64>("density_mass")?.unwrap_or(0.99);
    let standardize_features = opts.config.get::<bool>("standardize")?.unwrap_or(false);

    let (mut partition, k, silhouette) = partition_pipeline(
        &records,
        k_min,
        k_max,
        mass,
        standardize_features,
        opts.seed,
    )?;
    println!(
        "selected k = {k} (mean silhouette {silhouette:.3}); {} region(s)",
        partition.num_regions()
    );
    if partition.num_regions() == 1 {
        eprintln!("warning: single effective region; anchors will not vary with position");
    }

    if split_cameras {
        let mut group_bounds = Vec::new();
        for group in [CameraGroup::Frontal, CameraGroup::Lateral] {
            let subset: Vec<AnnotationRecord> = records
                .iter()
                .filter(|r| group.includes(r.camera))
                .cloned()
                .collect();
            if subset.is_empty() {
                bail!("cannot split cameras: no {group} annotations in the input");
            }
            let (p, k, s) =
                partition_pipeline(&subset, k_min, k_max, mass, standardize_features, opts.seed)?;
            println!(
                "  {group}: k = {k} (silhouette {s:.3}); {} region(s)",
                p.num_regions()
            );
            group_bounds.push(p.bounds().to_vec());
        }
        let lateral = group_bounds.pop().expect("two groups");
        let frontal = group_bounds.pop().expect("two groups");
        partition = partition.with_per_camera(frontal, lateral)?;
    }

    let path = opts.out_dir.join("partition.json");
    formats::write_json(&path, &PartitionFile::from_partition(&partition))?;
    manifest.output(&path);
    manifest.write(&opts.out_dir)?;
    Ok(())
}

fn optimize_one_group(
    records: &[AnnotationRecord],
    bounds: &[f64],
    params: &EaParams,
) -> anyhow::Result<EvolveResult> {
    let partition = RegionPartition::new(bounds.to_vec())?;
    let grouped = group_by_region(records, &partition)?;
    let result = evolve(&grouped, &partition, params)?;
    for region in &result.regions {
        let expected = if region.fallback {
            0
        } else {
            params.generations + 1
        };
        if region.history.len() != expected {
            return Err(InternalError(format!(
                "region {} history has {} entries, expected {expected}",
                region.region,
                region.history.len()
            ))
            .into());
        }
        if region.fallback {
            eprintln!(
                "warning: region {} has no ground truths; using the default uniform anchors",
                region.region
            );
        }
    }
    Ok(result)
}

/// Evolutionary anchor search per region (optionally per camera group),
/// emitting `anchors.json` and a convergence chart.
pub fn optimize(
    opts: &GlobalOpts,
    annotations: &Path,
    partition_path: &Path,
    split_cameras: bool,
    baseline_kmeans: bool,
) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("optimize");
    manifest.input(annotations)?;
    manifest.input(partition_path)?;

    let (records, _) = load_annotations_filtered(annotations, opts.camera_group)?;
    if records.is_empty() {
        bail!("empty dataset: no annotations match the selected camera group");
    }
    let partition = formats::read_json::<PartitionFile>(partition_path)?.to_partition()?;
    let params = opts.config.ea_params(opts.seed)?;

    let baseline_for = |subset: &[AnnotationRecord]| -> anyhow::Result<Option<KmeansBaselineFile>> {
        if !baseline_kmeans {
            return Ok(None);
        }
        let boxes: Vec<BoundingBox> = subset.iter().map(|r| r.bbox).collect();
        let (specs, stats) = kmeans_anchor_baseline(&boxes, 12, opts.seed)?;
        Ok(Some(KmeansBaselineFile::new(&specs, stats)))
    };

    let mut curves: Vec<RegionCurve> = Vec::new();
    if split_cameras {
        for group in [CameraGroup::Frontal, CameraGroup::Lateral] {
            let subset: Vec<AnnotationRecord> = records
                .iter()
                .filter(|r| group.includes(r.camera))
                .cloned()
                .collect();
            if subset.is_empty() {
                bail!("cannot split cameras: no {group} annotations in the input");
            }
            let result = optimize_one_group(&subset, partition.bounds_for(group), &params)?;
            let mut file = AnchorsFile::from_result(&result, group, opts.seed);
            file.baseline = baseline_for(&subset)?;
            let path = opts
                .out_dir
                .join(format!("anchors_{}.json", group.as_str()));
            formats::write_json(&path, &file)?;
            manifest.output(&path);
            print_optimize_summary(&result, group);
            for region in &result.regions {
                if !region.fallback {
                    curves.push(RegionCurve {
                        label: format!("{} R{}", group.as_str(), region.region + 1),
                        mean_iou: region.history.iter().map(|h| h.best_mean_iou).collect(),
                        fitness: region.history.iter().map(|h| h.best_fitness).collect(),
                    });
                }
            }
        }
    } else {
        let result = optimize_one_group(&records, partition.bounds(), &params)?;
        let mut file = AnchorsFile::from_result(&result, opts.camera_group, opts.seed);
        file.baseline = baseline_for(&records)?;
        let path = opts.out_dir.join("anchors.json");
        formats::write_json(&path, &file)?;
        manifest.output(&path);
        print_optimize_summary(&result, opts.camera_group);
        for region in &result.regions {
            if !region.fallback {
                curves.push(RegionCurve {
                    label: format!("R{}", region.region + 1),
                    mean_iou: region.history.iter().map(|h| h.best_mean_iou).collect(),
                    fitness: region.history.iter().map(|h| h.best_fitness).collect(),
                });
            }
        }
    }

    let svg_path = opts.out_dir.join("convergence.svg");
    std::fs::write(&svg_path, convergence_svg(&curves, &records)?)?;
    manifest.output(&svg_path);
    manifest.write(&opts.out_dir)?;
    Ok(())
}

fn print_optimize_summary(result: &EvolveResult, group: CameraGroup) {
    println!(
        "{}: overall mean max-IoU {:.4} ({} boxes, {:.1}% above 0.5)",
        group,
        result.report.overall.mean_max_iou,
        result.report.overall.count,
        100.0 * result.report.overall.frac_iou_ge_half
    );
    for region in &result.regions {
        let coverage = result.report.per_region[region.region]
            .map(|s| format!("{:.4}", s.mean_max_iou))
            .unwrap_or_else(|| "n/a".to_owned());
        let mut line = format!(
            "  R{} [{:.3}, {:.3}]: mean max-IoU {}",
            region.region + 1,
            region.span.0,
            region.span.1,
            coverage
        );
        if region.fallback {
            let _ = write!(line, " (fallback)");
        }
        println!("{line}");
    }
}

struct RegionCurve {
    label: String,
    mean_iou: Vec<f64>,
    fitness: Vec<f64>,
}

const CURVE_COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn convergence_svg(curves: &[RegionCurve], records: &[AnnotationRecord]) -> anyhow::Result<String> {
    let mut svg = Svg::new(680.0, 700.0);
    svg.rect(0.0, 0.0, 680.0, 700.0, "#ffffff");
    let max_gen = curves
        .iter()
        .map(|c| c.mean_iou.len())
        .max()
        .unwrap_or(1)
        .max(2)
        - 1;

    // upper panel: best-individual mean max-IoU, fixed [0, 1] scale
    let iou_vp = Viewport {
        x0: 50.0,
        y0: 20.0,
        width: 560.0,
        height: 260.0,
        x_range: (0.0, max_gen as f64),
        y_range: (0.0, 1.0),
    };
    svg.rect(50.0, 20.0, 560.0, 260.0, "#f7f7f7");
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (x1, y) = iou_vp.map(0.0, frac);
        let (x2, _) = iou_vp.map(max_gen as f64, frac);
        svg.line(x1, y, x2, y, "#dddddd");
        svg.text(8.0, y + 3.0, 10.0, &format!("{frac:.2}"));
    }
    // uniform-anchor reference level on the same data
    let boxes: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    if !boxes.is_empty() {
        let uniform = anchorkit_core::anchor_opt::coverage_stats(
            &AnchorChromosome::uniform_default().decode(),
            &boxes,
        )?;
        let (x1, y) = iou_vp.map(0.0, uniform.mean_max_iou);
        let (x2, _) = iou_vp.map(max_gen as f64, uniform.mean_max_iou);
        svg.line(x1, y, x2, y, "#7f7f7f");
        svg.text(x2 + 4.0, y + 3.0, 10.0, "uniform");
    }
    for (i, curve) in curves.iter().enumerate() {
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let points: Vec<(f64, f64)> = curve
            .mean_iou
            .iter()
            .enumerate()
            .map(|(g, &v)| iou_vp.map(g as f64, v))
            .collect();
        svg.polyline(&points, color);
    }
    svg.text(
        50.0,
        298.0,
        11.0,
        "best-individual mean max-IoU per generation",
    );

    // lower panel: best fitness (miss penalty), scaled to the data
    let max_fitness = curves
        .iter()
        .flat_map(|c| c.fitness.iter().copied())
        .fold(1e-6f64, f64::max);
    let fit_vp = Viewport {
        x0: 50.0,
        y0: 330.0,
        width: 560.0,
        height: 260.0,
        x_range: (0.0, max_gen as f64),
        y_range: (0.0, max_fitness),
    };
    svg.rect(50.0, 330.0, 560.0, 260.0, "#f7f7f7");
    for frac in [0.0, 0.5, 1.0] {
        let value = frac * max_fitness;
        let (x1, y) = fit_vp.map(0.0, value);
        let (x2, _) = fit_vp.map(max_gen as f64, value);
        svg.line(x1, y, x2, y, "#dddddd");
        svg.text(8.0, y + 3.0, 10.0, &format!("{value:.2}"));
    }
    for (i, curve) in curves.iter().enumerate() {
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let points: Vec<(f64, f64)> = curve
            .fitness
            .iter()
            .enumerate()
            .map(|(g, &v)| fit_vp.map(g as f64, v))
            .collect();
        svg.polyline(&points, color);
    }
    svg.text(
        50.0,
        608.0,
        11.0,
        "best fitness (miss penalty) per generation",
    );

    for (i, curve) in curves.iter().enumerate() {
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let x = 50.0 + (i % 5) as f64 * 120.0;
        let y = 640.0 + (i / 5) as f64 * 18.0;
        svg.line(x - 10.0, y - 4.0, x - 2.0, y - 4.0, color);
        svg.text(x, y, 11.0, &curve.label);
    }
    Ok(svg.finish())
}

/// Scores an anchors file against a dataset, writing `coverage_report.json`.
pub fn eval_coverage(opts: &GlobalOpts, annotations: &Path, anchors: &Path) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("eval-coverage");
    manifest.input(annotations)?;
    manifest.input(anchors)?;

    let file: AnchorsFile = formats::read_json(anchors)?;
    let group: CameraGroup = file
        .camera_group
        .parse()
        .map_err(|e| anyhow::anyhow!("anchors camera_group: {e}"))?;
    let (records, _) = load_annotations_filtered(annotations, group)?;
    if records.is_empty() {
        bail!("empty dataset: no annotations match camera group `{group}` of the anchors file");
    }

    let partition = file.to_partition()?;
    let configs = file.chromosomes()?;
    let report = evaluate_coverage(&configs, &records, &partition)?;

    let path = opts.out_dir.join("coverage_report.json");
    formats::write_json(&path, &CoverageReportFile::from_report(&report))?;
    manifest.output(&path);
    manifest.write(&opts.out_dir)?;

    println!(
        "coverage: mean max-IoU {:.4} over {} boxes ({:.1}% above 0.5, fitness {:.4})",
        report.overall.mean_max_iou,
        report.overall.count,
        100.0 * report.overall.frac_iou_ge_half,
        report.overall.fitness
    );
    Ok(())
}

/// K-means anchor baseline over raw box dimensions, `kmeans_anchors.json`.
pub fn kmeans_anchors(opts: &GlobalOpts, annotations: &Path, k: usize) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("kmeans-anchors");
    manifest.input(annotations)?;

    let (records, _) = load_annotations_filtered(annotations, opts.camera_group)?;
    if records.is_empty() {
        bail!("empty dataset: no annotations match the selected camera group");
    }
    let boxes: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    let (specs, stats) = kmeans_anchor_baseline(&boxes, k, opts.seed)?;

    let path = opts.out_dir.join("kmeans_anchors.json");
    formats::write_json(&path, &KmeansBaselineFile::new(&specs, stats))?;
    manifest.output(&path);
    manifest.write(&opts.out_dir)?;

    println!(
        "k-means baseline ({k} anchors): mean max-IoU {:.4} over {} boxes",
        stats.mean_max_iou, stats.count
    );
    Ok(())
}

/// Affirmative NMS fusion of several models' detections into `fused.jsonl`.
pub fn ensemble(opts: &GlobalOpts, models: &[PathBuf], tta: bool) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("ensemble");
    let cfg = opts.config.fusion_config()?;

    let mut outputs = Vec::with_capacity(models.len());
    for path in models {
        manifest.input(path)?;
        let mut dets = io::load_detections(path, FileFormat::from_path(path))?;
        if tta {
            dets = tta_deaugment(&dets)?;
        }
        outputs.push(dets);
    }

    let fused = affirmative_merge(&outputs, &cfg)?;
    verify_antichain(&fused, cfg.nms_iou_threshold)?;

    let path = opts.out_dir.join("fused.jsonl");
    io::save_detections(&path, &fused, FileFormat::Jsonl)?;
    manifest.output(&path);
    manifest.write(&opts.out_dir)?;

    let total: usize = outputs.iter().map(Vec::len).sum();
    println!(
        "fused {} detections from {} model file(s) into {} (threshold {})",
        total,
        models.len(),
        fused.len(),
        cfg.nms_iou_threshold
    );
    Ok(())
}

fn verify_antichain(fused: &[DetectionRecord], threshold: f64) -> anyhow::Result<()> {
    for (i, a) in fused.iter().enumerate() {
        for b in &fused[i + 1..] {
            if a.image_id == b.image_id && a.class == b.class && iou(&a.bbox, &b.bbox) > threshold {
                return Err(InternalError(format!(
                    "fused output keeps overlapping boxes in image {} (IoU {:.3} > {threshold})",
                    a.image_id,
                    iou(&a.bbox, &b.bbox)
                ))
                .into());
            }
        }
    }
    Ok(())
}

/// Interpolated AP at the per-class IoU thresholds, `ap_report.json`.
pub fn eval_ap(opts: &GlobalOpts, detections: &Path, annotations: &Path) -> anyhow::Result<()> {
    opts.prepare_out_dir()?;
    let mut manifest = opts.manifest("eval-ap");
    manifest.input(detections)?;
    manifest.input(annotations)?;

    if opts.camera_group != CameraGroup::All {
        eprintln!(
            "warning: detections carry no camera field; --camera-group is ignored by eval-ap"
        );
    }
    let (records, report) = io::load_annotations(annotations, FileFormat::from_path(annotations))?;
    if !report.clamped.is_empty() {
        eprintln!(
            "warning: clamped {} out-of-frame box(es) in {}",
            report.clamped.len(),
            annotations.display()
        );
    }
    let dets = io::load_detections(detections, FileFormat::from_path(detections))?;

    let result = evaluate_ap(&dets, &records);
    let path = opts.out_dir.join("ap_report.json");
    formats::write_json(&path, &ApReportFile::from_result(&result))?;
    manifest.output(&path);
    manifest.write(&opts.out_dir)?;

    for entry in &result.entries {
        println!(
            "  {:<10} {}: AP {:.4} (tp {}, fp {}, fn {})",
            entry.class.as_str(),
            entry.level.as_str(),
            entry.ap,
            entry.true_positives,
            entry.false_positives,
            entry.false_negatives
        );
    }
    match (result.mean_ap_l1, result.mean_ap_l2) {
        (Some(l1), Some(l2)) => println!("mean AP: L1 {l1:.4}, L2 {l2:.4}"),
        _ => println!("mean AP undefined (no ground truths)"),
    }
    Ok(())
}
