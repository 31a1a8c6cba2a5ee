//! End-to-end checks of the evolutionary anchor search on synthetic datasets
//! with known structure.

use anchorkit_core::anchor_opt::{
    coverage_stats, evolve, group_by_region, kmeans_anchor_baseline, AnchorChromosome, EaParams,
};
use anchorkit_core::data::{
    pearson_correlation, AnnotationRecord, Camera, Difficulty, ObjectClass,
};
use anchorkit_core::geometry::{AnchorSpec, BoundingBox};
use anchorkit_core::regions::RegionPartition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Boxes sampled from a known 12-anchor configuration with ±2% jitter on
/// both dimensions.
fn planted_boxes(
    planted: &AnchorChromosome,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<BoundingBox> {
    let config = planted.decode();
    (0..count)
        .map(|_| {
            let spec = config[rng.gen_range(0..config.len())];
            let w = spec.width() * rng.gen_range(0.98..1.02);
            let h = spec.height() * rng.gen_range(0.98..1.02);
            BoundingBox::from_center_size(
                rng.gen_range(600.0..1300.0),
                rng.gen_range(400.0..900.0),
                w,
                h,
            )
        })
        .collect()
}

#[test]
fn planted_configuration_is_recovered() {
    let planted = AnchorChromosome::uniform_default();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let gts = planted_boxes(&planted, 1500, &mut rng);

    let params = EaParams {
        seed: 2024,
        ..EaParams::default()
    };
    let result = evolve(&[gts], &RegionPartition::uniform(), &params).unwrap();

    let outcome = &result.regions[0];
    assert_eq!(outcome.history.len(), params.generations + 1);
    for w in outcome.history.windows(2) {
        assert!(w[1].best_fitness <= w[0].best_fitness + 1e-12);
    }
    assert!(
        result.report.overall.mean_max_iou >= 0.90,
        "recovered coverage {:.4}",
        result.report.overall.mean_max_iou
    );
}

/// A perspective-like dataset: object scale grows with the vertical
/// position of its center, with multiplicative noise.
fn perspective_records(count: usize, rng: &mut ChaCha8Rng) -> Vec<AnnotationRecord> {
    (0..count)
        .map(|i| {
            let y = rng.gen_range(0.05..0.98);
            let scale = (0.08 + 2.0 * y) * (rng.gen_range(-0.25f64..0.25)).exp();
            let aspect = rng.gen_range(0.4..2.5);
            let spec = AnchorSpec::new(scale, aspect).unwrap();
            let (w, h) = (spec.width(), spec.height());
            // keep the box inside a tall synthetic frame so the y center is
            // exactly the sampled value
            let cy = y * 4000.0;
            AnnotationRecord {
                image_id: format!("img-{}", i / 20),
                camera: Camera::Front,
                image_width: 4000,
                image_height: 4000,
                class: ObjectClass::Vehicle,
                difficulty: Difficulty::L1,
                bbox: BoundingBox::from_center_size(
                    2000.0,
                    cy.clamp(h / 2.0, 4000.0 - h / 2.0),
                    w,
                    h,
                ),
            }
        })
        .collect()
}

#[test]
fn per_region_search_beats_global_baselines() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let records = perspective_records(2500, &mut rng);

    // the construction really is perspective-correlated
    let ys: Vec<f64> = records.iter().map(|r| r.y_center_norm()).collect();
    let scales: Vec<f64> = records
        .iter()
        .map(|r| (r.bbox.area()).sqrt() / 256.0)
        .collect();
    let r = pearson_correlation(&ys, &scales).unwrap();
    assert!(r >= 0.6, "construction correlation {r:.3}");

    let all_boxes: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    let partition = RegionPartition::new(vec![0.3, 0.6]).unwrap();
    let grouped = group_by_region(&records, &partition).unwrap();

    let params = EaParams {
        population: 60,
        generations: 30,
        seed: 5150,
        ..EaParams::default()
    };
    let ea = evolve(&grouped, &partition, &params).unwrap();
    let ea_mean = ea.report.overall.mean_max_iou;

    let (_, km) = kmeans_anchor_baseline(&all_boxes, 12, 5150).unwrap();
    let uniform =
        coverage_stats(&AnchorChromosome::uniform_default().decode(), &all_boxes).unwrap();

    assert!(
        ea_mean >= km.mean_max_iou - 0.01,
        "EA {ea_mean:.4} vs K-means {:.4}",
        km.mean_max_iou
    );
    assert!(
        km.mean_max_iou - 0.01 >= uniform.mean_max_iou,
        "K-means {:.4} vs uniform {:.4}",
        km.mean_max_iou,
        uniform.mean_max_iou
    );
    assert!(
        ea_mean >= uniform.mean_max_iou + 0.10,
        "EA {ea_mean:.4} did not improve enough over uniform {:.4}",
        uniform.mean_max_iou
    );
}

#[test]
fn baseline_recovers_twelve_planted_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let planted = AnchorChromosome::uniform_default();
    let gts = planted_boxes(&planted, 600, &mut rng);
    let (specs, stats) = kmeans_anchor_baseline(&gts, 12, 31).unwrap();
    assert_eq!(specs.len(), 12);
    assert!(
        stats.mean_max_iou >= 0.95,
        "baseline coverage {:.4}",
        stats.mean_max_iou
    );
}
