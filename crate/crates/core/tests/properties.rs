//! Property tests checking the geometric and statistical invariants against
//! independent oracle implementations.

use anchorkit_core::anchor_opt::{fitness, AnchorChromosome};
use anchorkit_core::data::{DetectionRecord, ObjectClass};
use anchorkit_core::ensemble::{nms, tta_deaugment};
use anchorkit_core::geometry::{iou, max_iou_over_config, AnchorSpec, BoundingBox, ANCHOR_BASE};
use anchorkit_core::regions::{build_partition, density_bounds, RegionPartition};
use proptest::prelude::*;

/// Independent IoU recomputation from corner arithmetic: explicit overlap
/// test, then inclusion-exclusion for the union.
fn iou_oracle(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let lx = a.x_min.max(b.x_min);
    let ly = a.y_min.max(b.y_min);
    let hx = a.x_max.min(b.x_max);
    let hy = a.y_max.min(b.y_max);
    let inter = if hx > lx && hy > ly {
        (hx - lx) * (hy - ly)
    } else {
        0.0
    };
    let area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
    let area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (
        -500.0f64..500.0,
        -500.0f64..500.0,
        0.0f64..400.0,
        0.0f64..400.0,
    )
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h))
}

fn arb_gene() -> impl Strategy<Value = f64> {
    0.06f64..=4.0
}

fn arb_genes() -> impl Strategy<Value = ([f64; 3], [f64; 4])> {
    (
        [arb_gene(), arb_gene(), arb_gene()],
        [arb_gene(), arb_gene(), arb_gene(), arb_gene()],
    )
}

fn arb_chromosome() -> impl Strategy<Value = AnchorChromosome> {
    arb_genes().prop_map(|(aspects, scales)| AnchorChromosome::new(aspects, scales).unwrap())
}

proptest! {
    #[test]
    fn iou_matches_corner_arithmetic_oracle(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert!((v - iou_oracle(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn iou_is_translation_invariant(a in arb_box(), b in arb_box(),
                                    dx in -2000.0f64..2000.0, dy in -2000.0f64..2000.0) {
        let before = iou(&a, &b);
        let after = iou(&a.translated(dx, dy), &b.translated(dx, dy));
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn iou_of_a_box_with_itself_is_one(a in arb_box()) {
        prop_assume!(a.area() > 0.0);
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn decoded_anchor_area_ignores_aspect(s in 0.06f64..=4.0, a in 0.06f64..=4.0) {
        let spec = AnchorSpec::new(s, a).unwrap();
        let expected = (ANCHOR_BASE * s) * (ANCHOR_BASE * s);
        let area = spec.decode().area();
        prop_assert!((area - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn max_iou_equals_exhaustive_loop(gt in arb_box(), x in arb_chromosome()) {
        prop_assume!(gt.area() > 0.0);
        let config = x.decode();
        let (cx, cy) = gt.center();
        let brute = config
            .iter()
            .map(|spec| iou_oracle(&gt, &spec.centered_on(cx, cy)))
            .fold(0.0f64, f64::max);
        let fast = max_iou_over_config(&gt, &config).unwrap();
        prop_assert!((fast - brute).abs() < 1e-12);
    }

    #[test]
    fn fitness_ignores_gene_order(
        (aspects, scales) in arb_genes(),
        boxes in proptest::collection::vec((10.0f64..900.0, 10.0f64..900.0), 1..20),
    ) {
        let gts: Vec<BoundingBox> = boxes
            .iter()
            .map(|&(w, h)| BoundingBox::from_center_size(0.0, 0.0, w, h))
            .collect();
        let canonical = AnchorChromosome::new(aspects, scales).unwrap();
        // permute the raw genes before construction; the decoded set is the
        // same cartesian product, so fitness cannot change
        let permuted = AnchorChromosome::new(
            [aspects[2], aspects[0], aspects[1]],
            [scales[3], scales[1], scales[0], scales[2]],
        )
        .unwrap();
        prop_assert_eq!(canonical, permuted);
        prop_assert_eq!(
            fitness(&canonical, &gts).unwrap(),
            fitness(&permuted, &gts).unwrap()
        );
    }

    #[test]
    fn fitness_matches_brute_force_oracle(
        x in arb_chromosome(),
        boxes in proptest::collection::vec((5.0f64..1100.0, 5.0f64..1100.0), 1..25),
    ) {
        let gts: Vec<BoundingBox> = boxes
            .iter()
            .map(|&(w, h)| BoundingBox::from_center_size(w, h, w, h))
            .collect();
        // independent recomputation: 12 oracle IoUs per box, then the
        // log-weighted penalty
        let mut total = 0.0;
        for gt in &gts {
            let (cx, cy) = gt.center();
            let mut best = 0.0f64;
            for &a in &x.aspects() {
                for &s in &x.scales() {
                    let w = ANCHOR_BASE * s * a.sqrt();
                    let h = ANCHOR_BASE * s / a.sqrt();
                    let anchor =
                        BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0);
                    best = best.max(iou_oracle(gt, &anchor));
                }
            }
            let m = best.clamp(1e-7, 1.0);
            total += -(1.0 - m) * (1.0 - m) * m.ln();
        }
        let expected = total / gts.len() as f64;
        let actual = fitness(&x, &gts).unwrap();
        prop_assert!((actual - expected).abs() < 1e-12, "{} vs {}", actual, expected);
    }

    #[test]
    fn fitness_is_non_negative(x in arb_chromosome(),
                               boxes in proptest::collection::vec((1.0f64..1500.0, 1.0f64..1500.0), 1..30)) {
        let gts: Vec<BoundingBox> = boxes
            .iter()
            .map(|&(w, h)| BoundingBox::from_center_size(0.0, 0.0, w, h))
            .collect();
        prop_assert!(fitness(&x, &gts).unwrap() >= 0.0);
    }

    #[test]
    fn density_bounds_contain_the_mass(
        values in proptest::collection::vec(0.0f64..1.0, 3..400),
        mass in 0.5f64..0.999,
    ) {
        let (alpha, beta) = density_bounds(&values, mass).unwrap();
        let inside = values.iter().filter(|&&v| v >= alpha && v <= beta).count();
        // linear interpolation can exclude at most one order statistic per tail
        prop_assert!(inside as f64 >= mass * values.len() as f64 - 2.0);
    }

    #[test]
    fn every_position_lands_in_exactly_one_region(
        raw_bounds in proptest::collection::vec(0.01f64..0.99, 0..6),
        ys in proptest::collection::vec(0.0f64..=1.0, 1..100),
    ) {
        let mut bounds = raw_bounds;
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();
        let partition = RegionPartition::new(bounds).unwrap();
        let mut counts = vec![0usize; partition.num_regions()];
        for &y in &ys {
            counts[partition.assign_region(y).unwrap()] += 1;
        }
        prop_assert_eq!(counts.iter().sum::<usize>(), ys.len());
    }

    #[test]
    fn partition_bounds_respect_dedup_gap(
        pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..6),
    ) {
        let cluster_bounds: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        let partition = build_partition(&cluster_bounds);
        for w in partition.bounds().windows(2) {
            prop_assert!(w[1] - w[0] >= 0.005);
        }
        for &b in partition.bounds() {
            prop_assert!(b > 0.0 && b < 1.0);
        }
    }

    #[test]
    fn nms_output_is_an_antichain_containing_the_top_score(
        raw in proptest::collection::vec((0.0f64..1.0, -100.0f64..100.0, -100.0f64..100.0, 1.0f64..80.0, 1.0f64..80.0), 1..25),
        threshold in 0.2f64..0.9,
    ) {
        let dets: Vec<DetectionRecord> = raw
            .iter()
            .map(|&(score, x, y, w, h)| DetectionRecord {
                image_id: "img".into(),
                class: ObjectClass::Vehicle,
                score,
                bbox: BoundingBox::new(x, y, x + w, y + h),
                model_tag: "m".into(),
                scale_factor: 1.0,
            })
            .collect();
        let kept = nms(&dets, threshold);
        prop_assert!(!kept.is_empty());
        // pairwise overlap never exceeds the threshold
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(iou(&a.bbox, &b.bbox) <= threshold);
            }
        }
        // scores are a subset of the input and the best survives
        let best = dets.iter().map(|d| d.score).fold(f64::MIN, f64::max);
        prop_assert!(kept.iter().any(|d| d.score == best));
        for k in &kept {
            prop_assert!(dets.iter().any(|d| d == k));
        }
    }

    #[test]
    fn deaugment_divides_by_the_scale_factor(
        x in -200.0f64..200.0, y in -200.0f64..200.0,
        w in 1.0f64..300.0, h in 1.0f64..300.0,
        factor in 0.1f64..3.0,
    ) {
        let det = DetectionRecord {
            image_id: "img".into(),
            class: ObjectClass::Cyclist,
            score: 0.5,
            bbox: BoundingBox::new(x * factor, y * factor, (x + w) * factor, (y + h) * factor),
            model_tag: "m".into(),
            scale_factor: factor,
        };
        let out = tta_deaugment(&[det]).unwrap();
        prop_assert!((out[0].bbox.x_min - x).abs() < 1e-9);
        prop_assert!((out[0].bbox.y_max - (y + h)).abs() < 1e-9);
        prop_assert_eq!(out[0].scale_factor, 1.0);
    }
}
