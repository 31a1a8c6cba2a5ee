//! Acceptance suite: one test per criterion, each printing a PASS line when
//! it holds (run with `-- --nocapture` to see every line). Tolerances are
//! pinned in the assertions.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use anchorkit::io::{save_annotations, save_detections, FileFormat};
use anchorkit_core::anchor_opt::{
    coverage_stats, evolve, group_by_region, kmeans_anchor_baseline, AnchorChromosome, EaParams,
    DEFAULT_SEED,
};
use anchorkit_core::data::{
    pearson_correlation, AnnotationRecord, Camera, DetectionRecord, Difficulty, ObjectClass,
};
use anchorkit_core::ensemble::{affirmative_merge, nms, tta_deaugment, FusionConfig};
use anchorkit_core::eval::{average_precision, evaluate_ap};
use anchorkit_core::geometry::{iou, BoundingBox};
use anchorkit_core::losses::{
    binary_cross_entropy, focal_loss, loss_from_logit, loss_grad_logit, reduced_focal_loss,
    sigmoid, smooth_l1, weighted_multitask_loss, ClassWeights, ClsLoss, FocalParams, LossSample,
    MultiTaskLossParams,
};
use anchorkit_core::regions::{
    build_partition, density_bounds, kmeans, mean_silhouette, select_k_by_silhouette,
    RegionPartition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "[acceptance] {criterion}: PASS ({detail}; {:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

// --- criterion 1: geometry oracle -----------------------------------------

fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let lx = if a.x_min > b.x_min { a.x_min } else { b.x_min };
    let ly = if a.y_min > b.y_min { a.y_min } else { b.y_min };
    let hx = if a.x_max < b.x_max { a.x_max } else { b.x_max };
    let hy = if a.y_max < b.y_max { a.y_max } else { b.y_max };
    let inter = if hx > lx && hy > ly {
        (hx - lx) * (hy - ly)
    } else {
        0.0
    };
    let union = (a.x_max - a.x_min) * (a.y_max - a.y_min)
        + (b.x_max - b.x_min) * (b.y_max - b.y_min)
        - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[test]
fn criterion_1_geometry_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    // float pairs against the corner-arithmetic recomputation
    for _ in 0..1000 {
        let a = BoundingBox::new(
            rng.gen_range(-400.0..400.0),
            rng.gen_range(-400.0..400.0),
            rng.gen_range(400.0..900.0),
            rng.gen_range(400.0..900.0),
        );
        let b = a.translated(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
        let b = BoundingBox::new(
            b.x_min,
            b.y_min,
            b.x_min + rng.gen_range(0.0..700.0),
            b.y_min + rng.gen_range(0.0..700.0),
        );
        let v = iou(&a, &b);
        assert!((v - oracle_iou(&a, &b)).abs() < 1e-12, "oracle mismatch");
        assert_eq!(v, iou(&b, &a), "symmetry breach");
        assert!((0.0..=1.0).contains(&v));
    }

    // integer-valued boxes: translation invariance is exact in f64
    for _ in 0..1000 {
        let a = BoundingBox::new(
            rng.gen_range(-300i64..300) as f64,
            rng.gen_range(-300i64..300) as f64,
            rng.gen_range(300i64..900) as f64,
            rng.gen_range(300i64..900) as f64,
        );
        let b = BoundingBox::new(
            rng.gen_range(-300i64..300) as f64,
            rng.gen_range(-300i64..300) as f64,
            rng.gen_range(300i64..900) as f64,
            rng.gen_range(300i64..900) as f64,
        );
        let (dx, dy) = (
            rng.gen_range(-1000i64..1000) as f64,
            rng.gen_range(-1000i64..1000) as f64,
        );
        assert_eq!(
            iou(&a, &b),
            iou(&a.translated(dx, dy), &b.translated(dx, dy)),
            "translation invariance breach"
        );
    }

    assert!(
        started.elapsed() < Duration::from_secs(1),
        "runtime budget exceeded"
    );
    pass(
        "C1 geometry-oracle",
        "1000 float pairs + 1000 integer translations".into(),
        started,
    );
}

// --- criterion 2: planted-solution recovery --------------------------------

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
fn criterion_2_planted_solution_recovery() {
    let started = Instant::now();
    // the known configuration: the default two-stage detector anchor set
    let planted = AnchorChromosome::uniform_default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_000);
    let gts = planted_boxes(&planted, 5000, &mut rng);

    let params = EaParams::default(); // stock run parameters, documented seed
    assert_eq!((params.population, params.generations), (100, 50));
    assert_eq!((params.crossover_prob, params.mutation_prob), (0.8, 0.2));
    assert_eq!(params.seed, DEFAULT_SEED);

    let result = evolve(&[gts], &RegionPartition::uniform(), &params).unwrap();
    let outcome = &result.regions[0];

    assert_eq!(outcome.history.len(), params.generations + 1);
    for w in outcome.history.windows(2) {
        assert!(
            w[1].best_fitness <= w[0].best_fitness + 1e-12,
            "elitism monotonicity breach: {:?} -> {:?}",
            w[0],
            w[1]
        );
    }
    let recovered = result.report.overall.mean_max_iou;
    assert!(
        recovered >= 0.90,
        "recovered mean max-IoU {recovered:.4} < 0.90"
    );
    assert!(
        started.elapsed() < Duration::from_secs(300),
        "runtime budget exceeded"
    );
    pass(
        "C2 planted-recovery",
        format!("mean max-IoU {recovered:.4} over 5000 boxes, monotone over 50 generations"),
        started,
    );
}

// --- criterion 3: coverage ordering on a perspective dataset ---------------

fn perspective_records(count: usize, seed: u64) -> Vec<AnnotationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let y: f64 = rng.gen_range(0.03..0.97);
            let scale = (0.05 + 2.6 * y.powf(1.4)) * rng.gen_range(-0.3f64..0.3).exp();
            let aspect: f64 = rng.gen_range(0.35..2.8);
            let w = 256.0 * scale * aspect.sqrt();
            let h = 256.0 * scale / aspect.sqrt();
            let side = 4000.0_f64;
            let cy = (y * side).clamp(h / 2.0, side - h / 2.0);
            AnnotationRecord {
                image_id: format!("img-{}", i / 25),
                camera: Camera::Front,
                image_width: side as u32,
                image_height: side as u32,
                class: ObjectClass::Vehicle,
                difficulty: Difficulty::L1,
                bbox: BoundingBox::from_center_size(side / 2.0, cy, w, h),
            }
        })
        .collect()
}

#[test]
fn criterion_3_coverage_ordering() {
    let started = Instant::now();
    let records = perspective_records(4000, 30_000);

    // the construction is perspective-correlated as required
    let ys: Vec<f64> = records.iter().map(|r| r.y_center_norm()).collect();
    let scales: Vec<f64> = records
        .iter()
        .map(|r| r.bbox.area().sqrt() / 256.0)
        .collect();
    let r = pearson_correlation(&ys, &scales).unwrap();
    assert!(r >= 0.6, "construction correlation {r:.3} < 0.6");

    // region pipeline: shape clustering -> density bounds -> partition
    let features: Vec<[f64; 2]> = records
        .iter()
        .map(|rec| {
            let w = rec.bbox.width();
            let h = rec.bbox.height();
            [w / h, (w * h).sqrt() / 256.0]
        })
        .collect();
    let model = select_k_by_silhouette(&features, 2, 4, DEFAULT_SEED).unwrap();
    let mut cluster_bounds = Vec::new();
    for cluster in 0..model.k() {
        let cluster_ys: Vec<f64> = ys
            .iter()
            .zip(&model.assignments)
            .filter(|(_, &a)| a == cluster)
            .map(|(&y, _)| y)
            .collect();
        cluster_bounds.push(density_bounds(&cluster_ys, 0.99).unwrap());
    }
    let partition = build_partition(&cluster_bounds);

    let grouped = group_by_region(&records, &partition).unwrap();
    let ea = evolve(&grouped, &partition, &EaParams::default()).unwrap();
    let ea_mean = ea.report.overall.mean_max_iou;

    let boxes: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    let (_, km) = kmeans_anchor_baseline(&boxes, 12, DEFAULT_SEED).unwrap();
    let uniform = coverage_stats(&AnchorChromosome::uniform_default().decode(), &boxes).unwrap();

    assert!(
        ea_mean >= km.mean_max_iou - 0.01,
        "EA {ea_mean:.4} < K-means {:.4} - 0.01",
        km.mean_max_iou
    );
    assert!(
        km.mean_max_iou - 0.01 >= uniform.mean_max_iou,
        "K-means {:.4} - 0.01 < uniform {:.4}",
        km.mean_max_iou,
        uniform.mean_max_iou
    );
    assert!(
        ea_mean >= uniform.mean_max_iou + 0.10,
        "EA {ea_mean:.4} improves uniform {:.4} by less than 0.10",
        uniform.mean_max_iou
    );
    assert!(
        started.elapsed() < Duration::from_secs(600),
        "runtime budget exceeded"
    );
    pass(
        "C3 coverage-ordering",
        format!(
            "EA {ea_mean:.4} >= K-means {:.4} - 0.01 >= uniform {:.4} (r = {r:.2}, {} regions)",
            km.mean_max_iou,
            uniform.mean_max_iou,
            partition.num_regions()
        ),
        started,
    );
}

// --- criterion 4: region pipeline reproduction ------------------------------

/// Independent silhouette recomputation (plain nested loops).
fn oracle_silhouette(points: &[[f64; 2]], assignments: &[usize], k: usize) -> f64 {
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }
    let mut total = 0.0;
    for i in 0..points.len() {
        if counts[assignments[i]] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..points.len() {
            if i != j {
                sums[assignments[j]] += dist(points[i], points[j]);
            }
        }
        let a = sums[assignments[i]] / (counts[assignments[i]] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != assignments[i] && counts[c] > 0 {
                b = b.min(sums[c] / counts[c] as f64);
            }
        }
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / points.len() as f64
}

/// The documented bimodal fixture: 600 small objects (scale ~0.3) high in
/// the image, 400 large objects (scale ~1.8) low. Cluster sizes are
/// multiples of 200 so the 0.5%/99.5% quantile interval covers exactly 99%
/// of each cluster.
fn bimodal_fixture() -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(40_000);
    let mut features = Vec::new();
    let mut small_ys = Vec::new();
    let mut large_ys = Vec::new();
    for _ in 0..600 {
        features.push([rng.gen_range(0.8..1.2), 0.3 * rng.gen_range(0.9..1.1)]);
        small_ys.push(rng.gen_range(0.15..0.45));
    }
    for _ in 0..400 {
        features.push([rng.gen_range(0.8..1.2), 1.8 * rng.gen_range(0.9..1.1)]);
        large_ys.push(rng.gen_range(0.55..0.95));
    }
    (features, small_ys, large_ys)
}

#[test]
fn criterion_4_region_pipeline() {
    let started = Instant::now();
    let (features, small_ys, large_ys) = bimodal_fixture();

    // silhouette model selection, verified value-by-value by the oracle
    let selected = select_k_by_silhouette(&features, 2, 6, DEFAULT_SEED).unwrap();
    assert_eq!(selected.k(), 2, "bimodal fixture must select k = 2");
    let mut best_oracle = (0, f64::MIN);
    for k in 2..=6 {
        let model = kmeans(&features, k, DEFAULT_SEED.wrapping_add(k as u64)).unwrap();
        let lib = mean_silhouette(&features, &model.assignments, k).unwrap();
        let oracle = oracle_silhouette(&features, &model.assignments, k);
        assert!(
            (lib - oracle).abs() < 1e-12,
            "silhouette mismatch at k = {k}: {lib} vs {oracle}"
        );
        if lib > best_oracle.1 {
            best_oracle = (k, lib);
        }
    }
    assert_eq!(best_oracle.0, 2, "oracle disagrees on the best k");
    assert!((best_oracle.1 - selected.silhouette.unwrap()).abs() < 1e-12);

    // the blobs separate perfectly, so each cluster is one mode
    let first_cluster = selected.assignments[0];
    assert!(selected.assignments[..600]
        .iter()
        .all(|&a| a == first_cluster));
    assert!(selected.assignments[600..]
        .iter()
        .all(|&a| a == 1 - first_cluster));

    // 99% density bounds contain at least 99% of each cluster
    for ys in [&small_ys, &large_ys] {
        let (alpha, beta) = density_bounds(ys, 0.99).unwrap();
        let inside = ys.iter().filter(|&&y| y >= alpha && y <= beta).count();
        assert!(
            inside as f64 >= 0.99 * ys.len() as f64,
            "bounds ({alpha:.3}, {beta:.3}) hold {inside}/{}",
            ys.len()
        );
    }

    // reference cluster bounds reproduce the four-region structure
    let partition = build_partition(&[(0.188, 0.691), (0.392, 1.0)]);
    assert_eq!(partition.bounds(), &[0.188, 0.392, 0.691]);
    assert_eq!(partition.num_regions(), 4);

    pass(
        "C4 region-pipeline",
        format!(
            "k = 2 (silhouette {:.3} oracle-matched), 99% containment, bounds [0.188, 0.392, 0.691]",
            selected.silhouette.unwrap()
        ),
        started,
    );
}

// --- criterion 5: loss identities -------------------------------------------

#[test]
fn criterion_5_loss_identities() {
    let started = Instant::now();

    let plain = FocalParams {
        gamma: 0.0,
        alpha: 1.0,
        threshold: 0.5,
    };
    let half = FocalParams {
        gamma: 2.0,
        alpha: 0.7,
        threshold: 0.5,
    };
    for i in 1..=999 {
        let p = i as f64 / 1000.0;
        assert!(
            (focal_loss(p, &plain) - binary_cross_entropy(p, 1.0)).abs() <= 1e-12,
            "FL(γ=0) != CE at p = {p}"
        );
        if p < half.threshold {
            assert!(
                (reduced_focal_loss(p, &half) - half.alpha * binary_cross_entropy(p, 1.0)).abs()
                    <= 1e-12,
                "RFL != α·CE below threshold at p = {p}"
            );
        }
    }

    // continuity of RFL at p = 0.5 when th = 0.5
    let at = reduced_focal_loss(0.5, &half);
    let below = reduced_focal_loss(0.5 - 1e-9, &half);
    let above = reduced_focal_loss(0.5 + 1e-9, &half);
    assert!(
        (below - at).abs() < 1e-8 && (above - at).abs() < 1e-8,
        "RFL discontinuous at 0.5"
    );

    // unit weights reduce the multi-task loss to the unweighted formula
    let mut rng = ChaCha8Rng::seed_from_u64(50_000);
    let samples: Vec<LossSample> = (0..64)
        .map(|i| LossSample {
            p: rng.gen_range(0.05..0.95),
            p_star: if i % 3 == 0 { 1.0 } else { 0.0 },
            offsets: [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                0.1,
                -0.4,
            ],
            target_offsets: [0.0, 0.1, rng.gen_range(-1.0..1.0), 0.2],
            class: ObjectClass::ALL[i % 3],
        })
        .collect();
    let params = MultiTaskLossParams {
        lambda: 1.7,
        n_cls: 256.0,
        n_reg: 256.0,
    };
    let weighted = weighted_multitask_loss(&samples, &ClassWeights::default(), &params).unwrap();
    let mut cls = 0.0;
    let mut reg = 0.0;
    for s in &samples {
        cls += binary_cross_entropy(s.p, s.p_star);
        if s.p_star == 1.0 {
            reg += s
                .offsets
                .iter()
                .zip(&s.target_offsets)
                .map(|(t, t_star)| smooth_l1(t - t_star))
                .sum::<f64>();
        }
    }
    let unweighted_total = cls / params.n_cls + params.lambda / params.n_reg * reg;
    assert!(
        (weighted.total - unweighted_total).abs() <= 1e-12,
        "unit-weight multitask deviates: {} vs {unweighted_total}",
        weighted.total
    );

    pass(
        "C5 loss-identities",
        "FL≡CE, RFL≡α·CE, continuity, unit weights".into(),
        started,
    );
}

// --- criterion 6: gradient checks --------------------------------------------

#[test]
fn criterion_6_gradient_checks() {
    let started = Instant::now();
    let h = 1e-5;
    let cases = [
        (
            ClsLoss::CrossEntropy,
            FocalParams {
                gamma: 0.0,
                alpha: 1.0,
                threshold: 0.5,
            },
        ),
        (
            ClsLoss::Focal,
            FocalParams {
                gamma: 1.0,
                alpha: 1.0,
                threshold: 0.5,
            },
        ),
        (
            ClsLoss::Focal,
            FocalParams {
                gamma: 2.0,
                alpha: 0.25,
                threshold: 0.5,
            },
        ),
        (
            ClsLoss::ReducedFocal,
            FocalParams {
                gamma: 2.0,
                alpha: 1.0,
                threshold: 0.25,
            },
        ),
        (
            ClsLoss::ReducedFocal,
            FocalParams {
                gamma: 2.0,
                alpha: 0.25,
                threshold: 0.5,
            },
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(60_000);
    let mut checked = 0usize;
    for (kind, fp) in cases {
        let mut below = 0usize;
        let mut above = 0usize;
        let mut logits = Vec::new();
        while logits.len() < 100 {
            let z: f64 = rng.gen_range(-6.0..6.0);
            let p = sigmoid(z);
            // exclude the band around the reduced-focal threshold
            if kind == ClsLoss::ReducedFocal && (p - fp.threshold).abs() <= 1e-3 {
                continue;
            }
            if p < fp.threshold {
                below += 1;
            } else {
                above += 1;
            }
            logits.push(z);
        }
        if kind == ClsLoss::ReducedFocal {
            assert!(below > 10 && above > 10, "both branches must be exercised");
        }
        for z in logits {
            let fd =
                (loss_from_logit(kind, z + h, &fp) - loss_from_logit(kind, z - h, &fp)) / (2.0 * h);
            let analytic = loss_grad_logit(kind, z, &fp);
            let rel = (analytic - fd).abs() / fd.abs().max(1e-12);
            assert!(
                rel < 1e-5,
                "{kind:?} γ={} th={}: rel err {rel:.2e} at z = {z}",
                fp.gamma,
                fp.threshold
            );
            checked += 1;
        }
    }
    pass(
        "C6 gradient-checks",
        format!("{checked} finite-difference comparisons"),
        started,
    );
}

// --- criterion 7: AP oracle ----------------------------------------------------

fn ap_oracle(
    dets: &[DetectionRecord],
    gts: &[AnnotationRecord],
    class: ObjectClass,
    threshold: f64,
    level: Difficulty,
) -> Option<f64> {
    let targets: Vec<&AnnotationRecord> = gts
        .iter()
        .filter(|g| g.class == class && (level == Difficulty::L2 || g.difficulty == Difficulty::L1))
        .collect();
    let ignores: Vec<&AnnotationRecord> = gts
        .iter()
        .filter(|g| g.class == class && level == Difficulty::L1 && g.difficulty == Difficulty::L2)
        .collect();
    if targets.is_empty() {
        return None;
    }
    let mut ranked: Vec<&DetectionRecord> = dets.iter().filter(|d| d.class == class).collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));

    // one precision/recall point per score cut, each recomputed from scratch
    let mut points: Vec<(f64, f64)> = Vec::new();
    for k in 1..=ranked.len() {
        let mut matched = vec![false; targets.len()];
        let mut tp = 0usize;
        let mut fp = 0usize;
        for det in &ranked[..k] {
            let mut best: Option<(usize, f64)> = None;
            for (t, gt) in targets.iter().enumerate() {
                if matched[t] || gt.image_id != det.image_id {
                    continue;
                }
                let o = oracle_iou(&det.bbox, &gt.bbox);
                if best.map_or(true, |(_, b)| o > b) {
                    best = Some((t, o));
                }
            }
            match best {
                Some((t, o)) if o >= threshold => {
                    matched[t] = true;
                    tp += 1;
                }
                _ => {
                    let absorbed = ignores.iter().any(|gt| {
                        gt.image_id == det.image_id && oracle_iou(&det.bbox, &gt.bbox) >= threshold
                    });
                    if !absorbed {
                        fp += 1;
                    }
                }
            }
        }
        if tp + fp > 0 {
            points.push((
                tp as f64 / targets.len() as f64,
                tp as f64 / (tp + fp) as f64,
            ));
        }
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (i, &(recall, _)) in points.iter().enumerate() {
        let envelope = points[i..].iter().map(|&(_, p)| p).fold(0.0f64, f64::max);
        ap += (recall - prev) * envelope;
        prev = recall;
    }
    Some(ap)
}

fn random_scene(
    rng: &mut ChaCha8Rng,
    scene: usize,
) -> (Vec<AnnotationRecord>, Vec<DetectionRecord>) {
    let class = ObjectClass::Vehicle;
    let images = rng.gen_range(1..3);
    let gts: Vec<AnnotationRecord> = (0..rng.gen_range(1..=10))
        .map(|_| {
            let x = rng.gen_range(0.0..800.0);
            let y = rng.gen_range(0.0..800.0);
            AnnotationRecord {
                image_id: format!("s{scene}-{}", rng.gen_range(0..images)),
                camera: Camera::Front,
                image_width: 1920,
                image_height: 1280,
                class,
                difficulty: if rng.gen_bool(0.3) {
                    Difficulty::L2
                } else {
                    Difficulty::L1
                },
                bbox: BoundingBox::new(
                    x,
                    y,
                    x + rng.gen_range(20.0..150.0),
                    y + rng.gen_range(20.0..150.0),
                ),
            }
        })
        .collect();
    let dets: Vec<DetectionRecord> = (0..rng.gen_range(0..=15))
        .map(|d| {
            let bbox = if rng.gen_bool(0.5) {
                let gt = &gts[rng.gen_range(0..gts.len())].bbox;
                let dx = rng.gen_range(-20.0..20.0);
                let dy = rng.gen_range(-20.0..20.0);
                BoundingBox::new(gt.x_min + dx, gt.y_min + dy, gt.x_max + dx, gt.y_max + dy)
            } else {
                let x = rng.gen_range(0.0..800.0);
                let y = rng.gen_range(0.0..800.0);
                BoundingBox::new(
                    x,
                    y,
                    x + rng.gen_range(20.0..150.0),
                    y + rng.gen_range(20.0..150.0),
                )
            };
            DetectionRecord {
                image_id: format!("s{scene}-{}", rng.gen_range(0..images)),
                class,
                score: rng.gen_range(0.05..0.95) + d as f64 * 1e-7,
                bbox,
                model_tag: "m".into(),
                scale_factor: 1.0,
            }
        })
        .collect();
    (gts, dets)
}

#[test]
fn criterion_7_ap_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(70_000);
    let mut compared = 0usize;
    for scene in 0..50 {
        let (gts, dets) = random_scene(&mut rng, scene);
        for level in [Difficulty::L1, Difficulty::L2] {
            let expected = ap_oracle(&dets, &gts, ObjectClass::Vehicle, 0.7, level);
            let actual =
                average_precision(ObjectClass::Vehicle, &dets, &gts, 0.7, level).map(|e| e.ap);
            match (expected, actual) {
                (None, None) => {}
                (Some(e), Some(a)) => {
                    assert!(
                        (e - a).abs() < 1e-9,
                        "scene {scene} {level:?}: oracle {e} vs implementation {a}"
                    );
                    compared += 1;
                }
                other => panic!("scene {scene} {level:?}: definedness mismatch {other:?}"),
            }
        }
    }

    // perfect-detector fixture: every class and level at AP exactly 1.0
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    for (i, class) in ObjectClass::ALL.iter().enumerate() {
        for j in 0..4 {
            let x = 200.0 * j as f64;
            let y = 150.0 * i as f64;
            let bbox = BoundingBox::new(x, y, x + 80.0, y + 60.0);
            gts.push(AnnotationRecord {
                image_id: "p0".into(),
                camera: Camera::Front,
                image_width: 1920,
                image_height: 1280,
                class: *class,
                difficulty: if j % 2 == 0 {
                    Difficulty::L1
                } else {
                    Difficulty::L2
                },
                bbox,
            });
            dets.push(DetectionRecord {
                image_id: "p0".into(),
                class: *class,
                score: 0.9 - 0.05 * j as f64,
                bbox,
                model_tag: "perfect".into(),
                scale_factor: 1.0,
            });
        }
    }
    let result = evaluate_ap(&dets, &gts);
    assert_eq!(result.entries.len(), 6, "three classes at two levels");
    for entry in &result.entries {
        assert_eq!(entry.ap, 1.0, "{:?} {:?}", entry.class, entry.level);
    }

    pass(
        "C7 ap-oracle",
        format!("{compared} oracle comparisons + perfect detector"),
        started,
    );
}

// --- criterion 8: ensemble properties -----------------------------------------

fn random_detections(rng: &mut ChaCha8Rng, tag: &str, n: usize) -> Vec<DetectionRecord> {
    (0..n)
        .map(|_| {
            let image = format!("img-{}", rng.gen_range(0..3));
            let class = ObjectClass::ALL[rng.gen_range(0..3)];
            let x = rng.gen_range(0.0..500.0);
            let y = rng.gen_range(0.0..500.0);
            DetectionRecord {
                image_id: image,
                class,
                score: rng.gen_range(0.01..0.99),
                bbox: BoundingBox::new(
                    x,
                    y,
                    x + rng.gen_range(10.0..200.0),
                    y + rng.gen_range(10.0..200.0),
                ),
                model_tag: tag.into(),
                scale_factor: 1.0,
            }
        })
        .collect()
}

#[test]
fn criterion_8_ensemble_properties() {
    let started = Instant::now();
    let cfg = FusionConfig::default();
    assert_eq!(cfg.nms_iou_threshold, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(80_000);

    for round in 0..20 {
        let model = random_detections(&mut rng, "m", 30 + round);

        // self-merge idempotence: duplicating the model adds nothing
        let fused = affirmative_merge(&[model.clone(), model.clone()], &cfg).unwrap();
        let mut single: Vec<DetectionRecord> = Vec::new();
        let mut keys: Vec<(String, ObjectClass)> = model
            .iter()
            .map(|d| (d.image_id.clone(), d.class))
            .collect();
        keys.sort();
        keys.dedup();
        for (image, class) in keys {
            let subset: Vec<DetectionRecord> = model
                .iter()
                .filter(|d| d.image_id == image && d.class == class)
                .cloned()
                .collect();
            single.extend(nms(&subset, cfg.nms_iou_threshold));
        }
        assert_eq!(fused, single, "self-merge differs from single-model NMS");

        // fused output is an antichain at the fusion threshold
        for (i, a) in fused.iter().enumerate() {
            for b in &fused[i + 1..] {
                if a.image_id == b.image_id && a.class == b.class {
                    assert!(
                        iou(&a.bbox, &b.bbox) <= cfg.nms_iou_threshold,
                        "antichain breach"
                    );
                }
            }
        }
    }

    // TTA scale/de-augment round trip is the identity within 1e-9
    let originals = random_detections(&mut rng, "tta", 50);
    for factor in &cfg.tta_scales {
        let scaled: Vec<DetectionRecord> = originals
            .iter()
            .map(|d| DetectionRecord {
                bbox: BoundingBox::new(
                    d.bbox.x_min * factor,
                    d.bbox.y_min * factor,
                    d.bbox.x_max * factor,
                    d.bbox.y_max * factor,
                ),
                scale_factor: *factor,
                ..d.clone()
            })
            .collect();
        let back = tta_deaugment(&scaled).unwrap();
        for (orig, round) in originals.iter().zip(&back) {
            assert!((orig.bbox.x_min - round.bbox.x_min).abs() < 1e-9);
            assert!((orig.bbox.y_min - round.bbox.y_min).abs() < 1e-9);
            assert!((orig.bbox.x_max - round.bbox.x_max).abs() < 1e-9);
            assert!((orig.bbox.y_max - round.bbox.y_max).abs() < 1e-9);
            assert_eq!(round.scale_factor, 1.0);
        }
    }

    pass(
        "C8 ensemble-properties",
        "20 self-merges, antichain, TTA round trip".into(),
        started,
    );
}

// --- criterion 9: command determinism ------------------------------------------

fn anchorkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchorkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("anchorkit-acc-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_9_command_determinism() {
    let started = Instant::now();
    let data_dir = temp_dir("data");

    // a small perspective dataset plus two detection models
    let records = perspective_records(500, 90_000);
    let annotations = data_dir.join("annotations.jsonl");
    save_annotations(&annotations, &records, FileFormat::Jsonl).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(90_001);
    let model_a = data_dir.join("model_a.jsonl");
    let model_b = data_dir.join("model_b.jsonl");
    save_detections(
        &model_a,
        &random_detections(&mut rng, "a", 60),
        FileFormat::Jsonl,
    )
    .unwrap();
    save_detections(
        &model_b,
        &random_detections(&mut rng, "b", 60),
        FileFormat::Jsonl,
    )
    .unwrap();
    let config = data_dir.join("fast.conf");
    fs::write(&config, "population = 24\ngenerations = 8\n").unwrap();

    let run_all = |out_dir: &Path| {
        let out = out_dir.to_str().unwrap();
        let ann = annotations.to_str().unwrap();
        assert_success(&anchorkit(&[
            "cluster",
            "--annotations",
            ann,
            "--out-dir",
            out,
            "--seed",
            "7",
        ]));
        assert_success(&anchorkit(&[
            "optimize",
            "--annotations",
            ann,
            "--partition",
            &format!("{out}/partition.json"),
            "--baseline-kmeans",
            "--out-dir",
            out,
            "--seed",
            "7",
            "--config",
            config.to_str().unwrap(),
        ]));
        assert_success(&anchorkit(&[
            "eval-coverage",
            "--annotations",
            ann,
            "--anchors",
            &format!("{out}/anchors.json"),
            "--out-dir",
            out,
        ]));
        assert_success(&anchorkit(&[
            "ensemble",
            "--model",
            model_a.to_str().unwrap(),
            "--model",
            model_b.to_str().unwrap(),
            "--out-dir",
            out,
        ]));
        assert_success(&anchorkit(&[
            "eval-ap",
            "--detections",
            &format!("{out}/fused.jsonl"),
            "--annotations",
            ann,
            "--out-dir",
            out,
        ]));
    };

    let first = temp_dir("run-a");
    let second = temp_dir("run-b");
    run_all(&first);
    run_all(&second);

    let artifacts = [
        "partition.json",
        "anchors.json",
        "convergence.svg",
        "coverage_report.json",
        "fused.jsonl",
        "ap_report.json",
    ];
    for artifact in artifacts {
        let a = fs::read(first.join(artifact)).unwrap();
        let b = fs::read(second.join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} differs between identical runs");
    }

    pass(
        "C9 determinism",
        format!(
            "{} artifacts byte-identical across re-runs",
            artifacts.len()
        ),
        started,
    );
}
