//! Evolutionary search for per-region anchor configurations.
//!
//! A candidate configuration is encoded as 7 genes — 3 aspect ratios and 4
//! scale ratios — whose cartesian product decodes to 12 anchors. The search
//! minimizes a log-weighted miss penalty over the ground-truth boxes of a
//! region: for each box, the best overlap with any decoded anchor is found,
//! and boxes whose best IoU stays low dominate the objective. A K-means
//! baseline over raw (width, height) pairs is provided for comparison, along
//! with coverage reporting for any per-region configuration.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::AnnotationRecord;
use crate::geometry::{max_iou_over_config, AnchorSpec, BoundingBox, ANCHOR_BASE};
use crate::math;
use crate::regions::{kmeans, RegionPartition};
use crate::{Error, Result};

/// Lower gene boundary (anchors down to ~16 px, the receptive-field unit).
pub const GENE_MIN: f64 = 0.06;

/// Upper gene boundary (anchors up to 1024 px over the 256 px base).
pub const GENE_MAX: f64 = 4.0;

/// Genes are kept on a 10⁻³ grid.
pub const GENE_QUANTUM: f64 = 1e-3;

/// Seed used by every pipeline command unless one is given explicitly.
pub const DEFAULT_SEED: u64 = 42;

/// Best IoU is clamped here before the logarithm so a configuration that
/// misses a box entirely yields a large, finite penalty.
const MIN_MAX_IOU: f64 = 1e-7;

/// Relative span of a creep mutation. Half of all gene mutations multiply
/// the gene by a factor from this range instead of resetting it, giving the
/// search a refinement move; pure uniform resets stall around 3-5% gene
/// error within the 50-generation budget.
const CREEP_LO: f64 = 0.9;
const CREEP_HI: f64 = 1.1;

fn quantize(v: f64) -> f64 {
    math::round(v * (1.0 / GENE_QUANTUM)) / (1.0 / GENE_QUANTUM)
}

/// 7-gene encoding of an anchor configuration: 3 aspect ratios and 4 scale
/// ratios, each on the 10⁻³ grid within [[`GENE_MIN`], [`GENE_MAX`]].
///
/// Values are kept in canonical form (both groups sorted ascending); the
/// decoded set of 12 anchors is the cartesian product of the two groups, so
/// gene order inside a group never affects behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorChromosome {
    aspects: [f64; 3],
    scales: [f64; 4],
}

impl AnchorChromosome {
    /// Builds a chromosome from gene values, canonicalizing (sort + snap to
    /// the 10⁻³ grid) and rejecting genes outside the boundaries.
    pub fn new(aspects: [f64; 3], scales: [f64; 4]) -> Result<Self> {
        for &g in aspects.iter().chain(&scales) {
            if !g.is_finite() || !(GENE_MIN..=GENE_MAX).contains(&quantize(g)) {
                return Err(Error::GeneOutOfBounds {
                    value: g,
                    min: GENE_MIN,
                    max: GENE_MAX,
                });
            }
        }
        Ok(Self::from_raw(aspects, scales))
    }

    /// Canonicalizes raw gene values, clamping them into the boundaries.
    fn from_raw(mut aspects: [f64; 3], mut scales: [f64; 4]) -> Self {
        for g in aspects.iter_mut().chain(scales.iter_mut()) {
            *g = quantize(g.clamp(GENE_MIN, GENE_MAX));
        }
        aspects.sort_by(f64::total_cmp);
        scales.sort_by(f64::total_cmp);
        Self { aspects, scales }
    }

    fn random<R: Rng>(rng: &mut R) -> Self {
        let mut gene = || rng.gen_range(GENE_MIN..=GENE_MAX);
        Self::from_raw([gene(), gene(), gene()], [gene(), gene(), gene(), gene()])
    }

    /// The default uniform configuration used by two-stage detectors:
    /// scales (0.25, 0.5, 1, 2) and aspects (0.5, 1, 2).
    pub fn uniform_default() -> Self {
        Self {
            aspects: [0.5, 1.0, 2.0],
            scales: [0.25, 0.5, 1.0, 2.0],
        }
    }

    pub fn aspects(&self) -> [f64; 3] {
        self.aspects
    }

    pub fn scales(&self) -> [f64; 4] {
        self.scales
    }

    /// Decodes the cartesian product of aspects and scales into 12 anchors.
    pub fn decode(&self) -> [AnchorSpec; 12] {
        let mut out = [AnchorSpec::new(1.0, 1.0).expect("valid placeholder"); 12];
        let mut i = 0;
        for &a in &self.aspects {
            for &s in &self.scales {
                out[i] = AnchorSpec::new(s, a).expect("gene boundaries guarantee positive ratios");
                i += 1;
            }
        }
        out
    }
}

/// Run parameters of the evolutionary search.
///
/// The gene boundaries and grid are properties of the encoding itself; see
/// [`GENE_MIN`], [`GENE_MAX`] and [`GENE_QUANTUM`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EaParams {
    pub crossover_prob: f64,
    /// Probability, per gene, of a uniform reset within the boundaries.
    pub mutation_prob: f64,
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for EaParams {
    fn default() -> Self {
        Self {
            crossover_prob: 0.8,
            mutation_prob: 0.2,
            population: 100,
            generations: 50,
            tournament_size: 3,
            seed: DEFAULT_SEED,
        }
    }
}

impl EaParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::InvalidParam {
                name: "crossover_prob",
                reason: "must lie in [0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::InvalidParam {
                name: "mutation_prob",
                reason: "must lie in [0, 1]",
            });
        }
        if self.population < 2 {
            return Err(Error::InvalidParam {
                name: "population",
                reason: "must be at least 2",
            });
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return Err(Error::InvalidParam {
                name: "tournament_size",
                reason: "must lie in [1, population]",
            });
        }
        Ok(())
    }
}

/// Mean miss penalty of a configuration over a set of ground-truth boxes:
/// `(1/K) Σ −(1 − maxIoU)² · ln(maxIoU)`, minimized by the search. A
/// configuration where every box is matched perfectly scores 0.
pub fn fitness(x: &AnchorChromosome, gts: &[BoundingBox]) -> Result<f64> {
    if gts.is_empty() {
        return Err(Error::EmptyInput("ground-truth boxes"));
    }
    let config = x.decode();
    let mut total = 0.0;
    for gt in gts {
        total += miss_penalty(best_iou(gt, &config));
    }
    Ok(total / gts.len() as f64)
}

fn best_iou(gt: &BoundingBox, config: &[AnchorSpec]) -> f64 {
    max_iou_over_config(gt, config).expect("config is non-empty")
}

fn miss_penalty(max_iou: f64) -> f64 {
    let m = max_iou.clamp(MIN_MAX_IOU, 1.0);
    -(1.0 - m) * (1.0 - m) * math::ln(m)
}

/// Coverage of a set of ground-truth boxes by one anchor configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub count: usize,
    pub mean_max_iou: f64,
    /// Fraction of boxes whose best anchor overlap reaches 0.5.
    pub frac_iou_ge_half: f64,
    pub fitness: f64,
}

/// Computes coverage statistics of `config` over `gts`.
pub fn coverage_stats(config: &[AnchorSpec], gts: &[BoundingBox]) -> Result<CoverageStats> {
    if config.is_empty() {
        return Err(Error::EmptyInput("anchor configuration"));
    }
    if gts.is_empty() {
        return Err(Error::EmptyInput("ground-truth boxes"));
    }
    let mut iou_sum = 0.0;
    let mut hits = 0usize;
    let mut penalty = 0.0;
    for gt in gts {
        let m = best_iou(gt, config);
        iou_sum += m;
        if m >= 0.5 {
            hits += 1;
        }
        penalty += miss_penalty(m);
    }
    let n = gts.len() as f64;
    Ok(CoverageStats {
        count: gts.len(),
        mean_max_iou: iou_sum / n,
        frac_iou_ge_half: hits as f64 / n,
        fitness: penalty / n,
    })
}

/// Coverage of a partitioned dataset under per-region configurations.
/// Regions without ground truths are reported as absent and carry no weight
/// in the overall numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub per_region: Vec<Option<CoverageStats>>,
    pub overall: CoverageStats,
}

/// Fitness and coverage of the best individual over the generations; entry 0
/// describes the initial population, so a run of `g` generations yields
/// `g + 1` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStat {
    pub best_fitness: f64,
    pub best_mean_iou: f64,
}

/// Search outcome for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutcome {
    pub region: usize,
    /// Vertical span `[low, high]` of the region, including the 0/1 edges.
    pub span: (f64, f64),
    pub chromosome: AnchorChromosome,
    /// True when the region had no ground truths and received the default
    /// uniform configuration instead of an optimized one.
    pub fallback: bool,
    pub history: Vec<GenerationStat>,
}

/// Outcome of an evolutionary run over all regions of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveResult {
    pub regions: Vec<RegionOutcome>,
    pub report: CoverageReport,
}

impl EvolveResult {
    pub fn chromosomes(&self) -> Vec<AnchorChromosome> {
        self.regions.iter().map(|r| r.chromosome).collect()
    }
}

/// Runs the evolutionary search independently on every region.
///
/// `gts_by_region[i]` holds the ground-truth boxes of region `i`; use
/// [`group_by_region`] to build it. Regions with no boxes fall back to the
/// default uniform configuration and are flagged. Deterministic for a fixed
/// seed: every region draws from its own seed-derived stream.
pub fn evolve(
    gts_by_region: &[Vec<BoundingBox>],
    partition: &RegionPartition,
    params: &EaParams,
) -> Result<EvolveResult> {
    params.validate()?;
    if gts_by_region.len() != partition.num_regions() {
        return Err(Error::InvalidParam {
            name: "gts_by_region",
            reason: "must have one entry per region of the partition",
        });
    }

    let mut regions = Vec::with_capacity(gts_by_region.len());
    for (idx, gts) in gts_by_region.iter().enumerate() {
        let span = partition.region_span(idx);
        if gts.is_empty() {
            regions.push(RegionOutcome {
                region: idx,
                span,
                chromosome: AnchorChromosome::uniform_default(),
                fallback: true,
                history: Vec::new(),
            });
            continue;
        }
        let mut rng = region_rng(params.seed, idx);
        let (chromosome, history) = ea_run(gts, params, &mut rng);
        regions.push(RegionOutcome {
            region: idx,
            span,
            chromosome,
            fallback: false,
            history,
        });
    }

    let chromosomes: Vec<AnchorChromosome> = regions.iter().map(|r| r.chromosome).collect();
    let report = report_for(&chromosomes, gts_by_region)?;
    Ok(EvolveResult { regions, report })
}

fn region_rng(seed: u64, region: usize) -> ChaCha8Rng {
    // distinct, stable stream per region regardless of evaluation order
    ChaCha8Rng::seed_from_u64(seed ^ (region as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ea_run(
    gts: &[BoundingBox],
    params: &EaParams,
    rng: &mut ChaCha8Rng,
) -> (AnchorChromosome, Vec<GenerationStat>) {
    let evaluate = |x: &AnchorChromosome| fitness(x, gts).expect("region is non-empty");

    let mut population: Vec<AnchorChromosome> = (0..params.population)
        .map(|_| AnchorChromosome::random(rng))
        .collect();
    let mut fitnesses: Vec<f64> = population.iter().map(evaluate).collect();

    let mut history = Vec::with_capacity(params.generations + 1);
    history.push(best_stat(&population, &fitnesses, gts));

    for _ in 0..params.generations {
        let elite = argmin(&fitnesses);
        let mut next = Vec::with_capacity(params.population);
        let mut next_fit = Vec::with_capacity(params.population);
        next.push(population[elite]);
        next_fit.push(fitnesses[elite]);

        while next.len() < params.population {
            let a = tournament(&fitnesses, params.tournament_size, rng);
            let b = tournament(&fitnesses, params.tournament_size, rng);
            let (mut c1, mut c2) = crossover(&population[a], &population[b], params, rng);
            for child in [&mut c1, &mut c2] {
                mutate(child, params, rng);
            }
            for child in [c1, c2] {
                if next.len() < params.population {
                    next_fit.push(evaluate(&child));
                    next.push(child);
                }
            }
        }

        population = next;
        fitnesses = next_fit;
        history.push(best_stat(&population, &fitnesses, gts));
    }

    let best = argmin(&fitnesses);
    (population[best], history)
}

fn argmin(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fitnesses.iter().enumerate() {
        if f < fitnesses[best] {
            best = i;
        }
    }
    best
}

fn best_stat(
    population: &[AnchorChromosome],
    fitnesses: &[f64],
    gts: &[BoundingBox],
) -> GenerationStat {
    let best = argmin(fitnesses);
    let config = population[best].decode();
    let mean_iou = gts.iter().map(|gt| best_iou(gt, &config)).sum::<f64>() / gts.len() as f64;
    GenerationStat {
        best_fitness: fitnesses[best],
        best_mean_iou: mean_iou,
    }
}

fn tournament(fitnesses: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.gen_range(0..fitnesses.len());
    for _ in 1..size {
        let challenger = rng.gen_range(0..fitnesses.len());
        if fitnesses[challenger] < fitnesses[winner] {
            winner = challenger;
        }
    }
    winner
}

/// Single-point crossover applied independently within the aspect and scale
/// sub-chromosomes, so the two parameter groups never interfere.
fn crossover(
    a: &AnchorChromosome,
    b: &AnchorChromosome,
    params: &EaParams,
    rng: &mut ChaCha8Rng,
) -> (AnchorChromosome, AnchorChromosome) {
    let mut asp = (a.aspects, b.aspects);
    let mut sc = (a.scales, b.scales);
    if rng.gen_bool(params.crossover_prob) {
        let cut = rng.gen_range(1..3);
        for i in cut..3 {
            core::mem::swap(&mut asp.0[i], &mut asp.1[i]);
        }
    }
    if rng.gen_bool(params.crossover_prob) {
        let cut = rng.gen_range(1..4);
        for i in cut..4 {
            core::mem::swap(&mut sc.0[i], &mut sc.1[i]);
        }
    }
    (
        AnchorChromosome::from_raw(asp.0, sc.0),
        AnchorChromosome::from_raw(asp.1, sc.1),
    )
}

/// Per-gene mutation at `mutation_prob`: a mutated gene is either reset
/// uniformly within the boundaries (exploration) or multiplied by a factor
/// from [[`CREEP_LO`], [`CREEP_HI`]] (refinement), with equal chance.
fn mutate(x: &mut AnchorChromosome, params: &EaParams, rng: &mut ChaCha8Rng) {
    let mut aspects = x.aspects;
    let mut scales = x.scales;
    for g in aspects.iter_mut().chain(scales.iter_mut()) {
        if rng.gen_bool(params.mutation_prob) {
            *g = if rng.gen_bool(0.5) {
                *g * rng.gen_range(CREEP_LO..CREEP_HI)
            } else {
                rng.gen_range(GENE_MIN..=GENE_MAX)
            };
        }
    }
    *x = AnchorChromosome::from_raw(aspects, scales);
}

/// Groups annotation boxes by the region of their vertical center.
pub fn group_by_region(
    records: &[AnnotationRecord],
    partition: &RegionPartition,
) -> Result<Vec<Vec<BoundingBox>>> {
    let mut grouped = vec![Vec::new(); partition.num_regions()];
    for record in records {
        let region = partition.assign_region(record.y_center_norm())?;
        grouped[region].push(record.bbox);
    }
    Ok(grouped)
}

/// Scores per-region configurations over a partitioned dataset.
///
/// `configs[i]` is applied to the ground truths whose vertical center falls
/// in region `i`. Every region of the partition needs a configuration;
/// regions without ground truths are reported as absent with weight 0.
pub fn evaluate_coverage(
    configs: &[AnchorChromosome],
    records: &[AnnotationRecord],
    partition: &RegionPartition,
) -> Result<CoverageReport> {
    if configs.len() < partition.num_regions() {
        return Err(Error::MissingRegionConfig {
            region: configs.len(),
        });
    }
    if configs.len() > partition.num_regions() {
        return Err(Error::InvalidParam {
            name: "configs",
            reason: "more configurations than regions",
        });
    }
    let grouped = group_by_region(records, partition)?;
    report_for(configs, &grouped)
}

fn report_for(
    configs: &[AnchorChromosome],
    gts_by_region: &[Vec<BoundingBox>],
) -> Result<CoverageReport> {
    let mut per_region = Vec::with_capacity(gts_by_region.len());
    let mut iou_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut penalty_sum = 0.0;
    let mut total = 0usize;
    for (config, gts) in configs.iter().zip(gts_by_region) {
        if gts.is_empty() {
            per_region.push(None);
            continue;
        }
        let stats = coverage_stats(&config.decode(), gts)?;
        iou_sum += stats.mean_max_iou * stats.count as f64;
        hit_sum += stats.frac_iou_ge_half * stats.count as f64;
        penalty_sum += stats.fitness * stats.count as f64;
        total += stats.count;
        per_region.push(Some(stats));
    }
    if total == 0 {
        return Err(Error::EmptyInput("ground-truth boxes"));
    }
    let n = total as f64;
    Ok(CoverageReport {
        per_region,
        overall: CoverageStats {
            count: total,
            mean_max_iou: iou_sum / n,
            frac_iou_ge_half: hit_sum / n,
            fitness: penalty_sum / n,
        },
    })
}

/// Anchor baseline clustered from raw box dimensions, the way one-stage
/// detectors derive their priors: K-means over (width, height) pairs, each
/// centroid converted back to scale and aspect ratios.
pub fn kmeans_anchor_baseline(
    gts: &[BoundingBox],
    k: usize,
    seed: u64,
) -> Result<(Vec<AnchorSpec>, CoverageStats)> {
    if gts.len() < k {
        return Err(Error::TooFewPoints {
            requested: k,
            distinct: gts.len(),
        });
    }
    let points: Vec<[f64; 2]> = gts.iter().map(|b| [b.width(), b.height()]).collect();
    let model = kmeans(&points, k, seed)?;
    let specs: Vec<AnchorSpec> = model
        .centroids
        .iter()
        .map(|&[w, h]| AnchorSpec::new(math::sqrt(w * h) / ANCHOR_BASE, w / h))
        .collect::<Result<_>>()?;
    let stats = coverage_stats(&specs, gts)?;
    Ok((specs, stats))
}

/// Normalized spatial feature vector of a region of interest:
/// `(w/W, h/H, x_center/W, y_center/H)`.
pub fn roi_spatial_features(
    bbox: &BoundingBox,
    image_width: f64,
    image_height: f64,
) -> Result<[f64; 4]> {
    if !(image_width.is_finite() && image_width > 0.0)
        || !(image_height.is_finite() && image_height > 0.0)
    {
        return Err(Error::InvalidParam {
            name: "image dimensions",
            reason: "must be positive",
        });
    }
    let (cx, cy) = bbox.center();
    Ok([
        bbox.width() / image_width,
        bbox.height() / image_height,
        cx / image_width,
        cy / image_height,
    ])
}
