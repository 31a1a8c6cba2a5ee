//! Clustering-based division of the image into vertical regions.
//!
//! Objects are clustered by (aspect ratio, scale ratio); the cluster count is
//! picked by mean silhouette; each cluster contributes the vertical interval
//! that holds 99% of its members; and the union of those interval edges
//! becomes a [`RegionPartition`] of the image into horizontal bands. Each
//! band later receives its own anchor configuration.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::CameraGroup;
use crate::math;
use crate::{Error, Result};

/// Lloyd iterations stop once no centroid moves farther than this.
pub const KMEANS_TOLERANCE: f64 = 1e-6;

/// Hard cap on Lloyd iterations.
pub const KMEANS_MAX_ITERS: usize = 300;

/// Independent k-means++ starts per fit; the run with the lowest objective
/// wins. Restart seeds derive from the caller's seed, so the whole fit stays
/// deterministic.
pub const KMEANS_RESTARTS: usize = 8;

/// Bounds closer together than this are merged when assembling a partition.
pub const BOUND_DEDUP_TOLERANCE: f64 = 0.005;

/// A fitted K-means model over 2D feature points.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// Cluster centers, one per cluster.
    pub centroids: Vec<[f64; 2]>,
    /// Index of the nearest centroid for every input point.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub objective_history: Vec<f64>,
    /// Mean silhouette score, when the model went through selection.
    pub silhouette: Option<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Final within-cluster sum of squares.
    pub fn objective(&self) -> f64 {
        *self
            .objective_history
            .last()
            .expect("at least one iteration")
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest(point: [f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = dist2(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn count_distinct(points: &[[f64; 2]]) -> usize {
    let mut sorted: Vec<[f64; 2]> = points.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    sorted.dedup();
    sorted.len()
}

/// k-means++ seeding: the first centroid is drawn uniformly, each subsequent
/// one with probability proportional to the squared distance from the
/// centroids chosen so far.
fn seed_centroids(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut weights: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = weights.iter().sum();
        let mut target = rng.gen_range(0.0..1.0) * total;
        let mut chosen = points.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                chosen = i;
                break;
            }
            target -= w;
        }
        let c = points[chosen];
        centroids.push(c);
        for (w, &p) in weights.iter_mut().zip(points) {
            *w = w.min(dist2(p, c));
        }
    }
    centroids
}

/// Lloyd's K-means over 2D points, deterministic for a given seed.
///
/// Runs [`KMEANS_RESTARTS`] independent k-means++ starts and keeps the one
/// with the lowest within-cluster sum of squares. Each start iterates until
/// no centroid moves more than [`KMEANS_TOLERANCE`] or [`KMEANS_MAX_ITERS`]
/// is reached.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Result<ClusterModel> {
    if points.is_empty() {
        return Err(Error::EmptyInput("kmeans points"));
    }
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            reason: "must be at least 1",
        });
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::TooFewPoints {
            requested: k,
            distinct,
        });
    }

    let mut best: Option<ClusterModel> = None;
    for restart in 0..KMEANS_RESTARTS {
        let model = lloyd(points, k, seed.wrapping_add(restart as u64));
        if best
            .as_ref()
            .map_or(true, |b| model.objective() < b.objective())
        {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One Lloyd run from a k-means++ seeding. A cluster that loses all points
/// is reseeded at the point farthest from its nearest surviving centroid.
fn lloyd(points: &[[f64; 2]], k: usize, seed: u64) -> ClusterModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignments = vec![0usize; points.len()];
    let mut history = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        for (slot, &p) in assignments.iter_mut().zip(points) {
            *slot = nearest(p, &centroids).0;
        }

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (&a, &p) in assignments.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }

        let mut movement: f64 = 0.0;
        for c in 0..k {
            let new = if counts[c] > 0 {
                [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64]
            } else {
                // reseed an emptied cluster at the worst-covered point
                let mut far = points[0];
                let mut far_d = -1.0;
                for &p in points {
                    let (_, d) = nearest(p, &centroids);
                    if d > far_d {
                        far_d = d;
                        far = p;
                    }
                }
                far
            };
            movement = movement.max(math::sqrt(dist2(new, centroids[c])));
            centroids[c] = new;
        }

        for (slot, &p) in assignments.iter_mut().zip(points) {
            *slot = nearest(p, &centroids).0;
        }
        let objective = points
            .iter()
            .zip(&assignments)
            .map(|(&p, &a)| dist2(p, centroids[a]))
            .sum();
        history.push(objective);

        if movement < KMEANS_TOLERANCE {
            break;
        }
    }

    ClusterModel {
        centroids,
        assignments,
        objective_history: history,
        silhouette: None,
    }
}

/// Mean silhouette score of a clustering, exact O(n²) computation.
///
/// Singleton-cluster points score 0. Requires at least two clusters with
/// members.
pub fn mean_silhouette(points: &[[f64; 2]], assignments: &[usize], k: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("silhouette points"));
    }
    if points.len() != assignments.len() {
        return Err(Error::InvalidParam {
            name: "assignments",
            reason: "must have one entry per point",
        });
    }
    let mut counts = vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::InvalidParam {
                name: "assignments",
                reason: "cluster index out of range",
            });
        }
        counts[a] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidParam {
            name: "k",
            reason: "silhouette needs at least two non-empty clusters",
        });
    }

    let mut total = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let own = assignments[i];
        if counts[own] == 1 {
            continue; // silhouette of a singleton is 0
        }
        let mut dist_sums = vec![0.0f64; k];
        for (j, &q) in points.iter().enumerate() {
            if i != j {
                dist_sums[assignments[j]] += math::sqrt(dist2(p, q));
            }
        }
        let a = dist_sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && counts[c] > 0 {
                b = b.min(dist_sums[c] / counts[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

/// Fits K-means for every cluster count in `k_min..=k_max` and keeps the
/// model with the highest mean silhouette (ties go to the smaller count).
pub fn select_k_by_silhouette(
    points: &[[f64; 2]],
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if k_min < 2 || k_max < k_min {
        return Err(Error::InvalidParam {
            name: "k_range",
            reason: "need 2 <= k_min <= k_max",
        });
    }
    let mut best: Option<ClusterModel> = None;
    for k in k_min..=k_max {
        let mut model = kmeans(points, k, seed.wrapping_add(k as u64))?;
        let score = mean_silhouette(points, &model.assignments, k)?;
        model.silhouette = Some(score);
        let better = match &best {
            None => true,
            Some(b) => score > b.silhouette.unwrap(),
        };
        if better {
            best = Some(model);
        }
    }
    Ok(best.expect("k range is non-empty"))
}

/// Per-dimension z-score standardization of 2D feature points.
///
/// Aspect and scale ratios share comparable ranges in this data, so
/// clustering runs on raw features by default; this is the opt-in
/// alternative. Dimensions with zero variance are left centered.
pub fn standardize(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    if points.is_empty() {
        return Vec::new();
    }
    let mut mean = [0.0f64; 2];
    for p in points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut var = [0.0f64; 2];
    for p in points {
        var[0] += (p[0] - mean[0]) * (p[0] - mean[0]);
        var[1] += (p[1] - mean[1]) * (p[1] - mean[1]);
    }
    let std = [math::sqrt(var[0] / n), math::sqrt(var[1] / n)];
    points
        .iter()
        .map(|p| {
            [
                if std[0] > 0.0 {
                    (p[0] - mean[0]) / std[0]
                } else {
                    p[0] - mean[0]
                },
                if std[1] > 0.0 {
                    (p[1] - mean[1]) / std[1]
                } else {
                    p[1] - mean[1]
                },
            ]
        })
        .collect()
}

/// Interval of normalized vertical positions that contains `mass` of the
/// values: quantiles at `(1-mass)/2` and `1-(1-mass)/2`, linearly
/// interpolated between order statistics.
///
/// When the upper bound lands within 0.02 of the image bottom it is clamped
/// to exactly 1.0 — the cluster effectively extends to the bottom edge.
pub fn density_bounds(values: &[f64], mass: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("density values"));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidParam {
            name: "mass",
            reason: "must lie strictly between 0 and 1",
        });
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - mass) / 2.0;
    let alpha = quantile_sorted(&sorted, tail);
    let mut beta = quantile_sorted(&sorted, 1.0 - tail);
    if 1.0 - beta <= 0.02 {
        beta = 1.0;
    }
    Ok((alpha, beta))
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[n - 1]
    }
}

/// Vertical bounds per camera group when a partition is built separately for
/// frontal and lateral cameras.
#[derive(Debug, Clone, PartialEq)]
pub struct PerCameraBounds {
    pub frontal: Vec<f64>,
    pub lateral: Vec<f64>,
}

/// Division of the image into horizontal bands.
///
/// `bounds` are strictly increasing normalized y values in (0, 1); they
/// separate `bounds.len() + 1` regions counted from the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    bounds: Vec<f64>,
    per_camera: Option<PerCameraBounds>,
}

impl RegionPartition {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        validate_bounds(&bounds)?;
        Ok(Self {
            bounds,
            per_camera: None,
        })
    }

    /// The trivial partition: no bounds, a single region.
    pub fn uniform() -> Self {
        Self {
            bounds: Vec::new(),
            per_camera: None,
        }
    }

    pub fn with_per_camera(mut self, frontal: Vec<f64>, lateral: Vec<f64>) -> Result<Self> {
        validate_bounds(&frontal)?;
        validate_bounds(&lateral)?;
        self.per_camera = Some(PerCameraBounds { frontal, lateral });
        Ok(self)
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn per_camera(&self) -> Option<&PerCameraBounds> {
        self.per_camera.as_ref()
    }

    /// Bounds to use for a camera group; the combined bounds when no
    /// per-camera split was computed (or the group is `All`).
    pub fn bounds_for(&self, group: CameraGroup) -> &[f64] {
        match (group, &self.per_camera) {
            (CameraGroup::Frontal, Some(pc)) => &pc.frontal,
            (CameraGroup::Lateral, Some(pc)) => &pc.lateral,
            _ => &self.bounds,
        }
    }

    pub fn num_regions(&self) -> usize {
        self.bounds.len() + 1
    }

    /// Region index of a normalized vertical position.
    pub fn assign_region(&self, y_center_norm: f64) -> Result<usize> {
        region_index(&self.bounds, y_center_norm)
    }

    /// The `[low, high]` vertical span of a region, including the implicit
    /// 0 and 1 edges.
    pub fn region_span(&self, region: usize) -> (f64, f64) {
        let lo = if region == 0 {
            0.0
        } else {
            self.bounds[region - 1]
        };
        let hi = if region == self.bounds.len() {
            1.0
        } else {
            self.bounds[region]
        };
        (lo, hi)
    }
}

fn validate_bounds(bounds: &[f64]) -> Result<()> {
    for (i, &b) in bounds.iter().enumerate() {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParam {
                name: "bounds",
                reason: "every bound must lie strictly inside (0, 1)",
            });
        }
        if i > 0 && b <= bounds[i - 1] {
            return Err(Error::InvalidParam {
                name: "bounds",
                reason: "bounds must be strictly increasing",
            });
        }
    }
    Ok(())
}

/// Index of the half-open band `[b_i, b_{i+1})` containing `y`; the last
/// band is closed so that `y = 1.0` belongs to it.
pub fn region_index(bounds: &[f64], y: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfUnitRange {
            name: "y_center_norm",
            value: y,
        });
    }
    Ok(bounds.iter().take_while(|&&b| b <= y).count())
}

/// Merges per-cluster `(alpha, beta)` density bounds into one partition:
/// every interior edge (0 and 1 excluded) is collected, sorted, and
/// deduplicated within [`BOUND_DEDUP_TOLERANCE`]. Values within the same
/// tolerance of the implicit 0/1 image edges merge into those edges and
/// disappear — they would otherwise cut off sliver regions.
pub fn build_partition(cluster_bounds: &[(f64, f64)]) -> RegionPartition {
    let mut edges: Vec<f64> = cluster_bounds
        .iter()
        .flat_map(|&(alpha, beta)| [alpha, beta])
        .filter(|&v| v > BOUND_DEDUP_TOLERANCE && v < 1.0 - BOUND_DEDUP_TOLERANCE)
        .collect();
    edges.sort_by(f64::total_cmp);
    let mut bounds: Vec<f64> = Vec::with_capacity(edges.len());
    for v in edges {
        match bounds.last() {
            Some(&prev) if v - prev < BOUND_DEDUP_TOLERANCE => {}
            _ => bounds.push(v),
        }
    }
    RegionPartition {
        bounds,
        per_camera: None,
    }
}
