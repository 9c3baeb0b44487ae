//! Data-driven covers and partitions of unity.
//!
//! A cover is built from k-means: each cluster `k` gets its centroid `a_k`
//! and the smallest radius `r_k` whose ball holds every member. The cover
//! element is the open ball `S_k` of radius `r_k + eps`. The smooth
//! partition uses the local bumps
//!
//! ```text
//! rho~_k(x) = ((r_k + eps)^2 - |x - a_k|^2)^gamma   on S_k, 0 elsewhere
//! ```
//!
//! normalized over `k`. The indicator partition gives all weight to the
//! nearest covering center.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::matrix::sq_dist;
use crate::rng::Rng;
use crate::{Error, Matrix, PointCloud, Result};

/// Result of Lloyd's algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub centers: Matrix,
    /// Cluster index of every point, against the final centers.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_history: Vec<f64>,
}

impl KMeansFit {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.rows()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn nearest(centers: &Matrix, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter_rows().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// k-means++ seeding: the first center uniformly, each next one with
/// probability proportional to the squared distance to the chosen set.
fn seed_centers(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut picked = vec![false; n];
    let first = rng.below(n);
    chosen.push(first);
    picked[first] = true;
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, points.row(first))).collect();
    while chosen.len() < k {
        let next = match rng.categorical(&d2) {
            Some(i) => i,
            None => {
                // Every remaining point coincides with a chosen center.
                let free: Vec<usize> = (0..n).filter(|i| !picked[*i]).collect();
                free[rng.below(free.len())]
            }
        };
        chosen.push(next);
        picked[next] = true;
        for (d, p) in d2.iter_mut().zip(points.iter_rows()) {
            let nd = sq_dist(p, points.row(next));
            if nd < *d {
                *d = nd;
            }
        }
    }
    points.select_rows(&chosen)
}

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments stop
/// changing or after `max_iters` assignment steps. A cluster that empties
/// keeps its previous center.
pub fn kmeans_fit(cloud: &PointCloud, k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    let points = &cloud.points;
    let n = points.rows();
    if k == 0 {
        return Err(Error::Config("k-means needs K >= 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!("K = {k} exceeds the number of points {n}")));
    }
    let mut rng = Rng::new(seed);
    let mut centers = seed_centers(points, k, &mut rng);
    let dim = points.cols();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for (i, p) in points.iter_rows().enumerate() {
            let (c, d) = nearest(&centers, p);
            objective += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        history.push(objective);
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter_rows().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                let sum = sums.row(c).to_vec();
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sum) {
                    *dst = s * inv;
                }
            }
        }
    }
    // Assignments must refer to the centers actually returned.
    let mut objective = 0.0;
    for (i, p) in points.iter_rows().enumerate() {
        let (c, d) = nearest(&centers, p);
        assignments[i] = c;
        objective += d;
    }
    if history.last().map_or(true, |last| objective < *last) {
        history.push(objective);
    }
    Ok(KMeansFit {
        centers,
        assignments,
        objective_history: history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PartitionKind {
    Indicator,
    Smooth,
}

/// How the cover margin `eps` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Margin {
    Absolute(f64),
    /// Fraction of the median cluster radius.
    RelativeToMedianRadius(f64),
}

impl Default for Margin {
    fn default() -> Self {
        Margin::RelativeToMedianRadius(0.05)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionOfUnity {
    kind: PartitionKind,
    centers: Matrix,
    radii: Vec<f64>,
    margin: f64,
    exponent: f64,
}

impl PartitionOfUnity {
    pub fn new(kind: PartitionKind, centers: Matrix, radii: Vec<f64>, margin: f64, exponent: f64) -> Result<Self> {
        let pou = Self {
            kind,
            centers,
            radii,
            margin,
            exponent,
        };
        pou.validate()?;
        Ok(pou)
    }

    /// Check the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let k = self.centers.rows();
        if k == 0 || self.centers.cols() == 0 {
            return Err(Error::Config("a partition needs at least one center".into()));
        }
        if self.radii.len() != k {
            return Err(Error::Config(format!("{} radii for {k} centers", self.radii.len())));
        }
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::Config(format!("margin must be finite and >= 0, got {}", self.margin)));
        }
        for (i, r) in self.radii.iter().enumerate() {
            if !(*r >= 0.0) || !(r + self.margin > 0.0) || !r.is_finite() {
                return Err(Error::Config(format!(
                    "cover element {i} has radius {r} with margin {}",
                    self.margin
                )));
            }
        }
        if self.kind == PartitionKind::Smooth && !(self.exponent > 1.0) {
            return Err(Error::Config(format!(
                "smooth partitions need an exponent > 1, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    /// The trivial single-element indicator cover around `center`.
    pub fn single(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(
            PartitionKind::Indicator,
            Matrix::from_rows(&[center])?,
            vec![radius],
            0.0,
            1.0,
        )
    }

    pub fn kind(&self) -> PartitionKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.centers.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Radius `r_k + eps` of cover element `k`.
    pub fn support_radius(&self, k: usize) -> f64 {
        self.radii[k] + self.margin
    }

    /// Whether `x` lies in `S_k`. With zero margin the ball is closed, as in
    /// the cover built directly from the cluster radii.
    pub fn contains(&self, k: usize, x: &[f64]) -> bool {
        let r = self.support_radius(k);
        let d2 = sq_dist(self.centers.row(k), x);
        d2 < r * r || (self.margin == 0.0 && d2 <= r * r)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, partition lives in dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn nearest_center_distance(&self, x: &[f64]) -> f64 {
        nearest(&self.centers, x).1.sqrt()
    }

    /// Unnormalized local bumps `rho~_k(x)` (smooth kind), or membership
    /// indicators of `S_k` (indicator kind).
    pub fn local_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.len())
            .map(|k| {
                if !self.contains(k, x) {
                    return 0.0;
                }
                match self.kind {
                    PartitionKind::Indicator => 1.0,
                    PartitionKind::Smooth => {
                        let r = self.support_radius(k);
                        let s = r * r - sq_dist(self.centers.row(k), x);
                        s.max(0.0).powf(self.exponent)
                    }
                }
            })
            .collect())
    }

    /// `(rho_1(x), ..., rho_K(x))`, summing to one on the cover.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let k = self.len();
        let mut out = vec![0.0; k];
        match self.kind {
            PartitionKind::Indicator => {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..k {
                    if self.contains(c, x) {
                        let d = sq_dist(self.centers.row(c), x);
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some((c, d));
                        }
                    }
                }
                match best {
                    Some((c, _)) => out[c] = 1.0,
                    None => {
                        return Err(Error::Uncovered {
                            nearest_distance: self.nearest_center_distance(x),
                        })
                    }
                }
            }
            PartitionKind::Smooth => {
                // Normalize in log space: (r^2 - d^2)^gamma overflows for
                // large radii.
                let mut logs = vec![f64::NEG_INFINITY; k];
                let mut max_log = f64::NEG_INFINITY;
                for (c, l) in logs.iter_mut().enumerate() {
                    if !self.contains(c, x) {
                        continue;
                    }
                    let r = self.support_radius(c);
                    let s = r * r - sq_dist(self.centers.row(c), x);
                    if s > 0.0 {
                        *l = self.exponent * s.ln();
                        if *l > max_log {
                            max_log = *l;
                        }
                    }
                }
                if max_log == f64::NEG_INFINITY {
                    return Err(Error::Uncovered {
                        nearest_distance: self.nearest_center_distance(x),
                    });
                }
                let mut total = 0.0;
                for (o, l) in out.iter_mut().zip(&logs) {
                    if *l > f64::NEG_INFINITY {
                        *o = (l - max_log).exp();
                        total += *o;
                    }
                }
                for o in &mut out {
                    *o /= total;
                }
            }
        }
        Ok(out)
    }

    pub fn eval_one(&self, k: usize, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?[k])
    }

    /// `rho_k(x)`, or 0 when `x` is outside the cover.
    pub fn eval_or_zero(&self, k: usize, x: &[f64]) -> f64 {
        match self.eval(x) {
            Ok(w) => w[k],
            Err(_) => 0.0,
        }
    }
}

/// Build the cover from a clustering: `r_k` is the largest member distance
/// to `a_k`, and `eps` is resolved from `margin`.
pub fn build_cover(
    cloud: &PointCloud,
    assignments: &[usize],
    centers: &Matrix,
    margin: Margin,
    exponent: f64,
    kind: PartitionKind,
) -> Result<PartitionOfUnity> {
    let k = centers.rows();
    if assignments.len() != cloud.len() {
        return Err(Error::Shape(format!(
            "{} assignments for {} points",
            assignments.len(),
            cloud.len()
        )));
    }
    if centers.cols() != cloud.dim() {
        return Err(Error::Shape("centers and points differ in dimension".into()));
    }
    let mut radii = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in cloud.points.iter_rows().zip(assignments) {
        if a >= k {
            return Err(Error::Config(format!("assignment {a} refers to a missing center")));
        }
        counts[a] += 1;
        let d = sq_dist(p, centers.row(a)).sqrt();
        if d > radii[a] {
            radii[a] = d;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCluster { cluster: empty });
    }
    let eps = match margin {
        Margin::Absolute(e) => e,
        Margin::RelativeToMedianRadius(f) => {
            let mut sorted = radii.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
            let mid = sorted.len() / 2;
            let median = if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                0.5 * (sorted[mid - 1] + sorted[mid])
            };
            f * median
        }
    };
    PartitionOfUnity::new(kind, centers.clone(), radii, eps, exponent)
}

/// Cover settings for [`fit_partition`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionConfig {
    pub clusters: usize,
    pub kind: PartitionKind,
    pub margin: Margin,
    pub exponent: f64,
    pub max_iters: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            clusters: 10,
            kind: PartitionKind::Smooth,
            margin: Margin::default(),
            exponent: 10.0,
            max_iters: 300,
        }
    }
}

/// k-means followed by [`build_cover`].
pub fn fit_partition(cloud: &PointCloud, config: &PartitionConfig, seed: u64) -> Result<PartitionOfUnity> {
    let fit = kmeans_fit(cloud, config.clusters, seed, config.max_iters)?;
    build_cover(
        cloud,
        &fit.assignments,
        &fit.centers,
        config.margin,
        config.exponent,
        config.kind,
    )
}

/// Mixture weights `p_k`: nonnegative, summing to one.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureWeights {
    values: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let w = Self { values };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidWeights("no mixture weights".into()));
        }
        if self.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidWeights("mixture weights must be nonnegative".into()));
        }
        let total: f64 = self.values.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("mixture weights sum to {total}")));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `p_k = (1/n) sum_i rho_k(X_i)` (weighted mean when the cloud carries
/// weights). Every point must be covered.
pub fn mixture_weights(pou: &PartitionOfUnity, cloud: &PointCloud) -> Result<MixtureWeights> {
    let weights = cloud.normalized_weights();
    let mut sums = vec![0.0; pou.len()];
    for (p, w) in cloud.points.iter_rows().zip(&weights) {
        let rho = pou.eval(p)?;
        for (s, r) in sums.iter_mut().zip(&rho) {
            *s += w * r;
        }
    }
    let total: f64 = sums.iter().sum();
    for s in &mut sums {
        *s /= total;
    }
    MixtureWeights::new(sums)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> PointCloud {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        for center in [[10.0, 10.0], [-10.0, -10.0]] {
            for _ in 0..100 {
                rows.push([center[0] + 0.1 * rng.normal(), center[1] + 0.1 * rng.normal()]);
            }
        }
        PointCloud::new(Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let cloud = blobs(1);
        let fit = kmeans_fit(&cloud, 1, 0, 50).unwrap();
        let mean = cloud.points.column_means();
        for (c, m) in fit.centers.row(0).iter().zip(&mean) {
            assert!((c - m).abs() < 1e-12);
        }
        assert!(fit.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn two_blobs_recovered() {
        let cloud = blobs(2);
        let fit = kmeans_fit(&cloud, 2, 4, 50).unwrap();
        // Brute force: each blob's mean must sit near one of the centers.
        for target in [[10.0, 10.0], [-10.0, -10.0]] {
            let best = fit
                .centers
                .iter_rows()
                .map(|c| sq_dist(c, &target).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.1, "blob at {target:?} missed by {best}");
        }
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let cloud = PointCloud::new(Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 2.0], [-3.0, 4.0]]).unwrap()).unwrap();
        let fit = kmeans_fit(&cloud, 4, 3, 10).unwrap();
        assert_eq!(fit.objective(), 0.0);
        let mut sorted = fit.assignments.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_above_n_rejected() {
        let cloud = PointCloud::new(Matrix::column(&[1.0])).unwrap();
        assert!(matches!(kmeans_fit(&cloud, 2, 0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn objective_never_increases() {
        let cloud = crate::synthdata::gen_spiral(500, 3).unwrap();
        let fit = kmeans_fit(&cloud, 10, 1, 100).unwrap();
        for w in fit.objective_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    fn two_centers() -> PartitionOfUnity {
        PartitionOfUnity::new(
            PartitionKind::Smooth,
            Matrix::column(&[0.0, 2.0]),
            vec![1.5, 1.5],
            0.1,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_midpoint_splits_evenly() {
        let w = two_centers().eval(&[1.0]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deep_inside_one_ball_is_basis_vector() {
        let w = two_centers().eval(&[-1.0]).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn uncovered_point_reports_distance() {
        match two_centers().eval(&[10.0]) {
            Err(Error::Uncovered { nearest_distance }) => assert!((nearest_distance - 8.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_cover_self_normalizes_near_boundary() {
        let pou = PartitionOfUnity::new(PartitionKind::Smooth, Matrix::column(&[0.0]), vec![1.0], 0.0, 10.0).unwrap();
        for x in [0.0, 0.5, 0.9, 0.999, 0.999_999] {
            assert_eq!(pou.eval(&[x]).unwrap(), vec![1.0]);
        }
        let near = pou.local_weights(&[0.999_999]).unwrap()[0];
        assert!(near < 1e-50);
    }

    #[test]
    fn build_cover_records_radii() {
        let cloud = PointCloud::new(Matrix::column(&[0.0, 1.0, 5.0, 7.0])).unwrap();
        let centers = Matrix::column(&[0.5, 6.0]);
        let pou = build_cover(&cloud, &[0, 0, 1, 1], &centers, Margin::Absolute(0.1), 10.0, PartitionKind::Smooth).unwrap();
        assert_eq!(pou.radii(), &[0.5, 1.0]);
        assert_eq!(pou.margin(), 0.1);
        let rel = build_cover(&cloud, &[0, 0, 1, 1], &centers, Margin::RelativeToMedianRadius(0.05), 10.0, PartitionKind::Smooth).unwrap();
        assert!((rel.margin() - 0.05 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn build_cover_empty_cluster() {
        let cloud = PointCloud::new(Matrix::column(&[0.0, 1.0])).unwrap();
        let centers = Matrix::column(&[0.5, 6.0]);
        assert!(matches!(
            build_cover(&cloud, &[0, 0], &centers, Margin::default(), 10.0, PartitionKind::Smooth),
            Err(Error::EmptyCluster { cluster: 1 })
        ));
    }

    #[test]
    fn smooth_needs_exponent_above_one() {
        assert!(PartitionOfUnity::new(PartitionKind::Smooth, Matrix::column(&[0.0]), vec![1.0], 0.1, 1.0).is_err());
    }

    #[test]
    fn indicator_weights_are_cluster_fractions() {
        let cloud = blobs(5);
        let config = PartitionConfig {
            clusters: 2,
            kind: PartitionKind::Indicator,
            ..PartitionConfig::default()
        };
        let pou = fit_partition(&cloud, &config, 1).unwrap();
        let w = mixture_weights(&pou, &cloud).unwrap();
        assert!((w.values()[0] - 0.5).abs() < 1e-12);
        assert!((w.values()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_weight_is_one() {
        let cloud = blobs(6);
        let config = PartitionConfig {
            clusters: 1,
            ..PartitionConfig::default()
        };
        let pou = fit_partition(&cloud, &config, 1).unwrap();
        assert_eq!(mixture_weights(&pou, &cloud).unwrap().values(), &[1.0]);
    }

    #[test]
    fn smooth_weights_sum_to_one() {
        let cloud = crate::synthdata::gen_spiral(1000, 9).unwrap();
        let pou = fit_partition(&cloud, &PartitionConfig::default(), 2).unwrap();
        let w = mixture_weights(&pou, &cloud).unwrap();
        assert!((w.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for p in cloud.points.iter_rows() {
            let s: f64 = pou.eval(p).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
