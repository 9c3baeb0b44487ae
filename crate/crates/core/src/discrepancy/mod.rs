//! Distances between sample sets: kernels and MMD, exact discrete
//! 1-Wasserstein, closed-form 1D W1 and sliced W1.

pub mod simplex;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_traits::Float;

use crate::matrix::sq_dist;
use crate::rng::Rng;
use crate::{Error, Matrix, Result};

pub use simplex::{TransportPlan, TransportProblem};

/// Default cap on support points per side for the exact solver.
pub const DEFAULT_SUPPORT_CAP: usize = 5000;

/// Tolerance on the unit-mass check of weight vectors.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / C)`
    GaussianRbf,
    /// `C / (C + |x - y|^2)`
    Imq,
    /// `(2 pi h)^(-d/2) exp(-|x - y|^2 / (2h))`
    SmoothingGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("kernel scale must be positive, got {scale}")));
        }
        Ok(Self { family, scale })
    }

    pub fn rbf(c: f64) -> Result<Self> {
        Self::new(KernelFamily::GaussianRbf, c)
    }

    pub fn imq(c: f64) -> Result<Self> {
        Self::new(KernelFamily::Imq, c)
    }

    /// IMQ with the conventional constant `C = 2d` for latent dimension `d`.
    pub fn imq_for_dim(latent_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Imq, 2.0 * latent_dim as f64)
    }

    pub fn smoothing_gaussian(h: f64) -> Result<Self> {
        Self::new(KernelFamily::SmoothingGaussian, h)
    }

    /// Kernel value from the squared distance in dimension `dim`.
    #[inline]
    pub fn value_sq(&self, r2: f64, dim: usize) -> f64 {
        let c = self.scale;
        match self.family {
            KernelFamily::GaussianRbf => (-r2 / c).exp(),
            KernelFamily::Imq => c / (c + r2),
            KernelFamily::SmoothingGaussian => {
                (2.0 * PI * c).powf(-(dim as f64) / 2.0) * (-r2 / (2.0 * c)).exp()
            }
        }
    }

    /// `dk/d(r^2)`; the gradient in `x` is `2 (x - y) dk/d(r^2)`.
    #[inline]
    fn dvalue_dr2(&self, r2: f64, dim: usize) -> f64 {
        let c = self.scale;
        match self.family {
            KernelFamily::GaussianRbf => -(-r2 / c).exp() / c,
            KernelFamily::Imq => -c / ((c + r2) * (c + r2)),
            KernelFamily::SmoothingGaussian => -self.value_sq(r2, dim) / (2.0 * c),
        }
    }
}

fn check_same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_dim(x, y)?;
    Ok(spec.value_sq(sq_dist(x, y), x.len()))
}

fn check_sets(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Empty("sample set"));
    }
    if x.cols() != y.cols() {
        return Err(Error::Shape(format!(
            "sample sets of dimension {} and {}",
            x.cols(),
            y.cols()
        )));
    }
    Ok(())
}

fn mean_kernel(spec: &KernelSpec, a: &Matrix, b: &Matrix) -> f64 {
    let dim = a.cols();
    let mut total = 0.0;
    for p in a.iter_rows() {
        for q in b.iter_rows() {
            total += spec.value_sq(sq_dist(p, q), dim);
        }
    }
    total / (a.rows() as f64 * b.rows() as f64)
}

/// Biased (V-statistic) squared MMD, diagonal terms included.
pub fn mmd2_biased(spec: &KernelSpec, x: &Matrix, y: &Matrix) -> Result<f64> {
    check_sets(x, y)?;
    Ok(mean_kernel(spec, x, x) + mean_kernel(spec, y, y) - 2.0 * mean_kernel(spec, x, y))
}

/// Squared MMD and its gradient with respect to every row of `y`.
pub fn mmd2_biased_grad_y(spec: &KernelSpec, x: &Matrix, y: &Matrix) -> Result<(f64, Matrix)> {
    check_sets(x, y)?;
    let value = mmd2_biased(spec, x, y)?;
    let dim = y.cols();
    let m = x.rows() as f64;
    let n = y.rows() as f64;
    let mut grad = Matrix::zeros(y.rows(), dim);
    for j in 0..y.rows() {
        let yj = y.row(j);
        let mut g = vec![0.0; dim];
        // d/dy_j of (1/n^2) sum_{a,b} k(y_a, y_b): both orderings contribute.
        for yb in y.iter_rows() {
            let w = 2.0 * 2.0 * spec.dvalue_dr2(sq_dist(yj, yb), dim) / (n * n);
            for ((gi, a), b) in g.iter_mut().zip(yj).zip(yb) {
                *gi += w * (a - b);
            }
        }
        for xi in x.iter_rows() {
            let w = -2.0 * 2.0 * spec.dvalue_dr2(sq_dist(yj, xi), dim) / (m * n);
            for ((gi, a), b) in g.iter_mut().zip(yj).zip(xi) {
                *gi += w * (a - b);
            }
        }
        grad.row_mut(j).copy_from_slice(&g);
    }
    Ok((value, grad))
}

/// Ground cost between support points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GroundMetric {
    L1,
    #[default]
    L2,
}

impl GroundMetric {
    #[inline]
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GroundMetric::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            GroundMetric::L2 => sq_dist(x, y).sqrt(),
        }
    }

    /// Gradient of `distance(x, y)` in `x`; zero where it is not
    /// differentiable at coincident points.
    fn grad_x(self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            GroundMetric::L1 => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = if a > b {
                        1.0
                    } else if a < b {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            GroundMetric::L2 => {
                let d = sq_dist(x, y).sqrt();
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = if d > 0.0 { (a - b) / d } else { 0.0 };
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct W1Options {
    pub metric: GroundMetric,
    pub support_cap: usize,
}

impl Default for W1Options {
    fn default() -> Self {
        Self {
            metric: GroundMetric::L2,
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }
}

fn cost_matrix(x: &Matrix, y: &Matrix, metric: GroundMetric) -> Vec<f64> {
    let mut cost = Vec::with_capacity(x.rows() * y.rows());
    for p in x.iter_rows() {
        for q in y.iter_rows() {
            cost.push(metric.distance(p, q));
        }
    }
    cost
}

fn check_weights(w: &[f64], n: usize, side: &str) -> Result<()> {
    if w.len() != n {
        return Err(Error::InvalidWeights(format!("{side}: {} weights for {n} points", w.len())));
    }
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidWeights(format!("{side}: negative or NaN weight")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!("{side}: weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn check_cap(x: &Matrix, y: &Matrix, cap: usize) -> Result<()> {
    let size = x.rows().max(y.rows());
    if size > cap {
        return Err(Error::SupportTooLarge { size, cap });
    }
    Ok(())
}

/// Whether `(x, wx)` should be solved as the sink side so that swapping
/// the arguments yields the identical computation.
fn swap_sides(x: &Matrix, wx: Option<&[f64]>, y: &Matrix, wy: Option<&[f64]>) -> bool {
    let key = |m: &Matrix, w: Option<&[f64]>| (m.rows(), m.as_slice().to_vec(), w.map(<[f64]>::to_vec));
    let (a, b) = (key(x, wx), key(y, wy));
    a.0.cmp(&b.0)
        .then_with(|| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .then_with(|| a.2.partial_cmp(&b.2).unwrap_or(Ordering::Equal))
        == Ordering::Greater
}

fn transpose(plan: TransportPlan, n_sinks: usize) -> TransportPlan {
    let mut entries: Vec<_> = plan.entries.into_iter().map(|(i, j, f)| (j, i, f)).collect();
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    // Sources become sinks: u'_i = -v_i and v'_j = -u_j keep v' - u' <= C^T.
    let n_sources = plan.potentials.len() - n_sinks;
    let mut potentials: Vec<f64> = plan.potentials[n_sources..].iter().map(|p| -p).collect();
    potentials.extend(plan.potentials[..n_sources].iter().map(|p| -p));
    TransportPlan {
        entries,
        cost: plan.cost,
        potentials,
    }
}

fn solve_scaled(x: &Matrix, supply: &[f64], y: &Matrix, demand: &[f64], metric: GroundMetric, tol: f64) -> Result<TransportPlan> {
    let cost = cost_matrix(x, y, metric);
    simplex::solve(
        &TransportProblem {
            supply,
            demand,
            cost: &cost,
        },
        tol,
    )
}

/// Optimal coupling between two weighted discrete measures.
pub fn optimal_plan(x: &Matrix, wx: &[f64], y: &Matrix, wy: &[f64], options: &W1Options) -> Result<TransportPlan> {
    check_sets(x, y)?;
    check_weights(wx, x.rows(), "first measure")?;
    check_weights(wy, y.rows(), "second measure")?;
    check_cap(x, y, options.support_cap)?;
    if swap_sides(x, Some(wx), y, Some(wy)) {
        let plan = solve_scaled(y, wy, x, wx, options.metric, WEIGHT_SUM_TOL)?;
        Ok(transpose(plan, x.rows()))
    } else {
        solve_scaled(x, wx, y, wy, options.metric, WEIGHT_SUM_TOL)
    }
}

/// Exact W1 between two weighted discrete measures.
pub fn w1_discrete_exact(x: &Matrix, wx: &[f64], y: &Matrix, wy: &[f64], options: &W1Options) -> Result<f64> {
    Ok(optimal_plan(x, wx, y, wy, options)?.cost)
}

/// Optimal coupling between the uniform measures on the rows of `x` and
/// `y`. Masses are scaled to the integers `|y|` and `|x|` so that the
/// solver works on exactly representable values; entries are rescaled to
/// probabilities on return.
pub fn uniform_plan(x: &Matrix, y: &Matrix, options: &W1Options) -> Result<TransportPlan> {
    check_sets(x, y)?;
    check_cap(x, y, options.support_cap)?;
    let (n, m) = (x.rows(), y.rows());
    let total = (n * m) as f64;
    let rescale = |mut plan: TransportPlan| {
        for e in &mut plan.entries {
            e.2 /= total;
        }
        plan.cost /= total;
        plan
    };
    if swap_sides(x, None, y, None) {
        let plan = solve_scaled(y, &vec![n as f64; m], x, &vec![m as f64; n], options.metric, 0.0)?;
        Ok(transpose(rescale(plan), n))
    } else {
        let plan = solve_scaled(x, &vec![m as f64; n], y, &vec![n as f64; m], options.metric, 0.0)?;
        Ok(rescale(plan))
    }
}

/// Exact W1 between uniform empirical measures.
pub fn w1_uniform(x: &Matrix, y: &Matrix, options: &W1Options) -> Result<f64> {
    Ok(uniform_plan(x, y, options)?.cost)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// W1 between uniform empirical measures on the line, via the quantile
/// coupling; equal sizes reduce to the mean gap of sorted samples.
pub fn w1_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("1D sample"));
    }
    let xs = sorted(x);
    let ys = sorted(y);
    Ok(w1_1d_sorted(&xs, &ys))
}

fn w1_1d_sorted(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    if n == m {
        return xs.iter().zip(ys).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
    }
    // Walk the merged quantile breakpoints i/n and j/m, in integer units of
    // 1/(n m) so the breakpoints compare exactly.
    let (nm, step_x, step_y) = ((n * m) as f64, m, n);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut next_x, mut next_y) = (step_x, step_y);
    let mut t = 0usize;
    let mut total = 0.0;
    while i < n && j < m {
        let end = next_x.min(next_y);
        total += (end - t) as f64 * (xs[i] - ys[j]).abs();
        t = end;
        if next_x == end {
            i += 1;
            next_x += step_x;
        }
        if next_y == end {
            j += 1;
            next_y += step_y;
        }
    }
    total / nm
}

/// Monte Carlo sliced W1 over `num_projections` uniform directions on the
/// unit sphere. Direction `p` is drawn from its own stream of `seed`.
pub fn sliced_w1(x: &Matrix, y: &Matrix, num_projections: usize, seed: u64) -> Result<f64> {
    check_sets(x, y)?;
    if num_projections == 0 {
        return Err(Error::Config("sliced W1 needs at least one projection".into()));
    }
    let dim = x.cols();
    let mut total = 0.0;
    let mut px = vec![0.0; x.rows()];
    let mut py = vec![0.0; y.rows()];
    for p in 0..num_projections {
        let dir = random_direction(dim, &mut Rng::derive(seed, p as u64));
        for (v, r) in px.iter_mut().zip(x.iter_rows()) {
            *v = dot(&dir, r);
        }
        for (v, r) in py.iter_mut().zip(y.iter_rows()) {
            *v = dot(&dir, r);
        }
        total += w1_1d(&px, &py)?;
    }
    Ok(total / num_projections as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn random_direction(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(dim);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Penalty discrepancy between prior samples and encoded samples in the
/// latent space.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum DiscrepancySpec {
    /// Squared MMD (V-statistic).
    Mmd { kernel: KernelSpec },
    /// Exact W1 between uniform empirical measures.
    W1 { metric: GroundMetric },
}

/// Value and gradient with respect to the encoded samples `encoded` of
/// `D(empirical(prior), empirical(encoded))`.
///
/// For W1 the gradient is taken with the optimal coupling held fixed. In
/// one dimension under equal sample counts the sorted matching is optimal
/// and is used directly.
pub fn penalty_with_grad(spec: &DiscrepancySpec, prior: &Matrix, encoded: &Matrix) -> Result<(f64, Matrix)> {
    match spec {
        DiscrepancySpec::Mmd { kernel } => mmd2_biased_grad_y(kernel, prior, encoded),
        DiscrepancySpec::W1 { metric } => {
            check_sets(prior, encoded)?;
            let dim = encoded.cols();
            let coupling = if dim == 1 && prior.rows() == encoded.rows() {
                sorted_matching(prior, encoded)
            } else {
                let opts = W1Options {
                    metric: *metric,
                    support_cap: usize::MAX,
                };
                uniform_plan(prior, encoded, &opts)?.entries
            };
            let mut value = 0.0;
            let mut grad = Matrix::zeros(encoded.rows(), dim);
            let mut g = vec![0.0; dim];
            for (i, j, mass) in coupling {
                let (p, e) = (prior.row(i), encoded.row(j));
                value += mass * metric.distance(p, e);
                metric.grad_x(e, p, &mut g);
                for (o, gi) in grad.row_mut(j).iter_mut().zip(&g) {
                    *o += mass * gi;
                }
            }
            Ok((value, grad))
        }
    }
}

/// Sorted matching of two equal-size 1D samples as coupling entries.
fn sorted_matching(a: &Matrix, b: &Matrix) -> Vec<(usize, usize, f64)> {
    let n = a.rows();
    let order = |m: &Matrix| {
        let mut idx: Vec<usize> = (0..m.rows()).collect();
        idx.sort_by(|&i, &j| m.get(i, 0).partial_cmp(&m.get(j, 0)).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
        idx
    };
    let (oa, ob) = (order(a), order(b));
    let mass = 1.0 / n as f64;
    oa.into_iter().zip(ob).map(|(i, j)| (i, j, mass)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imq_at_zero_distance() {
        let k = KernelSpec::imq_for_dim(3).unwrap();
        assert_eq!(kernel_eval(&k, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let v = kernel_eval(&k, &[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn smoothing_gaussian_mode() {
        let k = KernelSpec::smoothing_gaussian(1.0).unwrap();
        let v = kernel_eval(&k, &[0.3], &[0.3]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(kernel_eval(&k, &[0.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::rbf(0.0).is_err());
    }

    #[test]
    fn mmd_singletons() {
        let k = KernelSpec::rbf(1.0).unwrap();
        for t in [0.0, 0.5, 2.0] {
            let v = mmd2_biased(&k, &Matrix::column(&[0.0]), &Matrix::column(&[t])).unwrap();
            assert!((v - (2.0 - 2.0 * (-t * t).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn mmd_empty_rejected() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(
            mmd2_biased(&k, &Matrix::zeros(0, 1), &Matrix::column(&[1.0])),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn w1_1d_examples() {
        assert_eq!(w1_1d(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(w1_1d(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!(w1_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn w1_1d_unequal_sizes() {
        // {0} vs {0, 2}: half the mass moves distance 2.
        assert!((w1_1d(&[0.0], &[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        // {0, 1, 2} vs {0, 2}: quantile coupling moves 1/6 of mass by 1 twice.
        assert!((w1_1d(&[0.0, 1.0, 2.0], &[0.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn w1_shifted_pairs() {
        let x = Matrix::column(&[0.0, 1.0]);
        let y = Matrix::column(&[0.5, 1.5]);
        let v = w1_uniform(&x, &y, &W1Options::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let w = [0.5, 0.5];
        let v = w1_discrete_exact(&x, &w, &y, &w, &W1Options::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w1_rejects_bad_weights_and_cap() {
        let x = Matrix::column(&[0.0, 1.0]);
        let err = w1_discrete_exact(&x, &[0.5, 0.6], &x, &[0.5, 0.5], &W1Options::default());
        assert!(matches!(err, Err(Error::InvalidWeights(_))));
        let opts = W1Options {
            support_cap: 1,
            ..W1Options::default()
        };
        assert!(matches!(w1_uniform(&x, &x, &opts), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn sliced_identical_is_zero() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]]).unwrap();
        assert_eq!(sliced_w1(&x, &x, 20, 1).unwrap(), 0.0);
        assert!(sliced_w1(&x, &x, 0, 1).is_err());
    }

    #[test]
    fn w1_penalty_gradient_1d() {
        let prior = Matrix::column(&[0.0, 1.0]);
        let enc = Matrix::column(&[1.5, -0.5]);
        let (v, g) = penalty_with_grad(&DiscrepancySpec::W1 { metric: GroundMetric::L2 }, &prior, &enc).unwrap();
        // -0.5 -> 0 and 1.5 -> 1.
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(g.as_slice(), &[0.5, -0.5]);
    }
}
