//! Synthetic manifold datasets and point-cloud utilities.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::rng::Rng;
use crate::{Error, Matrix, Result};

/// Seed offset used for held-out "truth" samples so they never share a
/// stream with training data drawn from the same base seed.
pub const HELD_OUT_SEED_OFFSET: u64 = 1000;

/// `n x D` samples with optional nonnegative per-point weights.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointCloud {
    pub points: Matrix,
    pub weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Matrix) -> Result<Self> {
        let cloud = Self {
            points,
            weights: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn with_weights(points: Matrix, weights: Vec<f64>) -> Result<Self> {
        let cloud = Self {
            points,
            weights: Some(weights),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Like [`PointCloud::new`] but allows zero points, for outputs such as
    /// an empty sample request.
    pub fn new_possibly_empty(points: Matrix) -> Self {
        Self {
            points,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.rows() == 0 {
            return Err(Error::Empty("point cloud has no points"));
        }
        if self.points.cols() == 0 {
            return Err(Error::Empty("point cloud has zero dimensions"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.points.rows() {
                return Err(Error::InvalidWeights(format!(
                    "{} weights for {} points",
                    w.len(),
                    self.points.rows()
                )));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
            }
            if !w.iter().any(|v| *v > 0.0) {
                return Err(Error::InvalidWeights("at least one weight must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    /// Weights normalized to sum to one (uniform when absent).
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            None => {
                let n = self.len();
                alloc::vec![1.0 / n as f64; n]
            }
            Some(w) => {
                let total: f64 = w.iter().sum();
                w.iter().map(|v| v / total).collect()
            }
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: self.points.select_rows(indices),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }
}

/// Spiral point for the latent draw `phi0`: with `phi = 3 pi phi0`,
/// `(cos(phi + 2) phi / pi, 2 sin(phi + 2) phi / pi)`.
pub fn spiral_point(phi0: f64) -> [f64; 2] {
    let phi = 3.0 * PI * phi0;
    [(phi + 2.0).cos() * phi / PI, 2.0 * (phi + 2.0).sin() * phi / PI]
}

/// Torus point (major radius 3, minor radius 1) for latent draws
/// `phi0, phi1`, with angles `2 pi phi0` and `2 pi phi1`.
pub fn torus_point(phi0: f64, phi1: f64) -> [f64; 3] {
    let phi = 2.0 * PI * phi0;
    let theta = 2.0 * PI * phi1;
    let ring = 3.0 + theta.cos();
    [ring * phi.cos(), ring * phi.sin(), theta.sin()]
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Config("sample count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Spiral sample together with the generating angles `phi = 3 pi phi0`.
pub fn gen_spiral_with_angles(n: usize, seed: u64) -> Result<(PointCloud, Vec<f64>)> {
    check_n(n)?;
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut angles = Vec::with_capacity(n);
    for _ in 0..n {
        let phi0 = rng.normal();
        data.extend_from_slice(&spiral_point(phi0));
        angles.push(3.0 * PI * phi0);
    }
    Ok((PointCloud::new(Matrix::new(n, 2, data)?)?, angles))
}

pub fn gen_spiral(n: usize, seed: u64) -> Result<PointCloud> {
    Ok(gen_spiral_with_angles(n, seed)?.0)
}

pub fn gen_torus(n: usize, seed: u64) -> Result<PointCloud> {
    check_n(n)?;
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let phi0 = rng.normal();
        let phi1 = rng.normal();
        data.extend_from_slice(&torus_point(phi0, phi1));
    }
    PointCloud::new(Matrix::new(n, 3, data)?)
}

/// Uniform on the unit 2-sphere via normalized standard Gaussians.
pub fn gen_sphere(n: usize, seed: u64) -> Result<PointCloud> {
    check_n(n)?;
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(3 * n);
    while data.len() < 3 * n {
        let v = [rng.normal(), rng.normal(), rng.normal()];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < 1e-12 {
            continue;
        }
        data.extend(v.iter().map(|c| c / norm));
    }
    PointCloud::new(Matrix::new(n, 3, data)?)
}

/// Random disjoint split into `floor(n f)` and the remaining points.
pub fn split(cloud: &PointCloud, train_fraction: f64, seed: u64) -> Result<(PointCloud, PointCloud)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n = cloud.len();
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "splitting {n} points with fraction {train_fraction} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let (a, b) = order.split_at(n_train);
    let train = cloud.subset(a);
    let test = cloud.subset(b);
    train.validate()?;
    test.validate()?;
    Ok((train, test))
}
