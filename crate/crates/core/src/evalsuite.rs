//! Baselines and metrics: Gaussian KDE sampling, Parzen-window
//! log-likelihood, held-out W1 evaluation and report tables.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt::Write;

use num_traits::Float;

use crate::discrepancy::{w1_uniform, W1Options};
use crate::matrix::sq_dist;
use crate::rng::Rng;
use crate::{Error, Matrix, PointCloud, Result};

/// Each output is a uniformly chosen training point plus
/// `N(0, bandwidth^2 I)` noise.
pub fn kde_sample(train: &PointCloud, bandwidth: f64, m: usize, seed: u64) -> Result<PointCloud> {
    Ok(kde_sample_with_centers(train, bandwidth, m, seed)?.0)
}

/// Like [`kde_sample`], also returning the index of each chosen center.
pub fn kde_sample_with_centers(train: &PointCloud, bandwidth: f64, m: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if train.is_empty() {
        return Err(Error::Empty("KDE training set"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!("KDE bandwidth must be positive, got {bandwidth}")));
    }
    let mut rng = Rng::new(seed);
    let dim = train.dim();
    let mut data = Vec::with_capacity(m * dim);
    let mut centers = Vec::with_capacity(m);
    for _ in 0..m {
        let i = rng.below(train.len());
        centers.push(i);
        for c in train.point(i) {
            data.push(c + bandwidth * rng.normal());
        }
    }
    Ok((PointCloud::new_possibly_empty(Matrix::new(m, dim, data)?), centers))
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Parzen window input"));
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "clouds of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Mean over `test` of `log (1/m) sum_j N(x; g_j, sigma^2 I)`, with
/// log-sum-exp stabilization.
pub fn parzen_ll(generated: &PointCloud, test: &PointCloud, sigma: f64) -> Result<f64> {
    check_pair(generated, test)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("Parzen width must be positive, got {sigma}")));
    }
    let d = test.dim() as f64;
    let m = generated.len() as f64;
    let norm = -0.5 * d * (2.0 * PI * sigma * sigma).ln() - m.ln();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut exps = vec![0.0; generated.len()];
    let mut total = 0.0;
    for x in test.points.iter_rows() {
        let mut max = f64::NEG_INFINITY;
        for (e, g) in exps.iter_mut().zip(generated.points.iter_rows()) {
            *e = -sq_dist(x, g) * inv;
            max = max.max(*e);
        }
        let s: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        total += norm + max + s.ln();
    }
    Ok(total / test.len() as f64)
}

/// Grid value with the highest Parzen log-likelihood on `validation`;
/// ties go to the smaller width.
pub fn select_parzen_sigma(generated: &PointCloud, validation: &PointCloud, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty Parzen width grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &s in &sorted {
        let ll = parzen_ll(generated, validation, s)?;
        if ll > best.0 {
            best = (ll, s);
        }
    }
    Ok(best.1)
}

/// `count` values spaced evenly in log scale from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(Error::Config(format!("bad log grid [{lo}, {hi}] x {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Outcome of a KDE bandwidth search.
#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    /// `(bandwidth, held-out W1)` for every grid value.
    pub scores: Vec<(f64, f64)>,
}

/// Pick the grid bandwidth whose KDE samples are closest in W1 to
/// `validation`; one sample of the validation size is drawn per value,
/// all from the same seed.
pub fn select_kde_bandwidth(
    train: &PointCloud,
    validation: &PointCloud,
    grid: &[f64],
    options: &W1Options,
    seed: u64,
) -> Result<BandwidthSelection> {
    if grid.is_empty() {
        return Err(Error::Config("empty bandwidth grid".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    let mut best = (f64::INFINITY, grid[0]);
    for &bw in grid {
        let samples = kde_sample(train, bw, validation.len(), seed)?;
        let w = w1_uniform(&samples.points, &validation.points, options)?;
        scores.push((bw, w));
        if w < best.0 {
            best = (w, bw);
        }
    }
    Ok(BandwidthSelection {
        bandwidth: best.1,
        scores,
    })
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub method: String,
    pub w1_to_truth: f64,
    pub param_count: usize,
    pub runtime_seconds: f64,
    pub config_fingerprint: String,
}

/// Exact W1 between `n_eval` model samples (drawn with `sample_seed`) and
/// `n_eval` fresh truth samples (drawn with `truth_seed`).
pub fn heldout_w1<S, T>(
    sampler: S,
    truth: T,
    n_eval: usize,
    options: &W1Options,
    sample_seed: u64,
    truth_seed: u64,
) -> Result<f64>
where
    S: FnOnce(usize, u64) -> Result<PointCloud>,
    T: FnOnce(usize, u64) -> Result<PointCloud>,
{
    if n_eval == 0 {
        return Err(Error::Config("evaluation needs at least one sample".into()));
    }
    if n_eval > options.support_cap {
        return Err(Error::SupportTooLarge {
            size: n_eval,
            cap: options.support_cap,
        });
    }
    let model = sampler(n_eval, sample_seed)?;
    let fresh = truth(n_eval, truth_seed)?;
    w1_uniform(&model.points, &fresh.points, options)
}

/// Fill a report from a held-out W1 evaluation. Runtime is left at 0 for
/// the caller, which owns the clock.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<S, T>(
    method: &str,
    param_count: usize,
    config_fingerprint: &str,
    sampler: S,
    truth: T,
    n_eval: usize,
    options: &W1Options,
    seed: u64,
) -> Result<EvalReport>
where
    S: FnOnce(usize, u64) -> Result<PointCloud>,
    T: FnOnce(usize, u64) -> Result<PointCloud>,
{
    let w = heldout_w1(
        sampler,
        truth,
        n_eval,
        options,
        seed,
        seed.wrapping_add(crate::synthdata::HELD_OUT_SEED_OFFSET),
    )?;
    Ok(EvalReport {
        method: method.to_string(),
        w1_to_truth: w,
        param_count,
        runtime_seconds: 0.0,
        config_fingerprint: config_fingerprint.to_string(),
    })
}

fn sorted_reports(reports: &[EvalReport]) -> Result<Vec<&EvalReport>> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.method.cmp(&b.method));
    Ok(rows)
}

pub const REPORT_HEADER: [&str; 5] = ["method", "w1", "param_count", "runtime_seconds", "config_fingerprint"];

/// Reports as CSV, sorted by method name.
pub fn format_report_csv(reports: &[EvalReport]) -> Result<String> {
    let mut out = REPORT_HEADER.join(",");
    out.push('\n');
    for r in sorted_reports(reports)? {
        if r.method.contains([',', '\n', '"']) {
            return Err(Error::Config(format!("method name `{}` cannot go in a CSV cell", r.method)));
        }
        writeln!(
            out,
            "{},{},{},{},{}",
            r.method, r.w1_to_truth, r.param_count, r.runtime_seconds, r.config_fingerprint
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Parse the output of [`format_report_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<EvalReport>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == REPORT_HEADER.join(",") => {}
        _ => return Err(Error::Config("report CSV header missing".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != REPORT_HEADER.len() {
            return Err(Error::Config(format!("report row {} has {} cells", i + 2, cells.len())));
        }
        let bad = |what: &str| Error::Config(format!("report row {}: bad {what}", i + 2));
        out.push(EvalReport {
            method: cells[0].to_string(),
            w1_to_truth: cells[1].parse().map_err(|_| bad("w1"))?,
            param_count: cells[2].parse().map_err(|_| bad("param_count"))?,
            runtime_seconds: cells[3].parse().map_err(|_| bad("runtime_seconds"))?,
            config_fingerprint: cells[4].to_string(),
        });
    }
    Ok(out)
}

/// Reports as a column-aligned text table, sorted by method name.
pub fn format_report_text(reports: &[EvalReport]) -> Result<String> {
    let rows = sorted_reports(reports)?;
    let header = ["Method", "W1", "Params", "Runtime (s)"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{:.4}", r.w1_to_truth),
                r.param_count.to_string(),
                format!("{:.1}", r.runtime_seconds),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |row: [&str; 4]| {
        let mut s = format!("{:<w$}", row[0], w = widths[0]);
        for (c, w) in row[1..].iter().zip(&widths[1..]) {
            write!(s, "  {c:>w$}", w = w).expect("writing to a String");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line([&rule[0], &rule[1], &rule[2], &rule[3]]);
    for row in &cells {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    Ok(out)
}
