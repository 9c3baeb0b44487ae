//! The experiment pipeline behind the command line: generate data, train
//! a method, sample it and score it against fresh ground truth.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use mldmae_core::discrepancy::W1Options;
use mldmae_core::evalsuite::{evaluate as eval_w1, log_grid, select_kde_bandwidth, BandwidthSelection, EvalReport};
use mldmae_core::partition::{fit_partition, PartitionOfUnity};
use mldmae_core::synthdata::{gen_sphere, gen_spiral, gen_torus, split};
use mldmae_core::trainer::{refresh_priors, train as fit, TrainHistory};
use mldmae_core::PointCloud;

use crate::checkpoint::{Checkpoint, PartitionFile};
use crate::cloud_io::{load_cloud, save_cloud};
use crate::config::{Dataset, ExperimentConfig, Method};
use crate::error::{CliError, Result};

pub const TRAIN_FILE: &str = "train.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PARTITION_FILE: &str = "partition.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const LOG_FILE: &str = "train.log";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const EVAL_SAMPLES_FILE: &str = "eval_samples.csv";
pub const EVAL_TRUTH_FILE: &str = "eval_truth.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

/// Validation clouds use their own seed offset, disjoint from training
/// and held-out truth.
pub const VALIDATION_SEED_OFFSET: u64 = 2000;

type Generator = fn(usize, u64) -> mldmae_core::Result<PointCloud>;

pub fn generator(dataset: Dataset) -> Option<Generator> {
    match dataset {
        Dataset::Spiral => Some(gen_spiral),
        Dataset::Torus => Some(gen_torus),
        Dataset::Sphere => Some(gen_sphere),
        Dataset::File => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Datasets {
    pub train: PointCloud,
    pub validation: Option<PointCloud>,
}

/// Draw (or load, for `file`) the training and validation clouds.
pub fn generate(cfg: &ExperimentConfig) -> Result<Datasets> {
    let d = &cfg.data;
    match (generator(d.dataset), &d.path) {
        (Some(g), _) => {
            let n = d.n_train.ok_or_else(|| CliError::Usage("data.n_train is required".into()))?;
            let validation = match d.n_validation {
                0 => None,
                m => Some(g(m, cfg.seed.wrapping_add(VALIDATION_SEED_OFFSET))?),
            };
            Ok(Datasets {
                train: g(n, cfg.seed)?,
                validation,
            })
        }
        (None, Some(path)) => Ok(Datasets {
            train: load_cloud(path)?,
            validation: None,
        }),
        (None, None) => Err(CliError::Usage("data.path is required for dataset = \"file\"".into())),
    }
}

pub fn write_datasets(dir: &Path, data: &Datasets) -> Result<()> {
    save_cloud(&data.train, &dir.join(TRAIN_FILE))?;
    let vpath = dir.join(VALIDATION_FILE);
    match &data.validation {
        Some(v) => save_cloud(v, &vpath)?,
        None if vpath.exists() => fs::remove_file(&vpath).map_err(|e| CliError::io(&vpath, e))?,
        None => {}
    }
    Ok(())
}

pub fn read_datasets(dir: &Path) -> Result<Datasets> {
    let train = load_cloud(&dir.join(TRAIN_FILE))?;
    let vpath = dir.join(VALIDATION_FILE);
    let validation = if vpath.exists() { Some(load_cloud(&vpath)?) } else { None };
    Ok(Datasets { train, validation })
}

/// A trained method plus what was learned along the way.
#[derive(Clone, Debug)]
pub struct Trained {
    pub checkpoint: Checkpoint,
    pub history: Option<TrainHistory>,
    pub kde_selection: Option<BandwidthSelection>,
}

/// One indicator ball around the data, so the single pair sees every point
/// with weight 1.
fn enclosing_ball(cloud: &PointCloud) -> mldmae_core::Result<PartitionOfUnity> {
    let dim = cloud.dim();
    let mut mean = vec![0.0; dim];
    for p in cloud.points.iter_rows() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / cloud.len() as f64;
        }
    }
    let far = cloud
        .points
        .iter_rows()
        .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    PartitionOfUnity::single(&mean, 2.0 * far + 1.0)
}

pub fn train(cfg: &ExperimentConfig, data: &Datasets) -> Result<Trained> {
    let train = &data.train;
    let tc = cfg.train_config()?;
    let arch = cfg.architecture(train.dim());
    match cfg.method {
        Method::Mldmae => {
            let pou = fit_partition(train, &cfg.partition_config(), cfg.seed)?;
            let (mut model, mut history) = fit(train, &pou, arch, cfg.prior(), &tc)?;
            if tc.prior_refresh_rounds > 0 {
                model = refresh_priors(&model, train, &tc, tc.prior_refresh_rounds, data.validation.as_ref(), &mut history)?;
            }
            Ok(Trained {
                checkpoint: Checkpoint::Mixture(model),
                history: Some(history),
                kde_selection: None,
            })
        }
        Method::Ldmae => {
            let (model, history) = fit(train, &enclosing_ball(train)?, arch, cfg.prior(), &tc)?;
            Ok(Trained {
                checkpoint: Checkpoint::Mixture(model),
                history: Some(history),
                kde_selection: None,
            })
        }
        Method::Kde => {
            let (bandwidth, selection) = match cfg.kde.bandwidth {
                Some(b) => (b, None),
                None => {
                    let k = &cfg.kde;
                    let (fit_part, held) = split(train, k.train_fraction, cfg.seed)?;
                    let grid = log_grid(k.grid_min, k.grid_max, k.grid_points)?;
                    let sel = select_kde_bandwidth(&fit_part, &held, &grid, &W1Options::default(), cfg.seed)?;
                    (sel.bandwidth, Some(sel))
                }
            };
            Ok(Trained {
                checkpoint: Checkpoint::Kde {
                    bandwidth,
                    train: train.clone(),
                },
                history: None,
                kde_selection: selection,
            })
        }
    }
}

/// Epoch-level loss history as CSV; an untrained run gives just the header.
pub fn loss_csv(history: Option<&TrainHistory>) -> String {
    let mut out = String::from("round,epoch,reconstruction,penalty,total\n");
    for e in history.map(|h| h.epochs.as_slice()).unwrap_or(&[]) {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.round, e.epoch, e.reconstruction, e.penalty, e.total
        )
        .expect("writing to a String");
    }
    out
}

/// Write the checkpoint, partition sidecar and loss history of a run.
pub fn write_trained(dir: &Path, trained: &Trained) -> Result<()> {
    trained.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    if let Checkpoint::Mixture(m) = &trained.checkpoint {
        let path = dir.join(PARTITION_FILE);
        let mut text = serde_json::to_string_pretty(&PartitionFile::from_partition(m.partition())).expect("partitions serialize");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    let path = dir.join(LOSS_FILE);
    fs::write(&path, loss_csv(trained.history.as_ref())).map_err(|e| CliError::io(&path, e))
}

/// Held-out samples of the true distribution.
pub fn truth(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<PointCloud> {
    match generator(cfg.data.dataset) {
        Some(g) => Ok(g(n, seed)?),
        None => {
            let path = cfg
                .data
                .test_path
                .as_ref()
                .ok_or_else(|| CliError::Usage("data.test_path is required to evaluate a file dataset".into()))?;
            let cloud = load_cloud(path)?;
            if cloud.len() < n {
                return Err(CliError::Usage(format!(
                    "{} holds {} points but eval.n_eval is {n}",
                    path.display(),
                    cloud.len()
                )));
            }
            Ok(cloud.subset(&(0..n).collect::<Vec<_>>()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: EvalReport,
    pub samples: PointCloud,
    pub truth: PointCloud,
}

/// Exact W1 between `n_eval` model samples (seeded by the config seed) and
/// `n_eval` fresh truth samples. Runtime is left at 0.
pub fn evaluate(cfg: &ExperimentConfig, checkpoint: &Checkpoint) -> Result<Evaluation> {
    let mut samples = None;
    let mut truth_cloud = None;
    let mut truth_err = None;
    let report = eval_w1(
        cfg.method.name(),
        checkpoint.param_count(),
        &cfg.fingerprint(),
        |n, s| {
            let c = checkpoint.sample(n, s)?;
            samples = Some(c.clone());
            Ok(c)
        },
        |n, s| match truth(cfg, n, s) {
            Ok(c) => {
                truth_cloud = Some(c.clone());
                Ok(c)
            }
            Err(e) => {
                truth_err = Some(e);
                Err(mldmae_core::Error::Empty("held-out truth"))
            }
        },
        cfg.eval.n_eval,
        &W1Options::default(),
        cfg.seed,
    );
    if let Some(e) = truth_err {
        return Err(e);
    }
    Ok(Evaluation {
        report: report?,
        samples: samples.expect("sampler ran"),
        truth: truth_cloud.expect("truth sampler ran"),
    })
}

/// Everything one end-to-end run produced.
#[derive(Clone, Debug)]
pub struct Run {
    pub data: Datasets,
    pub trained: Trained,
    pub evaluation: Evaluation,
}

/// Generate, train and evaluate in memory. The report's runtime is the wall
/// clock of training, sampling and evaluation.
pub fn run(cfg: &ExperimentConfig) -> Result<Run> {
    let data = generate(cfg)?;
    let start = Instant::now();
    let trained = train(cfg, &data)?;
    let mut evaluation = evaluate(cfg, &trained.checkpoint)?;
    evaluation.report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(Run {
        data,
        trained,
        evaluation,
    })
}

