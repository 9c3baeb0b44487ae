//! Experiment configuration files (TOML). Unknown keys are rejected.
//!
//! ```toml
//! name = "spiral-mldmae"
//! seed = 0
//! method = "mldmae"          # mldmae | ldmae | kde
//!
//! [data]
//! dataset = "spiral"         # spiral | torus | sphere | file
//! n_train = 1000
//!
//! [partition]                # mldmae only
//! clusters = 10
//!
//! [model]
//! latent_dim = 1
//! hidden = [128]
//!
//! [train]
//! epochs = 50
//! ```
//!
//! Every omitted key takes the default documented on its field.

use std::fs;
use std::path::{Path, PathBuf};

use mldmae_core::diffnet::{Activation, AdamConfig, MixtureArchitecture};
use mldmae_core::discrepancy::{DiscrepancySpec, GroundMetric, KernelSpec};
use mldmae_core::mixmodel::PriorBase;
use mldmae_core::partition::{Margin, PartitionConfig, PartitionKind};
use mldmae_core::trainer::{TrainConfig, ValidationMetric};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mldmae,
    Ldmae,
    Kde,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mldmae => "mldmae",
            Method::Ldmae => "ldmae",
            Method::Kde => "kde",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Spiral,
    Torus,
    Sphere,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dataset: Dataset,
    /// Training points drawn from a generator.
    #[serde(default)]
    pub n_train: Option<usize>,
    /// Validation points for prior refresh; 0 disables validation.
    #[serde(default = "default_n_validation")]
    pub n_validation: usize,
    /// Training CSV for `dataset = "file"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Held-out CSV for evaluating a `file` dataset.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
}

fn default_n_validation() -> usize {
    1000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_partition_kind")]
    pub kind: PartitionKind,
    /// Exponent gamma of the smooth partition.
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// Cover margin as a fraction of the median cluster radius.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_clusters() -> usize {
    10
}
fn default_partition_kind() -> PartitionKind {
    PartitionKind::Smooth
}
fn default_exponent() -> f64 {
    10.0
}
fn default_margin() -> f64 {
    0.05
}
fn default_max_iters() -> usize {
    300
}

impl Default for PartitionSection {
    fn default() -> Self {
        Self {
            clusters: default_clusters(),
            kind: default_partition_kind(),
            exponent: default_exponent(),
            margin: default_margin(),
            max_iters: default_max_iters(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    StdGaussian,
    TruncatedNormal,
    UniformBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_prior")]
    pub prior: PriorKind,
    /// Radius of the truncated normal or uniform-ball prior.
    #[serde(default = "default_prior_radius")]
    pub prior_radius: f64,
}

fn default_latent_dim() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![128]
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_prior() -> PriorKind {
    PriorKind::TruncatedNormal
}
fn default_prior_radius() -> f64 {
    1.0
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            latent_dim: default_latent_dim(),
            hidden: default_hidden(),
            activation: default_activation(),
            prior: default_prior(),
            prior_radius: default_prior_radius(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    W1,
    Mmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Imq,
    Rbf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_penalty")]
    pub penalty: PenaltyKind,
    /// Kernel of the MMD penalty.
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    /// Kernel scale; IMQ defaults to twice the latent dimension, RBF to 1.
    #[serde(default)]
    pub kernel_scale: Option<f64>,
    /// Penalty weight; defaults to 10 for W1 and 100 for MMD.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Variance of the latent smoothing noise.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Data-driven prior refresh rounds after the first fit (mldmae only).
    #[serde(default = "default_refresh_rounds")]
    pub refresh_rounds: usize,
    /// Projections of the sliced W1 used to judge refresh rounds.
    #[serde(default = "default_projections")]
    pub validation_projections: usize,
}

fn default_penalty() -> PenaltyKind {
    PenaltyKind::W1
}
fn default_kernel() -> KernelKind {
    KernelKind::Imq
}
fn default_batch_size() -> usize {
    256
}
fn default_epochs() -> usize {
    50
}
fn default_h() -> f64 {
    0.01
}
fn default_lr() -> f64 {
    1e-3
}
fn default_refresh_rounds() -> usize {
    1
}
fn default_projections() -> usize {
    200
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            penalty: default_penalty(),
            kernel: default_kernel(),
            kernel_scale: None,
            lambda: None,
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            h: default_h(),
            learning_rate: default_lr(),
            refresh_rounds: default_refresh_rounds(),
            validation_projections: default_projections(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeSection {
    /// Fixed bandwidth; when absent it is chosen on a validation split.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_grid_min")]
    pub grid_min: f64,
    #[serde(default = "default_grid_max")]
    pub grid_max: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_grid_min() -> f64 {
    0.01
}
fn default_grid_max() -> f64 {
    1.0
}
fn default_grid_points() -> usize {
    15
}
fn default_train_fraction() -> f64 {
    0.8
}

impl Default for KdeSection {
    fn default() -> Self {
        Self {
            bandwidth: None,
            grid_min: default_grid_min(),
            grid_max: default_grid_max(),
            grid_points: default_grid_points(),
            train_fraction: default_train_fraction(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Samples per side of the held-out W1.
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
}

fn default_n_eval() -> usize {
    5000
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { n_eval: default_n_eval() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub method: Method,
    /// Output directory; `--out` overrides it.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataSection,
    /// Cover settings; must be absent for `ldmae`, which uses one cluster.
    #[serde(default)]
    pub partition: Option<PartitionSection>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub kde: KdeSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Read and validate a config file. Relative data paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.path, &mut cfg.data.test_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate().map_err(|e| match e {
            CliError::Usage(message) => CliError::Config {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ambient = match self.data.dataset {
            Dataset::Spiral => Some(2),
            Dataset::Torus | Dataset::Sphere => Some(3),
            Dataset::File => None,
        };
        match (self.data.dataset, &self.data.path) {
            (Dataset::File, None) => return Err(usage("data.path is required for dataset = \"file\"")),
            (Dataset::File, Some(p)) if !p.exists() => {
                return Err(usage(format!("data.path {} does not exist", p.display())))
            }
            (Dataset::File, _) => {}
            (_, Some(_)) => return Err(usage("data.path is only valid for dataset = \"file\"")),
            (_, None) => {}
        }
        if let Some(p) = &self.data.test_path {
            if !p.exists() {
                return Err(usage(format!("data.test_path {} does not exist", p.display())));
            }
        }
        if ambient.is_some() && !matches!(self.data.n_train, Some(n) if n > 0) {
            return Err(usage("data.n_train must be a positive count for generated datasets"));
        }
        match (self.method, self.partition) {
            (Method::Ldmae, Some(_)) => {
                return Err(usage("ldmae uses a single cluster; remove the [partition] table"))
            }
            (_, Some(p)) if p.clusters == 0 => return Err(usage("partition.clusters must be positive")),
            (_, Some(p)) if !(p.exponent > 1.0) => return Err(usage("partition.exponent must exceed 1")),
            (_, Some(p)) if !(p.margin >= 0.0) => return Err(usage("partition.margin must be nonnegative")),
            _ => {}
        }
        if self.model.latent_dim == 0 || self.model.hidden.iter().any(|&h| h == 0) {
            return Err(usage("model sizes must be positive"));
        }
        if let (Some(d), true) = (ambient, self.method != Method::Kde) {
            if self.model.latent_dim >= d {
                return Err(usage(format!(
                    "model.latent_dim {} must be below the ambient dimension {d}",
                    self.model.latent_dim
                )));
            }
        }
        if self.eval.n_eval == 0 {
            return Err(usage("eval.n_eval must be positive"));
        }
        let k = &self.kde;
        if !(k.train_fraction > 0.0 && k.train_fraction < 1.0) {
            return Err(usage("kde.train_fraction must lie in (0, 1)"));
        }
        if matches!(k.bandwidth, Some(b) if !(b > 0.0)) {
            return Err(usage("kde.bandwidth must be positive"));
        }
        self.train_config()?.validate(self.clusters())?;
        Ok(())
    }

    pub fn clusters(&self) -> usize {
        match self.method {
            Method::Ldmae => 1,
            _ => self.partition.unwrap_or_default().clusters,
        }
    }

    pub fn partition_config(&self) -> PartitionConfig {
        let p = self.partition.unwrap_or_default();
        PartitionConfig {
            clusters: p.clusters,
            kind: p.kind,
            margin: Margin::RelativeToMedianRadius(p.margin),
            exponent: p.exponent,
            max_iters: p.max_iters,
        }
    }

    pub fn architecture(&self, ambient_dim: usize) -> MixtureArchitecture {
        let mut arch = MixtureArchitecture::new(ambient_dim, self.model.latent_dim, self.model.hidden.clone(), self.clusters());
        arch.hidden_activation = self.model.activation;
        arch
    }

    pub fn prior(&self) -> PriorBase {
        let radius = self.model.prior_radius;
        match self.model.prior {
            PriorKind::StdGaussian => PriorBase::StdGaussian,
            PriorKind::TruncatedNormal => PriorBase::TruncatedNormal { radius },
            PriorKind::UniformBall => PriorBase::UniformBall { radius },
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let (penalty, lambda) = match t.penalty {
            PenaltyKind::W1 => (
                DiscrepancySpec::W1 {
                    metric: GroundMetric::L2,
                },
                t.lambda.unwrap_or(10.0),
            ),
            PenaltyKind::Mmd => {
                let kernel = match (t.kernel, t.kernel_scale) {
                    (KernelKind::Imq, None) => KernelSpec::imq_for_dim(self.model.latent_dim)?,
                    (KernelKind::Imq, Some(c)) => KernelSpec::imq(c)?,
                    (KernelKind::Rbf, c) => KernelSpec::rbf(c.unwrap_or(1.0))?,
                };
                (DiscrepancySpec::Mmd { kernel }, t.lambda.unwrap_or(100.0))
            }
        };
        Ok(TrainConfig {
            lambda: vec![lambda],
            penalty,
            batch_size: t.batch_size,
            epochs: t.epochs,
            h: t.h,
            adam: AdamConfig {
                lr: t.learning_rate,
                ..AdamConfig::default()
            },
            prior_refresh_rounds: t.refresh_rounds,
            validation: ValidationMetric::SlicedW1 {
                projections: t.validation_projections,
            },
            seed: self.seed,
        })
    }

    /// Short stable hash of everything that affects results (not `out`).
    pub fn fingerprint(&self) -> String {
        let mut canon = self.clone();
        canon.out = None;
        let text = toml::to_string(&canon).expect("configs serialize");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
method = "mldmae"
[data]
dataset = "spiral"
n_train = 100
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.clusters(), 10);
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.train_config().unwrap().lambda, vec![10.0]);
        assert_eq!(cfg.architecture(2).param_count(), 4492);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[train]\nepoch = 3\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.message().contains("epoch"), "{err}");
        let text = MINIMAL.replace("name = \"t\"", "name = \"t\"\ncolour = 1");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn unknown_dataset_is_rejected() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("spiral", "moebius")).is_err());
    }

    #[test]
    fn ldmae_forbids_a_partition() {
        let text = MINIMAL.replace("mldmae", "ldmae");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.clusters(), 1);
        assert_eq!(cfg.architecture(2).param_count(), 1027);
        let cfg = ExperimentConfig::parse(&format!("{text}\n[partition]\nclusters = 1\n")).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn mmd_defaults() {
        let cfg = ExperimentConfig::parse(&format!("{MINIMAL}\n[train]\npenalty = \"mmd\"\n")).unwrap();
        let tc = cfg.train_config().unwrap();
        assert_eq!(tc.lambda, vec![100.0]);
        assert_eq!(
            tc.penalty,
            DiscrepancySpec::Mmd {
                kernel: KernelSpec::imq_for_dim(1).unwrap()
            }
        );
    }

    #[test]
    fn fingerprint_ignores_out_only() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }

    #[test]
    fn file_dataset_needs_an_existing_path() {
        let text = MINIMAL.replace("dataset = \"spiral\"\nn_train = 100", "dataset = \"file\"\npath = \"/no/such/file.csv\"");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("/no/such/file.csv"));
    }
}
