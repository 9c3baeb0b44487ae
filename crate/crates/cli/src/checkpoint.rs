//! Versioned JSON checkpoints. A mixture checkpoint stores everything
//! sampling needs: architecture, every named parameter segment, the
//! partition, mixture weights, priors and the smoothing bandwidth. A KDE
//! checkpoint stores its bandwidth and training points.

use std::fs;
use std::path::Path;

use mldmae_core::diffnet::{MixtureArchitecture, ParamStore};
use mldmae_core::evalsuite::kde_sample;
use mldmae_core::mixmodel::{MixtureModel, Prior};
use mldmae_core::partition::{MixtureWeights, PartitionKind, PartitionOfUnity};
use mldmae_core::{Matrix, PointCloud};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "mldmae-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub enum Checkpoint {
    Mixture(MixtureModel),
    Kde { bandwidth: f64, train: PointCloud },
}

/// Partition sidecar: plain centers, radii, margin, exponent and kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub kind: PartitionKind,
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub margin: f64,
    pub exponent: f64,
}

impl PartitionFile {
    pub fn from_partition(pou: &PartitionOfUnity) -> Self {
        Self {
            kind: pou.kind(),
            centers: pou.centers().iter_rows().map(<[f64]>::to_vec).collect(),
            radii: pou.radii().to_vec(),
            margin: pou.margin(),
            exponent: pou.exponent(),
        }
    }

    pub fn to_partition(&self) -> mldmae_core::Result<PartitionOfUnity> {
        PartitionOfUnity::new(
            self.kind,
            Matrix::from_rows(&self.centers)?,
            self.radii.clone(),
            self.margin,
            self.exponent,
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    name: String,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    architecture: MixtureArchitecture,
    segments: Vec<SegmentFile>,
    partition: PartitionFile,
    weights: Vec<f64>,
    priors: Vec<Prior>,
    bandwidth: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KdeFile {
    bandwidth: f64,
    points: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
enum ModelFile {
    Mixture(MixtureFile),
    Kde(KdeFile),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    model: ModelFile,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let model = match self {
            Checkpoint::Mixture(m) => {
                let values = m.params().values();
                ModelFile::Mixture(MixtureFile {
                    architecture: m.architecture().clone(),
                    segments: m
                        .params()
                        .segments()
                        .iter()
                        .map(|s| SegmentFile {
                            name: s.name.clone(),
                            values: values[s.range()].to_vec(),
                        })
                        .collect(),
                    partition: PartitionFile::from_partition(m.partition()),
                    weights: m.weights().values().to_vec(),
                    priors: m.priors().to_vec(),
                    bandwidth: m.bandwidth(),
                })
            }
            Checkpoint::Kde { bandwidth, train } => ModelFile::Kde(KdeFile {
                bandwidth: *bandwidth,
                points: train.points.iter_rows().map(<[f64]>::to_vec).collect(),
            }),
        };
        let file = CheckpointFile {
            format: FORMAT.into(),
            version: VERSION,
            model,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("checkpoints serialize");
        text.push('\n');
        text
    }

    /// Parse a checkpoint; `path` labels errors.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let schema = |message: String| CliError::Schema {
            path: path.to_path_buf(),
            message,
        };
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        if file.format != FORMAT {
            return Err(schema(format!("field `format`: expected `{FORMAT}`, found `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(schema(format!("field `version`: unsupported version {}", file.version)));
        }
        let invalid = |field: &str, e: mldmae_core::Error| schema(format!("field `{field}`: {e}"));
        match file.model {
            ModelFile::Mixture(m) => {
                let mut params = ParamStore::new();
                for s in m.segments {
                    let name = s.name.clone();
                    params.push_segment(s.name, s.values).map_err(|e| invalid(&format!("segments.{name}"), e))?;
                }
                let pou = m.partition.to_partition().map_err(|e| invalid("partition", e))?;
                let weights = MixtureWeights::new(m.weights).map_err(|e| invalid("weights", e))?;
                let model = MixtureModel::from_parts(m.architecture, params, pou, weights, m.priors, m.bandwidth)
                    .map_err(|e| invalid("model", e))?;
                Ok(Checkpoint::Mixture(model))
            }
            ModelFile::Kde(k) => {
                let points = Matrix::from_rows(&k.points).map_err(|e| invalid("points", e))?;
                let train = PointCloud::new(points).map_err(|e| invalid("points", e))?;
                if !(k.bandwidth > 0.0) {
                    return Err(schema(format!("field `bandwidth`: must be positive, found {}", k.bandwidth)));
                }
                Ok(Checkpoint::Kde {
                    bandwidth: k.bandwidth,
                    train,
                })
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Checkpoint::Mixture(m) => m.ambient_dim(),
            Checkpoint::Kde { train, .. } => train.dim(),
        }
    }

    /// Trainable parameters; a KDE has none.
    pub fn param_count(&self) -> usize {
        match self {
            Checkpoint::Mixture(m) => m.param_count(),
            Checkpoint::Kde { .. } => 0,
        }
    }

    pub fn sample(&self, m: usize, seed: u64) -> mldmae_core::Result<PointCloud> {
        match self {
            Checkpoint::Mixture(model) => model.sample(m, seed),
            Checkpoint::Kde { bandwidth, train } => kde_sample(train, *bandwidth, m, seed),
        }
    }
}
