use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Which part of the training objective produced a non-finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LossComponent {
    Reconstruction,
    Penalty,
}

impl fmt::Display for LossComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossComponent::Reconstruction => f.write_str("reconstruction"),
            LossComponent::Penalty => f.write_str("penalty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("point is not covered by any cover element (nearest center at distance {nearest_distance})")]
    Uncovered { nearest_distance: f64 },

    #[error("k-means cluster {cluster} is empty; re-seed with a different seed or use a smaller K")]
    EmptyCluster { cluster: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("support of {size} points exceeds the exact solver cap of {cap}; subsample the inputs")]
    SupportTooLarge { size: usize, cap: usize },

    #[error("prior collapse in cluster {cluster}: {accepted} of {proposals} proposals accepted")]
    PriorCollapse {
        cluster: usize,
        accepted: usize,
        proposals: usize,
    },

    #[error("non-finite {component} loss at step {step}")]
    NonFinite { step: usize, component: LossComponent },

    #[error("transport problem is infeasible")]
    Infeasible,
}
