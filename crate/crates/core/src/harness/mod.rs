//! Datasets, synthetic data, experiment orchestration and reports.

pub mod dataset;
pub mod experiment;
pub mod report;
pub mod rng;
pub mod split;
pub mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bandit::BanditError;
use crate::detector::DetectorError;
use crate::environment::EnvError;
use crate::graph::GraphError;

pub use dataset::{load_dataset, DatasetSpec, DatasetSummary, EdgeRecord, Label, NodeRecord, RecordKind, SplitRecord};
pub use experiment::{run_experiment, train_detector, Ablation, DatasetSource, ExperimentConfig, ExperimentSummary, Method};
pub use report::{feature_importance_report, ImportanceReport, ImportanceRow, ResultRow};
pub use rng::{derived_seed, stream};
pub use split::{split_and_controllables, Partition};
pub use synth::{generate_synthetic, Mix, SyntheticSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no nodes")]
    NoNodes,
    #[error("{section}[{index}].{field}: {message}")]
    Record {
        section: &'static str,
        index: usize,
        field: &'static str,
        message: String,
    },
    #[error("malformed dataset: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("infeasible synthetic request: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no target rumors with controllable fraction {fraction}; raise the fraction or use a larger dataset")]
    NoTargets { fraction: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        HarnessError::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Whether the fault lies in user input rather than in a run.
    pub fn is_config(&self) -> bool {
        match self {
            HarnessError::NoNodes
            | HarnessError::Record { .. }
            | HarnessError::Parse(_)
            | HarnessError::Infeasible(_)
            | HarnessError::Config(_)
            | HarnessError::NoTargets { .. }
            | HarnessError::Graph(_) => true,
            HarnessError::Bandit(BanditError::SchemaMismatch { .. }) => true,
            HarnessError::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
