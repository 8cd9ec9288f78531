//! Black-box evasion attacks on a graph rumor detector.
//!
//! A heterogeneous social graph feeds an R-GCN detector whose message
//! ranking the attacker observes. A two-level LinUCB agent adds
//! user–message edges to push target rumors down that ranking, and is
//! compared against rule-based attackers.

pub mod attackers;
pub mod bandit;
pub mod detector;
pub mod environment;
pub mod features;
pub mod graph;
pub mod harness;
pub mod objective;

#[cfg(test)]
mod testutil;

pub use attackers::{RuleKind, RuleStrategy, Variant};
pub use bandit::{BaselineMode, CreditMode, LinUcbPolicy, PolicyCheckpoint};
pub use detector::{Detector, RankingSnapshot, TrainConfig};
pub use environment::{AttackEnv, AttackSetup, EnvConfig, NodeAction, SubgraphAction};
pub use features::{FeatureVector, Level};
pub use graph::{ComponentId, HeteroGraph, NodeId, NodeKind, Relation};
pub use harness::{DatasetSpec, ExperimentConfig, HarnessError, Method, SyntheticSpec};
pub use objective::{IndicatorMode, TargetSet};
