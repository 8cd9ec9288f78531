//! Train/test split and the attacker's controllable set.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSpec, SplitRecord};
use super::rng::stream;
use super::HarnessError;
use crate::environment::AttackSetup;
use crate::graph::{HeteroGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub split: SplitRecord,
    /// Sampled authors and their training messages.
    pub controllable: Vec<NodeId>,
    /// Controllable training rumors.
    pub targets: Vec<NodeId>,
}

impl Partition {
    pub fn train_labels(&self, spec: &DatasetSpec) -> Vec<(NodeId, bool)> {
        Self::pick(spec, &self.split.train)
    }

    pub fn test_labels(&self, spec: &DatasetSpec) -> Vec<(NodeId, bool)> {
        Self::pick(spec, &self.split.test)
    }

    fn pick(spec: &DatasetSpec, ids: &[u32]) -> Vec<(NodeId, bool)> {
        let set: BTreeSet<u32> = ids.iter().copied().collect();
        spec.labels().into_iter().filter(|(v, _)| set.contains(&v.0)).collect()
    }

    pub fn setup(&self, spec: &DatasetSpec, graph: HeteroGraph) -> AttackSetup {
        AttackSetup {
            graph,
            controllable: self.controllable.clone(),
            targets: self.targets.clone(),
            authorship: spec.authorship(),
        }
    }
}

/// Message-level split by `ratio`, then a `fraction` of the authors of
/// training messages become controllable along with those messages.
pub fn split_and_controllables(spec: &DatasetSpec, ratio: f64, fraction: f64, seed: u64) -> Result<Partition, HarnessError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(HarnessError::Config(format!("split ratio {ratio} is outside (0, 1)")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(HarnessError::Config(format!("controllable fraction {fraction} is outside (0, 1]")));
    }
    let labels = spec.labels();
    let mut ids: Vec<u32> = labels.iter().map(|(v, _)| v.0).collect();
    ids.shuffle(&mut stream(seed, "split"));
    let n_train = SplitRecord::train_size(ratio, ids.len());
    let mut train = ids[..n_train].to_vec();
    let mut test = ids[n_train..].to_vec();
    train.sort();
    test.sort();

    let train_set: BTreeSet<u32> = train.iter().copied().collect();
    let authorship = spec.authorship();
    let mut authors: Vec<NodeId> = authorship
        .iter()
        .filter(|(m, _)| train_set.contains(&m.0))
        .map(|(_, a)| *a)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if authors.is_empty() {
        return Err(HarnessError::Config("no authored training messages".into()));
    }
    let k = ((fraction * authors.len() as f64).round() as usize).clamp(1, authors.len());
    authors.shuffle(&mut stream(seed, "controllable-sampling"));
    let chosen: BTreeSet<NodeId> = authors[..k].iter().copied().collect();

    let rumor: BTreeSet<NodeId> = labels.iter().filter(|(_, y)| *y).map(|(v, _)| *v).collect();
    let mut controllable: BTreeSet<NodeId> = chosen.clone();
    let mut targets = Vec::new();
    for (m, a) in &authorship {
        if chosen.contains(a) && train_set.contains(&m.0) {
            controllable.insert(*m);
            if rumor.contains(m) {
                targets.push(*m);
            }
        }
    }
    if targets.is_empty() {
        return Err(HarnessError::NoTargets { fraction });
    }
    Ok(Partition {
        split: SplitRecord { ratio, train, test },
        controllable: controllable.into_iter().collect(),
        targets,
    })
}
