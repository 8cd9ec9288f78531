//! Small attack fixtures shared by unit tests.

use std::sync::Arc;

use crate::detector::{Detector, Optimizer, TrainConfig};
use crate::environment::AttackSetup;
use crate::graph::{HeteroGraph, NodeId, NodeKind, Relation};

/// `n` cascades: author `4i`, message `4i+1` (rumor when `i` is even),
/// retweeter `4i+2` linked to both, comment `4i+3`, plus `i % 3` extra
/// retweeters numbered from `4n`. Authors of the first `controlled`
/// cascades and their messages are controllable.
pub fn cascades(n: u32, controlled: u32) -> AttackSetup {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut authorship = Vec::new();
    for i in 0..n {
        let b = 4 * i;
        nodes.push((NodeId(b), NodeKind::User { is_author: true }));
        nodes.push((NodeId(b + 1), NodeKind::Message { is_rumor: Some(i % 2 == 0) }));
        nodes.push((NodeId(b + 2), NodeKind::User { is_author: false }));
        nodes.push((NodeId(b + 3), NodeKind::Comment));
        edges.push((NodeId(b), NodeId(b + 1), Relation::UserMessage));
        edges.push((NodeId(b + 2), NodeId(b + 1), Relation::UserMessage));
        edges.push((NodeId(b), NodeId(b + 2), Relation::UserUser));
        edges.push((NodeId(b + 1), NodeId(b + 3), Relation::MessageComment));
        authorship.push((NodeId(b + 1), NodeId(b)));
    }
    let mut next = 4 * n;
    for i in 0..n {
        for _ in 0..i % 3 {
            nodes.push((NodeId(next), NodeKind::User { is_author: false }));
            edges.push((NodeId(next), NodeId(4 * i + 1), Relation::UserMessage));
            next += 1;
        }
    }
    let graph = HeteroGraph::build(&nodes, &edges).unwrap();
    let controllable = (0..controlled).flat_map(|i| [NodeId(4 * i), NodeId(4 * i + 1)]).collect();
    let targets = (0..controlled).filter(|i| i % 2 == 0).map(|i| NodeId(4 * i + 1)).collect();
    AttackSetup {
        graph,
        controllable,
        targets,
        authorship,
    }
}

pub fn small_detector(g: &HeteroGraph) -> Arc<Detector> {
    let labels: Vec<(NodeId, bool)> = g.messages().map(|m| (m, g.kind(m).is_rumor())).collect();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 30,
        hidden_dim: 8,
        layers: 2,
        seed: 1,
        optimizer: Optimizer::adam(),
    };
    Arc::new(Detector::train(g, &labels, &cfg).unwrap().0)
}
