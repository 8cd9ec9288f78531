use std::collections::HashSet;

use super::{ComponentId, GraphError, HeteroGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsScope {
    Whole,
    Component(ComponentId),
}

/// Structural summary over the untyped simple graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub min_degree: usize,
    /// 3 × triangles / connected triples; 0 when there are no triples.
    pub clustering: f64,
}

impl HeteroGraph {
    pub fn stats(&self, scope: StatsScope) -> Result<GraphStats, GraphError> {
        match scope {
            StatsScope::Whole => {
                let all: Vec<NodeId> = self.node_ids().collect();
                self.stats_over(&all)
            }
            StatsScope::Component(c) => self.stats_over(self.members(c)),
        }
    }

    /// Statistics of a node set that is closed under adjacency (a union of
    /// components).
    pub fn stats_over(&self, nodes: &[NodeId]) -> Result<GraphStats, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyScope);
        }
        let mut degree_sum = 0usize;
        let mut max_degree = 0usize;
        let mut min_degree = usize::MAX;
        let mut triples = 0u64;
        let mut closed = 0u64;
        let mut nbr_set: HashSet<NodeId> = HashSet::new();
        for &v in nodes {
            let deg = self.degree(v);
            degree_sum += deg;
            max_degree = max_degree.max(deg);
            min_degree = min_degree.min(deg);
            if deg < 2 {
                continue;
            }
            triples += (deg * (deg - 1) / 2) as u64;
            nbr_set.clear();
            nbr_set.extend(self.all_neighbors(v));
            // each closed pair (a, b) at v is seen twice: from a and from b
            let mut twice = 0u64;
            for a in self.all_neighbors(v) {
                for b in self.all_neighbors(a) {
                    if b != v && nbr_set.contains(&b) {
                        twice += 1;
                    }
                }
            }
            closed += twice / 2;
        }
        let clustering = if triples == 0 {
            0.0
        } else {
            closed as f64 / triples as f64
        };
        Ok(GraphStats {
            nodes: nodes.len(),
            edges: degree_sum / 2,
            avg_degree: degree_sum as f64 / nodes.len() as f64,
            max_degree,
            min_degree,
            clustering,
        })
    }
}
