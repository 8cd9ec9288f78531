//! User PageRank and message influence scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HeteroGraph, NodeId, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    pub damping: f64,
    /// Bound on the L1 distance between the returned vector and the fixed point.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

/// PageRank over the user projection (user nodes, user–user edges).
///
/// Dangling users spread their mass uniformly. Scores sum to one over users;
/// an empty user set yields an empty map.
pub fn pagerank(g: &HeteroGraph, cfg: &PageRankConfig) -> BTreeMap<NodeId, f64> {
    let users: Vec<NodeId> = g.users().collect();
    let n = users.len();
    if n == 0 {
        return BTreeMap::new();
    }
    let mut local = vec![usize::MAX; g.num_nodes()];
    for (i, u) in users.iter().enumerate() {
        local[u.index()] = i;
    }
    let nbrs: Vec<Vec<usize>> = users
        .iter()
        .map(|&u| {
            g.neighbors(u, Relation::UserUser)
                .iter()
                .map(|w| local[w.index()])
                .collect()
        })
        .collect();

    let d = cfg.damping;
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    // a contraction with factor d: stopping on step < tol (1-d)/d bounds the
    // distance to the fixed point by tol
    let step_tol = if d > 0.0 {
        cfg.tolerance * (1.0 - d) / d
    } else {
        f64::INFINITY
    };
    for _ in 0..cfg.max_iterations {
        let dangling: f64 = (0..n).filter(|&i| nbrs[i].is_empty()).map(|i| rank[i]).sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for i in 0..n {
            if nbrs[i].is_empty() {
                continue;
            }
            let share = d * rank[i] / nbrs[i].len() as f64;
            for &j in &nbrs[i] {
                next[j] += share;
            }
        }
        let diff: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < step_tol {
            break;
        }
    }
    let total: f64 = rank.iter().sum();
    users
        .into_iter()
        .zip(rank)
        .map(|(u, r)| (u, r / total))
        .collect()
}

/// Influence scores for users (PageRank) and messages.
///
/// Message influence is the strongest connected user's PageRank plus the
/// re-post count over `z1` plus the comment count over `z2`. `z1` and `z2`
/// are fixed when the table is built so scores stay comparable as attack
/// edges are added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    scores: Vec<f64>,
    pub z1: usize,
    pub z2: usize,
}

impl InfluenceTable {
    /// Computes PageRank and every message score, with `z1`, `z2` taken as the
    /// maxima on `g`.
    pub fn compute(g: &HeteroGraph, cfg: &PageRankConfig) -> Self {
        let pr = pagerank(g, cfg);
        let z1 = g
            .messages()
            .map(|m| g.neighbors(m, Relation::UserMessage).len().saturating_sub(1))
            .max()
            .unwrap_or(0)
            .max(1);
        let z2 = g
            .messages()
            .map(|m| g.neighbors(m, Relation::MessageComment).len())
            .max()
            .unwrap_or(0)
            .max(1);
        Self::from_pagerank(g, &pr, z1, z2)
    }

    pub fn from_pagerank(
        g: &HeteroGraph,
        pr: &BTreeMap<NodeId, f64>,
        z1: usize,
        z2: usize,
    ) -> Self {
        let mut scores = vec![0.0; g.num_nodes()];
        for (&u, &s) in pr {
            scores[u.index()] = s;
        }
        let mut t = InfluenceTable {
            scores,
            z1: z1.max(1),
            z2: z2.max(1),
        };
        for m in g.messages() {
            t.scores[m.index()] = t.message_score(g, m);
        }
        t
    }

    /// Evaluates a message's score against the current graph.
    pub fn message_score(&self, g: &HeteroGraph, m: NodeId) -> f64 {
        let users = g.neighbors(m, Relation::UserMessage);
        if users.is_empty() {
            return 0.0;
        }
        let best = users
            .iter()
            .map(|u| self.scores[u.index()])
            .fold(f64::NEG_INFINITY, f64::max);
        best + (users.len() - 1) as f64 / self.z1 as f64
            + g.neighbors(m, Relation::MessageComment).len() as f64 / self.z2 as f64
    }

    /// Recomputes one message after its neighborhood changed.
    pub fn refresh_message(&mut self, g: &HeteroGraph, m: NodeId) {
        self.scores[m.index()] = self.message_score(g, m);
    }

    /// Influence of any node; zero for comments.
    pub fn score(&self, v: NodeId) -> f64 {
        self.scores[v.index()]
    }
}
