use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::graph::{HeteroGraph, NodeId, NodeKind};

/// Label-free structural input features: one-hot kind (message, author,
/// retweeter, comment) followed by the min–max scaled degree.
pub const ENCODING_DIM: usize = 5;

/// Degree range used to scale the degree slot. Fixed on the clean graph;
/// degrees outside it clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeBounds {
    pub min: f64,
    pub max: f64,
}

impl DegreeBounds {
    pub fn fit(g: &HeteroGraph) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in g.node_ids() {
            let d = g.degree(v) as f64;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if !lo.is_finite() {
            return DegreeBounds { min: 0.0, max: 0.0 };
        }
        DegreeBounds { min: lo, max: hi }
    }

    pub fn scale(&self, degree: usize) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.0;
        }
        ((degree as f64 - self.min) / span).clamp(0.0, 1.0)
    }
}

fn kind_slot(kind: NodeKind) -> usize {
    match kind {
        NodeKind::Message { .. } => 0,
        NodeKind::User { is_author: true } => 1,
        NodeKind::User { is_author: false } => 2,
        NodeKind::Comment => 3,
    }
}

/// Input rows for `nodes`, in the given order.
pub fn encode_nodes(g: &HeteroGraph, bounds: &DegreeBounds, nodes: &[NodeId]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(nodes.len(), ENCODING_DIM);
    for (row, &v) in nodes.iter().enumerate() {
        x[(row, kind_slot(g.kind(v)))] = 1.0;
        x[(row, 4)] = bounds.scale(g.degree(v));
    }
    x
}
