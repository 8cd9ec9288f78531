//! The rumor detector under attack.
//!
//! [`Detector`] is the only handle the attack side receives: it answers
//! probability and ranking queries but does not expose its weights.

mod encoding;
mod rgcn;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ComponentId, HeteroGraph, InfluenceTable, NodeId};
use crate::objective::{self, IndicatorMode, ObjectiveError, TargetSet};

pub use encoding::{encode_nodes, DegreeBounds, ENCODING_DIM};
pub use rgcn::{train, ForwardPass, Gradients, LocalGraph, Optimizer, RgcnLayer, RgcnModel, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("no labeled messages")]
    NoLabels,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("label on non-message node {0}")]
    LabelOnNonMessage(NodeId),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Per-message suspiciousness and rank at one point in time.
///
/// Rank 1 is the most suspicious message; ties go to the smaller id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingSnapshot {
    probs: Vec<f64>,
    ranks: Vec<usize>,
    order: Vec<NodeId>,
    pub step: usize,
}

impl RankingSnapshot {
    /// `num_nodes` sizes the lookup tables; only listed ids are ranked.
    pub fn from_probabilities(num_nodes: usize, probs: &[(NodeId, f64)], step: usize) -> Self {
        let mut table = vec![0.0; num_nodes];
        for &(v, p) in probs {
            table[v.index()] = p;
        }
        let mut snap = RankingSnapshot {
            probs: table,
            ranks: vec![0; num_nodes],
            order: probs.iter().map(|(v, _)| *v).collect(),
            step,
        };
        snap.rerank();
        snap
    }

    fn rerank(&mut self) {
        let probs = &self.probs;
        self.order.sort_by(|a, b| {
            probs[b.index()]
                .total_cmp(&probs[a.index()])
                .then_with(|| a.cmp(b))
        });
        for (i, v) in self.order.iter().enumerate() {
            self.ranks[v.index()] = i + 1;
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn rank(&self, v: NodeId) -> Option<usize> {
        match self.ranks.get(v.index()) {
            Some(&r) if r > 0 => Some(r),
            _ => None,
        }
    }

    pub fn prob(&self, v: NodeId) -> Option<f64> {
        self.rank(v).map(|_| self.probs[v.index()])
    }

    /// Ranked ids, most suspicious first.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub accuracy: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// A trained, frozen detector.
#[derive(Debug, Clone)]
pub struct Detector {
    model: RgcnModel,
    bounds: DegreeBounds,
}

const CHECKPOINT_FORMAT: &str = "rumorlab-rgcn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl MatrixRecord {
    fn of(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        MatrixRecord {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn into_matrix(self) -> Result<nalgebra::DMatrix<f64>, DetectorError> {
        if self.data.len() != self.rows * self.cols {
            return Err(DetectorError::Checkpoint(format!(
                "matrix {}x{} carries {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    relation: [MatrixRecord; 3],
    self_loop: MatrixRecord,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    degree_bounds: DegreeBounds,
    layers: Vec<LayerRecord>,
    head: Vec<f64>,
    head_bias: f64,
}

impl Detector {
    pub fn new(model: RgcnModel, bounds: DegreeBounds) -> Result<Self, DetectorError> {
        model.check_shapes()?;
        if model.input_dim() != ENCODING_DIM {
            return Err(DetectorError::Shape(format!(
                "model input width {} != encoding width {ENCODING_DIM}",
                model.input_dim()
            )));
        }
        Ok(Detector { model, bounds })
    }

    /// Trains a fresh model on `labels` (message id, is_rumor) over the
    /// whole graph. Degree bounds are fitted on `g`.
    pub fn train(
        g: &HeteroGraph,
        labels: &[(NodeId, bool)],
        cfg: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), DetectorError> {
        cfg.validate()?;
        if labels.is_empty() {
            return Err(DetectorError::NoLabels);
        }
        for &(v, _) in labels {
            if !g.kind(v).is_message() {
                return Err(DetectorError::LabelOnNonMessage(v));
            }
        }
        let bounds = DegreeBounds::fit(g);
        let local = LocalGraph::whole(g);
        let x = encode_nodes(g, &bounds, &local.nodes);
        let idx: Vec<(usize, bool)> = labels.iter().map(|&(v, y)| (v.index(), y)).collect();
        let mut model = RgcnModel::new(ENCODING_DIM, cfg.hidden_dim, cfg.layers, cfg.seed);
        let history = train(&mut model, &local, &x, &idx, cfg)?;
        Ok((Detector { model, bounds }, history))
    }

    fn message_probabilities(&self, g: &HeteroGraph, nodes: Vec<NodeId>) -> Result<Vec<(NodeId, f64)>, DetectorError> {
        let local = LocalGraph::over(g, nodes);
        let x = encode_nodes(g, &self.bounds, &local.nodes);
        let p = self.model.probabilities(&local, &x)?;
        Ok(local
            .nodes
            .iter()
            .zip(p)
            .filter(|(v, _)| g.kind(**v).is_message())
            .map(|(v, p)| (*v, p))
            .collect())
    }

    /// Probabilities for every message.
    pub fn probabilities(&self, g: &HeteroGraph) -> Result<Vec<(NodeId, f64)>, DetectorError> {
        self.message_probabilities(g, g.node_ids().collect())
    }

    pub fn snapshot(&self, g: &HeteroGraph) -> Result<RankingSnapshot, DetectorError> {
        let probs = self.probabilities(g)?;
        Ok(RankingSnapshot::from_probabilities(g.num_nodes(), &probs, 0))
    }

    /// Re-scores one component in place and re-ranks. Components evolve
    /// independently, so this equals a full [`Detector::snapshot`] whenever
    /// only that component changed.
    pub fn refresh_component(
        &self,
        g: &HeteroGraph,
        snap: &mut RankingSnapshot,
        component: ComponentId,
    ) -> Result<(), DetectorError> {
        let probs = self.message_probabilities(g, g.members(component).to_vec())?;
        for (v, p) in probs {
            snap.probs[v.index()] = p;
        }
        snap.rerank();
        Ok(())
    }

    /// Accuracy and recall at threshold 0.5 over `labels`; NDCG with every
    /// labeled rumor as a target weighted by `influence`.
    pub fn evaluate(
        &self,
        g: &HeteroGraph,
        labels: &[(NodeId, bool)],
        influence: &InfluenceTable,
        cutoff: usize,
    ) -> Result<DetectorMetrics, DetectorError> {
        if labels.is_empty() {
            return Err(DetectorError::EmptySplit);
        }
        let snap = self.snapshot(g)?;
        let (mut correct, mut tp, mut pos) = (0usize, 0usize, 0usize);
        for &(v, y) in labels {
            let p = snap.prob(v).ok_or(DetectorError::LabelOnNonMessage(v))?;
            let pred = p >= 0.5;
            correct += (pred == y) as usize;
            if y {
                pos += 1;
                tp += pred as usize;
            }
        }
        let rumors: Vec<(NodeId, f64)> = labels
            .iter()
            .filter(|(_, y)| *y)
            .map(|&(v, _)| (v, influence.score(v)))
            .collect();
        let ndcg = if rumors.is_empty() {
            0.0
        } else {
            let targets = TargetSet::new(rumors, cutoff, IndicatorMode::WithinCutoff)?;
            objective::ndcg(&targets, &snap)?
        };
        Ok(DetectorMetrics {
            accuracy: correct as f64 / labels.len() as f64,
            recall: if pos == 0 { 0.0 } else { tp as f64 / pos as f64 },
            ndcg,
        })
    }

    pub fn degree_bounds(&self) -> DegreeBounds {
        self.bounds
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_dim: self.model.input_dim(),
            hidden_dim: self.model.hidden_dim(),
            degree_bounds: self.bounds,
            layers: self
                .model
                .layers
                .iter()
                .map(|l| LayerRecord {
                    relation: [
                        MatrixRecord::of(&l.relation[0]),
                        MatrixRecord::of(&l.relation[1]),
                        MatrixRecord::of(&l.relation[2]),
                    ],
                    self_loop: MatrixRecord::of(&l.self_loop),
                })
                .collect(),
            head: self.model.head.iter().copied().collect(),
            head_bias: self.model.head_bias,
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DetectorError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| DetectorError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(DetectorError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let mut layers = Vec::with_capacity(ck.layers.len());
        for l in ck.layers {
            let [a, b, c] = l.relation;
            layers.push(RgcnLayer {
                relation: [a.into_matrix()?, b.into_matrix()?, c.into_matrix()?],
                self_loop: l.self_loop.into_matrix()?,
            });
        }
        let model = RgcnModel {
            layers,
            head: nalgebra::DVector::from_vec(ck.head),
            head_bias: ck.head_bias,
        };
        if model.input_dim() != ck.input_dim || model.hidden_dim() != ck.hidden_dim {
            return Err(DetectorError::Checkpoint("declared shapes disagree with weights".into()));
        }
        Detector::new(model, ck.degree_bounds)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        let text = std::fs::read_to_string(path).map_err(|e| DetectorError::Checkpoint(e.to_string()))?;
        Self::from_json(&text)
    }

    /// Bitwise parameter comparison, for checkpoint tests.
    pub fn same_weights(&self, other: &Detector) -> bool {
        let a = self.model.flatten();
        let b = other.model.flatten();
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
            && self.bounds == other.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, Relation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_probabilities_rank_by_id() {
        let probs: Vec<_> = [5u32, 2, 9].iter().map(|&i| (NodeId(i), 0.3)).collect();
        let s = RankingSnapshot::from_probabilities(10, &probs, 0);
        assert_eq!(s.order(), &[NodeId(2), NodeId(5), NodeId(9)]);
        assert_eq!(s.rank(NodeId(2)), Some(1));
        assert_eq!(s.rank(NodeId(0)), None);
    }

    #[test]
    fn ranks_follow_probabilities() {
        let probs = [(NodeId(7), 0.9), (NodeId(8), 0.1), (NodeId(9), 0.5)];
        let s = RankingSnapshot::from_probabilities(10, &probs, 0);
        assert_eq!(
            [7, 8, 9].map(|i| s.rank(NodeId(i)).unwrap()),
            [1, 3, 2]
        );
    }

    #[test]
    fn ranks_match_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs: Vec<(NodeId, f64)> = (0..100u32)
            .map(|i| (NodeId(i), (rng.gen_range(0..20) as f64) / 20.0))
            .collect();
        let s = RankingSnapshot::from_probabilities(100, &probs, 0);
        // oracle: count strictly greater, plus equal with smaller id
        for &(v, p) in &probs {
            let ahead = probs
                .iter()
                .filter(|&&(w, q)| q > p || (q == p && w < v))
                .count();
            assert_eq!(s.rank(v), Some(ahead + 1));
        }
        let mut seen: Vec<_> = probs.iter().map(|(v, _)| s.rank(*v).unwrap()).collect();
        seen.sort();
        assert_eq!(seen, (1..=100).collect::<Vec<_>>());
    }

    fn two_cascades() -> HeteroGraph {
        HeteroGraph::build(
            &[
                (NodeId(0), NodeKind::User { is_author: true }),
                (NodeId(1), NodeKind::Message { is_rumor: Some(true) }),
                (NodeId(2), NodeKind::User { is_author: false }),
                (NodeId(3), NodeKind::User { is_author: true }),
                (NodeId(4), NodeKind::Message { is_rumor: Some(false) }),
                (NodeId(5), NodeKind::Comment),
            ],
            &[
                (NodeId(0), NodeId(1), Relation::UserMessage),
                (NodeId(2), NodeId(1), Relation::UserMessage),
                (NodeId(0), NodeId(2), Relation::UserUser),
                (NodeId(3), NodeId(4), Relation::UserMessage),
                (NodeId(4), NodeId(5), Relation::MessageComment),
            ],
        )
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 40,
            hidden_dim: 8,
            layers: 2,
            seed: 4,
            optimizer: Optimizer::adam(),
        }
    }

    #[test]
    fn component_refresh_equals_full_snapshot() {
        let mut g = two_cascades();
        let (det, _) = Detector::train(&g, &[(NodeId(1), true), (NodeId(4), false)], &small_cfg()).unwrap();
        let mut snap = det.snapshot(&g).unwrap();
        g.add_attack_edge(NodeId(3), NodeId(1)).unwrap();
        det.refresh_component(&g, &mut snap, g.component_of(NodeId(1))).unwrap();
        let full = det.snapshot(&g).unwrap();
        assert_eq!(snap, full);
    }

    #[test]
    fn forward_is_deterministic() {
        let g = two_cascades();
        let (det, _) = Detector::train(&g, &[(NodeId(1), true)], &small_cfg()).unwrap();
        let a = det.probabilities(&g).unwrap();
        let b = det.probabilities(&g).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.1.to_bits() == y.1.to_bits()));
    }

    #[test]
    fn training_fits_a_separable_toy() {
        let g = two_cascades();
        let labels = [(NodeId(1), true), (NodeId(4), false)];
        let (det, hist) = Detector::train(&g, &labels, &small_cfg()).unwrap();
        assert!(hist.last().unwrap() < hist.first().unwrap());
        let inf = InfluenceTable::compute(&g, &Default::default());
        let m = det.evaluate(&g, &labels, &inf, 1).unwrap();
        assert_eq!((m.accuracy, m.recall), (1.0, 1.0));
        assert!((m.ndcg - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_nonrumor_predictions_have_zero_recall() {
        let g = two_cascades();
        let mut model = RgcnModel::new(ENCODING_DIM, 4, 1, 0).zeros_like();
        model.head_bias = -5.0;
        let det = Detector::new(model, DegreeBounds::fit(&g)).unwrap();
        let inf = InfluenceTable::compute(&g, &Default::default());
        let m = det
            .evaluate(&g, &[(NodeId(1), true), (NodeId(4), false)], &inf, 1)
            .unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(det.evaluate(&g, &[], &inf, 1).unwrap_err(), DetectorError::EmptySplit);
    }

    #[test]
    fn labels_must_sit_on_messages() {
        let g = two_cascades();
        assert_eq!(
            Detector::train(&g, &[(NodeId(0), true)], &small_cfg()).unwrap_err(),
            DetectorError::LabelOnNonMessage(NodeId(0))
        );
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let g = two_cascades();
        let (det, _) = Detector::train(&g, &[(NodeId(1), true), (NodeId(4), false)], &small_cfg()).unwrap();
        let back = Detector::from_json(&det.to_json()).unwrap();
        assert!(det.same_weights(&back));
        assert!(Detector::from_json("{\"format\":\"x\"}").is_err());
    }
}
