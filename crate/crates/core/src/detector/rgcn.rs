//! Relational GCN with hand-written backpropagation.
//!
//! Layer update for node `i`:
//!
//! ```text
//! h_i' = ReLU( Σ_l Σ_{j ∈ N_i^l} W_l h_j / |N_i^l|  +  W_0 h_i )
//! ```
//!
//! followed by a linear unit and a sigmoid on message nodes. Weight matrices
//! are stored as `in × out` so that a batch of row vectors `H` maps to
//! `H · W`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::graph::{HeteroGraph, NodeId, Relation};

/// Adjacency of a node subset closed under neighborhood, in local indices.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub nodes: Vec<NodeId>,
    adj: [Vec<Vec<usize>>; 3],
}

impl LocalGraph {
    pub fn whole(g: &HeteroGraph) -> Self {
        let nodes: Vec<NodeId> = g.node_ids().collect();
        Self::over(g, nodes)
    }

    /// `nodes` must contain every neighbor of its members (e.g. a union of
    /// components).
    pub fn over(g: &HeteroGraph, nodes: Vec<NodeId>) -> Self {
        let mut local = std::collections::HashMap::with_capacity(nodes.len());
        for (i, v) in nodes.iter().enumerate() {
            local.insert(*v, i);
        }
        let adj = Relation::ALL.map(|r| {
            nodes
                .iter()
                .map(|&v| g.neighbors(v, r).iter().map(|w| local[w]).collect())
                .collect()
        });
        LocalGraph { nodes, adj }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Row-wise mean of `h` over each node's neighbors under `r`.
    fn mean_aggregate(&self, r: usize, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(h.nrows(), h.ncols());
        for (i, nbrs) in self.adj[r].iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let inv = 1.0 / nbrs.len() as f64;
            for &j in nbrs {
                for c in 0..h.ncols() {
                    out[(i, c)] += h[(j, c)] * inv;
                }
            }
        }
        out
    }

    /// Transpose of `mean_aggregate`: scatters each row's gradient back to
    /// its neighbors.
    fn mean_scatter(&self, r: usize, g: &DMatrix<f64>, into: &mut DMatrix<f64>) {
        for (i, nbrs) in self.adj[r].iter().enumerate() {
            if nbrs.is_empty() {
                continue;
            }
            let inv = 1.0 / nbrs.len() as f64;
            for &j in nbrs {
                for c in 0..g.ncols() {
                    into[(j, c)] += g[(i, c)] * inv;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgcnLayer {
    pub relation: [DMatrix<f64>; 3],
    pub self_loop: DMatrix<f64>,
}

impl RgcnLayer {
    fn zeros(input: usize, output: usize) -> Self {
        RgcnLayer {
            relation: [
                DMatrix::zeros(input, output),
                DMatrix::zeros(input, output),
                DMatrix::zeros(input, output),
            ],
            self_loop: DMatrix::zeros(input, output),
        }
    }

    fn matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.relation.iter().chain(std::iter::once(&self.self_loop))
    }

    fn matrices_mut(&mut self) -> impl Iterator<Item = &mut DMatrix<f64>> {
        self.relation
            .iter_mut()
            .chain(std::iter::once(&mut self.self_loop))
    }
}

/// Stacked R-GCN layers with a sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct RgcnModel {
    pub layers: Vec<RgcnLayer>,
    pub head: DVector<f64>,
    pub head_bias: f64,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Layer inputs; `inputs[k]` feeds layer `k`, the last entry is the final
    /// hidden state.
    pub inputs: Vec<DMatrix<f64>>,
    aggregates: Vec<[DMatrix<f64>; 3]>,
    pre_activations: Vec<DMatrix<f64>>,
    pub logits: DVector<f64>,
}

impl ForwardPass {
    /// Which hidden pre-activations are positive. Central differences are
    /// only meaningful while this pattern is unchanged.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre_activations
            .iter()
            .flat_map(|z| z.iter().map(|v| *v > 0.0).collect::<Vec<_>>())
            .collect()
    }
}

/// Gradients in the same layout as the model.
pub type Gradients = RgcnModel;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl RgcnModel {
    /// Glorot-uniform initialization.
    pub fn new(input_dim: usize, hidden_dim: usize, num_layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let s = (6.0 / (rows + cols) as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-s..=s))
        };
        let mut layers = Vec::with_capacity(num_layers);
        for k in 0..num_layers {
            let input = if k == 0 { input_dim } else { hidden_dim };
            layers.push(RgcnLayer {
                relation: [
                    glorot(input, hidden_dim),
                    glorot(input, hidden_dim),
                    glorot(input, hidden_dim),
                ],
                self_loop: glorot(input, hidden_dim),
            });
        }
        let last = if num_layers == 0 { input_dim } else { hidden_dim };
        let head = glorot(last, 1).column(0).into_owned();
        RgcnModel {
            layers,
            head,
            head_bias: 0.0,
        }
    }

    /// A model of the same shape with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        RgcnModel {
            layers: self
                .layers
                .iter()
                .map(|l| RgcnLayer::zeros(l.self_loop.nrows(), l.self_loop.ncols()))
                .collect(),
            head: DVector::zeros(self.head.len()),
            head_bias: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.self_loop.nrows())
            .unwrap_or(self.head.len())
    }

    pub fn hidden_dim(&self) -> usize {
        self.head.len()
    }

    /// Shapes must chain: each layer's input width equals the previous output.
    pub fn check_shapes(&self) -> Result<(), DetectorError> {
        let mut width = self.input_dim();
        for (k, layer) in self.layers.iter().enumerate() {
            for m in layer.matrices() {
                if m.nrows() != width || m.ncols() != layer.self_loop.ncols() {
                    return Err(DetectorError::Shape(format!(
                        "layer {k}: matrix {}x{} does not chain from width {width}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
            width = layer.self_loop.ncols();
        }
        if self.head.len() != width {
            return Err(DetectorError::Shape(format!(
                "head expects width {}, last layer gives {width}",
                self.head.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, graph: &LocalGraph, x: &DMatrix<f64>) -> Result<ForwardPass, DetectorError> {
        if x.ncols() != self.input_dim() || x.nrows() != graph.len() {
            return Err(DetectorError::Shape(format!(
                "encoding is {}x{}, model expects {}x{}",
                x.nrows(),
                x.ncols(),
                graph.len(),
                self.input_dim()
            )));
        }
        let mut inputs = vec![x.clone()];
        let mut aggregates = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let h = inputs.last().expect("non-empty");
            let aggs = [0, 1, 2].map(|r| graph.mean_aggregate(r, h));
            let mut z = h * &layer.self_loop;
            for r in 0..3 {
                z += &aggs[r] * &layer.relation[r];
            }
            let next = z.map(|v| v.max(0.0));
            aggregates.push(aggs);
            pre_activations.push(z);
            inputs.push(next);
        }
        let hk = inputs.last().expect("non-empty");
        let logits = hk * &self.head + DVector::from_element(hk.nrows(), self.head_bias);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite("forward logits".into()));
        }
        Ok(ForwardPass {
            inputs,
            aggregates,
            pre_activations,
            logits,
        })
    }

    /// Probabilities for every local node (only message rows are meaningful).
    pub fn probabilities(&self, graph: &LocalGraph, x: &DMatrix<f64>) -> Result<Vec<f64>, DetectorError> {
        Ok(self.forward(graph, x)?.logits.iter().map(|&z| sigmoid(z)).collect())
    }

    /// Mean binary cross-entropy over `(local index, is_rumor)` pairs.
    pub fn loss(&self, graph: &LocalGraph, x: &DMatrix<f64>, labels: &[(usize, bool)]) -> Result<f64, DetectorError> {
        let pass = self.forward(graph, x)?;
        Ok(bce(&pass.logits, labels))
    }

    /// Loss and analytic gradients.
    pub fn loss_and_gradients(
        &self,
        graph: &LocalGraph,
        x: &DMatrix<f64>,
        labels: &[(usize, bool)],
    ) -> Result<(f64, Gradients), DetectorError> {
        if labels.is_empty() {
            return Err(DetectorError::NoLabels);
        }
        let pass = self.forward(graph, x)?;
        let loss = bce(&pass.logits, labels);
        let n = labels.len() as f64;
        let mut dlogit = DVector::zeros(graph.len());
        for &(i, y) in labels {
            dlogit[i] += (sigmoid(pass.logits[i]) - if y { 1.0 } else { 0.0 }) / n;
        }
        let mut grads = self.zeros_like();
        let hk = pass.inputs.last().expect("non-empty");
        grads.head = hk.transpose() * &dlogit;
        grads.head_bias = dlogit.sum();
        // dL/dH_K = dlogit ⊗ head
        let mut dh = &dlogit * self.head.transpose();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let z = &pass.pre_activations[k];
            let dz = dh.zip_map(z, |g, zv| if zv > 0.0 { g } else { 0.0 });
            let h = &pass.inputs[k];
            let gl = &mut grads.layers[k];
            gl.self_loop = h.transpose() * &dz;
            let mut dh_prev = &dz * layer.self_loop.transpose();
            for r in 0..3 {
                gl.relation[r] = pass.aggregates[k][r].transpose() * &dz;
                let through = &dz * layer.relation[r].transpose();
                graph.mean_scatter(r, &through, &mut dh_prev);
            }
            dh = dh_prev;
        }
        Ok((loss, grads))
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.matrices())
            .map(|m| m.len())
            .sum::<usize>()
            + self.head.len()
            + 1
    }

    /// All parameters in a fixed order: per layer the three relation
    /// matrices then the self-loop (column-major), then head, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            for m in l.matrices() {
                out.extend_from_slice(m.as_slice());
            }
        }
        out.extend_from_slice(self.head.as_slice());
        out.push(self.head_bias);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_parameters(), "parameter count");
        let mut pos = 0;
        for l in &mut self.layers {
            for m in l.matrices_mut() {
                let len = m.len();
                m.as_mut_slice().copy_from_slice(&flat[pos..pos + len]);
                pos += len;
            }
        }
        let len = self.head.len();
        self.head.as_mut_slice().copy_from_slice(&flat[pos..pos + len]);
        self.head_bias = flat[pos + len];
    }
}

fn bce(logits: &DVector<f64>, labels: &[(usize, bool)]) -> f64 {
    let total: f64 = labels
        .iter()
        .map(|&(i, y)| {
            let z = logits[i];
            // -log σ(z) = softplus(-z), -log(1-σ(z)) = softplus(z)
            if y {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    /// Plain full-batch gradient descent.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            hidden_dim: 64,
            layers: 3,
            seed: 0,
            optimizer: Optimizer::adam(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(DetectorError::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_dim == 0 {
            return Err(DetectorError::Config("hidden dimension must be positive".into()));
        }
        Ok(())
    }
}

/// Full-batch training. Returns the loss before each epoch.
pub fn train(
    model: &mut RgcnModel,
    graph: &LocalGraph,
    x: &DMatrix<f64>,
    labels: &[(usize, bool)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, DetectorError> {
    cfg.validate()?;
    if labels.is_empty() {
        return Err(DetectorError::NoLabels);
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut params = model.flatten();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    for epoch in 0..cfg.epochs {
        let (loss, grads) = model.loss_and_gradients(graph, x, labels)?;
        if !loss.is_finite() {
            return Err(DetectorError::NonFinite(format!("loss at epoch {epoch}")));
        }
        history.push(loss);
        let g = grads.flatten();
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, gi) in params.iter_mut().zip(&g) {
                    *p -= cfg.learning_rate * gi;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (epoch + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for i in 0..params.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let step = (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    params[i] -= cfg.learning_rate * step;
                }
            }
        }
        model.assign(&params);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;

    fn tiny_graph() -> HeteroGraph {
        // user 0 -- message 1 -- comment 2
        HeteroGraph::build(
            &[
                (NodeId(0), NodeKind::User { is_author: true }),
                (NodeId(1), NodeKind::Message { is_rumor: Some(true) }),
                (NodeId(2), NodeKind::Comment),
            ],
            &[
                (NodeId(0), NodeId(1), Relation::UserMessage),
                (NodeId(1), NodeId(2), Relation::MessageComment),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_half() {
        let g = tiny_graph();
        let lg = LocalGraph::whole(&g);
        let model = RgcnModel::new(2, 2, 2, 0).zeros_like();
        let x = DMatrix::from_element(3, 2, 1.0);
        let p = model.probabilities(&lg, &x).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn hand_weights_match_explicit_arithmetic() {
        let g = tiny_graph();
        let lg = LocalGraph::whole(&g);
        let mut model = RgcnModel::new(2, 2, 1, 0).zeros_like();
        // W as in x out
        let w1 = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.25, 2.0]);
        let w2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 1.0]);
        let w0 = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, -0.4]);
        model.layers[0].relation[0] = w1.clone();
        model.layers[0].relation[1] = w2.clone();
        model.layers[0].self_loop = w0.clone();
        model.head = DVector::from_vec(vec![1.5, -0.7]);
        model.head_bias = 0.1;
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 0.6, -0.2, 0.9]);

        // explicit evaluation for message node 1: neighbors 0 (l1) and 2 (l2)
        let row = |i: usize| [x[(i, 0)], x[(i, 1)]];
        let mv = |h: [f64; 2], w: &DMatrix<f64>| {
            [
                h[0] * w[(0, 0)] + h[1] * w[(1, 0)],
                h[0] * w[(0, 1)] + h[1] * w[(1, 1)],
            ]
        };
        let a = mv(row(0), &w1);
        let b = mv(row(2), &w2);
        let c = mv(row(1), &w0);
        let h = [(a[0] + b[0] + c[0]).max(0.0), (a[1] + b[1] + c[1]).max(0.0)];
        let logit = 1.5 * h[0] - 0.7 * h[1] + 0.1;
        let want = 1.0 / (1.0 + (-logit).exp());

        let got = model.probabilities(&lg, &x).unwrap()[1];
        assert!((got - want).abs() < 1e-10);

        // isolated-style check: node 0 has only an l1 neighbor, node 2 only l2
        let a0 = mv(row(1), &w1);
        let c0 = mv(row(0), &w0);
        let h0 = [(a0[0] + c0[0]).max(0.0), (a0[1] + c0[1]).max(0.0)];
        let want0 = 1.0 / (1.0 + (-(1.5 * h0[0] - 0.7 * h0[1] + 0.1)).exp());
        assert!((model.probabilities(&lg, &x).unwrap()[0] - want0).abs() < 1e-10);
    }

    #[test]
    fn isolated_node_uses_self_weights_only() {
        let g = HeteroGraph::build(&[(NodeId(0), NodeKind::Message { is_rumor: None })], &[]).unwrap();
        let lg = LocalGraph::whole(&g);
        let mut model = RgcnModel::new(1, 1, 1, 3);
        let x = DMatrix::from_element(1, 1, 2.0);
        let p = model.probabilities(&lg, &x).unwrap()[0];
        model.layers[0].relation = [
            DMatrix::from_element(1, 1, 9.0),
            DMatrix::from_element(1, 1, -9.0),
            DMatrix::from_element(1, 1, 4.0),
        ];
        assert_eq!(model.probabilities(&lg, &x).unwrap()[0], p);
    }

    #[test]
    fn duplicated_neighbors_leave_mean_unchanged() {
        // message with two identical-feature users vs one user
        let g1 = HeteroGraph::build(
            &[
                (NodeId(0), NodeKind::Message { is_rumor: None }),
                (NodeId(1), NodeKind::User { is_author: true }),
            ],
            &[(NodeId(0), NodeId(1), Relation::UserMessage)],
        )
        .unwrap();
        let g2 = HeteroGraph::build(
            &[
                (NodeId(0), NodeKind::Message { is_rumor: None }),
                (NodeId(1), NodeKind::User { is_author: true }),
                (NodeId(2), NodeKind::User { is_author: true }),
            ],
            &[
                (NodeId(0), NodeId(1), Relation::UserMessage),
                (NodeId(0), NodeId(2), Relation::UserMessage),
            ],
        )
        .unwrap();
        let model = RgcnModel::new(2, 3, 1, 9);
        let x1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x2 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let p1 = model.probabilities(&LocalGraph::whole(&g1), &x1).unwrap()[0];
        let p2 = model.probabilities(&LocalGraph::whole(&g2), &x2).unwrap()[0];
        assert!((p1 - p2).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let g = tiny_graph();
        let lg = LocalGraph::whole(&g);
        let mut model = RgcnModel::new(2, 3, 2, 1);
        let before = model.clone();
        let x = DMatrix::from_element(3, 2, 0.5);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 5,
            hidden_dim: 3,
            layers: 2,
            seed: 1,
            optimizer: Optimizer::Sgd,
        };
        train(&mut model, &lg, &x, &[(1, true)], &cfg).unwrap();
        assert_eq!(model, before);
        assert_eq!(
            train(&mut model, &lg, &x, &[], &cfg).unwrap_err(),
            DetectorError::NoLabels
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = tiny_graph();
        let lg = LocalGraph::whole(&g);
        let model = RgcnModel::new(4, 3, 2, 1);
        let x = DMatrix::from_element(3, 2, 0.5);
        assert!(matches!(model.forward(&lg, &x), Err(DetectorError::Shape(_))));
        let mut bad = model.clone();
        bad.layers[1].relation[2] = DMatrix::zeros(2, 3);
        assert!(bad.check_shapes().is_err());
        assert!(model.check_shapes().is_ok());
    }

    #[test]
    fn flatten_assign_roundtrip() {
        let mut m = RgcnModel::new(3, 4, 2, 7);
        let flat = m.flatten();
        assert_eq!(flat.len(), m.num_parameters());
        let copy = m.clone();
        m.assign(&flat);
        assert_eq!(m, copy);
    }

    #[test]
    fn gradients_match_central_differences() {
        use rand::{Rng, SeedableRng};
        // author 0 and retweeter 2 on message 1, comment 3, plus a user link
        let g = HeteroGraph::build(
            &[
                (NodeId(0), NodeKind::User { is_author: true }),
                (NodeId(1), NodeKind::Message { is_rumor: Some(true) }),
                (NodeId(2), NodeKind::User { is_author: false }),
                (NodeId(3), NodeKind::Comment),
            ],
            &[
                (NodeId(0), NodeId(1), Relation::UserMessage),
                (NodeId(2), NodeId(1), Relation::UserMessage),
                (NodeId(0), NodeId(2), Relation::UserUser),
                (NodeId(1), NodeId(3), Relation::MessageComment),
            ],
        )
        .unwrap();
        let lg = LocalGraph::whole(&g);
        let labels = [(1, true), (3, false)];
        let h = 1e-5;
        let mut checked = 0;
        for seed in 0..6u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let x = DMatrix::from_fn(4, 3, |_, _| rng.gen_range(0.0..1.0));
            let model = RgcnModel::new(3, 3, 2, seed);
            let (_, grads) = model.loss_and_gradients(&lg, &x, &labels).unwrap();
            let analytic = grads.flatten();
            let base = model.flatten();
            let pattern = model.forward(&lg, &x).unwrap().activation_pattern();
            let mut probe = model.clone();
            for i in 0..base.len() {
                let mut at = |delta: f64| {
                    let mut p = base.clone();
                    p[i] += delta;
                    probe.assign(&p);
                    let pass = probe.forward(&lg, &x).unwrap();
                    (bce(&pass.logits, &labels), pass.activation_pattern() == pattern)
                };
                let (up, same_up) = at(h);
                let (down, same_down) = at(-h);
                if !(same_up && same_down) {
                    continue;
                }
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} param {i}: {a} vs {numeric}");
                checked += 1;
            }
        }
        assert!(checked > 100);
    }
}
