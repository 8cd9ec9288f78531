//! The episodic edge-addition attack against a frozen detector.

mod episode;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::BanditError;
use crate::detector::{Detector, DetectorError, RankingSnapshot};
use crate::features::{AttackLog, FeatureBounds, FeatureContext, FeatureVector, RoleConfig, Roles, K_HOPS};
use crate::graph::{pagerank, AttackEdgeMode, ComponentId, GraphError, HeteroGraph, InfluenceTable, NodeId, PageRankConfig};
use crate::objective::{self, default_cutoff, IndicatorMode, ObjectiveError, TargetSet};

pub use episode::{run_episode, Agent, EpisodeTrace, StepRecord};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("no target rumors in the controllable set")]
    NoTargets,
    #[error("no controllable users")]
    NoControllableUsers,
    #[error("no subgraph pair holds both a target and a controllable node")]
    EmptyActionSpace,
    #[error("horizon of {0} steps exhausted")]
    HorizonExhausted(usize),
    #[error("edge {0}–{1} is not an admissible attack edge")]
    Unrealizable(NodeId, NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: usize,
    /// Objective cutoff; a tenth of the ranked messages when absent.
    pub cutoff: Option<usize>,
    pub indicator: IndicatorMode,
    /// Largest candidate list scored per level before uniform subsampling.
    pub action_cap: usize,
    pub edge_mode: AttackEdgeMode,
    pub roles: RoleConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon: 20,
            cutoff: None,
            indicator: IndicatorMode::WithinCutoff,
            action_cap: 5000,
            edge_mode: AttackEdgeMode::Single,
            roles: RoleConfig::default(),
        }
    }
}

/// Graph plus the attacker's resources.
#[derive(Debug, Clone)]
pub struct AttackSetup {
    pub graph: HeteroGraph,
    /// Controllable users and messages.
    pub controllable: Vec<NodeId>,
    pub targets: Vec<NodeId>,
    /// (message, author) pairs.
    pub authorship: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubgraphAction {
    /// Component holding a target.
    pub gi: ComponentId,
    /// Component holding a controllable node.
    pub gj: ComponentId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeAction {
    pub vp: NodeId,
    pub vq: NodeId,
}

pub struct AttackEnv {
    cfg: EnvConfig,
    clean: HeteroGraph,
    graph: HeteroGraph,
    detector: Arc<Detector>,
    clean_influence: InfluenceTable,
    influence: InfluenceTable,
    controllable: Vec<bool>,
    ctrl_users: Vec<NodeId>,
    ctrl_messages: Vec<NodeId>,
    targets: TargetSet,
    roles: Roles,
    author_of: Vec<Option<NodeId>>,
    attack: AttackLog,
    bounds: FeatureBounds,
    clean_snapshot: RankingSnapshot,
    snapshot: RankingSnapshot,
    j0: f64,
    j: f64,
    t: usize,
}

impl AttackEnv {
    pub fn new(setup: AttackSetup, detector: Arc<Detector>, cfg: EnvConfig) -> Result<Self, EnvError> {
        let g = setup.graph;
        let n = g.num_nodes();
        let mut controllable = vec![false; n];
        for &v in &setup.controllable {
            g.try_kind(v)?;
            controllable[v.index()] = true;
        }
        let ctrl_users: Vec<NodeId> = g.node_ids().filter(|v| controllable[v.index()] && g.kind(*v).is_user()).collect();
        let ctrl_messages: Vec<NodeId> = g
            .node_ids()
            .filter(|v| controllable[v.index()] && g.kind(*v).is_message())
            .collect();
        if ctrl_users.is_empty() {
            return Err(EnvError::NoControllableUsers);
        }
        let mut target_ids: Vec<NodeId> = setup.targets.clone();
        target_ids.sort();
        target_ids.dedup();
        if target_ids.is_empty() {
            return Err(EnvError::NoTargets);
        }
        let influence = InfluenceTable::compute(&g, &PageRankConfig::default());
        let snapshot = detector.snapshot(&g)?;
        let cutoff = cfg.cutoff.unwrap_or_else(|| default_cutoff(snapshot.len()));
        let targets = TargetSet::new(
            target_ids.iter().map(|v| (*v, influence.score(*v))).collect(),
            cutoff,
            cfg.indicator,
        )?;
        let roles = Roles::new(&g, &targets, &setup.authorship, cfg.roles);
        let mut author_of = vec![None; n];
        for &(m, u) in &setup.authorship {
            g.try_kind(m)?;
            author_of[m.index()] = Some(u);
        }
        let attack = AttackLog::new(n, cfg.horizon);
        let bounds = FeatureContext {
            graph: &g,
            snapshot: &snapshot,
            influence: &influence,
            roles: &roles,
            attack: &attack,
            k: K_HOPS,
        }
        .fit_bounds();
        let j0 = objective::ndcg(&targets, &snapshot)?;
        Ok(AttackEnv {
            cfg,
            graph: g.clone(),
            clean: g,
            detector,
            clean_influence: influence.clone(),
            influence,
            controllable,
            ctrl_users,
            ctrl_messages,
            targets,
            roles,
            author_of,
            attack,
            bounds,
            clean_snapshot: snapshot.clone(),
            snapshot,
            j0,
            j: j0,
            t: 0,
        })
    }

    pub fn reset(&mut self) {
        self.graph = self.clean.clone();
        self.influence = self.clean_influence.clone();
        self.snapshot = self.clean_snapshot.clone();
        self.attack.clear();
        self.j = self.j0;
        self.t = 0;
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn graph(&self) -> &HeteroGraph {
        &self.graph
    }

    pub fn clean_graph(&self) -> &HeteroGraph {
        &self.clean
    }

    pub fn snapshot(&self) -> &RankingSnapshot {
        &self.snapshot
    }

    pub fn targets(&self) -> &TargetSet {
        &self.targets
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn author_of(&self, message: NodeId) -> Option<NodeId> {
        self.author_of[message.index()]
    }

    pub fn influence(&self) -> &InfluenceTable {
        &self.influence
    }

    pub fn attack_log(&self) -> &AttackLog {
        &self.attack
    }

    pub fn feature_bounds(&self) -> &FeatureBounds {
        &self.bounds
    }

    pub fn controllable_users(&self) -> &[NodeId] {
        &self.ctrl_users
    }

    pub fn controllable_messages(&self) -> &[NodeId] {
        &self.ctrl_messages
    }

    pub fn is_controllable(&self, v: NodeId) -> bool {
        self.controllable[v.index()]
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    /// Current objective value.
    pub fn j(&self) -> f64 {
        self.j
    }

    fn feature_context(&self) -> FeatureContext<'_> {
        FeatureContext {
            graph: &self.graph,
            snapshot: &self.snapshot,
            influence: &self.influence,
            roles: &self.roles,
            attack: &self.attack,
            k: K_HOPS,
        }
    }

    pub fn subgraph_features(&self, c: ComponentId) -> FeatureVector {
        self.feature_context().subgraph(c, &self.bounds)
    }

    pub fn node_features(&self, v: NodeId) -> FeatureVector {
        self.feature_context().node(v, &self.bounds)
    }

    /// Paired subgraph vectors, computing each component once.
    pub fn subgraph_candidates(&self, actions: &[SubgraphAction]) -> Vec<Vec<f64>> {
        let ctx = self.feature_context();
        let mut cache: HashMap<ComponentId, Vec<f64>> = HashMap::new();
        let mut get = |c: ComponentId| {
            cache
                .entry(c)
                .or_insert_with(|| ctx.subgraph(c, &self.bounds).values().to_vec())
                .clone()
        };
        actions
            .iter()
            .map(|a| {
                let mut x = get(a.gi);
                x.extend(get(a.gj));
                x
            })
            .collect()
    }

    /// Paired node vectors, computing each node once.
    pub fn node_candidates(&self, actions: &[NodeAction]) -> Vec<Vec<f64>> {
        let ctx = self.feature_context();
        let mut cache: HashMap<NodeId, Vec<f64>> = HashMap::new();
        let mut get = |v: NodeId| {
            cache
                .entry(v)
                .or_insert_with(|| ctx.node(v, &self.bounds).values().to_vec())
                .clone()
        };
        actions
            .iter()
            .map(|a| {
                let mut x = get(a.vp);
                x.extend(get(a.vq));
                x
            })
            .collect()
    }

    /// All ordered component pairs (target side, controllable side).
    pub fn subgraph_action_space(&self) -> Result<Vec<SubgraphAction>, EnvError> {
        if self.ctrl_users.is_empty() {
            return Err(EnvError::NoControllableUsers);
        }
        let with_target: BTreeSet<ComponentId> = self.targets.ids().map(|v| self.graph.component_of(v)).collect();
        let with_ctrl: BTreeSet<ComponentId> = self
            .ctrl_users
            .iter()
            .chain(&self.ctrl_messages)
            .map(|v| self.graph.component_of(*v))
            .collect();
        let space: Vec<SubgraphAction> = with_target
            .iter()
            .flat_map(|&gi| with_ctrl.iter().map(move |&gj| SubgraphAction { gi, gj }))
            .collect();
        if space.is_empty() {
            return Err(EnvError::EmptyActionSpace);
        }
        Ok(space)
    }

    /// Controllable members of `c`, sorted.
    fn controllable_members(&self, c: ComponentId) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .graph
            .members(c)
            .iter()
            .copied()
            .filter(|v| self.controllable[v.index()])
            .collect();
        v.sort();
        v
    }

    /// The (user, message) edge an action would add, if admissible now.
    pub fn realize(&self, a: NodeAction) -> Option<(NodeId, NodeId)> {
        let (kp, kq) = (self.graph.kind(a.vp), self.graph.kind(a.vq));
        let (u, m) = if kp.is_user() && kq.is_message() {
            (a.vp, a.vq)
        } else if kp.is_message() && kq.is_user() {
            (a.vq, a.vp)
        } else {
            return None;
        };
        if self.controllable[u.index()] && self.controllable[m.index()] && !self.graph.has_edge(u, m) {
            Some((u, m))
        } else {
            None
        }
    }

    pub fn node_action_space(&self, a: SubgraphAction) -> Vec<NodeAction> {
        let left = self.controllable_members(a.gi);
        let right = if a.gi == a.gj {
            left.clone()
        } else {
            self.controllable_members(a.gj)
        };
        let mut out = Vec::new();
        for &vp in &left {
            for &vq in &right {
                let act = NodeAction { vp, vq };
                if self.realize(act).is_some() {
                    out.push(act);
                }
            }
        }
        out
    }

    /// Attack edges already inside the union of the pair's components.
    pub fn attack_count(&self, a: SubgraphAction) -> usize {
        self.attack
            .edges()
            .iter()
            .filter(|(u, _)| {
                let c = self.graph.component_of(*u);
                c == a.gi || c == a.gj
            })
            .count()
    }

    pub fn step(&mut self, a: NodeAction) -> Result<f64, EnvError> {
        let (u, m) = self.realize(a).ok_or(EnvError::Unrealizable(a.vp, a.vq))?;
        self.apply_edge(u, m)
    }

    /// Adds the admissible edge `user`–`message` and returns ΔNDCG for the
    /// step.
    pub fn apply_edge(&mut self, user: NodeId, message: NodeId) -> Result<f64, EnvError> {
        if self.t >= self.cfg.horizon {
            return Err(EnvError::HorizonExhausted(self.cfg.horizon));
        }
        let admissible = self.graph.kind(user).is_user()
            && self.graph.kind(message).is_message()
            && self.controllable[user.index()]
            && self.controllable[message.index()]
            && !self.graph.has_edge(user, message);
        if !admissible {
            return Err(EnvError::Unrealizable(user, message));
        }
        self.graph.add_attack_edge_with(user, message, self.cfg.edge_mode)?;
        self.attack.record(user, message);
        match self.cfg.edge_mode {
            AttackEdgeMode::Single => self.influence.refresh_message(&self.graph, message),
            AttackEdgeMode::InducedUserLinks => {
                let pr = pagerank(&self.graph, &PageRankConfig::default());
                self.influence = InfluenceTable::from_pagerank(&self.graph, &pr, self.influence.z1, self.influence.z2);
            }
        }
        let comp = self.graph.component_of(message);
        self.detector.refresh_component(&self.graph, &mut self.snapshot, comp)?;
        self.t += 1;
        self.snapshot.step = self.t;
        let before = self.j;
        self.j = objective::ndcg(&self.targets, &self.snapshot)?;
        Ok(objective::delta_step(before, self.j))
    }

    /// Uniform subsample of `n` indices down to the cap, in ascending order.
    pub fn cap_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Option<Vec<usize>> {
        if n <= self.cfg.action_cap {
            return None;
        }
        let mut idx = sample(rng, n, self.cfg.action_cap).into_vec();
        idx.sort_unstable();
        Some(idx)
    }
}
