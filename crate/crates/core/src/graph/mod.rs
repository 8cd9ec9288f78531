//! Typed heterogeneous social graph.
//!
//! Nodes are messages, users and comments; edges carry one of three
//! relations (user–message, message–comment, user–user) and are undirected.
//! A union-find index tracks connected components ("subgraphs") as attack
//! edges are added.

mod influence;
mod stats;
mod union_find;

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use influence::{pagerank, InfluenceTable, PageRankConfig};
pub use stats::{GraphStats, StatsScope};
pub use union_find::UnionFind;

/// Dense node identifier in `[0, |V|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(v as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    /// `is_rumor` is `None` when the message is unlabeled.
    Message { is_rumor: Option<bool> },
    User { is_author: bool },
    Comment,
}

impl NodeKind {
    pub fn is_message(self) -> bool {
        matches!(self, NodeKind::Message { .. })
    }

    pub fn is_user(self) -> bool {
        matches!(self, NodeKind::User { .. })
    }

    pub fn is_comment(self) -> bool {
        matches!(self, NodeKind::Comment)
    }

    pub fn is_rumor(self) -> bool {
        matches!(self, NodeKind::Message { is_rumor: Some(true) })
    }

    pub fn is_nonrumor(self) -> bool {
        matches!(self, NodeKind::Message { is_rumor: Some(false) })
    }

    fn tag(self) -> u8 {
        match self {
            NodeKind::Message { is_rumor: None } => 0,
            NodeKind::Message { is_rumor: Some(false) } => 1,
            NodeKind::Message { is_rumor: Some(true) } => 2,
            NodeKind::User { is_author: false } => 3,
            NodeKind::User { is_author: true } => 4,
            NodeKind::Comment => 5,
        }
    }
}

/// Edge relation type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// user–message (posting or re-posting)
    #[serde(rename = "l1")]
    UserMessage,
    /// message–comment
    #[serde(rename = "l2")]
    MessageComment,
    /// user–user
    #[serde(rename = "l3")]
    UserUser,
}

impl Relation {
    pub const ALL: [Relation; 3] = [
        Relation::UserMessage,
        Relation::MessageComment,
        Relation::UserUser,
    ];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Relation::UserMessage => 0,
            Relation::MessageComment => 1,
            Relation::UserUser => 2,
        }
    }

    /// The relation implied by a pair of endpoint kinds, if any.
    pub fn between(a: NodeKind, b: NodeKind) -> Option<Relation> {
        use NodeKind::*;
        match (a, b) {
            (User { .. }, Message { .. }) | (Message { .. }, User { .. }) => {
                Some(Relation::UserMessage)
            }
            (Message { .. }, Comment) | (Comment, Message { .. }) => Some(Relation::MessageComment),
            (User { .. }, User { .. }) => Some(Relation::UserUser),
            _ => None,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Relation::UserMessage => "l1",
            Relation::MessageComment => "l2",
            Relation::UserUser => "l3",
        };
        f.write_str(s)
    }
}

/// Identifier of a connected component: the union-find root of its members.
/// Only meaningful until the next edge addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub usize);

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node list is empty")]
    NoNodes,
    #[error("node ids are not dense: expected id {expected}, found {found}")]
    NonDenseIds { expected: usize, found: NodeId },
    #[error("edge {index} ({src}, {dst}, {relation}): endpoint kinds do not match the relation")]
    KindMismatch {
        index: usize,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
    },
    #[error("edge {index} ({src}, {dst}, {relation}): duplicate edge")]
    DuplicateEdge {
        index: usize,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
    },
    #[error("edge {index} ({src}, {dst}, {relation}): dangling node id")]
    DanglingNode {
        index: usize,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
    },
    #[error("edge {index} ({src}, {dst}, {relation}): self-loop")]
    SelfLoop {
        index: usize,
        src: NodeId,
        dst: NodeId,
        relation: Relation,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("attack edge ({user}, {message}) already present")]
    EdgeExists { user: NodeId, message: NodeId },
    #[error("attack edge ({user}, {message}) must join a user to a message")]
    WrongKinds { user: NodeId, message: NodeId },
    #[error("statistics requested over an empty scope")]
    EmptyScope,
}

/// How an attack edge is materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackEdgeMode {
    /// Exactly one user–message edge.
    #[default]
    Single,
    /// Also link the user to the message's existing user neighbors, the way
    /// an organic re-post would.
    InducedUserLinks,
}

/// Ego network and k-hop ball around a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// The node itself followed by its 1-hop neighbors, ascending.
    pub ego_nodes: Vec<NodeId>,
    /// Edges induced on `ego_nodes`.
    pub ego_edges: usize,
    /// Nodes within `k` hops with their BFS distance, in BFS order.
    pub khop: Vec<(NodeId, usize)>,
}

/// Undirected typed graph with a live component index.
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    kinds: Vec<NodeKind>,
    adj: [Vec<Vec<NodeId>>; 3],
    edge_set: HashSet<(u32, u32)>,
    edge_count: usize,
    uf: UnionFind,
    members: Vec<Vec<NodeId>>,
}

#[inline]
fn key(a: NodeId, b: NodeId) -> (u32, u32) {
    if a.0 <= b.0 {
        (a.0, b.0)
    } else {
        (b.0, a.0)
    }
}

impl HeteroGraph {
    /// Validates and builds a graph. Ids must be exactly `0..n` (in any order).
    pub fn build(
        nodes: &[(NodeId, NodeKind)],
        edges: &[(NodeId, NodeId, Relation)],
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::NoNodes);
        }
        let mut sorted: Vec<(NodeId, NodeKind)> = nodes.to_vec();
        sorted.sort_by_key(|(id, _)| *id);
        for (expected, (id, _)) in sorted.iter().enumerate() {
            if id.index() != expected {
                return Err(GraphError::NonDenseIds {
                    expected,
                    found: *id,
                });
            }
        }
        let kinds: Vec<NodeKind> = sorted.into_iter().map(|(_, k)| k).collect();
        let n = kinds.len();
        let mut g = HeteroGraph {
            adj: [vec![Vec::new(); n], vec![Vec::new(); n], vec![Vec::new(); n]],
            edge_set: HashSet::with_capacity(edges.len()),
            edge_count: 0,
            uf: UnionFind::new(n),
            members: (0..n).map(|i| vec![NodeId::from(i)]).collect(),
            kinds,
        };
        for (index, &(src, dst, relation)) in edges.iter().enumerate() {
            if src.index() >= n || dst.index() >= n {
                return Err(GraphError::DanglingNode {
                    index,
                    src,
                    dst,
                    relation,
                });
            }
            if src == dst {
                return Err(GraphError::SelfLoop {
                    index,
                    src,
                    dst,
                    relation,
                });
            }
            if Relation::between(g.kinds[src.index()], g.kinds[dst.index()]) != Some(relation) {
                return Err(GraphError::KindMismatch {
                    index,
                    src,
                    dst,
                    relation,
                });
            }
            if g.edge_set.contains(&key(src, dst)) {
                return Err(GraphError::DuplicateEdge {
                    index,
                    src,
                    dst,
                    relation,
                });
            }
            g.insert_edge(src, dst, relation);
        }
        Ok(g)
    }

    fn insert_edge(&mut self, a: NodeId, b: NodeId, relation: Relation) {
        self.edge_set.insert(key(a, b));
        self.adj[relation.index()][a.index()].push(b);
        self.adj[relation.index()][b.index()].push(a);
        self.edge_count += 1;
        if let Some((big, small)) = self.uf.union(a.index(), b.index()) {
            let moved = std::mem::take(&mut self.members[small]);
            self.members[big].extend(moved);
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn kind(&self, v: NodeId) -> NodeKind {
        self.kinds[v.index()]
    }

    pub fn try_kind(&self, v: NodeId) -> Result<NodeKind, GraphError> {
        self.kinds
            .get(v.index())
            .copied()
            .ok_or(GraphError::UnknownNode(v))
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.kinds.len()).map(NodeId::from)
    }

    pub fn messages(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&v| self.kind(v).is_message())
    }

    pub fn users(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_ids().filter(|&v| self.kind(v).is_user())
    }

    /// Neighbors of `v` under one relation, in insertion order.
    pub fn neighbors(&self, v: NodeId, relation: Relation) -> &[NodeId] {
        &self.adj[relation.index()][v.index()]
    }

    /// All neighbors of `v` regardless of relation.
    pub fn all_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        Relation::ALL
            .into_iter()
            .flat_map(move |r| self.adj[r.index()][v.index()].iter().copied())
    }

    pub fn degree(&self, v: NodeId) -> usize {
        Relation::ALL
            .iter()
            .map(|r| self.adj[r.index()][v.index()].len())
            .sum()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edge_set.contains(&key(a, b))
    }

    /// Every edge once, as `(min, max, relation)`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, Relation)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for r in Relation::ALL {
            for (i, list) in self.adj[r.index()].iter().enumerate() {
                for &j in list {
                    if i < j.index() {
                        out.push((NodeId::from(i), j, r));
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Adds one attacker-controlled user–message edge.
    pub fn add_attack_edge(&mut self, user: NodeId, message: NodeId) -> Result<(), GraphError> {
        self.add_attack_edge_with(user, message, AttackEdgeMode::Single)
    }

    pub fn add_attack_edge_with(
        &mut self,
        user: NodeId,
        message: NodeId,
        mode: AttackEdgeMode,
    ) -> Result<(), GraphError> {
        let uk = self.try_kind(user)?;
        let mk = self.try_kind(message)?;
        if !uk.is_user() || !mk.is_message() {
            return Err(GraphError::WrongKinds { user, message });
        }
        if self.has_edge(user, message) {
            return Err(GraphError::EdgeExists { user, message });
        }
        if mode == AttackEdgeMode::InducedUserLinks {
            let peers: Vec<NodeId> = self.neighbors(message, Relation::UserMessage).to_vec();
            for p in peers {
                if p != user && !self.has_edge(user, p) {
                    self.insert_edge(user, p, Relation::UserUser);
                }
            }
        }
        self.insert_edge(user, message, Relation::UserMessage);
        Ok(())
    }

    pub fn num_components(&self) -> usize {
        self.uf.sets()
    }

    pub fn component_of(&self, v: NodeId) -> ComponentId {
        ComponentId(self.uf.find(v.index()))
    }

    /// All components, ordered by root id.
    pub fn components(&self) -> Vec<ComponentId> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(i, _)| ComponentId(i))
            .collect()
    }

    /// Members of a component in unspecified order. Empty for a stale id.
    pub fn members(&self, c: ComponentId) -> &[NodeId] {
        self.members.get(c.0).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ego network plus BFS ball of radius `k` (k ≥ 1).
    pub fn neighborhood(&self, v: NodeId, k: usize) -> Result<Neighborhood, GraphError> {
        self.try_kind(v)?;
        let mut ego: Vec<NodeId> = self.all_neighbors(v).collect();
        ego.sort();
        ego.dedup();
        let ego_set: HashSet<NodeId> = ego.iter().copied().chain([v]).collect();
        // induced edges: v's own edges plus edges among its neighbors
        let mut ego_edges = ego.len();
        for &a in &ego {
            for b in self.all_neighbors(a) {
                if b != v && a < b && ego_set.contains(&b) {
                    ego_edges += 1;
                }
            }
        }
        let mut ego_nodes = Vec::with_capacity(ego.len() + 1);
        ego_nodes.push(v);
        ego_nodes.extend(ego);

        Ok(Neighborhood {
            ego_nodes,
            ego_edges,
            khop: self.bfs(v, k),
        })
    }

    /// BFS distances from `v` up to `k` hops.
    pub fn bfs(&self, v: NodeId, k: usize) -> Vec<(NodeId, usize)> {
        let mut seen = HashSet::new();
        let mut order = vec![(v, 0)];
        let mut queue = VecDeque::from([(v, 0usize)]);
        seen.insert(v);
        while let Some((u, d)) = queue.pop_front() {
            if d == k {
                continue;
            }
            for w in self.all_neighbors(u) {
                if seen.insert(w) {
                    order.push((w, d + 1));
                    queue.push_back((w, d + 1));
                }
            }
        }
        order
    }

    /// Content hash over node kinds and the sorted edge list.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.kinds.len() as u64).to_le_bytes());
        for k in &self.kinds {
            h.update([k.tag()]);
        }
        for (a, b, r) in self.edges() {
            h.update(a.0.to_le_bytes());
            h.update(b.0.to_le_bytes());
            h.update([r.index() as u8]);
        }
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    }
}
