use serde::{Deserialize, Serialize};

use super::{FeatureBounds, FeatureVector, Level, SlotBounds};
use crate::detector::RankingSnapshot;
use crate::graph::{ComponentId, HeteroGraph, InfluenceTable, NodeId, NodeKind, Relation};
use crate::objective::TargetSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleConfig {
    /// Treat every non-target message as a ranking help message, not only
    /// non-target rumors.
    pub rhm_all_messages: bool,
    /// Only authors of target rumors count as bad.
    pub bad_author_targets_only: bool,
}

/// Per-node role flags the features read.
#[derive(Debug, Clone, PartialEq)]
pub struct Roles {
    target: Vec<bool>,
    rhm: Vec<bool>,
    bad: Vec<bool>,
}

impl Roles {
    /// `authorship` lists (message, author) pairs.
    pub fn new(
        g: &HeteroGraph,
        targets: &TargetSet,
        authorship: &[(NodeId, NodeId)],
        cfg: RoleConfig,
    ) -> Self {
        let n = g.num_nodes();
        let mut target = vec![false; n];
        for v in targets.ids() {
            target[v.index()] = true;
        }
        let rhm = (0..n)
            .map(|i| {
                let k = g.kind(NodeId(i as u32));
                !target[i] && (k.is_rumor() || (cfg.rhm_all_messages && k.is_message()))
            })
            .collect();
        let mut bad = vec![false; n];
        for &(m, u) in authorship {
            let counts = if cfg.bad_author_targets_only {
                target[m.index()]
            } else {
                g.kind(m).is_rumor()
            };
            if counts {
                bad[u.index()] = true;
            }
        }
        Roles { target, rhm, bad }
    }

    pub fn is_target(&self, v: NodeId) -> bool {
        self.target[v.index()]
    }

    pub fn is_rhm(&self, v: NodeId) -> bool {
        self.rhm[v.index()]
    }

    pub fn is_bad(&self, v: NodeId) -> bool {
        self.bad[v.index()]
    }
}

/// Attack edges added so far in the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackLog {
    horizon: usize,
    edges: Vec<(NodeId, NodeId)>,
    per_node: Vec<u32>,
}

impl AttackLog {
    pub fn new(num_nodes: usize, horizon: usize) -> Self {
        AttackLog {
            horizon,
            edges: Vec::new(),
            per_node: vec![0; num_nodes],
        }
    }

    pub fn record(&mut self, user: NodeId, message: NodeId) {
        self.edges.push((user, message));
        self.per_node[user.index()] += 1;
        self.per_node[message.index()] += 1;
    }

    pub fn clear(&mut self) {
        self.edges.clear();
        self.per_node.iter_mut().for_each(|c| *c = 0);
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn ratio(&self, count: usize) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            count as f64 / self.horizon as f64
        }
    }

    /// Added edges touching `v`, over the horizon.
    pub fn node_degree(&self, v: NodeId) -> f64 {
        self.ratio(self.per_node[v.index()] as usize)
    }

    /// Added edges now inside component `c`, over the horizon.
    pub fn component_degree(&self, g: &HeteroGraph, c: ComponentId) -> f64 {
        self.ratio(self.edges.iter().filter(|(u, _)| g.component_of(*u) == c).count())
    }
}

/// `[avg, max, min]`, or zeros for an empty input.
fn summary<I: IntoIterator<Item = f64>>(values: I) -> [f64; 3] {
    let (mut sum, mut n) = (0.0, 0usize);
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for v in values {
        sum += v;
        n += 1;
        hi = hi.max(v);
        lo = lo.min(v);
    }
    if n == 0 {
        [0.0; 3]
    } else {
        [sum / n as f64, hi, lo]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Read-only view over everything feature extraction needs.
pub struct FeatureContext<'a> {
    pub graph: &'a HeteroGraph,
    pub snapshot: &'a RankingSnapshot,
    pub influence: &'a InfluenceTable,
    pub roles: &'a Roles,
    pub attack: &'a AttackLog,
    pub k: usize,
}

impl FeatureContext<'_> {
    fn prob(&self, v: NodeId) -> f64 {
        self.snapshot.prob(v).unwrap_or(0.0)
    }

    fn is_bad_user(&self, v: NodeId) -> bool {
        self.graph.kind(v).is_user() && self.roles.is_bad(v)
    }

    pub fn raw_subgraph(&self, c: ComponentId) -> Vec<f64> {
        let g = self.graph;
        let members = g.members(c);
        let stats = g.stats_over(members).expect("components are non-empty");
        let n = members.len();
        let (mut messages, mut authors, mut retweeters, mut comments) = (0, 0, 0, 0);
        let (mut bad_authors, mut rumors, mut rumor_retweeters, mut rumor_comments) = (0, 0, 0, 0);
        let touches_rumor = |v: NodeId, rel: Relation| g.neighbors(v, rel).iter().any(|m| g.kind(*m).is_rumor());
        for &v in members {
            match g.kind(v) {
                NodeKind::Message { is_rumor } => {
                    messages += 1;
                    rumors += (is_rumor == Some(true)) as usize;
                }
                NodeKind::User { is_author: true } => {
                    authors += 1;
                    bad_authors += self.roles.is_bad(v) as usize;
                }
                NodeKind::User { is_author: false } => {
                    retweeters += 1;
                    rumor_retweeters += touches_rumor(v, Relation::UserMessage) as usize;
                }
                NodeKind::Comment => {
                    comments += 1;
                    rumor_comments += touches_rumor(v, Relation::MessageComment) as usize;
                }
            }
        }
        let inf = |pred: &dyn Fn(NodeKind) -> bool| {
            summary(
                members
                    .iter()
                    .filter(|v| pred(g.kind(**v)))
                    .map(|v| self.influence.score(*v)),
            )
        };
        let mut x = vec![
            n as f64,
            stats.edges as f64,
            stats.clustering,
            stats.avg_degree,
            stats.max_degree as f64,
            stats.min_degree as f64,
            ratio(messages, n),
            ratio(authors, n),
            ratio(retweeters, n),
            ratio(comments, n),
            ratio(bad_authors, authors),
            ratio(rumors, messages),
            ratio(rumor_retweeters, retweeters),
            ratio(rumor_comments, comments),
        ];
        x.extend(inf(&|k| matches!(k, NodeKind::User { is_author: true })));
        x.extend(inf(&|k| k.is_user()));
        x.extend(inf(&|k| k.is_rumor()));
        x.extend(inf(&|k| k.is_nonrumor()));
        x.extend(summary(
            members.iter().filter(|v| self.roles.is_target(**v)).map(|v| self.prob(*v)),
        ));
        x.push(self.attack.component_degree(g, c));
        x.extend(summary(
            members.iter().filter(|v| self.roles.is_rhm(**v)).map(|v| self.prob(*v)),
        ));
        debug_assert_eq!(x.len(), Level::Subgraph.dim());
        x
    }

    pub fn raw_node(&self, v: NodeId) -> Vec<f64> {
        let g = self.graph;
        let hood = g.neighborhood(v, self.k).expect("node exists");
        let kind = g.kind(v);
        let bad = self.is_bad_user(v);
        let ego = &hood.ego_nodes;
        let count = |pred: &dyn Fn(NodeId) -> bool| ego.iter().filter(|u| pred(**u)).count();
        let ego_rumors = count(&|u| g.kind(u).is_rumor());
        let ego_bad = count(&|u| self.is_bad_user(u));
        let ego_comments = count(&|u| g.kind(u).is_comment());
        let mean_inf = |pred: &dyn Fn(NodeKind) -> bool| {
            summary(ego.iter().filter(|u| pred(g.kind(**u))).map(|u| self.influence.score(*u)))[0]
        };
        let targets_within = |hops: usize| {
            hood.khop
                .iter()
                .filter(move |(u, d)| *d <= hops && self.roles.is_target(*u))
        };
        let n_targets = targets_within(self.k).count();
        let distance = if n_targets == 0 || self.k == 0 {
            1.0
        } else {
            targets_within(self.k).map(|(_, d)| *d as f64).sum::<f64>() / (n_targets as f64 * self.k as f64)
        };

        let mut x = vec![
            g.degree(v) as f64,
            hood.ego_edges as f64,
            (kind.is_rumor() || bad) as u8 as f64,
            kind.is_rumor() as u8 as f64,
            kind.is_nonrumor() as u8 as f64,
            (kind.is_user() && !bad) as u8 as f64,
            bad as u8 as f64,
            ratio(ego_rumors, ego.len()),
            ratio(ego_bad, ego.len()),
            ratio(ego_comments, ego.len()),
            self.influence.score(v),
            mean_inf(&|k| k.is_user()),
            mean_inf(&|k| k.is_message()),
        ];
        x.extend(summary(targets_within(1).map(|(u, _)| self.prob(*u))));
        x.extend(summary(targets_within(self.k).map(|(u, _)| self.prob(*u))));
        x.extend(summary(ego.iter().map(|u| self.attack.node_degree(*u))));
        x.push(n_targets as f64);
        x.push(distance);
        x.extend(summary(
            hood.khop
                .iter()
                .filter(|(u, _)| self.roles.is_rhm(*u))
                .map(|(u, _)| self.prob(*u)),
        ));
        debug_assert_eq!(x.len(), Level::Node.dim());
        x
    }

    pub fn subgraph(&self, c: ComponentId, bounds: &FeatureBounds) -> FeatureVector {
        bounds.subgraph.normalize(&self.raw_subgraph(c))
    }

    pub fn node(&self, v: NodeId, bounds: &FeatureBounds) -> FeatureVector {
        bounds.node.normalize(&self.raw_node(v))
    }

    /// Ranges over every component and every node of the (clean) graph in
    /// this context.
    pub fn fit_bounds(&self) -> FeatureBounds {
        let sub: Vec<Vec<f64>> = self
            .graph
            .components()
            .into_iter()
            .map(|c| self.raw_subgraph(c))
            .collect();
        let node: Vec<Vec<f64>> = self.graph.node_ids().map(|v| self.raw_node(v)).collect();
        FeatureBounds {
            subgraph: SlotBounds::fit(Level::Subgraph, sub.iter().map(Vec::as_slice)),
            node: SlotBounds::fit(Level::Node, node.iter().map(Vec::as_slice)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PageRankConfig;
    use crate::objective::IndicatorMode;

    fn msg(i: u32, rumor: bool) -> (NodeId, NodeKind) {
        (NodeId(i), NodeKind::Message { is_rumor: Some(rumor) })
    }

    fn user(i: u32, author: bool) -> (NodeId, NodeKind) {
        (NodeId(i), NodeKind::User { is_author: author })
    }

    /// Component A (0..6): author 0 posts rumor 1 (target) and nonrumor 2;
    /// retweeter 3 reposts 1; comment 4 on 1; retweeter 5 follows 0.
    /// Component B (6..8): author 6 posts rumor 7 (non-target, so an RHM).
    fn fixture() -> (HeteroGraph, TargetSet, Vec<(NodeId, NodeId)>) {
        let g = HeteroGraph::build(
            &[
                user(0, true),
                msg(1, true),
                msg(2, false),
                user(3, false),
                (NodeId(4), NodeKind::Comment),
                user(5, false),
                user(6, true),
                msg(7, true),
            ],
            &[
                (NodeId(0), NodeId(1), Relation::UserMessage),
                (NodeId(0), NodeId(2), Relation::UserMessage),
                (NodeId(3), NodeId(1), Relation::UserMessage),
                (NodeId(1), NodeId(4), Relation::MessageComment),
                (NodeId(0), NodeId(5), Relation::UserUser),
                (NodeId(0), NodeId(3), Relation::UserUser),
                (NodeId(6), NodeId(7), Relation::UserMessage),
            ],
        )
        .unwrap();
        let targets = TargetSet::new(vec![(NodeId(1), 1.0)], 2, IndicatorMode::WithinCutoff).unwrap();
        let authors = vec![(NodeId(1), NodeId(0)), (NodeId(2), NodeId(0)), (NodeId(7), NodeId(6))];
        (g, targets, authors)
    }

    fn probs(g: &HeteroGraph) -> RankingSnapshot {
        RankingSnapshot::from_probabilities(
            g.num_nodes(),
            &[(NodeId(1), 0.8), (NodeId(2), 0.2), (NodeId(7), 0.6)],
            0,
        )
    }

    #[test]
    fn hand_computed_subgraph_fields() {
        let (g, targets, authors) = fixture();
        let roles = Roles::new(&g, &targets, &authors, RoleConfig::default());
        let snap = probs(&g);
        let inf = InfluenceTable::compute(&g, &PageRankConfig::default());
        let attack = AttackLog::new(g.num_nodes(), 4);
        let ctx = FeatureContext {
            graph: &g,
            snapshot: &snap,
            influence: &inf,
            roles: &roles,
            attack: &attack,
            k: 3,
        };
        let x = FeatureVector::new(Level::Subgraph, ctx.raw_subgraph(g.component_of(NodeId(0)))).unwrap();
        let f = |name| x.get(name).unwrap();
        assert_eq!(f("n_nodes"), 6.0);
        assert_eq!(f("n_edges"), 6.0);
        // triangle 0-1-3 closes one of the triples: degrees 4,3,1,2,1,1
        // give 6+3+0+1+0+0 = 10 triples, 3 closed
        assert!((f("clustering_coefficient") - 0.3).abs() < 1e-15);
        assert_eq!(f("avg_degree"), 2.0);
        assert_eq!((f("max_degree"), f("min_degree")), (4.0, 1.0));
        assert_eq!(f("message_ratio"), 2.0 / 6.0);
        assert_eq!(f("author_ratio"), 1.0 / 6.0);
        assert_eq!(f("re_tweeter_ratio"), 2.0 / 6.0);
        assert_eq!(f("review_ratio"), 1.0 / 6.0);
        assert_eq!(f("bad_author_ratio"), 1.0);
        assert_eq!(f("rumor_ratio"), 0.5);
        assert_eq!(f("rumor_retweet_ratio"), 0.5);
        assert_eq!(f("rumor_review_ratio"), 1.0);
        let pr0 = inf.score(NodeId(0));
        assert_eq!(f("max_author_inf"), pr0);
        let users = [0, 3, 5].map(|i| inf.score(NodeId(i)));
        assert!((f("avg_user_inf") - users.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert_eq!(f("min_user_inf"), users.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(f("avg_rumor_inf"), inf.score(NodeId(1)));
        assert_eq!(f("avg_nonrumor_inf"), inf.score(NodeId(2)));
        assert_eq!(
            [f("avg_target_suspicious"), f("max_target_suspicious"), f("min_target_suspicious")],
            [0.8; 3]
        );
        assert_eq!(f("attack_degree"), 0.0);
        // no RHM in this component
        assert_eq!(f("avg_rhm_suspicious"), 0.0);

        let b = FeatureVector::new(Level::Subgraph, ctx.raw_subgraph(g.component_of(NodeId(6)))).unwrap();
        assert_eq!(b.get("avg_rhm_suspicious"), Some(0.6));
        assert_eq!(b.get("avg_target_suspicious"), Some(0.0));

        // an attack edge merges the components and is counted once
        let mut g2 = g.clone();
        g2.add_attack_edge(NodeId(6), NodeId(1)).unwrap();
        let mut attacked = attack.clone();
        attacked.record(NodeId(6), NodeId(1));
        let ctx = FeatureContext { graph: &g2, attack: &attacked, ..ctx };
        let x = FeatureVector::new(Level::Subgraph, ctx.raw_subgraph(g2.component_of(NodeId(0)))).unwrap();
        assert_eq!(x.get("attack_degree"), Some(0.25));
    }

    #[test]
    fn hand_computed_node_fields() {
        let (g, targets, authors) = fixture();
        let roles = Roles::new(&g, &targets, &authors, RoleConfig::default());
        let snap = probs(&g);
        let inf = InfluenceTable::compute(&g, &PageRankConfig::default());
        let attack = AttackLog::new(g.num_nodes(), 4);
        let ctx = FeatureContext {
            graph: &g,
            snapshot: &snap,
            influence: &inf,
            roles: &roles,
            attack: &attack,
            k: 3,
        };
        // author 0: ego = {0, 1, 2, 3, 5}; edges 0-1, 0-2, 0-3, 0-5, 1-3
        let x = FeatureVector::new(Level::Node, ctx.raw_node(NodeId(0))).unwrap();
        let f = |name| x.get(name).unwrap();
        assert_eq!((f("degree"), f("ego_n_edges")), (4.0, 5.0));
        assert_eq!(f("good_bad"), 1.0);
        assert_eq!(
            [f("node_type_rumor"), f("node_type_nonrumor"), f("node_type_good_author"), f("node_type_bad_author")],
            [0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(f("ego_rumor_ratio"), 0.2);
        assert_eq!(f("ego_bu_ratio"), 0.2);
        assert_eq!(f("ego_review_ratio"), 0.0);
        assert_eq!(f("node_inf"), inf.score(NodeId(0)));
        let users = [0, 3, 5].map(|i| inf.score(NodeId(i)));
        assert!((f("ego_user_inf") - users.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        let msgs = [1, 2].map(|i| inf.score(NodeId(i)));
        assert!((f("ego_message_inf") - msgs.iter().sum::<f64>() / 2.0).abs() < 1e-15);
        assert_eq!(f("avg_node_potential"), 0.8);
        assert_eq!(f("max_neighbor_suspicious"), 0.8);
        assert_eq!(f("n_targets"), 1.0);
        assert_eq!(f("n_targets_distance"), 1.0 / 3.0);
        assert_eq!(f("avg_rhm_suspicious"), 0.0);

        // comment 4 sits two hops from nothing but its rumor
        let c = FeatureVector::new(Level::Node, ctx.raw_node(NodeId(4))).unwrap();
        assert_eq!(c.get("n_targets_distance"), Some(1.0 / 3.0));
        assert_eq!(c.get("good_bad"), Some(0.0));

        // rumor 7 is an RHM with no target in range
        let r = FeatureVector::new(Level::Node, ctx.raw_node(NodeId(7))).unwrap();
        assert_eq!(r.get("good_bad"), Some(1.0));
        assert_eq!(r.get("node_type_rumor"), Some(1.0));
        assert_eq!(r.get("n_targets"), Some(0.0));
        assert_eq!(r.get("n_targets_distance"), Some(1.0));
        assert_eq!(r.get("avg_node_potential"), Some(0.0));
        assert_eq!(r.get("max_rhm_suspicious"), Some(0.6));

        // good author and nonrumor
        let n = FeatureVector::new(Level::Node, ctx.raw_node(NodeId(2))).unwrap();
        assert_eq!(n.get("good_bad"), Some(0.0));
        assert_eq!(n.get("node_type_nonrumor"), Some(1.0));
    }

    #[test]
    fn role_flags() {
        let (g, targets, authors) = fixture();
        let narrow = Roles::new(
            &g,
            &targets,
            &authors,
            RoleConfig {
                bad_author_targets_only: true,
                ..Default::default()
            },
        );
        assert!(narrow.is_bad(NodeId(0)));
        assert!(!narrow.is_bad(NodeId(6)));
        let wide = Roles::new(
            &g,
            &targets,
            &authors,
            RoleConfig {
                rhm_all_messages: true,
                ..Default::default()
            },
        );
        assert!(wide.is_rhm(NodeId(2)) && wide.is_rhm(NodeId(7)) && !wide.is_rhm(NodeId(1)));
    }

    #[test]
    fn extraction_is_pure_and_bounded() {
        let (g, targets, authors) = fixture();
        let roles = Roles::new(&g, &targets, &authors, RoleConfig::default());
        let snap = probs(&g);
        let inf = InfluenceTable::compute(&g, &PageRankConfig::default());
        let attack = AttackLog::new(g.num_nodes(), 4);
        let ctx = FeatureContext {
            graph: &g,
            snapshot: &snap,
            influence: &inf,
            roles: &roles,
            attack: &attack,
            k: 3,
        };
        let before = g.fingerprint();
        let bounds = ctx.fit_bounds();
        for c in g.components() {
            assert!(ctx.subgraph(c, &bounds).values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        for v in g.node_ids() {
            assert!(ctx.node(v, &bounds).values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(g.fingerprint(), before);
        assert_eq!(ctx.raw_node(NodeId(3)), ctx.raw_node(NodeId(3)));
    }
}
