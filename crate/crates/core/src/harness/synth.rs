//! Synthetic cascade graphs with planted label structure.
//!
//! Each component is a cluster of message cascades: authors post messages,
//! retweeters re-post them (user–message) and may follow the author
//! (user–user), a few comments hang off messages. Some authors are "bad":
//! their messages are mostly rumors, and rumors attract more re-posts and
//! more follow links, so message degree carries label signal.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSpec, EdgeRecord, Label, NodeRecord, RecordKind};
use super::rng::stream;
use super::HarnessError;
use crate::graph::Relation;

/// Shape targets for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    /// Rumor share of the messages.
    pub rumor_fraction: f64,
    /// Node shares; messages take the remainder.
    pub author_fraction: f64,
    pub retweeter_fraction: f64,
    pub comment_fraction: f64,
    pub seed: u64,
}

/// Per-type node counts implied by a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mix {
    pub messages: usize,
    pub rumors: usize,
    pub authors: usize,
    pub retweeters: usize,
    pub comments: usize,
}

// Full-size reference counts the "weibo-mini" preset is scaled from.
const WEIBO: [usize; 8] = [10280, 16412, 2392, 1538, 1849, 2440, 4415, 38];

impl SyntheticSpec {
    /// Weibo-like ratios at a tenth of the size.
    pub fn weibo_mini(seed: u64) -> Self {
        let [n, e, c, r, nr, a, rt, cm] = WEIBO.map(|x| x as f64);
        SyntheticSpec {
            name: "weibo-mini".into(),
            nodes: (n / 10.0).round() as usize,
            edges: (e / 10.0).round() as usize,
            components: (c / 10.0).round() as usize,
            rumor_fraction: r / (r + nr),
            author_fraction: a / n,
            retweeter_fraction: rt / n,
            comment_fraction: cm / n,
            seed,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "weibo-mini" => Some(Self::weibo_mini(seed)),
            _ => None,
        }
    }

    /// Same ratios, `factor` times the node, edge and component counts.
    pub fn scaled(&self, factor: f64) -> Result<Self, HarnessError> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(HarnessError::Infeasible(format!("scale factor must be positive, got {factor}")));
        }
        let s = |x: usize| ((x as f64) * factor).round() as usize;
        Ok(SyntheticSpec {
            nodes: s(self.nodes),
            edges: s(self.edges),
            components: s(self.components),
            ..self.clone()
        })
    }

    pub fn mix(&self) -> Mix {
        let r = |f: f64| (f * self.nodes as f64).round() as usize;
        let (authors, retweeters, comments) = (r(self.author_fraction), r(self.retweeter_fraction), r(self.comment_fraction));
        let messages = self.nodes.saturating_sub(authors + retweeters + comments);
        Mix {
            messages,
            rumors: (self.rumor_fraction * messages as f64).round() as usize,
            authors,
            retweeters,
            comments,
        }
    }

    fn check(&self) -> Result<Mix, HarnessError> {
        let bad = |m: String| Err(HarnessError::Infeasible(m));
        for (name, f) in [
            ("rumor_fraction", self.rumor_fraction),
            ("author_fraction", self.author_fraction),
            ("retweeter_fraction", self.retweeter_fraction),
            ("comment_fraction", self.comment_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} = {f} is outside [0, 1]"));
            }
        }
        if self.nodes == 0 || self.components == 0 {
            return bad("nodes and components must be positive".into());
        }
        let m = self.mix();
        if self.author_fraction + self.retweeter_fraction + self.comment_fraction >= 1.0 || m.messages == 0 {
            return bad("node shares leave no room for messages".into());
        }
        if self.components > m.authors.min(m.messages) {
            return bad(format!(
                "{} components need at least that many authors and messages ({} / {})",
                self.components, m.authors, m.messages
            ));
        }
        if self.edges + self.components < self.nodes {
            return bad(format!(
                "{} edges cannot connect {} nodes into {} components",
                self.edges, self.nodes, self.components
            ));
        }
        Ok(m)
    }
}

struct Builder {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    seen: std::collections::HashSet<(u32, u32)>,
}

impl Builder {
    fn node(&mut self, kind: RecordKind) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(NodeRecord {
            id,
            kind,
            label: None,
            author: None,
            is_author: kind == RecordKind::User,
        });
        id
    }

    fn edge(&mut self, a: u32, b: u32, relation: Relation) -> bool {
        let k = (a.min(b), a.max(b));
        if a == b || !self.seen.insert(k) {
            return false;
        }
        self.edges.push(EdgeRecord { src: a, dst: b, relation });
        true
    }
}

#[derive(Default, Clone)]
struct Component {
    authors: Vec<u32>,
    messages: Vec<u32>,
    retweeters: Vec<u32>,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T], weight: impl Fn(&T) -> f64) -> Option<T> {
    let w: Vec<f64> = items.iter().map(weight).collect();
    WeightedIndex::new(&w).ok().map(|d| items[d.sample(rng)])
}

/// Re-post attraction of a message.
fn pull(rumor: bool) -> f64 {
    if rumor {
        3.0
    } else {
        1.0
    }
}

/// Builds a dataset shaped by `spec`. Node counts per type and the number of
/// components are exact; the edge count is met unless components are too
/// small to hold the extra edges, which is reported as infeasible when the
/// shortfall exceeds 10%.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetSpec, HarnessError> {
    let mix = spec.check()?;
    let mut rng = stream(spec.seed, "generator");
    let size_dist = LogNormal::new(0.0, 0.9).expect("valid lognormal");
    let weights: Vec<f64> = (0..spec.components).map(|_| size_dist.sample(&mut rng)).collect();
    let comp_dist = WeightedIndex::new(&weights).expect("positive weights");

    let mut b = Builder {
        nodes: Vec::with_capacity(spec.nodes),
        edges: Vec::with_capacity(spec.edges),
        seen: Default::default(),
    };
    let mut comps = vec![Component::default(); spec.components];

    // authors: one per component, the rest by component weight
    let mut author_comp = Vec::with_capacity(mix.authors);
    let mut bad = Vec::with_capacity(mix.authors);
    for i in 0..mix.authors {
        let c = if i < spec.components { i } else { comp_dist.sample(&mut rng) };
        let id = b.node(RecordKind::User);
        if let Some(&first) = comps[c].authors.first() {
            b.edge(id, first, Relation::UserUser);
        }
        comps[c].authors.push(id);
        author_comp.push(c);
        bad.push(rng.gen_bool(spec.rumor_fraction));
    }

    // messages: one per author, the rest favour bad authors
    let mut msg_author = Vec::with_capacity(mix.messages);
    for i in 0..mix.messages {
        let a = if i < mix.authors {
            i
        } else {
            let idx: Vec<usize> = (0..mix.authors).collect();
            pick(&mut rng, &idx, |&a| if bad[a] { 2.0 } else { 1.0 }).expect("authors exist")
        };
        msg_author.push(a);
    }
    // label: the top `rumors` messages by noisy author badness
    let mut score: Vec<(f64, usize)> = msg_author
        .iter()
        .enumerate()
        .map(|(i, &a)| ((bad[a] as u8 as f64) + 0.6 * rng.gen::<f64>(), i))
        .collect();
    score.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut is_rumor = vec![false; mix.messages];
    for &(_, i) in score.iter().take(mix.rumors) {
        is_rumor[i] = true;
    }
    let author_id = |a: usize| a as u32;
    let mut rumor_of = std::collections::HashMap::new();
    for (i, &a) in msg_author.iter().enumerate() {
        let id = b.node(RecordKind::Message);
        let r = &mut b.nodes[id as usize];
        r.label = Some(if is_rumor[i] { Label::Rumor } else { Label::NonRumor });
        r.author = Some(author_id(a));
        b.edge(author_id(a), id, Relation::UserMessage);
        comps[author_comp[a]].messages.push(id);
        rumor_of.insert(id, is_rumor[i]);
    }
    let rumor = |m: &u32| rumor_of[m];

    // retweeters join components in proportion to their re-post pull
    let comp_pull: Vec<f64> = comps
        .iter()
        .zip(&weights)
        .map(|(c, w)| w * c.messages.iter().map(|m| pull(rumor(m))).sum::<f64>())
        .collect();
    let pull_dist = WeightedIndex::new(&comp_pull).expect("every component has a message");
    for _ in 0..mix.retweeters {
        let c = pull_dist.sample(&mut rng);
        let id = b.node(RecordKind::User);
        b.nodes[id as usize].is_author = false;
        let m = pick(&mut rng, &comps[c].messages, |m| pull(rumor(m))).expect("non-empty");
        b.edge(id, m, Relation::UserMessage);
        let follow = if rumor(&m) { 0.7 } else { 0.3 };
        if rng.gen_bool(follow) {
            let a = b.nodes[m as usize].author.expect("generated messages have authors");
            b.edge(id, a, Relation::UserUser);
        }
        comps[c].retweeters.push(id);
    }
    for _ in 0..mix.comments {
        let c = pull_dist.sample(&mut rng);
        let m = pick(&mut rng, &comps[c].messages, |m| pull(rumor(m))).expect("non-empty");
        let id = b.node(RecordKind::Comment);
        b.edge(m, id, Relation::MessageComment);
    }

    // densify inside components until the edge target is met
    let big: Vec<f64> = comps
        .iter()
        .map(|c| {
            let users = (c.authors.len() + c.retweeters.len()) as f64;
            (users * c.messages.len() as f64 + users * (users - 1.0) / 2.0).max(0.0)
        })
        .collect();
    let mut attempts = 0usize;
    if let Ok(dense_dist) = WeightedIndex::new(&big) {
        while b.edges.len() < spec.edges && attempts < 200 * spec.edges {
            attempts += 1;
            let c = &comps[dense_dist.sample(&mut rng)];
            let users: Vec<u32> = c.authors.iter().chain(&c.retweeters).copied().collect();
            let u = users[rng.gen_range(0..users.len())];
            if rng.gen_bool(0.6) {
                if let Some(m) = pick(&mut rng, &c.messages, |m| pull(rumor(m))) {
                    b.edge(u, m, Relation::UserMessage);
                }
            } else {
                let v = users[rng.gen_range(0..users.len())];
                b.edge(u, v, Relation::UserUser);
            }
        }
    }
    if (b.edges.len() as f64) < 0.9 * spec.edges as f64 {
        return Err(HarnessError::Infeasible(format!(
            "components too small for {} edges (reached {})",
            spec.edges,
            b.edges.len()
        )));
    }
    Ok(DatasetSpec {
        name: spec.name.clone(),
        nodes: b.nodes,
        edges: b.edges,
        split: None,
    })
}
