//! Dataset documents: one JSON object with `nodes`, `edges` and `split`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::HarnessError;
use crate::graph::{GraphError, HeteroGraph, NodeId, NodeKind, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Message,
    User,
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Rumor,
    NonRumor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u32,
    pub kind: RecordKind,
    /// Messages only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Posting user; messages only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<u32>,
    /// Users only: has posted at least one message.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_author: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: u32,
    pub dst: u32,
    pub relation: Relation,
}

/// Message-level train/test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    /// Train share of the labeled messages.
    pub ratio: f64,
    pub train: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitRecord {
    pub fn train_size(ratio: f64, labeled: usize) -> usize {
        (ratio * labeled as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
}

fn rec_err(section: &'static str, index: usize, field: &'static str, message: impl Into<String>) -> HarnessError {
    HarnessError::Record {
        section,
        index,
        field,
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, section: &'static str, index: usize, name: &'static str) -> Result<&'a Value, HarnessError> {
    obj.get(name).ok_or_else(|| rec_err(section, index, name, "missing"))
}

fn as_u32(v: &Value, section: &'static str, index: usize, name: &'static str) -> Result<u32, HarnessError> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| rec_err(section, index, name, format!("expected a non-negative integer, found {v}")))
}

fn as_enum<T: for<'de> Deserialize<'de>>(v: &Value, section: &'static str, index: usize, name: &'static str) -> Result<T, HarnessError> {
    serde_json::from_value(v.clone()).map_err(|_| rec_err(section, index, name, format!("unrecognized value {v}")))
}

fn parse_node(index: usize, v: &Value) -> Result<NodeRecord, HarnessError> {
    const S: &str = "nodes";
    let obj = v.as_object().ok_or_else(|| rec_err(S, index, "record", "expected an object"))?;
    for k in obj.keys() {
        if !["id", "kind", "label", "author", "is_author"].contains(&k.as_str()) {
            return Err(rec_err(S, index, "record", format!("unknown field `{k}`")));
        }
    }
    let id = as_u32(field(obj, S, index, "id")?, S, index, "id")?;
    let kind: RecordKind = as_enum(field(obj, S, index, "kind")?, S, index, "kind")?;
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(l) => Some(as_enum::<Label>(l, S, index, "label")?),
    };
    let author = match obj.get("author") {
        None | Some(Value::Null) => None,
        Some(a) => Some(as_u32(a, S, index, "author")?),
    };
    let is_author = match obj.get("is_author") {
        None | Some(Value::Null) => false,
        Some(b) => b
            .as_bool()
            .ok_or_else(|| rec_err(S, index, "is_author", format!("expected a boolean, found {b}")))?,
    };
    if label.is_some() && kind != RecordKind::Message {
        return Err(rec_err(S, index, "label", "labels are only allowed on messages"));
    }
    if author.is_some() && kind != RecordKind::Message {
        return Err(rec_err(S, index, "author", "only messages have authors"));
    }
    if is_author && kind != RecordKind::User {
        return Err(rec_err(S, index, "is_author", "only users can be authors"));
    }
    Ok(NodeRecord {
        id,
        kind,
        label,
        author,
        is_author,
    })
}

fn parse_edge(index: usize, v: &Value) -> Result<EdgeRecord, HarnessError> {
    const S: &str = "edges";
    let obj = v.as_object().ok_or_else(|| rec_err(S, index, "record", "expected an object"))?;
    Ok(EdgeRecord {
        src: as_u32(field(obj, S, index, "src")?, S, index, "src")?,
        dst: as_u32(field(obj, S, index, "dst")?, S, index, "dst")?,
        relation: as_enum(field(obj, S, index, "relation")?, S, index, "relation")?,
    })
}

fn parse_ids(v: &Value, field_name: &'static str) -> Result<Vec<u32>, HarnessError> {
    let arr = v
        .as_array()
        .ok_or_else(|| rec_err("split", 0, field_name, "expected an array of node ids"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_u32(x, "split", i, field_name))
        .collect()
}

impl DatasetSpec {
    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| HarnessError::Parse("top level must be an object".into()))?;
        let name = obj.get("name").and_then(Value::as_str).unwrap_or("dataset").to_string();
        let nodes = obj
            .get("nodes")
            .and_then(Value::as_array)
            .ok_or_else(|| HarnessError::Parse("missing `nodes` array".into()))?
            .iter()
            .enumerate()
            .map(|(i, v)| parse_node(i, v))
            .collect::<Result<Vec<_>, _>>()?;
        let edges = obj
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| HarnessError::Parse("missing `edges` array".into()))?
            .iter()
            .enumerate()
            .map(|(i, v)| parse_edge(i, v))
            .collect::<Result<Vec<_>, _>>()?;
        let split = match obj.get("split") {
            None | Some(Value::Null) => None,
            Some(s) => {
                let so = s
                    .as_object()
                    .ok_or_else(|| rec_err("split", 0, "record", "expected an object"))?;
                let ratio = field(so, "split", 0, "ratio")?
                    .as_f64()
                    .ok_or_else(|| rec_err("split", 0, "ratio", "expected a number"))?;
                Some(SplitRecord {
                    ratio,
                    train: parse_ids(field(so, "split", 0, "train")?, "train")?,
                    test: parse_ids(field(so, "split", 0, "test")?, "test")?,
                })
            }
        };
        let spec = DatasetSpec {
            name,
            nodes,
            edges,
            split,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    /// Cross-record checks that single records cannot see.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.nodes.is_empty() {
            return Err(HarnessError::NoNodes);
        }
        let n = self.nodes.len();
        let mut kind_of = vec![None; n];
        for (i, r) in self.nodes.iter().enumerate() {
            let slot = kind_of
                .get_mut(r.id as usize)
                .ok_or_else(|| rec_err("nodes", i, "id", format!("id {} is outside 0..{n}", r.id)))?;
            if slot.is_some() {
                return Err(rec_err("nodes", i, "id", format!("duplicate id {}", r.id)));
            }
            *slot = Some(r.kind);
        }
        for (i, r) in self.nodes.iter().enumerate() {
            if let Some(a) = r.author {
                if kind_of.get(a as usize).copied().flatten() != Some(RecordKind::User) {
                    return Err(rec_err("nodes", i, "author", format!("{a} is not a user")));
                }
            }
        }
        if let Some(s) = &self.split {
            if !(s.ratio > 0.0 && s.ratio < 1.0) {
                return Err(rec_err("split", 0, "ratio", format!("{} is outside (0, 1)", s.ratio)));
            }
            let labeled: HashSet<u32> = self.nodes.iter().filter(|r| r.label.is_some()).map(|r| r.id).collect();
            let mut seen = HashSet::new();
            for (fname, ids) in [("train", &s.train), ("test", &s.test)] {
                for (i, id) in ids.iter().enumerate() {
                    if !labeled.contains(id) {
                        return Err(rec_err("split", i, fname, format!("{id} is not a labeled message")));
                    }
                    if !seen.insert(*id) {
                        return Err(rec_err("split", i, fname, format!("{id} appears twice")));
                    }
                }
            }
            let total = s.train.len() + s.test.len();
            if s.train.len() != SplitRecord::train_size(s.ratio, total) {
                return Err(rec_err(
                    "split",
                    0,
                    "ratio",
                    format!("{} train of {total} does not match ratio {}", s.train.len(), s.ratio),
                ));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<HeteroGraph, HarnessError> {
        let nodes: Vec<(NodeId, NodeKind)> = self
            .nodes
            .iter()
            .map(|r| {
                let kind = match r.kind {
                    RecordKind::Message => NodeKind::Message {
                        is_rumor: r.label.map(|l| l == Label::Rumor),
                    },
                    RecordKind::User => NodeKind::User { is_author: r.is_author },
                    RecordKind::Comment => NodeKind::Comment,
                };
                (NodeId(r.id), kind)
            })
            .collect();
        let edges: Vec<(NodeId, NodeId, Relation)> =
            self.edges.iter().map(|e| (NodeId(e.src), NodeId(e.dst), e.relation)).collect();
        HeteroGraph::build(&nodes, &edges).map_err(|e| match e {
            GraphError::NoNodes => HarnessError::NoNodes,
            e => HarnessError::Graph(e),
        })
    }

    /// `(message, is_rumor)` for every labeled message, by id.
    pub fn labels(&self) -> Vec<(NodeId, bool)> {
        let mut out: Vec<(NodeId, bool)> = self
            .nodes
            .iter()
            .filter_map(|r| r.label.map(|l| (NodeId(r.id), l == Label::Rumor)))
            .collect();
        out.sort();
        out
    }

    /// `(message, author)` pairs, by message id.
    pub fn authorship(&self) -> Vec<(NodeId, NodeId)> {
        let mut out: Vec<(NodeId, NodeId)> = self
            .nodes
            .iter()
            .filter_map(|r| r.author.map(|a| (NodeId(r.id), NodeId(a))))
            .collect();
        out.sort();
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        fs::write(path, self.to_json_string()).map_err(|e| HarnessError::io(path, e))
    }
}

/// Reads, validates and builds a dataset.
pub fn load_dataset(path: &Path) -> Result<(DatasetSpec, HeteroGraph), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let spec = DatasetSpec::from_json_str(&text)?;
    let g = spec.graph()?;
    Ok((spec, g))
}

/// Node, edge and component counts by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub nodes: usize,
    pub edges: usize,
    pub components: usize,
    pub rumors: usize,
    pub nonrumors: usize,
    pub authors: usize,
    pub retweeters: usize,
    pub comments: usize,
}

impl DatasetSummary {
    pub fn of(g: &HeteroGraph) -> Self {
        let mut s = DatasetSummary {
            nodes: g.num_nodes(),
            edges: g.num_edges(),
            components: g.num_components(),
            rumors: 0,
            nonrumors: 0,
            authors: 0,
            retweeters: 0,
            comments: 0,
        };
        for &k in g.kinds() {
            match k {
                NodeKind::Message { is_rumor: Some(true) } => s.rumors += 1,
                NodeKind::Message { is_rumor: Some(false) } => s.nonrumors += 1,
                NodeKind::Message { is_rumor: None } => {}
                NodeKind::User { is_author: true } => s.authors += 1,
                NodeKind::User { is_author: false } => s.retweeters += 1,
                NodeKind::Comment => s.comments += 1,
            }
        }
        s
    }
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Nodes", self.nodes),
            ("Edges", self.edges),
            ("Subgraphs", self.components),
            ("Rumors", self.rumors),
            ("Non-rumors", self.nonrumors),
            ("Authors", self.authors),
            ("Retweeters", self.retweeters),
            ("Comments", self.comments),
        ];
        for (name, v) in rows {
            writeln!(f, "{name:<11}{v:>8}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "name": "tiny",
        "nodes": [
            {"id": 0, "kind": "user", "is_author": true},
            {"id": 1, "kind": "message", "label": "rumor", "author": 0},
            {"id": 2, "kind": "user"},
            {"id": 3, "kind": "comment"},
            {"id": 4, "kind": "message", "label": "non-rumor", "author": 0}
        ],
        "edges": [
            {"src": 0, "dst": 1, "relation": "l1"},
            {"src": 2, "dst": 1, "relation": "l1"},
            {"src": 1, "dst": 3, "relation": "l2"},
            {"src": 0, "dst": 4, "relation": "l1"}
        ],
        "split": {"ratio": 0.5, "train": [1], "test": [4]}
    }"#;

    #[test]
    fn parses_and_builds() {
        let spec = DatasetSpec::from_json_str(TINY).unwrap();
        let g = spec.graph().unwrap();
        let s = DatasetSummary::of(&g);
        assert_eq!((s.nodes, s.edges, s.components, s.rumors, s.nonrumors), (5, 4, 1, 1, 1));
        assert_eq!((s.authors, s.retweeters, s.comments), (1, 1, 1));
        assert_eq!(spec.labels(), vec![(NodeId(1), true), (NodeId(4), false)]);
        assert_eq!(spec.authorship(), vec![(NodeId(1), NodeId(0)), (NodeId(4), NodeId(0))]);
    }

    #[test]
    fn empty_node_list() {
        let e = DatasetSpec::from_json_str(r#"{"nodes": [], "edges": []}"#).unwrap_err();
        assert_eq!(e.to_string(), "no nodes");
    }

    fn err_of(text: &str) -> String {
        DatasetSpec::from_json_str(text).unwrap_err().to_string()
    }

    #[test]
    fn errors_name_record_and_field() {
        let bad_kind = TINY.replace(r#""id": 2, "kind": "user""#, r#""id": 2, "kind": "bot""#);
        assert!(err_of(&bad_kind).starts_with("nodes[2].kind:"), "{}", err_of(&bad_kind));
        let label_on_user = TINY.replace(r#""id": 2, "kind": "user""#, r#""id": 2, "kind": "user", "label": "rumor""#);
        assert!(err_of(&label_on_user).starts_with("nodes[2].label:"));
        let bad_rel = TINY.replace(r#""dst": 3, "relation": "l2""#, r#""dst": 3, "relation": "l9""#);
        assert!(err_of(&bad_rel).starts_with("edges[2].relation:"));
        let no_src = TINY.replace(r#"{"src": 0, "dst": 4, "relation": "l1"}"#, r#"{"dst": 4, "relation": "l1"}"#);
        assert!(err_of(&no_src).starts_with("edges[3].src: missing"));
        let bad_author = TINY.replace(r#""author": 0}"#, r#""author": 3}"#);
        assert!(err_of(&bad_author).contains(".author:"));
        let bad_ratio = TINY.replace(r#""ratio": 0.5"#, r#""ratio": 0.9"#);
        assert!(err_of(&bad_ratio).starts_with("split[0].ratio:"));
        let unlabeled = TINY.replace(r#""train": [1]"#, r#""train": [2]"#);
        assert!(err_of(&unlabeled).starts_with("split[0].train:"));
    }

    #[test]
    fn kind_mismatch_surfaces_from_graph() {
        let t = TINY.replace(r#""dst": 3, "relation": "l2""#, r#""dst": 3, "relation": "l1""#);
        let spec = DatasetSpec::from_json_str(&t).unwrap();
        assert!(matches!(spec.graph(), Err(HarnessError::Graph(GraphError::KindMismatch { index: 2, .. }))));
    }

    #[test]
    fn save_load_round_trip() {
        let spec = DatasetSpec::from_json_str(TINY).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        spec.save(&p).unwrap();
        let (back, g) = load_dataset(&p).unwrap();
        assert_eq!(back, spec);
        assert_eq!(g.fingerprint(), spec.graph().unwrap().fingerprint());
    }
}
