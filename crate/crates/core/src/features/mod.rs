//! Hand-designed state-action features at subgraph and node level.

mod extract;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::{AttackLog, FeatureContext, RoleConfig, Roles};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("cannot pair a {0:?} vector with a {1:?} vector")]
    SchemaMismatch(Level, Level),
    #[error("{level:?} vector has {got} slots, schema has {want}")]
    WrongLength { level: Level, got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Subgraph,
    Node,
}

pub const K_HOPS: usize = 3;

pub const SUBGRAPH_SLOTS: [&str; 33] = [
    "n_nodes",
    "n_edges",
    "clustering_coefficient",
    "avg_degree",
    "max_degree",
    "min_degree",
    "message_ratio",
    "author_ratio",
    "re_tweeter_ratio",
    "review_ratio",
    "bad_author_ratio",
    "rumor_ratio",
    "rumor_retweet_ratio",
    "rumor_review_ratio",
    "avg_author_inf",
    "max_author_inf",
    "min_author_inf",
    "avg_user_inf",
    "max_user_inf",
    "min_user_inf",
    "avg_rumor_inf",
    "max_rumor_inf",
    "min_rumor_inf",
    "avg_nonrumor_inf",
    "max_nonrumor_inf",
    "min_nonrumor_inf",
    "avg_target_suspicious",
    "max_target_suspicious",
    "min_target_suspicious",
    "attack_degree",
    "avg_rhm_suspicious",
    "max_rhm_suspicious",
    "min_rhm_suspicious",
];

pub const NODE_SLOTS: [&str; 27] = [
    "degree",
    "ego_n_edges",
    "good_bad",
    "node_type_rumor",
    "node_type_nonrumor",
    "node_type_good_author",
    "node_type_bad_author",
    "ego_rumor_ratio",
    "ego_bu_ratio",
    "ego_review_ratio",
    "node_inf",
    "ego_user_inf",
    "ego_message_inf",
    "avg_node_potential",
    "max_node_potential",
    "min_node_potential",
    "avg_neighbor_suspicious",
    "max_neighbor_suspicious",
    "min_neighbor_suspicious",
    "avg_node_attack_degree",
    "max_node_attack_degree",
    "min_node_attack_degree",
    "n_targets",
    "n_targets_distance",
    "avg_rhm_suspicious",
    "max_rhm_suspicious",
    "min_rhm_suspicious",
];

/// Slots whose raw range is not already [0, 1] (counts, degrees,
/// influence); only these are min-max scaled.
fn scaled_slots(level: Level) -> &'static [usize] {
    match level {
        Level::Subgraph => &[0, 1, 3, 4, 5, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25],
        Level::Node => &[0, 1, 10, 11, 12, 22],
    }
}

impl Level {
    pub fn slots(self) -> &'static [&'static str] {
        match self {
            Level::Subgraph => &SUBGRAPH_SLOTS,
            Level::Node => &NODE_SLOTS,
        }
    }

    pub fn dim(self) -> usize {
        self.slots().len()
    }

    /// Dimension of a paired state-action vector.
    pub fn pair_dim(self) -> usize {
        2 * self.dim()
    }

    /// Slot names of a paired vector, prefixed by side (`G_i`/`G_j` or
    /// `v_p`/`v_q`).
    pub fn pair_slot_names(self) -> Vec<String> {
        let (a, b) = match self {
            Level::Subgraph => ("G_i", "G_j"),
            Level::Node => ("v_p", "v_q"),
        };
        [a, b]
            .iter()
            .flat_map(|side| self.slots().iter().map(move |s| format!("{side} {s}")))
            .collect()
    }
}

/// Hash of both slot tables. Policies saved under one schema refuse to load
/// under another.
pub fn schema_hash() -> String {
    let mut h = Sha256::new();
    for level in [Level::Subgraph, Level::Node] {
        h.update(format!("{level:?}:"));
        for s in level.slots() {
            h.update(s.as_bytes());
            h.update(b",");
        }
        for i in scaled_slots(level) {
            h.update(i.to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub index: usize,
    pub name: String,
    pub min_max_scaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDocument {
    pub schema_hash: String,
    pub subgraph: Vec<SlotEntry>,
    pub node: Vec<SlotEntry>,
}

/// Machine-readable slot index table.
pub fn schema_document() -> SchemaDocument {
    let table = |level: Level| {
        let scaled = scaled_slots(level);
        level
            .slots()
            .iter()
            .enumerate()
            .map(|(index, name)| SlotEntry {
                index,
                name: name.to_string(),
                min_max_scaled: scaled.contains(&index),
            })
            .collect()
    };
    SchemaDocument {
        schema_hash: schema_hash(),
        subgraph: table(Level::Subgraph),
        node: table(Level::Node),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    level: Level,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(level: Level, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != level.dim() {
            return Err(FeatureError::WrongLength {
                level,
                got: values.len(),
                want: level.dim(),
            });
        }
        Ok(FeatureVector { level, values })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = self.level.slots().iter().position(|s| *s == name)?;
        Some(self.values[i])
    }
}

/// `a ⊕ b`, with `a` on the target side.
pub fn pair_vector(a: &FeatureVector, b: &FeatureVector) -> Result<Vec<f64>, FeatureError> {
    if a.level != b.level {
        return Err(FeatureError::SchemaMismatch(a.level, b.level));
    }
    let mut x = Vec::with_capacity(a.values.len() * 2);
    x.extend_from_slice(&a.values);
    x.extend_from_slice(&b.values);
    Ok(x)
}

/// Clean-graph ranges of the scaled slots of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBounds {
    pub level: Level,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl SlotBounds {
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(level: Level, rows: I) -> Self {
        let d = level.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            for i in 0..d {
                min[i] = min[i].min(row[i]);
                max[i] = max[i].max(row[i]);
            }
        }
        for i in 0..d {
            if !min[i].is_finite() {
                min[i] = 0.0;
                max[i] = 0.0;
            }
        }
        SlotBounds { level, min, max }
    }

    /// Scaled slots with no spread on the clean graph; they always map to 0.
    pub fn constant_slots(&self) -> Vec<&'static str> {
        scaled_slots(self.level)
            .iter()
            .filter(|&&i| self.max[i] <= self.min[i])
            .map(|&i| self.level.slots()[i])
            .collect()
    }

    pub fn normalize(&self, raw: &[f64]) -> FeatureVector {
        let mut v = raw.to_vec();
        for &i in scaled_slots(self.level) {
            let span = self.max[i] - self.min[i];
            v[i] = if span <= 0.0 {
                0.0
            } else {
                ((raw[i] - self.min[i]) / span).clamp(0.0, 1.0)
            };
        }
        for &i in unscaled(self.level).iter() {
            v[i] = v[i].clamp(0.0, 1.0);
        }
        FeatureVector {
            level: self.level,
            values: v,
        }
    }

    pub fn denormalize(&self, x: &FeatureVector) -> Vec<f64> {
        let mut v = x.values.clone();
        for &i in scaled_slots(self.level) {
            v[i] = self.min[i] + x.values[i] * (self.max[i] - self.min[i]);
        }
        v
    }
}

fn unscaled(level: Level) -> Vec<usize> {
    let s = scaled_slots(level);
    (0..level.dim()).filter(|i| !s.contains(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub subgraph: SlotBounds,
    pub node: SlotBounds,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schema_sizes_and_uniqueness() {
        assert_eq!(Level::Subgraph.dim(), 33);
        assert_eq!(Level::Node.dim(), 27);
        for level in [Level::Subgraph, Level::Node] {
            let mut names = level.slots().to_vec();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), level.dim());
        }
        assert_eq!(schema_hash(), schema_hash());
        assert_eq!(schema_hash().len(), 64);
    }

    #[test]
    fn pair_layout_matches_index_map() {
        let doc = schema_document();
        let a = FeatureVector::new(Level::Subgraph, (0..33).map(|i| i as f64).collect()).unwrap();
        let b = FeatureVector::new(Level::Subgraph, (0..33).map(|i| 100.0 + i as f64).collect()).unwrap();
        let x = pair_vector(&a, &b).unwrap();
        assert_eq!(x.len(), 66);
        let names = Level::Subgraph.pair_slot_names();
        for entry in &doc.subgraph {
            assert_eq!(x[entry.index], entry.index as f64);
            assert_eq!(x[33 + entry.index], 100.0 + entry.index as f64);
            assert_eq!(names[entry.index], format!("G_i {}", entry.name));
            assert_eq!(names[33 + entry.index], format!("G_j {}", entry.name));
        }
        assert_ne!(x, pair_vector(&b, &a).unwrap());
        assert_eq!(doc.node[3].name, "node_type_rumor");
    }

    #[test]
    fn mixed_levels_do_not_pair() {
        let a = FeatureVector::new(Level::Subgraph, vec![0.0; 33]).unwrap();
        let b = FeatureVector::new(Level::Node, vec![0.0; 27]).unwrap();
        assert_eq!(
            pair_vector(&a, &b).unwrap_err(),
            FeatureError::SchemaMismatch(Level::Subgraph, Level::Node)
        );
        assert!(FeatureVector::new(Level::Node, vec![0.0; 3]).is_err());
    }

    #[test]
    fn constant_slot_normalizes_to_zero_and_overflow_clamps() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let mut r = vec![0.5; 27];
                r[0] = 7.0; // constant degree
                r[1] = i as f64;
                r
            })
            .collect();
        let b = SlotBounds::fit(Level::Node, rows.iter().map(Vec::as_slice));
        assert_eq!(b.constant_slots().first(), Some(&"degree"));
        let mut probe = rows[0].clone();
        probe[1] = 99.0;
        let v = b.normalize(&probe);
        assert_eq!(v.values()[0], 0.0);
        assert_eq!(v.values()[1], 1.0);
    }

    proptest! {
        #[test]
        fn normalize_roundtrip_is_clamp(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 33), 1..6),
            probe in prop::collection::vec(-20.0f64..20.0, 33),
        ) {
            let b = SlotBounds::fit(Level::Subgraph, rows.iter().map(Vec::as_slice));
            let n = b.normalize(&probe);
            prop_assert!(n.values().iter().all(|v| (0.0..=1.0).contains(v)));
            let back = b.denormalize(&n);
            for &i in scaled_slots(Level::Subgraph) {
                let want = probe[i].clamp(b.min[i], b.max[i]);
                prop_assert!((back[i] - want).abs() < 1e-12);
            }
        }
    }
}
