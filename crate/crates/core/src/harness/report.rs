//! Report rows, CSV files and the feature-importance table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::HarnessError;
use crate::bandit::{BanditError, LinUcbPolicy, PolicyCheckpoint};
use crate::features::{schema_hash, Level};

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub dataset: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub delta_ndcg: f64,
    /// `delta_ndcg` in units of 10⁻².
    pub delta_ndcg_x100: f64,
    pub episodes: usize,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub seed: u64,
    pub episode: usize,
    pub delta_ndcg: f64,
}

/// Reward-variance diagnostics of one learned run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub method: String,
    pub seed: u64,
    /// Full-length episodes the variances are pooled over.
    pub episodes: usize,
    /// Pooled variance of the raw rewards.
    pub sigma2: f64,
    /// Pooled variance after subtracting each step's mean reward.
    pub sigma2_prime: f64,
    pub reduced: bool,
    /// Pooled variance of the logged baseline-adjusted rewards.
    pub adjusted_variance: f64,
    /// Mean squared residual of the subgraph-level regression.
    pub inv_beta: f64,
    pub mean_predictive_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdropRow {
    pub method: String,
    pub seed: u64,
    pub episodes: usize,
    /// Per-episode sums, averaged over the reporting window.
    pub tdrop: f64,
    pub rrise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRow {
    pub seed: u64,
    pub final_loss: f64,
    pub test_accuracy: f64,
    pub test_recall: f64,
    pub test_ndcg: f64,
    pub targets: usize,
    pub controllable: usize,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Mean and spread of one method across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub seeds: usize,
    pub mean: f64,
    pub std: f64,
}

/// Per-method means in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|m| {
            let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.delta_ndcg).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            MethodSummary {
                method: m.to_string(),
                seeds: v.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

pub fn summary_table(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>6} {:>16} {:>10}", "method", "seeds", "ΔNDCG(×10⁻²)", "std");
    for m in summarize(rows) {
        let _ = writeln!(s, "{:<24} {:>6} {:>16.3} {:>10.3}", m.method, m.seeds, 100.0 * m.mean, 100.0 * m.std);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub rank: usize,
    /// Paired slot name such as `G_i n_nodes`.
    pub feature: String,
    pub weight: f64,
}

/// Every slot of both levels, ordered by `|θ|` (ties in schema order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub subgraph: Vec<ImportanceRow>,
    pub node: Vec<ImportanceRow>,
}

fn rank_level(level: Level, ck: &PolicyCheckpoint) -> Result<Vec<ImportanceRow>, BanditError> {
    let policy = LinUcbPolicy::from_checkpoint(ck, &schema_hash())?;
    if policy.dim() != level.pair_dim() {
        return Err(BanditError::Dimension {
            want: level.pair_dim(),
            got: policy.dim(),
        });
    }
    let names = level.pair_slot_names();
    let theta = policy.theta();
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()).then(a.cmp(&b)));
    Ok(idx
        .into_iter()
        .enumerate()
        .map(|(r, i)| ImportanceRow {
            rank: r + 1,
            feature: names[i].clone(),
            weight: theta[i],
        })
        .collect())
}

/// Ranks the features of a subgraph-level and a node-level policy. Fails on
/// checkpoints written under a different feature schema.
pub fn feature_importance_report(subgraph: &PolicyCheckpoint, node: &PolicyCheckpoint) -> Result<ImportanceReport, BanditError> {
    Ok(ImportanceReport {
        subgraph: rank_level(Level::Subgraph, subgraph)?,
        node: rank_level(Level::Node, node)?,
    })
}

impl ImportanceReport {
    /// Top `k` per level as `1. G_i n_nodes 0.087`.
    pub fn top_text(&self, k: usize) -> String {
        let mut s = String::new();
        for (title, rows) in [("Subgraph level", &self.subgraph), ("Node level", &self.node)] {
            let _ = writeln!(s, "{title} (top {})", k.min(rows.len()));
            for r in rows.iter().take(k) {
                let _ = writeln!(s, "{}. {} {:.3}", r.rank, r.feature, r.weight);
            }
            s.push('\n');
        }
        s
    }

    /// All slots with full-precision signed weights.
    pub fn full_text(&self) -> String {
        let mut s = String::from("level,rank,feature,weight\n");
        for (level, rows) in [("subgraph", &self.subgraph), ("node", &self.node)] {
            for r in rows {
                let _ = writeln!(s, "{level},{},{},{}", r.rank, r.feature, r.weight);
            }
        }
        s
    }
}

pub fn read_checkpoint(path: &Path) -> Result<PolicyCheckpoint, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ck(level: Level, nonzero: Option<(usize, f64)>) -> PolicyCheckpoint {
        let mut p = LinUcbPolicy::new(level.pair_dim(), 1.0);
        if let Some((i, r)) = nonzero {
            let mut x = vec![0.0; level.pair_dim()];
            x[i] = 1.0;
            p.episode_update(&[(x, r)]).unwrap();
        }
        p.to_checkpoint(if level == Level::Subgraph { "subgraph" } else { "node" }, &schema_hash())
    }

    #[test]
    fn zero_weights_keep_schema_order() {
        let r = feature_importance_report(&ck(Level::Subgraph, None), &ck(Level::Node, None)).unwrap();
        assert_eq!(r.subgraph.len(), 66);
        assert_eq!(r.node.len(), 54);
        let names = Level::Subgraph.pair_slot_names();
        for (row, name) in r.subgraph.iter().zip(&names) {
            assert_eq!(&row.feature, name);
            assert_eq!(row.weight, 0.0);
        }
    }

    #[test]
    fn single_nonzero_slot_ranks_first() {
        let r = feature_importance_report(&ck(Level::Subgraph, Some((40, -0.5))), &ck(Level::Node, Some((3, 0.2)))).unwrap();
        assert_eq!(r.subgraph[0].feature, Level::Subgraph.pair_slot_names()[40]);
        assert!(r.subgraph[0].weight < 0.0);
        assert_eq!(r.node[0].feature, Level::Node.pair_slot_names()[3]);
        let text = r.top_text(8);
        assert_eq!(text.lines().filter(|l| l.starts_with("1. ")).count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("1. G_j "));
        assert_eq!(r.full_text().lines().count(), 1 + 66 + 54);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut bad = ck(Level::Subgraph, None);
        bad.schema_hash = "0000".into();
        assert!(matches!(
            feature_importance_report(&bad, &ck(Level::Node, None)),
            Err(BanditError::SchemaMismatch { .. })
        ));
        // swapped levels have the wrong dimension
        assert!(feature_importance_report(&ck(Level::Node, None), &ck(Level::Node, None)).is_err());
    }

    #[test]
    fn summary_orders_by_appearance() {
        let row = |m: &str, d: f64| ResultRow {
            method: m.into(),
            dataset: "x".into(),
            t: 20,
            seed: 0,
            delta_ndcg: d,
            delta_ndcg_x100: 100.0 * d,
            episodes: 1,
            notes: String::new(),
        };
        let s = summarize(&[row("b", 0.1), row("a", 0.3), row("b", 0.3)]);
        assert_eq!(s[0].method, "b");
        assert!((s[0].mean - 0.2).abs() < 1e-15);
        assert!((s[0].std - 0.1).abs() < 1e-15);
    }
}
