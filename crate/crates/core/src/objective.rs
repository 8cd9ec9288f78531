//! Influence-weighted NDCG over target rumors, its per-step changes, and
//! rank-movement counts.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::RankingSnapshot;
use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("target set is empty")]
    EmptyTargets,
    #[error("target weights sum to zero")]
    ZeroNormalizer,
    #[error("weight of target {0} is negative or not finite")]
    BadWeight(NodeId),
    #[error("cutoff must be positive")]
    ZeroCutoff,
    #[error("target {0} has no rank in the snapshot")]
    MissingTarget(NodeId),
}

/// Which side of the cutoff contributes to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorMode {
    /// Only targets ranked at or above `m` count.
    #[default]
    WithinCutoff,
    /// Literal `rank > m`.
    AsPrinted,
}

impl IndicatorMode {
    fn admits(self, rank: usize, cutoff: usize) -> bool {
        match self {
            IndicatorMode::WithinCutoff => rank <= cutoff,
            IndicatorMode::AsPrinted => rank > cutoff,
        }
    }
}

/// Default cutoff: a tenth of the ranked messages, rounded up.
pub fn default_cutoff(ranked: usize) -> usize {
    (ranked.div_ceil(10)).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    targets: Vec<(NodeId, f64)>,
    cutoff: usize,
    normalizer: f64,
    mode: IndicatorMode,
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Ideal DCG of `weights`: sorted descending, discounted by position.
pub fn ideal_normalizer(weights: &[f64]) -> Result<f64, ObjectiveError> {
    if weights.is_empty() {
        return Err(ObjectiveError::EmptyTargets);
    }
    let mut w = weights.to_vec();
    w.sort_by(|a, b| b.total_cmp(a));
    let z: f64 = w.iter().enumerate().map(|(i, w)| w * discount(i + 1)).sum();
    if z <= 0.0 {
        return Err(ObjectiveError::ZeroNormalizer);
    }
    Ok(z)
}

impl TargetSet {
    pub fn new(
        targets: Vec<(NodeId, f64)>,
        cutoff: usize,
        mode: IndicatorMode,
    ) -> Result<Self, ObjectiveError> {
        if cutoff == 0 {
            return Err(ObjectiveError::ZeroCutoff);
        }
        if let Some(&(v, _)) = targets.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(ObjectiveError::BadWeight(v));
        }
        let weights: Vec<f64> = targets.iter().map(|(_, w)| *w).collect();
        let normalizer = ideal_normalizer(&weights)?;
        Ok(TargetSet {
            targets,
            cutoff,
            normalizer,
            mode,
        })
    }

    pub fn targets(&self) -> &[(NodeId, f64)] {
        &self.targets
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.targets.iter().map(|(v, _)| *v)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.targets.iter().any(|(t, _)| *t == v)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn mode(&self) -> IndicatorMode {
        self.mode
    }
}

pub fn ndcg(targets: &TargetSet, snap: &RankingSnapshot) -> Result<f64, ObjectiveError> {
    let mut dcg = 0.0;
    for &(v, w) in &targets.targets {
        let rank = snap.rank(v).ok_or(ObjectiveError::MissingTarget(v))?;
        if targets.mode.admits(rank, targets.cutoff) {
            dcg += w * discount(rank);
        }
    }
    Ok(dcg / targets.normalizer)
}

pub fn delta_total(j0: f64, jt: f64) -> f64 {
    j0 - jt
}

pub fn delta_step(j_prev: f64, j_cur: f64) -> f64 {
    j_prev - j_cur
}

/// Total rank drop of scoped targets, and total rise of scoped RHMs whose
/// climb crossed a rank a dropping scoped target held before the step.
pub fn tdrop_rrise<F: Fn(NodeId) -> bool>(
    before: &RankingSnapshot,
    after: &RankingSnapshot,
    targets: &TargetSet,
    rhm: &HashSet<NodeId>,
    in_scope: F,
) -> (usize, usize) {
    let mut tdrop = 0;
    let mut vacated = Vec::new();
    for v in targets.ids().filter(|v| in_scope(*v)) {
        if let (Some(b), Some(a)) = (before.rank(v), after.rank(v)) {
            if a > b {
                tdrop += a - b;
                vacated.push(b);
            }
        }
    }
    let mut rrise = 0;
    for &v in rhm.iter().filter(|v| in_scope(**v)) {
        if let (Some(b), Some(a)) = (before.rank(v), after.rank(v)) {
            if a < b && vacated.iter().any(|&r| a <= r && r <= b) {
                rrise += b - a;
            }
        }
    }
    (tdrop, rrise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(ranked: &[(u32, f64)]) -> RankingSnapshot {
        let probs: Vec<_> = ranked.iter().map(|&(i, p)| (NodeId(i), p)).collect();
        RankingSnapshot::from_probabilities(64, &probs, 0)
    }

    /// Snapshot where `order[k]` gets rank k + 1.
    fn ordered(order: &[u32]) -> RankingSnapshot {
        let n = order.len() as f64;
        let probs: Vec<_> = order
            .iter()
            .enumerate()
            .map(|(k, &i)| (i, 1.0 - k as f64 / n))
            .collect();
        snap(&probs)
    }

    #[test]
    fn normalizer_cases() {
        assert_eq!(ideal_normalizer(&[1.0]).unwrap(), 1.0);
        let z = ideal_normalizer(&[0.5, 1.0]).unwrap();
        assert!((z - (1.0 + 0.5 / 3f64.log2())).abs() < 1e-15);
        assert_eq!(z, ideal_normalizer(&[1.0, 0.5]).unwrap());
        assert_eq!(ideal_normalizer(&[]).unwrap_err(), ObjectiveError::EmptyTargets);
        assert_eq!(ideal_normalizer(&[0.0]).unwrap_err(), ObjectiveError::ZeroNormalizer);
    }

    #[test]
    fn hand_evaluated_ndcg() {
        // target 0 at rank 1, target 2 at rank 3
        let s = ordered(&[0, 1, 2, 3, 4, 5]);
        let t = TargetSet::new(vec![(NodeId(0), 1.0), (NodeId(2), 0.5)], 5, IndicatorMode::WithinCutoff).unwrap();
        let z = 1.0 + 0.5 / 3f64.log2();
        let want = (1.0 + 0.5 / 2.0) / z;
        assert!((ndcg(&t, &s).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn targets_below_cutoff_score_zero() {
        let s = ordered(&[0, 1, 2, 3]);
        let t = TargetSet::new(vec![(NodeId(2), 1.0), (NodeId(3), 1.0)], 2, IndicatorMode::WithinCutoff).unwrap();
        assert_eq!(ndcg(&t, &s).unwrap(), 0.0);
        let printed = TargetSet::new(t.targets().to_vec(), 2, IndicatorMode::AsPrinted).unwrap();
        assert!(ndcg(&printed, &s).unwrap() > 0.0);
    }

    #[test]
    fn missing_target_errors() {
        let s = ordered(&[0, 1]);
        let t = TargetSet::new(vec![(NodeId(9), 1.0)], 2, IndicatorMode::WithinCutoff).unwrap();
        assert_eq!(ndcg(&t, &s).unwrap_err(), ObjectiveError::MissingTarget(NodeId(9)));
    }

    #[test]
    fn single_target_drop_two_to_four() {
        let t = TargetSet::new(vec![(NodeId(0), 1.0)], 10, IndicatorMode::WithinCutoff).unwrap();
        let before = ordered(&[1, 0, 2, 3, 4]);
        let after = ordered(&[1, 2, 3, 0, 4]);
        let d = delta_step(ndcg(&t, &before).unwrap(), ndcg(&t, &after).unwrap());
        let want = 1.0 / 3f64.log2() - 1.0 / 5f64.log2();
        assert!((d - want).abs() < 1e-15);
    }

    #[test]
    fn hand_trajectory_telescopes() {
        let t = TargetSet::new(vec![(NodeId(0), 1.0), (NodeId(1), 0.3)], 3, IndicatorMode::WithinCutoff).unwrap();
        let traj = [
            ordered(&[0, 1, 2, 3]),
            ordered(&[1, 0, 2, 3]),
            ordered(&[2, 1, 0, 3]),
            ordered(&[2, 3, 1, 0]),
        ];
        let js: Vec<f64> = traj.iter().map(|s| ndcg(&t, s).unwrap()).collect();
        let steps: f64 = js.windows(2).map(|w| delta_step(w[0], w[1])).sum();
        assert!((steps - delta_total(js[0], js[3])).abs() < 1e-12);
        assert_eq!(delta_total(0.4, 0.4), 0.0);
    }

    #[test]
    fn rank_movement_counts() {
        let t = TargetSet::new(vec![(NodeId(0), 1.0)], 3, IndicatorMode::WithinCutoff).unwrap();
        let rhm: HashSet<_> = [NodeId(1)].into();
        let all = |_: NodeId| true;
        let s = ordered(&[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(tdrop_rrise(&s, &s, &t, &rhm, all), (0, 0));
        // target falls 5 places past non-RHM messages; the RHM stays put
        let base = ordered(&[0, 2, 3, 4, 5, 6, 1]);
        let after = ordered(&[2, 3, 4, 5, 6, 0, 1]);
        assert_eq!(tdrop_rrise(&base, &after, &t, &rhm, all), (5, 0));
        // adjacent swap of target and RHM
        let swapped = ordered(&[1, 0, 2, 3, 4, 5, 6]);
        assert_eq!(tdrop_rrise(&s, &swapped, &t, &rhm, all), (1, 1));
        // out of scope
        assert_eq!(tdrop_rrise(&s, &swapped, &t, &rhm, |_| false), (0, 0));
    }

    proptest! {
        #[test]
        fn ndcg_properties(
            perm in Just((0u32..12).collect::<Vec<_>>()).prop_shuffle(),
            weights in prop::collection::vec(0.01f64..5.0, 4),
            cutoff in 1usize..12,
            demote in 0usize..4,
            extra in 1usize..8,
        ) {
            let t = TargetSet::new(
                (0..4u32).map(|i| (NodeId(i), weights[i as usize])).collect(),
                cutoff,
                IndicatorMode::WithinCutoff,
            ).unwrap();
            let s = ordered(&perm);
            let j = ndcg(&t, &s).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&j));

            // demote one target by swapping with a lower non-target; other
            // target ranks stay fixed
            let pos = perm.iter().position(|&i| i == demote as u32).unwrap();
            let mut moved = perm.clone();
            if let Some(q) = (pos + 1..perm.len()).filter(|&q| perm[q] >= 4).nth(extra - 1) {
                moved.swap(pos, q);
            }
            prop_assert!(ndcg(&t, &ordered(&moved)).unwrap() <= j + 1e-15);

            // shuffle non-targets among their own slots
            let mut others: Vec<u32> = perm.iter().copied().filter(|&i| i >= 4).collect();
            others.reverse();
            let mut it = others.into_iter();
            let shuffled: Vec<u32> = perm.iter().map(|&i| if i < 4 { i } else { it.next().unwrap() }).collect();
            prop_assert_eq!(ndcg(&t, &ordered(&shuffled)).unwrap(), j);
        }
    }
}
