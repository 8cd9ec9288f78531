//! Rule-based comparison attackers.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{AttackEnv, EnvError};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Random,
    RandomPlus,
    Degree,
    Influence,
    Dcg,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Random,
        RuleKind::RandomPlus,
        RuleKind::Degree,
        RuleKind::Influence,
        RuleKind::Dcg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Random => "random",
            RuleKind::RandomPlus => "random-plus",
            RuleKind::Degree => "degree",
            RuleKind::Influence => "influence",
            RuleKind::Dcg => "dcg",
        }
    }

    /// Random has no variants.
    pub fn has_variants(self) -> bool {
        self != RuleKind::Random
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Good user joined to a target rumor.
    GuR,
    /// A target rumor's author joined to a non-rumor.
    BuN,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::GuR => "gu-r",
            Variant::BuN => "bu-n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleStrategy {
    pub kind: RuleKind,
    pub variant: Variant,
}

impl fmt::Display for RuleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.has_variants() {
            write!(f, "{}/{}", self.kind.name(), self.variant.name())
        } else {
            f.write_str(self.kind.name())
        }
    }
}

/// `w / log2(rank + 1)`.
pub fn dcg_score(weight: f64, rank: usize) -> f64 {
    weight / ((rank + 1) as f64).log2()
}

fn admissible(env: &AttackEnv, u: NodeId, m: NodeId) -> bool {
    !env.graph().has_edge(u, m)
}

fn good_users(env: &AttackEnv) -> Vec<NodeId> {
    env.controllable_users()
        .iter()
        .copied()
        .filter(|u| !env.roles().is_bad(*u))
        .collect()
}

fn nonrumors(env: &AttackEnv) -> Vec<NodeId> {
    env.controllable_messages()
        .iter()
        .copied()
        .filter(|m| env.graph().kind(*m).is_nonrumor())
        .collect()
}

/// Admissible partners for target `m` under `variant`, as (user, message).
fn partners(env: &AttackEnv, m: NodeId, variant: Variant) -> Vec<(NodeId, NodeId)> {
    match variant {
        Variant::GuR => good_users(env)
            .into_iter()
            .filter(|u| admissible(env, *u, m))
            .map(|u| (u, m))
            .collect(),
        Variant::BuN => match env.author_of(m) {
            Some(a) if env.is_controllable(a) => nonrumors(env)
                .into_iter()
                .filter(|n| admissible(env, a, *n))
                .map(|n| (a, n))
                .collect(),
            _ => Vec::new(),
        },
    }
}

/// Next edge for `strategy`, or `None` when it has no admissible move.
pub fn select_rule_action<R: Rng>(env: &AttackEnv, strategy: RuleStrategy, rng: &mut R) -> Option<(NodeId, NodeId)> {
    match strategy.kind {
        RuleKind::Random => {
            let pool: Vec<(NodeId, NodeId)> = env
                .controllable_users()
                .iter()
                .flat_map(|&u| env.controllable_messages().iter().map(move |&m| (u, m)))
                .filter(|&(u, m)| admissible(env, u, m))
                .collect();
            pool.choose(rng).copied()
        }
        RuleKind::RandomPlus => {
            let pool: Vec<(NodeId, NodeId)> = match strategy.variant {
                Variant::GuR => env.targets().ids().flat_map(|m| partners(env, m, Variant::GuR)).collect(),
                Variant::BuN => {
                    let mut bad: Vec<NodeId> = env
                        .targets()
                        .ids()
                        .filter_map(|m| env.author_of(m))
                        .filter(|a| env.is_controllable(*a))
                        .collect();
                    bad.sort();
                    bad.dedup();
                    let non = nonrumors(env);
                    bad.iter()
                        .flat_map(|&a| non.iter().map(move |&n| (a, n)))
                        .filter(|&(a, n)| admissible(env, a, n))
                        .collect()
                }
            };
            pool.choose(rng).copied()
        }
        RuleKind::Degree | RuleKind::Influence | RuleKind::Dcg => {
            let snap = env.snapshot();
            let mut ranked: Vec<(f64, NodeId)> = env
                .targets()
                .targets()
                .iter()
                .map(|&(m, w)| {
                    let c = match strategy.kind {
                        RuleKind::Degree => env.graph().degree(m) as f64,
                        RuleKind::Influence => env.influence().score(m),
                        _ => dcg_score(w, snap.rank(m).unwrap_or(usize::MAX - 1)),
                    };
                    (c, m)
                })
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            ranked.into_iter().find_map(|(_, m)| partners(env, m, strategy.variant).choose(rng).copied())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEpisode {
    pub deltas: Vec<f64>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub j0: f64,
    pub jt: f64,
    pub total: f64,
    /// Ran out of admissible moves before the horizon.
    pub truncated: bool,
}

pub fn run_rule_episode<R: Rng>(env: &mut AttackEnv, strategy: RuleStrategy, rng: &mut R) -> Result<RuleEpisode, EnvError> {
    env.reset();
    let mut deltas = Vec::with_capacity(env.horizon());
    let mut edges = Vec::with_capacity(env.horizon());
    let mut truncated = false;
    while env.t() < env.horizon() {
        let Some((u, m)) = select_rule_action(env, strategy, rng) else {
            truncated = true;
            break;
        };
        deltas.push(env.apply_edge(u, m)?);
        edges.push((u, m));
    }
    Ok(RuleEpisode {
        total: deltas.iter().sum(),
        deltas,
        edges,
        j0: env.j0(),
        jt: env.j(),
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummary {
    pub strategy: RuleStrategy,
    pub totals: Vec<f64>,
    pub mean: f64,
}

/// Mean total ΔNDCG over `repetitions` independent episodes.
pub fn run_rule_attack<R: Rng>(
    env: &mut AttackEnv,
    strategy: RuleStrategy,
    repetitions: usize,
    rng: &mut R,
) -> Result<RuleSummary, EnvError> {
    let mut totals = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        totals.push(run_rule_episode(env, strategy, rng)?.total);
    }
    let mean = if totals.is_empty() {
        0.0
    } else {
        totals.iter().sum::<f64>() / totals.len() as f64
    };
    Ok(RuleSummary { strategy, totals, mean })
}

/// Both variants of `kind` and the better of the two.
pub fn run_best_of_both<R: Rng>(
    env: &mut AttackEnv,
    kind: RuleKind,
    repetitions: usize,
    rng: &mut R,
) -> Result<(RuleSummary, RuleSummary), EnvError> {
    let gur = run_rule_attack(env, RuleStrategy { kind, variant: Variant::GuR }, repetitions, rng)?;
    let bun = run_rule_attack(env, RuleStrategy { kind, variant: Variant::BuN }, repetitions, rng)?;
    Ok((gur, bun))
}

pub fn best(a: &RuleSummary, b: &RuleSummary) -> RuleSummary {
    if b.mean > a.mean {
        b.clone()
    } else {
        a.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvConfig;
    use crate::testutil::{cascades, small_detector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(n: u32, controlled: u32, horizon: usize) -> AttackEnv {
        let setup = cascades(n, controlled);
        let det = small_detector(&setup.graph);
        AttackEnv::new(setup, det, EnvConfig { horizon, ..Default::default() }).unwrap()
    }

    fn all_strategies() -> Vec<RuleStrategy> {
        RuleKind::ALL
            .iter()
            .flat_map(|&kind| [Variant::GuR, Variant::BuN].map(|variant| RuleStrategy { kind, variant }))
            .collect()
    }

    #[test]
    fn single_target_is_chosen_by_every_criterion() {
        // cascades 0 and 1 controllable; only message 1 is a target
        let e = env(6, 2, 3);
        assert_eq!(e.targets().len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [RuleKind::Degree, RuleKind::Influence, RuleKind::Dcg] {
            let (u, m) = select_rule_action(&e, RuleStrategy { kind, variant: Variant::GuR }, &mut rng).unwrap();
            assert_eq!(m, NodeId(1));
            assert_eq!(u, NodeId(4));
        }
    }

    #[test]
    fn dcg_criterion_prefers_higher_discounted_weight() {
        assert!(dcg_score(0.9, 2) > dcg_score(1.0, 5));
        assert!((dcg_score(0.9, 2) - 0.9 / 3f64.log2()).abs() < 1e-15);
        // positive rescaling keeps the order
        assert!(dcg_score(9.0, 2) > dcg_score(10.0, 5));
    }

    #[test]
    fn zero_horizon_is_zero() {
        let mut e = env(6, 4, 0);
        let s = run_rule_attack(&mut e, RuleStrategy { kind: RuleKind::Dcg, variant: Variant::GuR }, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn rules_add_only_admissible_unique_edges() {
        let mut e = env(12, 8, 6);
        let clean = e.clean_graph().clone();
        for s in all_strategies() {
            let ep = run_rule_episode(&mut e, s, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for &(u, m) in &ep.edges {
                assert!(e.is_controllable(u) && e.is_controllable(m), "{s}");
                assert!(clean.kind(u).is_user() && clean.kind(m).is_message());
                assert!(!clean.has_edge(u, m));
                assert!(seen.insert((u, m)));
            }
            assert!((ep.total - (ep.j0 - ep.jt)).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_random_repeats() {
        let mut e = env(12, 8, 5);
        let s = RuleStrategy { kind: RuleKind::Random, variant: Variant::GuR };
        let a = run_rule_episode(&mut e, s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = run_rule_episode(&mut e, s, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        let r1 = run_rule_attack(&mut e, s, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let r2 = run_rule_attack(&mut e, s, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(r1.mean, r2.mean);
    }

    #[test]
    fn variants_respect_roles() {
        let mut e = env(12, 8, 4);
        let gur = run_rule_episode(&mut e, RuleStrategy { kind: RuleKind::RandomPlus, variant: Variant::GuR }, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (u, m) in gur.edges {
            assert!(!e.roles().is_bad(u));
            assert!(e.targets().contains(m));
        }
        let bun = run_rule_episode(&mut e, RuleStrategy { kind: RuleKind::Dcg, variant: Variant::BuN }, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for (u, m) in bun.edges {
            assert!(e.roles().is_bad(u));
            assert!(e.clean_graph().kind(m).is_nonrumor());
        }
    }
}
