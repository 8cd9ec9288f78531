use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AttackEnv, EnvError, NodeAction, SubgraphAction};
use crate::bandit::{preference_order, LinUcbPolicy, RewardShaper, StepContext};
use crate::features::Level;
use crate::graph::NodeId;
use crate::objective::{self, tdrop_rrise};

/// The two-level learned attacker.
#[derive(Debug, Clone)]
pub struct Agent {
    pub subgraph: LinUcbPolicy,
    pub node: LinUcbPolicy,
    pub shaper: RewardShaper,
}

impl Agent {
    pub fn new(alpha: f64, shaper: RewardShaper) -> Self {
        Agent {
            subgraph: LinUcbPolicy::new(Level::Subgraph.pair_dim(), alpha),
            node: LinUcbPolicy::new(Level::Node.pair_dim(), alpha),
            shaper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub subgraph_action: SubgraphAction,
    pub node_action: NodeAction,
    pub user: NodeId,
    pub message: NodeId,
    pub delta: f64,
    pub j_after: f64,
    pub reward: f64,
    pub adjusted: f64,
    pub tdrop: usize,
    pub rrise: usize,
    pub a1_size: usize,
    pub a2_size: usize,
    pub subsampled: bool,
    #[serde(skip)]
    pub x_subgraph: Vec<f64>,
    #[serde(skip)]
    pub x_node: Vec<f64>,
    #[serde(skip)]
    pub attack_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepRecord>,
    pub j0: f64,
    pub jt: f64,
    /// Sum of per-step ΔNDCG.
    pub total: f64,
    /// The graph ran out of admissible edges before the horizon.
    pub truncated: bool,
}

impl EpisodeTrace {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn adjusted(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.adjusted).collect()
    }
}

fn subsample<T: Copy, R: Rng>(env: &AttackEnv, items: Vec<T>, rng: &mut R) -> (Vec<T>, bool) {
    match env.cap_indices(items.len(), rng) {
        Some(idx) => (idx.into_iter().map(|i| items[i]).collect(), true),
        None => (items, false),
    }
}

/// Resets `env`, plays one episode with `agent`, and updates both policies
/// once at the end.
pub fn run_episode<R: Rng>(env: &mut AttackEnv, agent: &mut Agent, rng: &mut R) -> Result<EpisodeTrace, EnvError> {
    env.reset();
    let rhm: HashSet<NodeId> = env.graph().messages().filter(|m| env.roles().is_rhm(*m)).collect();
    let mut steps = Vec::with_capacity(env.horizon());
    let mut truncated = false;
    for t in 1..=env.horizon() {
        let (a1, sub1) = subsample(env, env.subgraph_action_space()?, rng);
        let xg = env.subgraph_candidates(&a1);
        let mut chosen = None;
        for i in preference_order(&agent.subgraph.scores(&xg)?) {
            let a2 = env.node_action_space(a1[i]);
            if !a2.is_empty() {
                chosen = Some((i, a2));
                break;
            }
        }
        let Some((gi, a2)) = chosen else {
            truncated = true;
            break;
        };
        let pair: SubgraphAction = a1[gi];
        let (a2, sub2) = subsample(env, a2, rng);
        let xn = env.node_candidates(&a2);
        let ni = agent.node.select(&xn)?;
        let action = a2[ni];
        let (user, message) = env.realize(action).expect("listed actions are admissible");

        let scope: HashSet<NodeId> = env
            .graph()
            .members(pair.gi)
            .iter()
            .chain(env.graph().members(pair.gj))
            .copied()
            .collect();
        let attack_count = env.attack_count(pair);
        let before = env.snapshot().clone();
        let delta = env.step(action)?;
        let (tdrop, rrise) = tdrop_rrise(&before, env.snapshot(), env.targets(), &rhm, |v| scope.contains(&v));
        steps.push(StepRecord {
            t,
            subgraph_action: pair,
            node_action: action,
            user,
            message,
            delta,
            j_after: env.j(),
            reward: 0.0,
            adjusted: 0.0,
            tdrop,
            rrise,
            a1_size: a1.len(),
            a2_size: a2.len(),
            subsampled: sub1 || sub2,
            x_subgraph: xg[gi].clone(),
            x_node: xn[ni].clone(),
            attack_count,
        });
    }

    let contexts: Vec<StepContext> = steps
        .iter()
        .map(|s| StepContext {
            t: s.t,
            attack_count: s.attack_count,
            state: &s.x_subgraph,
        })
        .collect();
    let deltas: Vec<f64> = steps.iter().map(|s| s.delta).collect();
    let shaped = agent.shaper.process_episode(&contexts, &deltas)?;
    drop(contexts);
    for (s, (r, a)) in steps.iter_mut().zip(shaped.raw.iter().zip(&shaped.adjusted)) {
        s.reward = *r;
        s.adjusted = *a;
    }
    let g_samples: Vec<(&[f64], f64)> = steps.iter().map(|s| (s.x_subgraph.as_slice(), s.adjusted)).collect();
    let n_samples: Vec<(&[f64], f64)> = steps.iter().map(|s| (s.x_node.as_slice(), s.adjusted)).collect();
    agent.subgraph.episode_update(&g_samples)?;
    agent.node.episode_update(&n_samples)?;

    Ok(EpisodeTrace {
        total: deltas.iter().sum(),
        j0: env.j0(),
        jt: env.j(),
        steps,
        truncated,
    })
}

impl EpisodeTrace {
    /// `|Σ ΔNDCG(t) − (J(0) − J(T))|`.
    pub fn telescoping_gap(&self) -> f64 {
        (self.total - objective::delta_total(self.j0, self.jt)).abs()
    }
}
