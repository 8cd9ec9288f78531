use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BanditError;

/// Affine map of ΔNDCG onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShaperBounds {
    pub min: f64,
    pub max: f64,
}

impl ShaperBounds {
    /// Range of `samples`, widened on each side by `widen` times its span.
    pub fn calibrate(samples: &[f64], widen: f64) -> Result<Self, BanditError> {
        if samples.is_empty() {
            return Err(BanditError::TooFewSamples { need: 1, got: 0 });
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pad = (hi - lo) * widen;
        if pad <= 0.0 {
            pad = (hi.abs().max(lo.abs()) * widen).max(1e-9);
        }
        Ok(ShaperBounds {
            min: lo - pad,
            max: hi + pad,
        })
    }

    pub fn shape(&self, delta: f64) -> f64 {
        ((delta - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CreditMode {
    /// Each step is rewarded with its own ΔNDCG(t).
    #[default]
    StepWise,
    /// Every step receives the episode's total ΔNDCG.
    Delayed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// Running mean of past rewards at the same step index.
    #[default]
    Time,
    /// Running mean of all past rewards.
    Constant,
    /// Running mean keyed by edges already added inside the selection.
    GraphBucket,
    /// Ridge regression of reward on the subgraph-level state vector.
    StateFunction,
    None,
}

/// What a baseline may condition on at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// 1-based step index.
    pub t: usize,
    /// Attack edges previously added inside the selected pair.
    pub attack_count: usize,
    pub state: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Mean {
    value: f64,
    count: u64,
}

impl Mean {
    fn push(&mut self, x: f64, decay: Option<f64>) {
        self.count += 1;
        match decay {
            Some(a) if self.count > 1 => self.value += a * (x - self.value),
            _ => self.value += (x - self.value) / self.count as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Ridge {
    a: DMatrix<f64>,
    b: DVector<f64>,
    w: DVector<f64>,
}

impl Ridge {
    fn new(dim: usize) -> Self {
        Ridge {
            a: DMatrix::identity(dim + 1, dim + 1),
            b: DVector::zeros(dim + 1),
            w: DVector::zeros(dim + 1),
        }
    }

    fn features(state: &[f64]) -> DVector<f64> {
        DVector::from_iterator(state.len() + 1, state.iter().copied().chain([1.0]))
    }

    fn predict(&self, state: &[f64]) -> f64 {
        if state.len() + 1 != self.w.len() {
            return 0.0;
        }
        self.w.dot(&Self::features(state))
    }

    fn push(&mut self, state: &[f64], r: f64) {
        let x = Self::features(state);
        self.a.ger(1.0, &x, &x, 1.0);
        self.b.axpy(r, &x, 1.0);
    }

    fn refit(&mut self) {
        if let Some(chol) = self.a.clone().cholesky() {
            self.w = chol.solve(&self.b);
        }
    }
}

/// Control variate subtracted from shaped rewards. Statistics only include
/// completed episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    mode: BaselineMode,
    decay: Option<f64>,
    per_step: Vec<Mean>,
    overall: Mean,
    buckets: BTreeMap<usize, Mean>,
    ridge: Option<Ridge>,
}

impl Baseline {
    pub fn new(mode: BaselineMode) -> Self {
        Baseline {
            mode,
            decay: None,
            per_step: Vec::new(),
            overall: Mean::default(),
            buckets: BTreeMap::new(),
            ridge: None,
        }
    }

    /// Exponentially weighted means with step size `alpha` instead of
    /// arithmetic means.
    pub fn with_decay(mut self, alpha: f64) -> Self {
        self.decay = Some(alpha);
        self
    }

    pub fn mode(&self) -> BaselineMode {
        self.mode
    }

    pub fn value(&self, ctx: &StepContext) -> f64 {
        match self.mode {
            BaselineMode::Time => self.time_value(ctx.t),
            BaselineMode::Constant => self.overall.value,
            BaselineMode::GraphBucket => self.buckets.get(&ctx.attack_count).map_or(0.0, |m| m.value),
            BaselineMode::StateFunction => self.ridge.as_ref().map_or(0.0, |r| r.predict(ctx.state)),
            BaselineMode::None => 0.0,
        }
    }

    /// `V(t)`; zero before any sample at step `t`.
    pub fn time_value(&self, t: usize) -> f64 {
        self.per_step.get(t.wrapping_sub(1)).map_or(0.0, |m| m.value)
    }

    pub fn time_count(&self, t: usize) -> u64 {
        self.per_step.get(t.wrapping_sub(1)).map_or(0, |m| m.count)
    }

    pub fn record(&mut self, ctx: &StepContext, r: f64) {
        let i = ctx.t.max(1) - 1;
        if self.per_step.len() <= i {
            self.per_step.resize(i + 1, Mean::default());
        }
        self.per_step[i].push(r, self.decay);
        self.overall.push(r, self.decay);
        self.buckets.entry(ctx.attack_count).or_default().push(r, self.decay);
        if self.mode == BaselineMode::StateFunction {
            self.ridge
                .get_or_insert_with(|| Ridge::new(ctx.state.len()))
                .push(ctx.state, r);
        }
    }

    /// Adjusts one episode against the current statistics, then folds the
    /// episode in.
    pub fn adjust_episode(&mut self, steps: &[StepContext], rewards: &[f64]) -> Vec<f64> {
        let adjusted = steps
            .iter()
            .zip(rewards)
            .map(|(c, r)| r - self.value(c))
            .collect();
        for (c, r) in steps.iter().zip(rewards) {
            self.record(c, *r);
        }
        if let Some(r) = self.ridge.as_mut() {
            r.refit();
        }
        adjusted
    }
}

/// Shaped and baseline-adjusted rewards for one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapedEpisode {
    pub raw: Vec<f64>,
    pub adjusted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardShaper {
    pub credit: CreditMode,
    step_bounds: Option<ShaperBounds>,
    delayed_bounds: Option<ShaperBounds>,
    pub baseline: Baseline,
}

impl RewardShaper {
    pub fn new(credit: CreditMode, baseline: Baseline) -> Self {
        RewardShaper {
            credit,
            step_bounds: None,
            delayed_bounds: None,
            baseline,
        }
    }

    pub fn with_bounds(mut self, step: ShaperBounds, delayed: ShaperBounds) -> Self {
        self.step_bounds = Some(step);
        self.delayed_bounds = Some(delayed);
        self
    }

    pub fn step_bounds(&self) -> Option<ShaperBounds> {
        self.step_bounds
    }

    pub fn delayed_bounds(&self) -> Option<ShaperBounds> {
        self.delayed_bounds
    }

    /// Min-max shaping of a single step's ΔNDCG.
    pub fn shape_step(&self, delta: f64) -> Result<f64, BanditError> {
        Ok(self.step_bounds.ok_or(BanditError::Uncalibrated)?.shape(delta))
    }

    pub fn shape_total(&self, total: f64) -> Result<f64, BanditError> {
        Ok(self.delayed_bounds.ok_or(BanditError::Uncalibrated)?.shape(total))
    }

    /// Per-step rewards for an episode with step deltas `deltas`.
    pub fn process_episode(&mut self, steps: &[StepContext], deltas: &[f64]) -> Result<ShapedEpisode, BanditError> {
        let raw = match self.credit {
            CreditMode::StepWise => deltas.iter().map(|d| self.shape_step(*d)).collect::<Result<Vec<_>, _>>()?,
            CreditMode::Delayed => {
                let r = self.shape_total(deltas.iter().sum())?;
                vec![r; deltas.len()]
            }
        };
        let adjusted = self.baseline.adjust_episode(steps, &raw);
        Ok(ShapedEpisode { raw, adjusted })
    }
}
