//! Linear UCB policies, reward shaping and variance diagnostics.

mod reward;
mod variance;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reward::{Baseline, BaselineMode, CreditMode, RewardShaper, ShapedEpisode, ShaperBounds, StepContext};
pub use variance::{inv_beta_ml, predictive_variance, variance_check, VarianceCheck};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    #[error("no candidate actions")]
    NoCandidates,
    #[error("expected dimension {want}, got {got}")]
    Dimension { want: usize, got: usize },
    #[error("design matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("reward shaper is not calibrated")]
    Uncalibrated,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("reward matrix rows have different lengths")]
    Ragged,
    #[error("checkpoint schema {found} does not match current schema {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// `θ = A⁻¹ b` with `A = I + Σ x xᵀ`, `b = Σ r x`; updated once per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbPolicy {
    alpha: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
    a_inv: DMatrix<f64>,
    theta: DVector<f64>,
}

impl LinUcbPolicy {
    pub fn new(dim: usize, alpha: f64) -> Self {
        LinUcbPolicy {
            alpha,
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
            a_inv: DMatrix::identity(dim, dim),
            theta: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    /// `xᵀ A⁻¹ x`.
    pub fn uncertainty(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for j in 0..d {
            if x[j] == 0.0 {
                continue;
            }
            let col = self.a_inv.column(j);
            let mut s = 0.0;
            for i in 0..d {
                s += col[i] * x[i];
            }
            total += x[j] * s;
        }
        total
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(t, v)| t * v).sum()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let bonus = if self.alpha == 0.0 {
            0.0
        } else {
            self.alpha * self.uncertainty(x).max(0.0).sqrt()
        };
        self.predict(x) + bonus
    }

    pub fn scores<X: AsRef<[f64]>>(&self, candidates: &[X]) -> Result<Vec<f64>, BanditError> {
        candidates
            .iter()
            .map(|x| {
                let x = x.as_ref();
                if x.len() != self.dim() {
                    return Err(BanditError::Dimension {
                        want: self.dim(),
                        got: x.len(),
                    });
                }
                Ok(self.score(x))
            })
            .collect()
    }

    /// Highest-scoring candidate; ties go to the lowest index.
    pub fn select<X: AsRef<[f64]>>(&self, candidates: &[X]) -> Result<usize, BanditError> {
        if candidates.is_empty() {
            return Err(BanditError::NoCandidates);
        }
        Ok(preference_order(&self.scores(candidates)?)[0])
    }

    /// Folds one episode of `(x, r̃)` samples and re-solves for θ.
    pub fn episode_update<X: AsRef<[f64]>>(&mut self, samples: &[(X, f64)]) -> Result<(), BanditError> {
        if samples.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        for (x, r) in samples {
            let x = x.as_ref();
            if x.len() != d {
                return Err(BanditError::Dimension { want: d, got: x.len() });
            }
            let xv = DVector::from_column_slice(x);
            self.a.ger(1.0, &xv, &xv, 1.0);
            self.b.axpy(*r, &xv, 1.0);
        }
        self.resolve()
    }

    fn resolve(&mut self) -> Result<(), BanditError> {
        let chol = self.a.clone().cholesky().ok_or(BanditError::NotPositiveDefinite)?;
        self.theta = chol.solve(&self.b);
        self.a_inv = chol.inverse();
        Ok(())
    }

    pub fn to_checkpoint(&self, level: &str, schema_hash: &str) -> PolicyCheckpoint {
        let d = self.dim();
        let mut a = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                a.push(self.a[(r, c)]);
            }
        }
        PolicyCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            level: level.into(),
            schema_hash: schema_hash.into(),
            dim: d,
            alpha: self.alpha,
            a,
            b: self.b.iter().copied().collect(),
            theta: self.theta.iter().copied().collect(),
        }
    }

    /// Rebuilds a policy, rejecting checkpoints saved under another feature
    /// schema.
    pub fn from_checkpoint(ck: &PolicyCheckpoint, schema_hash: &str) -> Result<Self, BanditError> {
        if ck.schema_hash != schema_hash {
            return Err(BanditError::SchemaMismatch {
                expected: schema_hash.into(),
                found: ck.schema_hash.clone(),
            });
        }
        let d = ck.dim;
        if ck.format != CHECKPOINT_FORMAT || ck.a.len() != d * d || ck.b.len() != d || ck.theta.len() != d {
            return Err(BanditError::Checkpoint("malformed policy checkpoint".into()));
        }
        let mut p = LinUcbPolicy {
            alpha: ck.alpha,
            a: DMatrix::from_row_slice(d, d, &ck.a),
            b: DVector::from_column_slice(&ck.b),
            a_inv: DMatrix::identity(d, d),
            theta: DVector::zeros(d),
        };
        p.resolve()?;
        Ok(p)
    }
}

/// Indices sorted by score, highest first, ties by index.
pub fn preference_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx
}

const CHECKPOINT_FORMAT: &str = "rumorlab-linucb";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub level: String,
    pub schema_hash: String,
    pub dim: usize,
    pub alpha: f64,
    /// Row-major.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `(XᵀX + I)⁻¹ Xᵀ r` over all rows of `x`.
pub fn closed_form_theta<X: AsRef<[f64]>>(dim: usize, x: &[X], r: &[f64]) -> Result<DVector<f64>, BanditError> {
    if x.len() != r.len() {
        return Err(BanditError::Dimension {
            want: x.len(),
            got: r.len(),
        });
    }
    let mut m = DMatrix::zeros(x.len(), dim);
    for (i, row) in x.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(BanditError::Dimension { want: dim, got: row.len() });
        }
        for j in 0..dim {
            m[(i, j)] = row[j];
        }
    }
    let rv = DVector::from_column_slice(r);
    let lhs = m.transpose() * &m + DMatrix::identity(dim, dim);
    let rhs = m.transpose() * rv;
    let chol = lhs.cholesky().ok_or(BanditError::NotPositiveDefinite)?;
    Ok(chol.solve(&rhs))
}
