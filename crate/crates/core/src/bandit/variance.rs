use serde::{Deserialize, Serialize};

use super::{BanditError, LinUcbPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    /// Pooled variance of all rewards.
    pub sigma2: f64,
    /// Pooled variance after subtracting each column's mean.
    pub sigma2_prime: f64,
    pub pass: bool,
}

/// Compares reward variance before and after removing per-step means.
/// Rows are episodes, columns steps.
pub fn variance_check<R: AsRef<[f64]>>(rows: &[R]) -> Result<VarianceCheck, BanditError> {
    let e = rows.len();
    if e == 0 {
        return Err(BanditError::TooFewSamples { need: 1, got: 0 });
    }
    let t = rows[0].as_ref().len();
    if t == 0 {
        return Err(BanditError::TooFewSamples { need: 1, got: 0 });
    }
    if rows.iter().any(|r| r.as_ref().len() != t) {
        return Err(BanditError::Ragged);
    }
    let n = (e * t) as f64;
    let mut col_mean = vec![0.0; t];
    for r in rows {
        for (m, v) in col_mean.iter_mut().zip(r.as_ref()) {
            *m += v / e as f64;
        }
    }
    let mean = col_mean.iter().sum::<f64>() / t as f64;
    let (mut s, mut s_prime) = (0.0, 0.0);
    for r in rows {
        for (v, m) in r.as_ref().iter().zip(&col_mean) {
            s += (v - mean).powi(2);
            s_prime += (v - m).powi(2);
        }
    }
    let (sigma2, sigma2_prime) = (s / n, s_prime / n);
    Ok(VarianceCheck {
        sigma2,
        sigma2_prime,
        pass: sigma2 >= sigma2_prime - 1e-12,
    })
}

/// Maximum-likelihood noise variance `1/β` from residuals `r̃ − θᵀx`.
pub fn inv_beta_ml(residuals: &[f64]) -> Result<f64, BanditError> {
    if residuals.len() < 2 {
        return Err(BanditError::TooFewSamples {
            need: 2,
            got: residuals.len(),
        });
    }
    Ok(residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64)
}

/// `η²(x) = 1/β + xᵀ A⁻¹ x`.
pub fn predictive_variance(inv_beta: f64, policy: &LinUcbPolicy, x: &[f64]) -> f64 {
    inv_beta + policy.uncertainty(x)
}
