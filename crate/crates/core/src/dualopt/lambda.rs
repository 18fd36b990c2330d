use serde::{Deserialize, Serialize};

use super::basis::BasisMap;
use crate::error::{MdcpError, Result};

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `lambda_k(x) = softplus(Lambda(x) . theta_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaModel {
    pub basis: BasisMap,
    /// `theta[k]` has one entry per basis feature.
    pub theta: Vec<Vec<f64>>,
}

impl LambdaModel {
    pub fn zeros(basis: BasisMap, k: usize) -> Self {
        let m = basis.dim();
        Self {
            basis,
            theta: vec![vec![0.0; m]; k],
        }
    }

    pub fn new(basis: BasisMap, theta: Vec<Vec<f64>>) -> Result<Self> {
        let m = basis.dim();
        if theta.is_empty() || theta.iter().any(|t| t.len() != m) {
            return Err(MdcpError::Invalid(format!("theta must be K x {m}")));
        }
        if theta.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MdcpError::NonFinite("theta".into()));
        }
        Ok(Self { basis, theta })
    }

    pub fn num_sources(&self) -> usize {
        self.theta.len()
    }

    /// Multipliers from precomputed basis features.
    pub fn lambda_from_features(&self, feats: &[f64]) -> Vec<f64> {
        self.theta
            .iter()
            .map(|t| softplus(t.iter().zip(feats).map(|(a, b)| a * b).sum()))
            .collect()
    }

    pub fn lambda_at(&self, x: &[f64]) -> Vec<f64> {
        self.lambda_from_features(&self.basis.features(x))
    }
}
