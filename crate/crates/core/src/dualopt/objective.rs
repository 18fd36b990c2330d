//! Empirical dual objective and its gradient.
//!
//! For a batch `B` of pooled rows,
//!
//! ```text
//! J(theta) = mean_B (1 - h)_- / max(p_pool, floor)
//!          + (1 - alpha) mean_B sum_k lambda_k
//!          - gamma (mean_B sum_k lambda_k^2 + sum_k |D theta_k|^2)
//! ```
//!
//! with `h = sum_k lambda_k f_k(y|x)`, `(t)_- = min(t, 0)` and `D` the
//! second-difference operator inside each coordinate's spline block.

use rayon::prelude::*;

use super::basis::BasisMap;
use super::lambda::{sigmoid, softplus, LambdaModel};
use crate::data::SourceDataset;
use crate::error::{MdcpError, Result};
use crate::models::FittedModels;

/// One training row with everything the objective needs precomputed.
#[derive(Debug, Clone)]
pub struct DualRow {
    pub features: Vec<f64>,
    /// `f_k(y|x)` for every source.
    pub f: Vec<f64>,
    pub p_pool: f64,
}

/// Rows of the objective together with the level and denominator floor.
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub rows: Vec<DualRow>,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub floor: f64,
    /// `(start, len)` of every spline block that the penalty acts on.
    blocks: Vec<(usize, usize)>,
}

/// Objective value split into its parts (all batch means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub hinge: f64,
    pub linear: f64,
    pub penalty: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.hinge + self.linear - self.penalty
    }
}

impl DualProblem {
    pub fn new(rows: Vec<DualRow>, basis: &BasisMap, k: usize, alpha: f64, floor: f64) -> Result<Self> {
        if !(floor > 0.0) {
            return Err(MdcpError::Invalid("denominator floor must be positive".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MdcpError::Invalid(format!("alpha {alpha} not in (0, 1)")));
        }
        let m = basis.dim();
        for r in &rows {
            if r.features.len() != m || r.f.len() != k {
                return Err(MdcpError::Invalid("dual row has wrong shape".into()));
            }
            if r.f.iter().any(|v| v.is_nan()) || r.p_pool.is_nan() {
                return Err(MdcpError::NonFinite("density query returned NaN".into()));
            }
        }
        let bl = basis.block_len();
        let blocks = (0..basis.input_dim()).map(|j| (j * bl, bl)).collect();
        Ok(Self {
            rows,
            k,
            m,
            alpha,
            floor,
            blocks,
        })
    }

    /// Evaluates every pooled training row under the fitted models.
    pub fn from_models(
        basis: &BasisMap,
        models: &FittedModels,
        pooled_rows: &SourceDataset,
        alpha: f64,
        floor: f64,
    ) -> Result<Self> {
        let k = models.num_sources();
        let rows = (0..pooled_rows.len())
            .into_par_iter()
            .map(|i| {
                let x = pooled_rows.x(i);
                let y = pooled_rows.y(i);
                let f = models
                    .per_source
                    .iter()
                    .map(|m| m.density(x, y))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DualRow {
                    features: basis.features(x),
                    f,
                    p_pool: models.pooled.density(x, y)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, basis, k, alpha, floor)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `sum_k |D theta_k|^2`.
    pub fn roughness(&self, theta: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for t in theta {
            for &(s, len) in &self.blocks {
                for r in 0..len.saturating_sub(2) {
                    let d = t[s + r] - 2.0 * t[s + r + 1] + t[s + r + 2];
                    total += d * d;
                }
            }
        }
        total
    }

    /// Adds `scale * D^T D theta_k` to `grad[k]`.
    fn add_roughness_grad(&self, theta: &[Vec<f64>], scale: f64, grad: &mut [Vec<f64>]) {
        for (t, g) in theta.iter().zip(grad.iter_mut()) {
            for &(s, len) in &self.blocks {
                for r in 0..len.saturating_sub(2) {
                    let d = t[s + r] - 2.0 * t[s + r + 1] + t[s + r + 2];
                    g[s + r] += scale * d;
                    g[s + r + 1] -= 2.0 * scale * d;
                    g[s + r + 2] += scale * d;
                }
            }
        }
    }

    fn check_theta(&self, theta: &[Vec<f64>]) -> Result<()> {
        if theta.len() != self.k || theta.iter().any(|t| t.len() != self.m) {
            return Err(MdcpError::Invalid(format!("theta must be {} x {}", self.k, self.m)));
        }
        Ok(())
    }

    fn linear_terms(theta: &[Vec<f64>], feats: &[f64], z: &mut [f64]) {
        for (zk, t) in z.iter_mut().zip(theta) {
            *zk = t.iter().zip(feats).map(|(a, b)| a * b).sum();
        }
    }

    pub fn objective_parts(&self, theta: &[Vec<f64>], batch: &[usize], gamma: f64) -> Result<ObjectiveParts> {
        self.check_theta(theta)?;
        if batch.is_empty() {
            return Err(MdcpError::Invalid("empty batch".into()));
        }
        let mut z = vec![0.0; self.k];
        let (mut hinge, mut lin, mut sq) = (0.0, 0.0, 0.0);
        for &i in batch {
            let r = &self.rows[i];
            Self::linear_terms(theta, &r.features, &mut z);
            let mut h = 0.0;
            for (zk, fk) in z.iter().zip(&r.f) {
                let l = softplus(*zk);
                h += l * fk;
                lin += l;
                sq += l * l;
            }
            hinge += (1.0 - h).min(0.0) / r.p_pool.max(self.floor);
        }
        let b = batch.len() as f64;
        let penalty = if gamma == 0.0 {
            0.0
        } else {
            gamma * (sq / b + self.roughness(theta))
        };
        let parts = ObjectiveParts {
            hinge: hinge / b,
            linear: (1.0 - self.alpha) * lin / b,
            penalty,
        };
        if !parts.total().is_finite() {
            return Err(MdcpError::NonFinite("dual objective".into()));
        }
        Ok(parts)
    }

    pub fn objective(&self, theta: &[Vec<f64>], batch: &[usize], gamma: f64) -> Result<f64> {
        Ok(self.objective_parts(theta, batch, gamma)?.total())
    }

    /// Objective over every row.
    pub fn full_objective(&self, theta: &[Vec<f64>], gamma: f64) -> Result<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.objective(theta, &all, gamma)
    }

    /// Gradient in `theta`; at `h = 1` exactly the `h > 1` branch is used.
    pub fn gradient(&self, theta: &[Vec<f64>], batch: &[usize], gamma: f64) -> Result<Vec<Vec<f64>>> {
        self.check_theta(theta)?;
        if batch.is_empty() {
            return Err(MdcpError::Invalid("empty batch".into()));
        }
        let b = batch.len() as f64;
        let mut grad = vec![vec![0.0; self.m]; self.k];
        let mut z = vec![0.0; self.k];
        let mut lam = vec![0.0; self.k];
        for &i in batch {
            let r = &self.rows[i];
            Self::linear_terms(theta, &r.features, &mut z);
            let mut h = 0.0;
            for k in 0..self.k {
                lam[k] = softplus(z[k]);
                h += lam[k] * r.f[k];
            }
            let over = h >= 1.0;
            let denom = r.p_pool.max(self.floor);
            for k in 0..self.k {
                let mut dl = 1.0 - self.alpha - 2.0 * gamma * lam[k];
                if over {
                    dl -= r.f[k] / denom;
                }
                let c = dl * sigmoid(z[k]) / b;
                if c != 0.0 {
                    for (g, x) in grad[k].iter_mut().zip(&r.features) {
                        *g += c * x;
                    }
                }
            }
        }
        if gamma != 0.0 {
            self.add_roughness_grad(theta, -2.0 * gamma, &mut grad);
        }
        if grad.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MdcpError::NonFinite("dual gradient".into()));
        }
        Ok(grad)
    }

    /// Multipliers of row `i` under `model`.
    pub fn lambda_row(&self, model: &LambdaModel, i: usize) -> Vec<f64> {
        model.lambda_from_features(&self.rows[i].features)
    }
}
