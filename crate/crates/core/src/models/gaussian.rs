use serde::{Deserialize, Serialize};

use super::boosting::{BoostedTreesConfig, GbdtRegressor};
use super::tree::BinnedFeatures;
use crate::data::{Labels, SourceDataset};
use crate::error::{MdcpError, Result};

/// `-E[log Z^2]` for `Z ~ N(0,1)`, i.e. Euler's constant plus `ln 2`.
///
/// The log-variance model is trained on `log r^2`, whose mean sits this far
/// below `log sigma^2` under Gaussian noise.
pub const LOG_CHI2_OFFSET: f64 = 1.270_362_845_461_478_2;

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Heteroskedastic Gaussian plug-in `Y | X = x ~ N(mu(x), sigma(x)^2)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GaussianWorkingModel {
    mean_model: GbdtRegressor,
    log_var_model: GbdtRegressor,
    sigma_floor: f64,
}

/// Fold bookkeeping kept from a fit, for auditing the out-of-fold residuals.
#[derive(Debug, Clone)]
pub struct OofAudit {
    pub fold_of_row: Vec<usize>,
    /// Fold whose held-out model produced each row's residual.
    pub predicted_by: Vec<usize>,
    /// Training rows of each fold's mean model.
    pub trained_on: Vec<Vec<usize>>,
}

impl GaussianWorkingModel {
    pub fn fit(train: &SourceDataset, cfg: &BoostedTreesConfig, folds: usize) -> Result<Self> {
        Self::fit_audited(train, cfg, folds, DEFAULT_SIGMA_FLOOR).map(|(m, _)| m)
    }

    /// Mean model on all rows; log-variance model on out-of-fold squared
    /// residuals pooled over every fold.
    pub fn fit_audited(
        train: &SourceDataset,
        cfg: &BoostedTreesConfig,
        folds: usize,
        sigma_floor: f64,
    ) -> Result<(Self, OofAudit)> {
        let Labels::Real(y) = train.labels() else {
            return Err(MdcpError::Invalid("Gaussian model needs real labels".into()));
        };
        let n = y.len();
        if folds < 2 || n < 2 * folds {
            return Err(MdcpError::TooFewSamples(format!(
                "{n} rows cannot be split into {folds} folds of at least 2"
            )));
        }
        if !(sigma_floor > 0.0) {
            return Err(MdcpError::Invalid("sigma_floor must be positive".into()));
        }
        let bins = BinnedFeatures::new(train.features());
        let all: Vec<usize> = (0..n).collect();
        let mean_model = GbdtRegressor::fit_rows(&bins, y, &all, cfg)?;

        let fold_of_row: Vec<usize> = (0..n).map(|i| i % folds).collect();
        let mut predicted_by = vec![usize::MAX; n];
        let mut trained_on = Vec::with_capacity(folds);
        let mut log_r2 = vec![0.0; n];
        for f in 0..folds {
            let fit_rows: Vec<usize> = all.iter().copied().filter(|&i| fold_of_row[i] != f).collect();
            let held: Vec<usize> = all.iter().copied().filter(|&i| fold_of_row[i] == f).collect();
            let m = GbdtRegressor::fit_rows(&bins, y, &fit_rows, cfg)?;
            for &i in &held {
                let r = y[i] - m.predict(train.x(i));
                log_r2[i] = (r * r).max(f64::MIN_POSITIVE).ln() + LOG_CHI2_OFFSET;
                predicted_by[i] = f;
            }
            trained_on.push(fit_rows);
        }
        let audit = OofAudit {
            fold_of_row,
            predicted_by,
            trained_on,
        };
        audit.check()?;
        let log_var_model = GbdtRegressor::fit_rows(&bins, &log_r2, &all, cfg)?;
        Ok((
            Self {
                mean_model,
                log_var_model,
                sigma_floor,
            },
            audit,
        ))
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        self.mean_model.predict(x)
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        (0.5 * self.log_var_model.predict(x)).exp().max(self.sigma_floor)
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn density(&self, x: &[f64], y: f64) -> f64 {
        normal_pdf(y, self.mu(x), self.sigma(x))
    }
}

impl OofAudit {
    /// Every residual must come from the model that held its row out.
    pub fn check(&self) -> Result<()> {
        for (i, (&f, &p)) in self.fold_of_row.iter().zip(&self.predicted_by).enumerate() {
            if f != p || self.trained_on[p].binary_search(&i).is_ok() {
                return Err(MdcpError::NumericalFailure(format!(
                    "row {i} residual is not out-of-fold"
                )));
            }
        }
        Ok(())
    }
}

pub fn normal_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    INV_SQRT_2PI / sigma * (-0.5 * z * z).exp()
}
