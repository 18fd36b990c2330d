//! Conditional models `f_k(y|x)`: boosted-tree classifiers for classification
//! and a heteroskedastic Gaussian plug-in for regression.

pub mod boosting;
pub mod calibration;
pub mod classifier;
pub mod gaussian;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use boosting::{BoostedTreesConfig, GbdtRegressor};
pub use calibration::{CalibratedClassifier, IsotonicMap};
pub use classifier::ClassifierModel;
pub use gaussian::{normal_pdf, GaussianWorkingModel};

use crate::data::{pool, Label, MultiSourceData, SourceDataset, TaskKind};
use crate::error::{MdcpError, Result};

/// How the pooled model `p_pool(y|x)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PooledStrategy {
    /// Fit the same learner on the pooled training rows.
    #[default]
    Refit,
    /// `sum_k w_k f_k(y|x)` with training-fold source fractions `w_k`.
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub boosting: BoostedTreesConfig,
    /// Folds for the out-of-fold residuals of the Gaussian variance model.
    pub variance_folds: usize,
    pub sigma_floor: f64,
    pub pooled: PooledStrategy,
    /// Stratified folds for isotonic calibration of classifiers; below 2
    /// (the default) disables calibration.
    pub calibration_folds: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            boosting: BoostedTreesConfig::default(),
            variance_folds: 5,
            sigma_floor: gaussian::DEFAULT_SIGMA_FLOOR,
            pooled: PooledStrategy::Refit,
            calibration_folds: 0,
        }
    }
}

/// A fitted estimate of `f(y|x)` for one source or for the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionalModel {
    Classifier(ClassifierModel),
    CalibratedClassifier(CalibratedClassifier),
    Gaussian(GaussianWorkingModel),
    Mixture {
        weights: Vec<f64>,
        components: Vec<ConditionalModel>,
    },
}

/// A conditional model evaluated at one covariate value.
#[derive(Debug, Clone, PartialEq)]
pub enum PointModel {
    Probs(Vec<f64>),
    Normal { mu: f64, sigma: f64 },
    Mixture(Vec<(f64, PointModel)>),
}

impl ConditionalModel {
    pub fn fit(train: &SourceDataset, task: TaskKind, cfg: &ModelConfig) -> Result<Self> {
        match task {
            TaskKind::Classification { num_classes } => {
                if cfg.calibration_folds >= 2 {
                    let cal = CalibratedClassifier::fit(train, num_classes, &cfg.boosting, cfg.calibration_folds)?;
                    if let Some(m) = cal {
                        return Ok(ConditionalModel::CalibratedClassifier(m));
                    }
                }
                Ok(ConditionalModel::Classifier(ClassifierModel::fit(
                    train,
                    num_classes,
                    &cfg.boosting,
                )?))
            }
            TaskKind::Regression => Ok(ConditionalModel::Gaussian(
                GaussianWorkingModel::fit_audited(
                    train,
                    &cfg.boosting,
                    cfg.variance_folds,
                    cfg.sigma_floor,
                )?
                .0,
            )),
        }
    }

    pub fn at(&self, x: &[f64]) -> PointModel {
        match self {
            ConditionalModel::Classifier(m) => PointModel::Probs(m.predict_proba(x)),
            ConditionalModel::CalibratedClassifier(m) => PointModel::Probs(m.predict_proba(x)),
            ConditionalModel::Gaussian(m) => PointModel::Normal {
                mu: m.mu(x),
                sigma: m.sigma(x),
            },
            ConditionalModel::Mixture {
                weights,
                components,
            } => PointModel::Mixture(
                weights
                    .iter()
                    .zip(components)
                    .map(|(&w, c)| (w, c.at(x)))
                    .collect(),
            ),
        }
    }

    pub fn density(&self, x: &[f64], y: Label) -> Result<f64> {
        self.at(x).density(y)
    }
}

impl PointModel {
    /// `f(y|x)`: a class probability or a Gaussian density value.
    pub fn density(&self, y: Label) -> Result<f64> {
        match (self, y) {
            (PointModel::Probs(p), Label::Class(c)) => {
                p.get(c as usize).copied().ok_or(MdcpError::ClassOutOfRange {
                    class: c,
                    num_classes: p.len(),
                })
            }
            (PointModel::Normal { mu, sigma }, Label::Real(v)) => Ok(normal_pdf(v, *mu, *sigma)),
            (PointModel::Mixture(parts), y) => {
                let mut total = 0.0;
                for (w, p) in parts {
                    total += w * p.density(y)?;
                }
                Ok(total)
            }
            _ => Err(MdcpError::Invalid("label kind does not match model".into())),
        }
    }
}

/// Per-source models plus the pooled model, all fit on the training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub task: TaskKind,
    pub per_source: Vec<ConditionalModel>,
    pub pooled: ConditionalModel,
}

impl FittedModels {
    pub fn fit(train: &MultiSourceData, cfg: &ModelConfig) -> Result<Self> {
        let task = train.task();
        let per_source = train
            .sources()
            .iter()
            .map(|s| ConditionalModel::fit(s, task, cfg))
            .collect::<Result<Vec<_>>>()?;
        let pooled = match cfg.pooled {
            PooledStrategy::Refit => ConditionalModel::fit(&pool(train), task, cfg)?,
            PooledStrategy::Mixture => ConditionalModel::Mixture {
                weights: train.weights(),
                components: per_source.clone(),
            },
        };
        Ok(Self {
            task,
            per_source,
            pooled,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.per_source.len()
    }
}
