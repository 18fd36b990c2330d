use serde::{Deserialize, Serialize};

use super::tree::{BinnedFeatures, RegressionTree, TreeParams};
use crate::data::Features;
use crate::error::{MdcpError, Result};

/// Hyperparameters of the gradient-boosted tree learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostedTreesConfig {
    pub num_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf_size: usize,
}

impl Default for BoostedTreesConfig {
    fn default() -> Self {
        Self {
            num_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_leaf_size: 10,
        }
    }
}

impl BoostedTreesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_rounds == 0 || self.max_depth == 0 {
            return Err(MdcpError::Invalid(
                "num_rounds and max_depth must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(MdcpError::Invalid(format!(
                "learning_rate {} not in (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }

    pub(crate) fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf_size,
        }
    }
}

/// Squared-loss gradient boosting.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GbdtRegressor {
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
}

impl GbdtRegressor {
    pub fn fit(x: &Features, y: &[f64], cfg: &BoostedTreesConfig) -> Result<Self> {
        let rows: Vec<usize> = (0..x.nrows()).collect();
        Self::fit_rows(&BinnedFeatures::new(x), y, &rows, cfg)
    }

    /// Fits on a subset of rows of an already-binned matrix.
    pub(crate) fn fit_rows(
        bins: &BinnedFeatures,
        y: &[f64],
        rows: &[usize],
        cfg: &BoostedTreesConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if rows.is_empty() {
            return Err(MdcpError::TooFewSamples("cannot fit on zero rows".into()));
        }
        if rows.iter().any(|&i| !y[i].is_finite()) {
            return Err(MdcpError::NonFinite("regression target".into()));
        }
        let base = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
        let mut pred = vec![base; bins.nrows()];
        let mut resid = vec![0.0; bins.nrows()];
        let ones = vec![1.0; bins.nrows()];
        let mut trees = Vec::with_capacity(cfg.num_rounds);
        for _ in 0..cfg.num_rounds {
            for &i in rows {
                resid[i] = y[i] - pred[i];
            }
            let mut tree = RegressionTree::fit(bins, &resid, &ones, rows, cfg.tree_params());
            tree.scale(cfg.learning_rate);
            for &i in rows {
                pred[i] += tree.predict_binned(bins, i);
            }
            trees.push(tree);
        }
        if pred.iter().any(|p| !p.is_finite()) {
            return Err(MdcpError::NonFinite("boosting diverged".into()));
        }
        Ok(Self {
            base,
            learning_rate: cfg.learning_rate,
            trees,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}
