use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::basis::{BasisConfig, BasisMap};
use super::lambda::LambdaModel;
use super::objective::DualProblem;
use crate::error::{MdcpError, Result};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualTrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub step_size: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub early_stop_patience: usize,
    pub denom_floor: f64,
    pub penalty_gamma: f64,
    pub penalty_grid: Vec<f64>,
    pub basis: BasisConfig,
}

impl Default for DualTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            max_epochs: 200,
            step_size: 1e-2,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            early_stop_patience: 10,
            denom_floor: 1e-4,
            penalty_gamma: 0.0,
            penalty_grid: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0],
            basis: BasisConfig::default(),
        }
    }
}

impl DualTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(MdcpError::Invalid("batch_size must be at least 1".into()));
        }
        if !(self.denom_floor > 0.0) {
            return Err(MdcpError::Invalid("denom_floor must be positive".into()));
        }
        if !(self.penalty_gamma >= 0.0) || self.penalty_grid.iter().any(|g| !(*g >= 0.0)) {
            return Err(MdcpError::Invalid("penalty weights must be nonnegative".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(MdcpError::Invalid("step_size must be positive".into()));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(MdcpError::Invalid("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-epoch full-data objectives recorded during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epoch_objective: Vec<f64>,
    /// Best-so-far objective after each epoch.
    pub best_so_far: Vec<f64>,
    pub initial_objective: f64,
    pub best_objective: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub gamma: f64,
}

/// Minibatch Adam ascent from `theta = 0`, keeping the best full-data iterate.
pub fn train_lambda(
    problem: &DualProblem,
    basis: &BasisMap,
    cfg: &DualTrainConfig,
    gamma: f64,
    seed: u64,
) -> Result<(LambdaModel, TrainingCurve)> {
    cfg.validate()?;
    if problem.is_empty() {
        return Err(MdcpError::TooFewSamples("no rows to train multipliers on".into()));
    }
    if basis.dim() != problem.m {
        return Err(MdcpError::Invalid("basis does not match problem features".into()));
    }
    let (k, m) = (problem.k, problem.m);
    let mut theta = vec![vec![0.0; m]; k];
    let mut m1 = vec![vec![0.0; m]; k];
    let mut m2 = vec![vec![0.0; m]; k];
    let (b1, b2) = cfg.adam_betas;
    let mut rng = substream(seed, &[tag::DUAL]);
    let mut order: Vec<usize> = (0..problem.len()).collect();

    let init = problem.full_objective(&theta, gamma)?;
    let mut best = (theta.clone(), init);
    let mut curve = TrainingCurve {
        initial_objective: init,
        best_objective: init,
        gamma,
        ..Default::default()
    };
    let mut stale = 0;
    let mut step = 0i32;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let g = problem
                .gradient(&theta, batch, gamma)
                .map_err(|e| diagnose(e, epoch, &theta))?;
            step += 1;
            let c1 = 1.0 - b1.powi(step);
            let c2 = 1.0 - b2.powi(step);
            for kk in 0..k {
                for j in 0..m {
                    let gj = g[kk][j];
                    m1[kk][j] = b1 * m1[kk][j] + (1.0 - b1) * gj;
                    m2[kk][j] = b2 * m2[kk][j] + (1.0 - b2) * gj * gj;
                    let mh = m1[kk][j] / c1;
                    let vh = m2[kk][j] / c2;
                    // Ascent: the objective is maximised.
                    theta[kk][j] += cfg.step_size * mh / (vh.sqrt() + cfg.adam_eps);
                }
            }
        }
        let v = problem
            .full_objective(&theta, gamma)
            .map_err(|e| diagnose(e, epoch, &theta))?;
        curve.epoch_objective.push(v);
        if v > best.1 {
            best = (theta.clone(), v);
            curve.best_epoch = epoch + 1;
            stale = 0;
        } else {
            stale += 1;
        }
        curve.best_so_far.push(best.1);
        if stale >= cfg.early_stop_patience {
            curve.stopped_early = true;
            break;
        }
    }
    curve.best_objective = best.1;
    Ok((LambdaModel::new(basis.clone(), best.0)?, curve))
}

fn diagnose(e: MdcpError, epoch: usize, theta: &[Vec<f64>]) -> MdcpError {
    match e {
        MdcpError::NonFinite(what) => {
            let max = theta.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            MdcpError::NonFinite(format!("{what} at epoch {epoch} (max |theta| = {max:.3e})"))
        }
        other => other,
    }
}
