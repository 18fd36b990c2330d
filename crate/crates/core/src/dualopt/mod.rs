//! Learning the multipliers `lambda(x)` by maximising the empirical dual
//! objective, and the shared score they induce.

pub mod basis;
pub mod lambda;
pub mod objective;
pub mod train;

use serde::{Deserialize, Serialize};

pub use basis::{BasisConfig, BasisMap};
pub use lambda::{sigmoid, softplus, LambdaModel};
pub use objective::{DualProblem, DualRow, ObjectiveParts};
pub use train::{train_lambda, DualTrainConfig, TrainingCurve};

use crate::conformal::ScoreFunction;
use crate::data::Label;
use crate::error::{MdcpError, Result};
use crate::models::{ConditionalModel, PointModel};

/// `s(x, y) = -sum_k lambda_k(x) f_k(y|x)`, one score for every source.
pub struct SharedScore<'a> {
    pub lambda: &'a LambdaModel,
    pub models: &'a [ConditionalModel],
}

impl<'a> SharedScore<'a> {
    pub fn new(lambda: &'a LambdaModel, models: &'a [ConditionalModel]) -> Result<Self> {
        if lambda.num_sources() != models.len() {
            return Err(MdcpError::Invalid(format!(
                "{} multipliers for {} models",
                lambda.num_sources(),
                models.len()
            )));
        }
        Ok(Self { lambda, models })
    }

    /// Multipliers and model evaluations at one `x`, reusable across labels.
    pub fn local(&self, x: &[f64]) -> LocalScore {
        LocalScore {
            lambda: self.lambda.lambda_at(x),
            points: self.models.iter().map(|m| m.at(x)).collect(),
        }
    }

    /// `h(x, y)` for several labels at once.
    pub fn h_values(&self, x: &[f64], ys: &[Label]) -> Vec<f64> {
        let local = self.local(x);
        ys.iter().map(|&y| local.h(y)).collect()
    }
}

/// [`SharedScore`] frozen at one covariate value.
#[derive(Debug, Clone)]
pub struct LocalScore {
    pub lambda: Vec<f64>,
    pub points: Vec<PointModel>,
}

impl LocalScore {
    /// `h = sum_k lambda_k f_k(y|x)`; NaN when a density query fails.
    pub fn h(&self, y: Label) -> f64 {
        self.lambda
            .iter()
            .zip(&self.points)
            .map(|(l, p)| l * p.density(y).unwrap_or(f64::NAN))
            .sum()
    }

    pub fn score(&self, y: Label) -> f64 {
        -self.h(y)
    }
}

impl ScoreFunction for SharedScore<'_> {
    fn score(&self, x: &[f64], y: Label) -> f64 {
        -self.h_values(x, &[y])[0]
    }

    fn scores(&self, x: &[f64], ys: &[Label]) -> Vec<f64> {
        self.h_values(x, ys).into_iter().map(|h| -h).collect()
    }
}

/// Mean mimic-test set size for each penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub gamma: f64,
    pub sizes: Vec<(f64, f64)>,
}

/// Picks the penalty weight with the smallest evaluated size; ties go to
/// the smaller weight. `evaluate` trains with the given weight and returns
/// the mean set size on held-out training rows.
pub fn tune_penalty(grid: &[f64], mut evaluate: impl FnMut(f64) -> Result<f64>) -> Result<TuneOutcome> {
    if grid.is_empty() {
        return Err(MdcpError::Invalid("penalty grid is empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut sizes = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None;
    for &g in &sorted {
        let s = evaluate(g)?;
        sizes.push((g, s));
        if best.is_none_or(|(_, bs)| s < bs) {
            best = Some((g, s));
        }
    }
    Ok(TuneOutcome {
        gamma: best.expect("grid is nonempty").0,
        sizes,
    })
}
