//! Single-source conformity scores used by the baselines.

use crate::conformal::ScoreFunction;
use crate::data::Label;
use crate::error::{MdcpError, Result};
use crate::models::{ConditionalModel, PointModel};

/// `s(x, y) = -p_k(y|x)`.
pub struct TpsScore<'a> {
    model: &'a ConditionalModel,
}

impl<'a> TpsScore<'a> {
    pub fn new(model: &'a ConditionalModel) -> Self {
        Self { model }
    }
}

impl ScoreFunction for TpsScore<'_> {
    fn score(&self, x: &[f64], y: Label) -> f64 {
        -self.model.density(x, y).unwrap_or(f64::NAN)
    }

    fn scores(&self, x: &[f64], ys: &[Label]) -> Vec<f64> {
        let p = self.model.at(x);
        ys.iter().map(|&y| -p.density(y).unwrap_or(f64::NAN)).collect()
    }
}

/// `V_k(x, y) = |y - mu_k(x)| / sigma_k(x)`.
pub struct StandardizedResidual<'a> {
    model: &'a ConditionalModel,
}

impl<'a> StandardizedResidual<'a> {
    pub fn new(model: &'a ConditionalModel) -> Self {
        Self { model }
    }

    pub fn location_scale(&self, x: &[f64]) -> Result<(f64, f64)> {
        match self.model.at(x) {
            PointModel::Normal { mu, sigma } => Ok((mu, sigma)),
            _ => Err(MdcpError::Invalid("standardized residual needs a Gaussian model".into())),
        }
    }
}

impl ScoreFunction for StandardizedResidual<'_> {
    fn score(&self, x: &[f64], y: Label) -> f64 {
        match (self.location_scale(x), y) {
            (Ok((mu, sigma)), Label::Real(v)) => (v - mu).abs() / sigma,
            _ => f64::NAN,
        }
    }
}
