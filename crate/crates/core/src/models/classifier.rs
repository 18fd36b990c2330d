use serde::{Deserialize, Serialize};

use super::boosting::BoostedTreesConfig;
use super::tree::{BinnedFeatures, RegressionTree};
use crate::data::{Labels, SourceDataset};
use crate::error::{MdcpError, Result};

/// Probabilities are clamped to this floor and renormalised.
pub const PROB_FLOOR: f64 = 1e-8;

/// Multiclass gradient boosting: one tree per class per round on the
/// softmax cross-entropy gradient, Newton leaf values scaled by `(C-1)/C`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassifierModel {
    num_classes: usize,
    base: Vec<f64>,
    /// `rounds[r][c]` is the tree of class `c` in round `r`.
    rounds: Vec<Vec<RegressionTree>>,
}

pub(crate) fn softmax_into(raw: &[f64], out: &mut [f64]) {
    let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &r) in out.iter_mut().zip(raw) {
        *o = (r - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

pub(crate) fn clamp_renormalize(p: &mut [f64]) {
    let mut z = 0.0;
    for v in p.iter_mut() {
        *v = v.clamp(PROB_FLOOR, 1.0);
        z += *v;
    }
    for v in p.iter_mut() {
        *v /= z;
    }
}

impl ClassifierModel {
    pub fn fit(train: &SourceDataset, num_classes: usize, cfg: &BoostedTreesConfig) -> Result<Self> {
        cfg.validate()?;
        let Labels::Class(y) = train.labels() else {
            return Err(MdcpError::Invalid("classifier needs class labels".into()));
        };
        if let Some(&c) = y.iter().find(|&&c| c as usize >= num_classes) {
            return Err(MdcpError::ClassOutOfRange { class: c, num_classes });
        }
        let mut counts = vec![0usize; num_classes];
        for &c in y {
            counts[c as usize] += 1;
        }
        if counts.iter().filter(|&&n| n > 0).count() < 2 {
            return Err(MdcpError::DegenerateLabels(
                "fewer than two distinct classes in training data".into(),
            ));
        }
        let n = y.len();
        let base: Vec<f64> = counts
            .iter()
            .map(|&m| ((m as f64 + 1.0) / (n as f64 + num_classes as f64)).ln())
            .collect();
        let bins = BinnedFeatures::new(train.features());
        let rows: Vec<usize> = (0..n).collect();
        let mut raw: Vec<f64> = (0..n).flat_map(|_| base.iter().copied()).collect();
        let mut prob = vec![0.0; n * num_classes];
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        let shrink = cfg.learning_rate * (num_classes as f64 - 1.0) / num_classes as f64;
        let mut rounds = Vec::with_capacity(cfg.num_rounds);
        for _ in 0..cfg.num_rounds {
            for i in 0..n {
                let r = i * num_classes..(i + 1) * num_classes;
                softmax_into(&raw[r.clone()], &mut prob[r]);
            }
            let mut trees = Vec::with_capacity(num_classes);
            for c in 0..num_classes {
                for i in 0..n {
                    let p = prob[i * num_classes + c];
                    g[i] = f64::from(u8::from(y[i] as usize == c)) - p;
                    h[i] = (p * (1.0 - p)).max(1e-6);
                }
                let mut tree = RegressionTree::fit(&bins, &g, &h, &rows, cfg.tree_params());
                tree.scale(shrink);
                for i in 0..n {
                    raw[i * num_classes + c] += tree.predict_binned(&bins, i);
                }
                trees.push(tree);
            }
            rounds.push(trees);
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(MdcpError::NonFinite("classifier training diverged".into()));
        }
        Ok(Self {
            num_classes,
            base,
            rounds,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Class probabilities at `x`, clamped to `[1e-8, 1]` and renormalised.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut raw = self.base.clone();
        for trees in &self.rounds {
            for (r, t) in raw.iter_mut().zip(trees) {
                *r += t.predict(x);
            }
        }
        let mut p = vec![0.0; self.num_classes];
        softmax_into(&raw, &mut p);
        clamp_renormalize(&mut p);
        p
    }

    pub fn class_prob(&self, x: &[f64], y: u32) -> Result<f64> {
        if y as usize >= self.num_classes {
            return Err(MdcpError::ClassOutOfRange {
                class: y,
                num_classes: self.num_classes,
            });
        }
        Ok(self.predict_proba(x)[y as usize])
    }
}
