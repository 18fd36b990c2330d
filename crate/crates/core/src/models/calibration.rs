//! Cross-validated isotonic calibration of class probabilities.
//!
//! The training rows are split into stratified folds. For each fold a
//! boosted classifier is fit on the other folds, and one isotonic map per
//! class (one-vs-rest) is fit on the held-out fold's predicted
//! probabilities. A prediction averages the calibrated, renormalised
//! outputs of all fold members.

use serde::{Deserialize, Serialize};

use super::boosting::BoostedTreesConfig;
use super::classifier::{clamp_renormalize, ClassifierModel};
use crate::data::{Labels, SourceDataset};
use crate::error::{MdcpError, Result};

/// Non-decreasing piecewise-linear map fit by pool-adjacent-violators.
/// Inputs outside the fitted range are clipped to the end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl IsotonicMap {
    pub fn fit(scores: &[f64], targets: &[f64]) -> Result<Self> {
        if scores.is_empty() || scores.len() != targets.len() {
            return Err(MdcpError::Invalid("isotonic fit needs matching nonempty inputs".into()));
        }
        if scores.iter().chain(targets).any(|v| !v.is_finite()) {
            return Err(MdcpError::NonFinite("isotonic input".into()));
        }
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        // Blocks of (sum, weight, first x, last x); tied inputs start pooled.
        let mut blocks: Vec<(f64, f64, f64, f64)> = Vec::new();
        for i in idx {
            let (s, t) = (scores[i], targets[i]);
            match blocks.last_mut() {
                Some(b) if b.3 == s => {
                    b.0 += t;
                    b.1 += 1.0;
                }
                _ => blocks.push((t, 1.0, s, s)),
            }
            while blocks.len() > 1 {
                let n = blocks.len();
                let (a, b) = (blocks[n - 2], blocks[n - 1]);
                if a.0 / a.1 <= b.0 / b.1 {
                    break;
                }
                blocks.truncate(n - 2);
                blocks.push((a.0 + b.0, a.1 + b.1, a.2, b.3));
            }
        }
        let mut x = Vec::with_capacity(2 * blocks.len());
        let mut y = Vec::with_capacity(2 * blocks.len());
        for (sum, w, lo, hi) in blocks {
            let v = sum / w;
            x.push(lo);
            y.push(v);
            if hi > lo {
                x.push(hi);
                y.push(v);
            }
        }
        Ok(Self { x, y })
    }

    pub fn apply(&self, s: f64) -> f64 {
        let n = self.x.len();
        if s <= self.x[0] {
            return self.y[0];
        }
        if s >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let j = self.x.partition_point(|&v| v <= s);
        let (x0, x1, y0, y1) = (self.x[j - 1], self.x[j], self.y[j - 1], self.y[j]);
        y0 + (y1 - y0) * (s - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Member {
    model: ClassifierModel,
    maps: Vec<IsotonicMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedClassifier {
    num_classes: usize,
    members: Vec<Member>,
}

/// Fold of every row: rows of each class are dealt round-robin.
pub fn stratified_folds(y: &[u32], num_classes: usize, folds: usize) -> Vec<usize> {
    let mut seen = vec![0usize; num_classes];
    y.iter()
        .map(|&c| {
            let f = seen[c as usize] % folds;
            seen[c as usize] += 1;
            f
        })
        .collect()
}

impl CalibratedClassifier {
    /// Returns `Ok(None)` when some fold's training part has fewer than two
    /// classes, in which case the caller should use an uncalibrated model.
    pub fn fit(
        train: &SourceDataset,
        num_classes: usize,
        cfg: &BoostedTreesConfig,
        folds: usize,
    ) -> Result<Option<Self>> {
        let Labels::Class(y) = train.labels() else {
            return Err(MdcpError::Invalid("classifier needs class labels".into()));
        };
        if folds < 2 {
            return Err(MdcpError::Invalid("calibration needs at least 2 folds".into()));
        }
        let fold_of = stratified_folds(y, num_classes, folds);
        let mut members = Vec::with_capacity(folds);
        for f in 0..folds {
            let fit_rows: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let held: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let mut classes: Vec<u32> = fit_rows.iter().map(|&i| y[i]).collect();
            classes.sort_unstable();
            classes.dedup();
            if classes.len() < 2 || held.is_empty() {
                return Ok(None);
            }
            let model = ClassifierModel::fit(&train.subset(&fit_rows), num_classes, cfg)?;
            let probs: Vec<Vec<f64>> = held.iter().map(|&i| model.predict_proba(train.x(i))).collect();
            let maps = (0..num_classes)
                .map(|c| {
                    let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
                    let t: Vec<f64> = held.iter().map(|&i| f64::from(u8::from(y[i] as usize == c))).collect();
                    IsotonicMap::fit(&s, &t)
                })
                .collect::<Result<Vec<_>>>()?;
            members.push(Member { model, maps });
        }
        Ok(Some(Self { num_classes, members }))
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let c = self.num_classes;
        let mut out = vec![0.0; c];
        for m in &self.members {
            let raw = m.model.predict_proba(x);
            let mut p: Vec<f64> = raw.iter().zip(&m.maps).map(|(&r, map)| map.apply(r)).collect();
            let z: f64 = p.iter().sum();
            if z > 0.0 {
                p.iter_mut().for_each(|v| *v /= z);
            } else {
                p.fill(1.0 / c as f64);
            }
            for (o, v) in out.iter_mut().zip(&p) {
                *o += v / self.members.len() as f64;
            }
        }
        clamp_renormalize(&mut out);
        out
    }
}
