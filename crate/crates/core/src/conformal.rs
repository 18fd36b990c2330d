//! Split-conformal calibration with one calibration fold per source.
//!
//! Scores follow the "lower is more conforming" convention. A candidate label
//! enters the max-p set when its largest per-source p-value is at least
//! `alpha`, which makes the set the union of the per-source conformal sets.

use serde::{Deserialize, Serialize};

use crate::data::{Label, MultiSourceData};
use crate::error::{MdcpError, Result};

/// Conformity score `s(x, y)`; lower means more conforming.
pub trait ScoreFunction: Send + Sync {
    fn score(&self, x: &[f64], y: Label) -> f64;

    /// Scores of several candidate labels at one `x`. Implementations that
    /// share work across labels (one model evaluation per `x`) override this.
    fn scores(&self, x: &[f64], ys: &[Label]) -> Vec<f64> {
        ys.iter().map(|&y| self.score(x, y)).collect()
    }
}

impl<F> ScoreFunction for F
where
    F: Fn(&[f64], Label) -> f64 + Send + Sync,
{
    fn score(&self, x: &[f64], y: Label) -> f64 {
        self(x, y)
    }
}

/// Sorted calibration scores of every source.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBank {
    scores: Vec<Vec<f64>>,
}

/// How per-source p-values are computed.
#[derive(Debug, Clone, PartialEq)]
pub enum PValueMode {
    Deterministic,
    /// One uniform per source, shared by every candidate label at a test point.
    Randomized(Vec<f64>),
}

impl PValueMode {
    pub fn randomized(u: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MdcpError::BadUniform(bad));
        }
        Ok(PValueMode::Randomized(u))
    }
}

/// Lower endpoint of the randomized empirical quantile.
///
/// `NegUnbounded` accepts every label, `PosUnbounded` none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    NegUnbounded,
    Finite(f64),
    PosUnbounded,
}

impl Threshold {
    /// Whether `h > q`.
    pub fn exceeded_by(&self, h: f64) -> bool {
        match self {
            Threshold::NegUnbounded => true,
            Threshold::Finite(q) => h > *q,
            Threshold::PosUnbounded => false,
        }
    }
}

/// Half-width (in score units) of a symmetric conformal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Empty,
    Finite(f64),
    Unbounded,
}

impl CalibrationBank {
    pub fn new(mut scores: Vec<Vec<f64>>) -> Result<Self> {
        for (k, s) in scores.iter_mut().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(MdcpError::NonFinite(format!("calibration score of source {k}")));
            }
            s.sort_by(f64::total_cmp);
        }
        Ok(Self { scores })
    }

    /// Scores every calibration row. `scores` holds one function per source,
    /// or a single function shared by all sources.
    pub fn calibrate(scores: &[&dyn ScoreFunction], calib: &MultiSourceData) -> Result<Self> {
        check_score_count(scores, calib.num_sources())?;
        let per_source = calib
            .sources()
            .iter()
            .enumerate()
            .map(|(k, src)| {
                let f = score_for(scores, k);
                (0..src.len()).map(|i| f.score(src.x(i), src.y(i))).collect()
            })
            .collect();
        Self::new(per_source)
    }

    pub fn num_sources(&self) -> usize {
        self.scores.len()
    }

    pub fn source(&self, k: usize) -> Result<&[f64]> {
        self.scores
            .get(k)
            .map(Vec::as_slice)
            .ok_or(MdcpError::UnknownSource(k))
    }

    /// `(1 + #{S >= s}) / (1 + n)`.
    pub fn p_value_deterministic(&self, k: usize, s: f64) -> Result<f64> {
        let sc = self.source(k)?;
        let at_least = sc.len() - sc.partition_point(|&v| v < s);
        Ok((1 + at_least) as f64 / (1 + sc.len()) as f64)
    }

    /// `(#{S > s} + (1 + #{S = s}) u) / (n + 1)`.
    pub fn p_value_randomized(&self, k: usize, s: f64, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(MdcpError::BadUniform(u));
        }
        let sc = self.source(k)?;
        let lo = sc.partition_point(|&v| v < s);
        let hi = sc.partition_point(|&v| v <= s);
        let above = sc.len() - hi;
        let ties = hi - lo;
        Ok((above as f64 + (1 + ties) as f64 * u) / (sc.len() + 1) as f64)
    }

    pub fn p_value(&self, k: usize, s: f64, mode: &PValueMode) -> Result<f64> {
        match mode {
            PValueMode::Deterministic => self.p_value_deterministic(k, s),
            PValueMode::Randomized(u) => {
                let uk = *u.get(k).ok_or(MdcpError::UnknownSource(k))?;
                self.p_value_randomized(k, s, uk)
            }
        }
    }

    /// `inf { t : G_U(t) >= alpha }` where, with `W = -S`,
    /// `G_U(t) = (#{W < t} + (1 + #{W = t}) U) / (n + 1)`.
    pub fn randomized_quantile(&self, k: usize, alpha: f64, u: f64) -> Result<Threshold> {
        if !(0.0..=1.0).contains(&u) {
            return Err(MdcpError::BadUniform(u));
        }
        let sc = self.source(k)?;
        let n1 = (sc.len() + 1) as f64;
        if u / n1 >= alpha {
            return Ok(Threshold::NegUnbounded);
        }
        // Ascending W is descending S, negated.
        let w: Vec<f64> = sc.iter().rev().map(|&s| -s).collect();
        let mut below = 0;
        while below < w.len() {
            let v = w[below];
            let ties = w[below..].iter().take_while(|&&x| x == v).count();
            let at = (below as f64 + (1 + ties) as f64 * u) / n1;
            let right = ((below + ties) as f64 + u) / n1;
            if at >= alpha || right >= alpha {
                return Ok(Threshold::Finite(v));
            }
            below += ties;
        }
        Ok(Threshold::PosUnbounded)
    }

    /// Radius `q` of the set `{y : s(x, y) <= q}` for a score that is the
    /// distance to a centre, i.e. the largest calibration score whose
    /// left-limit p-value is at least `alpha`.
    pub fn interval_radius(&self, k: usize, alpha: f64, mode: &PValueMode) -> Result<Radius> {
        let sc = self.source(k)?;
        let c = match mode {
            PValueMode::Deterministic => 1.0,
            PValueMode::Randomized(u) => *u.get(k).ok_or(MdcpError::UnknownSource(k))?,
        };
        let n1 = (sc.len() + 1) as f64;
        if c / n1 >= alpha {
            return Ok(Radius::Unbounded);
        }
        let accepts = |i: usize| {
            let at_least = sc.len() - sc.partition_point(|&v| v < sc[i]);
            (at_least as f64 + c) / n1 >= alpha
        };
        // `accepts` is monotone: true on a prefix of the sorted scores.
        let count = partition_by(sc.len(), accepts);
        Ok(if count == 0 {
            Radius::Empty
        } else {
            Radius::Finite(sc[count - 1])
        })
    }
}

fn partition_by(n: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_score_count(scores: &[&dyn ScoreFunction], k: usize) -> Result<()> {
    if scores.len() == 1 || scores.len() == k {
        Ok(())
    } else {
        Err(MdcpError::Invalid(format!(
            "{} score functions for {k} sources",
            scores.len()
        )))
    }
}

fn score_for<'a>(scores: &[&'a dyn ScoreFunction], k: usize) -> &'a dyn ScoreFunction {
    if scores.len() == 1 {
        scores[0]
    } else {
        scores[k]
    }
}

pub fn max_p(p_values: &[f64]) -> Result<f64> {
    p_values
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(MdcpError::EmptyVector)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(MdcpError::Invalid(format!("alpha {alpha} not in (0, 1)")))
    }
}

fn all_classes(num_classes: usize) -> Vec<Label> {
    (0..num_classes as u32).map(Label::Class).collect()
}

/// Per-source p-values of every class at `x`: `out[y][k]`.
pub fn class_p_values(
    scores: &[&dyn ScoreFunction],
    bank: &CalibrationBank,
    x: &[f64],
    num_classes: usize,
    mode: &PValueMode,
) -> Result<Vec<Vec<f64>>> {
    let k_total = bank.num_sources();
    check_score_count(scores, k_total)?;
    let labels = all_classes(num_classes);
    let mut out = vec![vec![0.0; k_total]; num_classes];
    let shared = (scores.len() == 1).then(|| scores[0].scores(x, &labels));
    for k in 0..k_total {
        let own;
        let s = match &shared {
            Some(s) => s,
            None => {
                own = scores[k].scores(x, &labels);
                &own
            }
        };
        for (y, &sy) in s.iter().enumerate() {
            out[y][k] = bank.p_value(k, sy, mode)?;
        }
    }
    Ok(out)
}

/// `{y : max_k p_k(x, y) >= alpha}`.
pub fn classification_set(
    scores: &[&dyn ScoreFunction],
    bank: &CalibrationBank,
    x: &[f64],
    num_classes: usize,
    alpha: f64,
    mode: &PValueMode,
) -> Result<Vec<u32>> {
    check_alpha(alpha)?;
    let p = class_p_values(scores, bank, x, num_classes, mode)?;
    let mut set = Vec::new();
    for (y, pk) in p.iter().enumerate() {
        if max_p(pk)? >= alpha {
            set.push(y as u32);
        }
    }
    Ok(set)
}

/// `{y : p_k(x, y) >= alpha}` for one source.
pub fn source_set(
    score: &dyn ScoreFunction,
    bank: &CalibrationBank,
    k: usize,
    x: &[f64],
    num_classes: usize,
    alpha: f64,
    mode: &PValueMode,
) -> Result<Vec<u32>> {
    check_alpha(alpha)?;
    let s = score.scores(x, &all_classes(num_classes));
    let mut set = Vec::new();
    for (y, &sy) in s.iter().enumerate() {
        if bank.p_value(k, sy, mode)? >= alpha {
            set.push(y as u32);
        }
    }
    Ok(set)
}
