//! Regression prediction sets from a label grid.
//!
//! Candidate labels are scanned on a uniform grid over the observed label
//! range. Each maximal run of accepted grid points becomes an interval
//! extended by one grid step on both sides, and overlapping intervals are
//! merged. Every accepted grid point, together with its one-step
//! neighbourhood, therefore lies in the emitted union.

use serde::{Deserialize, Serialize};

use crate::error::{MdcpError, Result};

pub const DEFAULT_GRID_SIZE: usize = 100;

/// Uniform grid `y_j = y_low + j * delta`, `j = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    pub y_low: f64,
    pub y_high: f64,
    pub m: usize,
    pub delta: f64,
}

impl YGrid {
    /// Grid over `[min, max]` of the pooled train and calibration labels.
    pub fn build(labels: &[f64], m: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(MdcpError::EmptyLabels);
        }
        if m < 2 {
            return Err(MdcpError::Invalid(format!("grid size {m} is below 2")));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(MdcpError::NonFinite("grid labels".into()));
        }
        let y_low = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let y_high = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let delta = (y_high - y_low) / (m - 1) as f64;
        Ok(Self {
            y_low,
            y_high,
            m,
            delta,
        })
    }

    /// All labels equal: the grid collapses to one point.
    pub fn is_degenerate(&self) -> bool {
        self.y_low == self.y_high
    }

    pub fn warning(&self) -> Option<String> {
        self.is_degenerate().then(|| {
            format!(
                "all grid labels equal {}; using a single grid point",
                self.y_low
            )
        })
    }

    /// `y_low + j * delta`, with `j` allowed one step outside the grid.
    fn at(&self, j: isize) -> f64 {
        if j == self.m as isize - 1 {
            self.y_high
        } else {
            self.y_low + j as f64 * self.delta
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.is_degenerate() {
            return vec![self.y_low];
        }
        (0..self.m as isize).map(|j| self.at(j)).collect()
    }

    /// Half-width used around a lone accepted point of a degenerate grid.
    pub fn degenerate_half_width(&self) -> f64 {
        self.y_low.abs().max(1.0) * 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Sorted, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        Self::from_intervals(vec![Interval { lo, hi }])
    }

    /// Sorts and merges arbitrary intervals (touching ones included).
    pub fn from_intervals(mut v: Vec<Interval>) -> Self {
        v.retain(|i| i.hi >= i.lo);
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for i in v {
            match out.last_mut() {
                Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
                _ => out.push(i),
            }
        }
        Self { intervals: out }
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut v = self.intervals.clone();
        v.extend_from_slice(&other.intervals);
        Self::from_intervals(v)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, y: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv.hi < y);
        self.intervals.get(i).is_some_and(|iv| iv.lo <= y)
    }

    /// Sum of interval lengths.
    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|i| i.hi - i.lo).sum()
    }

    /// Sorted with `hi >= lo` and strict gaps between neighbours.
    pub fn is_well_formed(&self) -> bool {
        self.intervals.iter().all(|i| i.hi >= i.lo)
            && self.intervals.windows(2).all(|w| w[0].hi < w[1].lo)
    }
}

/// Merge-and-extend set from the grid points accepted by `p_agg(y) >= alpha`.
pub fn grid_search_set(
    grid: &YGrid,
    mut p_agg: impl FnMut(f64) -> Result<f64>,
    alpha: f64,
) -> Result<IntervalUnion> {
    if grid.is_degenerate() {
        let c = grid.y_low;
        if p_agg(c)? >= alpha {
            let e = grid.degenerate_half_width();
            return Ok(IntervalUnion::single(c - e, c + e));
        }
        return Ok(IntervalUnion::empty());
    }
    let mut out = Vec::new();
    let mut start: Option<isize> = None;
    for j in 0..grid.m as isize {
        let accepted = p_agg(grid.at(j))? >= alpha;
        match (accepted, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push(Interval {
                    lo: grid.at(s - 1),
                    hi: grid.at(j),
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Interval {
            lo: grid.at(s - 1),
            hi: grid.y_high + grid.delta,
        });
    }
    Ok(IntervalUnion::from_intervals(out))
}
