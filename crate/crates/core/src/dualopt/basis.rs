use serde::{Deserialize, Serialize};

use crate::data::Features;
use crate::error::{MdcpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisConfig {
    pub num_knots: usize,
    pub degree: usize,
    /// Append a constant feature.
    pub bias: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            num_knots: 5,
            degree: 3,
            bias: true,
        }
    }
}

/// Per-coordinate B-spline features plus an optional constant.
///
/// Knots are uniform over each coordinate's observed range and extended by
/// `degree` equally spaced knots on both sides; inputs are clamped to the
/// range, so the features are constant beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMap {
    cfg: BasisConfig,
    lo: Vec<f64>,
    hi: Vec<f64>,
    knots: Vec<Vec<f64>>,
}

impl BasisMap {
    pub fn fit(x: &Features, cfg: BasisConfig) -> Result<Self> {
        if cfg.num_knots < 2 {
            return Err(MdcpError::Invalid("a spline basis needs at least 2 knots".into()));
        }
        if x.nrows() == 0 {
            return Err(MdcpError::TooFewSamples("no rows to place knots".into()));
        }
        let mut lo = Vec::with_capacity(x.ncols());
        let mut hi = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.column(j);
            lo.push(col.iter().copied().fold(f64::INFINITY, f64::min));
            hi.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Self::from_ranges(lo, hi, cfg)
    }

    pub fn from_ranges(lo: Vec<f64>, mut hi: Vec<f64>, cfg: BasisConfig) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(MdcpError::Invalid("basis ranges must be finite and paired".into()));
        }
        let mut knots = Vec::with_capacity(lo.len());
        for (l, h) in lo.iter().zip(hi.iter_mut()) {
            if *h - *l < 1e-12 {
                // A constant coordinate still gets a well-defined knot vector.
                *h = *l + 1.0;
            }
            let step = (*h - *l) / (cfg.num_knots - 1) as f64;
            let p = cfg.degree as isize;
            let t: Vec<f64> = (-p..cfg.num_knots as isize + p)
                .map(|i| {
                    if i == cfg.num_knots as isize - 1 {
                        *h
                    } else {
                        *l + i as f64 * step
                    }
                })
                .collect();
            knots.push(t);
        }
        Ok(Self { cfg, lo, hi, knots })
    }

    pub fn config(&self) -> BasisConfig {
        self.cfg
    }

    pub fn input_dim(&self) -> usize {
        self.lo.len()
    }

    /// Splines per coordinate: `num_knots + degree - 1`.
    pub fn block_len(&self) -> usize {
        self.cfg.num_knots + self.cfg.degree - 1
    }

    /// Feature count `m`.
    pub fn dim(&self) -> usize {
        self.input_dim() * self.block_len() + usize::from(self.cfg.bias)
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (j, &v) in x.iter().enumerate().take(self.input_dim()) {
            let v = v.clamp(self.lo[j], self.hi[j]);
            out.extend(bspline_values(&self.knots[j], self.cfg.degree, v));
        }
        if self.cfg.bias {
            out.push(1.0);
        }
        out
    }
}

/// All degree-`p` B-splines on knot vector `t` at `x` (Cox-de Boor).
fn bspline_values(t: &[f64], p: usize, x: f64) -> Vec<f64> {
    let n = t.len();
    let mut b: Vec<f64> = (0..n - 1)
        .map(|i| f64::from(u8::from(t[i] <= x && x < t[i + 1])))
        .collect();
    for d in 1..=p {
        for i in 0..n - 1 - d {
            let left = if t[i + d] > t[i] {
                (x - t[i]) / (t[i + d] - t[i]) * b[i]
            } else {
                0.0
            };
            let right = if t[i + d + 1] > t[i + 1] {
                (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * b[i + 1]
            } else {
                0.0
            };
            b[i] = left + right;
        }
    }
    b.truncate(n - 1 - p);
    b
}
