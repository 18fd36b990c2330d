//! Depth-limited regression trees grown on quantile-binned features.
//!
//! Trees are fit to a gradient target `g` with Hessian weights `h`; a leaf
//! predicts `sum(g) / sum(h)` and a split maximises
//! `G_L^2/H_L + G_R^2/H_R - G^2/H`. With `h = 1` this is ordinary
//! least-squares regression on `g`.

use serde::{Deserialize, Serialize};

use crate::data::Features;

const MAX_BINS: usize = 64;
const HESS_EPS: f64 = 1e-12;

/// Per-feature cut points; bin `b` holds values `x` with `cuts[b-1] < x <= cuts[b]`.
#[derive(Debug, Clone)]
pub struct BinnedFeatures {
    cuts: Vec<Vec<f64>>,
    /// Column-major bin codes.
    codes: Vec<Vec<u8>>,
    rows: usize,
}

impl BinnedFeatures {
    pub fn new(x: &Features) -> Self {
        let rows = x.nrows();
        let mut cuts = Vec::with_capacity(x.ncols());
        let mut codes = Vec::with_capacity(x.ncols());
        for j in 0..x.ncols() {
            let col = x.column(j);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let c: Vec<f64> = if sorted.len() <= MAX_BINS {
                sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut c: Vec<f64> = (1..MAX_BINS)
                    .map(|b| {
                        let pos = b * (sorted.len() - 1) / MAX_BINS;
                        0.5 * (sorted[pos] + sorted[pos + 1])
                    })
                    .collect();
                c.dedup();
                c
            };
            let code = col
                .iter()
                .map(|&v| c.partition_point(|&t| t < v) as u8)
                .collect();
            cuts.push(c);
            codes.push(code);
        }
        Self { cuts, codes, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Bin index of the threshold; only meaningful while fitting.
        #[serde(skip)]
        bin: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl RegressionTree {
    /// Grows a tree on the rows in `rows` (indices into `bins`).
    pub fn fit(bins: &BinnedFeatures, g: &[f64], h: &[f64], rows: &[usize], p: TreeParams) -> Self {
        let mut tree = RegressionTree { nodes: Vec::new() };
        let mut idx = rows.to_vec();
        tree.grow(bins, g, h, &mut idx, 0, p);
        tree
    }

    fn grow(
        &mut self,
        bins: &BinnedFeatures,
        g: &[f64],
        h: &[f64],
        idx: &mut [usize],
        depth: usize,
        p: TreeParams,
    ) -> usize {
        let (gs, hs) = idx.iter().fold((0.0, 0.0), |(a, b), &i| (a + g[i], b + h[i]));
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: gs / (hs + HESS_EPS),
        });
        if depth >= p.max_depth || idx.len() < 2 * p.min_leaf.max(1) {
            return id;
        }
        let Some(best) = best_split(bins, g, h, idx, gs, hs, p.min_leaf.max(1)) else {
            return id;
        };
        let code = &bins.codes[best.feature];
        let mut cut = 0;
        for i in 0..idx.len() {
            if usize::from(code[idx[i]]) <= best.bin {
                idx.swap(i, cut);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(bins, g, h, l, depth + 1, p);
        let right = self.grow(bins, g, h, r, depth + 1, p);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: bins.cuts[best.feature][best.bin],
            left,
            right,
            bin: best.bin,
        };
        id
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction for a row of the matrix the tree was grown on.
    pub(crate) fn predict_binned(&self, bins: &BinnedFeatures, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    left,
                    right,
                    bin,
                    ..
                } => {
                    i = if usize::from(bins.codes[*feature][row]) <= *bin {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Multiplies every leaf by `c`.
    pub fn scale(&mut self, c: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= c;
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

fn best_split(
    bins: &BinnedFeatures,
    g: &[f64],
    h: &[f64],
    idx: &[usize],
    gs: f64,
    hs: f64,
    min_leaf: usize,
) -> Option<Candidate> {
    let parent = gs * gs / (hs + HESS_EPS);
    let mut best: Option<Candidate> = None;
    let mut hist_g = [0.0f64; MAX_BINS];
    let mut hist_h = [0.0f64; MAX_BINS];
    let mut hist_n = [0usize; MAX_BINS];
    for (feature, code) in bins.codes.iter().enumerate() {
        let nb = bins.cuts[feature].len() + 1;
        if nb < 2 {
            continue;
        }
        hist_g[..nb].fill(0.0);
        hist_h[..nb].fill(0.0);
        hist_n[..nb].fill(0);
        for &i in idx {
            let b = usize::from(code[i]);
            hist_g[b] += g[i];
            hist_h[b] += h[i];
            hist_n[b] += 1;
        }
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for b in 0..nb - 1 {
            gl += hist_g[b];
            hl += hist_h[b];
            nl += hist_n[b];
            let nr = idx.len() - nl;
            if nl < min_leaf {
                continue;
            }
            if nr < min_leaf {
                break;
            }
            let (gr, hr) = (gs - gl, hs - hl);
            let gain = gl * gl / (hl + HESS_EPS) + gr * gr / (hr + HESS_EPS) - parent;
            if gain > 1e-12 && best.as_ref().is_none_or(|c| gain > c.gain) {
                best = Some(Candidate { gain, feature, bin: b });
            }
        }
    }
    best
}
