//! Dense two-phase simplex with Bland's rule, for the small LPs of the oracle.
//!
//! Solves `min c^T x` subject to row constraints and `x >= 0`.

use crate::error::{MdcpError, Result};

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;
const MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Original,
    Slack,
    Artificial,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<Kind>,
}

impl Tableau {
    fn rhs(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, &pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, &pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Sets the objective row to reduced costs of `cost` for the current basis.
    fn price(&mut self, cost: &[f64]) {
        let rhs = self.rhs();
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for j in 0..=rhs {
                    self.obj[j] -= cb * self.t[i][j];
                }
            }
        }
    }

    fn run(&mut self, allow_artificial: bool) -> Result<()> {
        let rhs = self.rhs();
        for _ in 0..MAX_ITER {
            let entering = (0..rhs).find(|&j| {
                (allow_artificial || self.kinds[j] != Kind::Artificial) && self.obj[j] < -COST_EPS
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-13
                                || (ratio <= br + 1e-13 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(MdcpError::NumericalFailure("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(MdcpError::NumericalFailure("simplex iteration limit reached".into()))
    }
}

/// Minimises `c^T x` over `x >= 0` and the given rows.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.c.len();
    let mut kinds = vec![Kind::Original; n];
    let mut rows = Vec::with_capacity(lp.rows.len());
    for (a, sense, b) in &lp.rows {
        if a.len() != n {
            return Err(MdcpError::Invalid("constraint row has wrong length".into()));
        }
        let (a, sense, b) = if *b < 0.0 {
            let flipped = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            (a.iter().map(|v| -v).collect::<Vec<_>>(), flipped, -b)
        } else {
            (a.clone(), *sense, *b)
        };
        rows.push((a, sense, b));
    }
    // Column layout: originals, then one slack/surplus per inequality,
    // then one artificial per Ge/Eq row.
    let mut extra = Vec::with_capacity(rows.len());
    for (_, sense, _) in &rows {
        let slack = (*sense != Sense::Eq).then(|| {
            kinds.push(Kind::Slack);
            kinds.len() - 1
        });
        extra.push(slack);
    }
    let mut art = Vec::with_capacity(rows.len());
    for (_, sense, _) in &rows {
        let a = (*sense != Sense::Le).then(|| {
            kinds.push(Kind::Artificial);
            kinds.len() - 1
        });
        art.push(a);
    }
    let width = kinds.len() + 1;
    let mut t = Vec::with_capacity(rows.len());
    let mut basis = Vec::with_capacity(rows.len());
    for (i, (a, sense, b)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(a);
        if let Some(s) = extra[i] {
            row[s] = if *sense == Sense::Le { 1.0 } else { -1.0 };
        }
        if let Some(z) = art[i] {
            row[z] = 1.0;
            basis.push(z);
        } else {
            basis.push(extra[i].expect("Le rows have a slack"));
        }
        row[width - 1] = *b;
        t.push(row);
    }
    let mut tab = Tableau {
        t,
        obj: Vec::new(),
        basis,
        kinds,
    };
    let total = tab.kinds.len();

    let phase1: Vec<f64> = tab
        .kinds
        .iter()
        .map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 })
        .collect();
    tab.price(&phase1);
    tab.run(true)?;
    if -tab.obj[total] > FEAS_EPS {
        return Err(MdcpError::NumericalFailure(format!(
            "linear program is infeasible (phase-one residual {:.3e})",
            -tab.obj[total]
        )));
    }
    for i in 0..tab.t.len() {
        if tab.kinds[tab.basis[i]] == Kind::Artificial {
            if let Some(j) = (0..total)
                .find(|&j| tab.kinds[j] != Kind::Artificial && tab.t[i][j].abs() > FEAS_EPS)
            {
                tab.pivot(i, j);
            }
        }
    }

    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&lp.c);
    tab.price(&cost);
    tab.run(false)?;

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][total].max(0.0);
        }
    }
    let value = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x })
}
