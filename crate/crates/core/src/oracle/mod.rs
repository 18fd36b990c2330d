//! Exact solvers for discrete instances, used as ground truth.
//!
//! A discrete instance has `K` sources and `L` labels, either at one
//! covariate value (conditional problem) or on a finite covariate grid with
//! source densities `r_k(x)` against a base measure `nu` (marginal problem).
//! Both problems are written as a list of weighted "pieces" `(w_j, a_j)`:
//! one per label in the conditional case, one per (grid point, label) in the
//! marginal case, with `a_jk = r_k(x) f_k(y|x)`. Then
//!
//! - dual: `Phi(lambda) = (1 - alpha) sum_k lambda_k - sum_j w_j (a_j . lambda - 1)_+`
//! - primal: `min sum_j w_j I_j` s.t. `sum_j w_j a_jk I_j >= 1 - alpha`, `I in [0, 1]`.
//!
//! The dual maximum is found by enumerating the vertices of the hyperplane
//! arrangement `{a_j . lambda = 1} + {lambda_k = 0}`; the primal is solved
//! independently by simplex.

pub mod simplex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MdcpError, Result};
use simplex::{LinearProgram, Sense};

/// `lambda_k` above this counts as active.
pub const ACTIVITY_TOL: f64 = 1e-6;
/// Labels with `|h - 1|` below this form the tie set.
pub const TIE_TOL: f64 = 1e-9;
pub const GAP_TOL: f64 = 1e-6;
pub const MAX_SOURCES: usize = 4;
pub const MAX_LABELS: usize = 12;
pub const MAX_GRID: usize = 16;
/// Above this many candidate vertices the dual is solved as an LP instead.
const MAX_VERTEX_CANDIDATES: u64 = 250_000;

/// Covariate grid of a marginal instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateGrid {
    /// Grid point coordinates; informational only.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Base measure `nu({x_g})`.
    pub nu: Vec<f64>,
    /// `r[k][g]`: density of source `k`'s covariate law against `nu`.
    pub r: Vec<Vec<f64>>,
    /// Optional per-point pmfs `f[g][k][y]`; defaults to the instance's `f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of labels `L`.
    pub labels: usize,
    /// `f[k][y]`.
    pub f: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<CovariateGrid>,
}

/// One weighted piece `(w_j, a_j)` of the dual objective.
#[derive(Debug, Clone)]
struct Piece {
    w: f64,
    a: Vec<f64>,
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(MdcpError::Invalid(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(MdcpError::Invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl DiscreteInstance {
    pub fn conditional(alpha: f64, f: Vec<Vec<f64>>) -> Result<Self> {
        let inst = Self {
            alpha,
            k: f.len(),
            labels: f.first().map_or(0, Vec::len),
            f,
            grid: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MdcpError::Invalid(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.k == 0 || self.k > MAX_SOURCES {
            return Err(MdcpError::Invalid(format!("K = {} outside 1..={MAX_SOURCES}", self.k)));
        }
        if self.labels == 0 || self.labels > MAX_LABELS {
            return Err(MdcpError::Invalid(format!(
                "L = {} outside 1..={MAX_LABELS}",
                self.labels
            )));
        }
        let check_f = |f: &[Vec<f64>], at: &str| -> Result<()> {
            if f.len() != self.k || f.iter().any(|row| row.len() != self.labels) {
                return Err(MdcpError::Invalid(format!("f{at} must be K x L")));
            }
            for (k, row) in f.iter().enumerate() {
                check_pmf(row, &format!("f{at}[{k}]"))?;
            }
            Ok(())
        };
        check_f(&self.f, "")?;
        if let Some(g) = &self.grid {
            let n = g.nu.len();
            if n == 0 || n > MAX_GRID {
                return Err(MdcpError::Invalid(format!("grid size {n} outside 1..={MAX_GRID}")));
            }
            if g.nu.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(MdcpError::Invalid("grid weights nu must be positive".into()));
            }
            if g.r.len() != self.k || g.r.iter().any(|row| row.len() != n) {
                return Err(MdcpError::Invalid("r must be K x G".into()));
            }
            for (k, row) in g.r.iter().enumerate() {
                if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(MdcpError::Invalid(format!("r[{k}] has a negative entry")));
                }
                let mass: f64 = row.iter().zip(&g.nu).map(|(r, nu)| r * nu).sum();
                if (mass - 1.0).abs() > 1e-12 {
                    return Err(MdcpError::Invalid(format!(
                        "r[{k}] integrates to {mass} against nu, not 1"
                    )));
                }
            }
            if let Some(fg) = &g.f {
                if fg.len() != n {
                    return Err(MdcpError::Invalid("grid f must have one K x L block per point".into()));
                }
                for (i, f) in fg.iter().enumerate() {
                    check_f(f, &format!("[grid {i}]"))?;
                }
            }
        }
        Ok(())
    }

    pub fn is_marginal(&self) -> bool {
        self.grid.is_some()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Random conditional instance with Dirichlet(1) pmfs.
    pub fn random<R: Rng>(rng: &mut R, k: usize, labels: usize, alpha: f64) -> Result<Self> {
        Self::conditional(alpha, (0..k).map(|_| random_pmf(rng, labels)).collect())
    }

    fn pieces(&self) -> Vec<Piece> {
        match &self.grid {
            None => (0..self.labels)
                .map(|y| Piece {
                    w: 1.0,
                    a: self.f.iter().map(|fk| fk[y]).collect(),
                })
                .collect(),
            Some(g) => {
                let mut out = Vec::with_capacity(g.nu.len() * self.labels);
                for (i, &nu) in g.nu.iter().enumerate() {
                    let f = g.f.as_ref().map_or(&self.f, |fg| &fg[i]);
                    for y in 0..self.labels {
                        out.push(Piece {
                            w: nu,
                            a: (0..self.k).map(|k| g.r[k][i] * f[k][y]).collect(),
                        });
                    }
                }
                out
            }
        }
    }

    /// `Phi(lambda)`; the marginal dual when the instance has a grid.
    pub fn dual_value(&self, lambda: &[f64]) -> Result<f64> {
        check_lambda(lambda, self.k)?;
        Ok(phi(&self.pieces(), lambda, self.alpha))
    }

    /// `h_lambda` on every piece (per label, or per grid point and label).
    pub fn h_values(&self, lambda: &[f64]) -> Vec<f64> {
        self.pieces().iter().map(|p| dot(&p.a, lambda)).collect()
    }

    /// Coverage of source `k` under inclusion probabilities `inclusion`.
    pub fn coverage(&self, inclusion: &[f64]) -> Vec<f64> {
        let pieces = self.pieces();
        (0..self.k)
            .map(|k| {
                pieces
                    .iter()
                    .zip(inclusion)
                    .map(|(p, i)| p.w * p.a[k] * i)
                    .sum()
            })
            .collect()
    }

    /// `sum_j w_j I_j`: the expected set size.
    pub fn size(&self, inclusion: &[f64]) -> f64 {
        self.pieces().iter().zip(inclusion).map(|(p, i)| p.w * i).sum()
    }
}

pub fn random_pmf<R: Rng>(rng: &mut R, labels: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..labels)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let s: f64 = e.iter().sum();
    let mut p: Vec<f64> = e.iter().map(|v| v / s).collect();
    // Push the rounding residue into the largest entry.
    let resid = 1.0 - p.iter().sum::<f64>();
    let imax = (0..labels).fold(0, |m, i| if p[i] > p[m] { i } else { m });
    p[imax] += resid;
    p
}

fn check_lambda(lambda: &[f64], k: usize) -> Result<()> {
    if lambda.len() != k {
        return Err(MdcpError::Invalid(format!(
            "lambda has {} entries, expected {k}",
            lambda.len()
        )));
    }
    if let Some(&v) = lambda.iter().find(|v| !(**v >= 0.0)) {
        return Err(MdcpError::NegativeLambda(v));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn phi(pieces: &[Piece], lambda: &[f64], alpha: f64) -> f64 {
    let lin = (1.0 - alpha) * lambda.iter().sum::<f64>();
    let hinge: f64 = pieces
        .iter()
        .map(|p| p.w * (dot(&p.a, lambda) - 1.0).max(0.0))
        .sum();
    lin - hinge
}

/// `Phi(lambda)` for the conditional problem.
pub fn cond_dual_value(inst: &DiscreteInstance, lambda: &[f64]) -> Result<f64> {
    if inst.is_marginal() {
        return Err(MdcpError::Invalid("instance has a covariate grid".into()));
    }
    inst.dual_value(lambda)
}

/// Per-source complementary-slackness status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slackness {
    pub source: usize,
    pub lambda: f64,
    pub active: bool,
    pub coverage: f64,
    /// `|coverage - (1 - alpha)|` when active, `max(0, 1 - alpha - coverage)` otherwise.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda_star: Vec<f64>,
    pub dual_value: f64,
    /// Size of the constructed optimal set.
    pub primal_value: f64,
    pub duality_gap: f64,
    /// Inclusion probability per piece (per label, or grid point major).
    pub inclusion: Vec<f64>,
    pub per_source_coverage: Vec<f64>,
    pub tie_set: Vec<usize>,
    /// The tie set has positive measure, so other optimal sets may exist.
    pub tie_set_nonunique: bool,
    pub slackness: Vec<Slackness>,
    /// How the dual maximum was located.
    pub method: String,
    pub warm_start_value: f64,
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k as u64).fold(1u64, |acc, i| {
        acc.saturating_mul(n as u64 - i) / (i + 1)
    })
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best vertex of the arrangement `{a_j . lambda = 1} + {lambda_k = 0}`.
fn enumerate_vertices(pieces: &[Piece], k: usize, alpha: f64) -> (Vec<f64>, f64) {
    let mut planes: Vec<(Vec<f64>, f64)> = pieces.iter().map(|p| (p.a.clone(), 1.0)).collect();
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best = (vec![0.0; k], 0.0);
    for_each_subset(planes.len(), k, |idx| {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(mut lam) = solve_square(a, b) {
            if lam.iter().all(|&v| v >= -1e-12) {
                for v in &mut lam {
                    *v = v.max(0.0);
                }
                let val = phi(pieces, &lam, alpha);
                if val > best.1 + 1e-13 {
                    best = (lam, val);
                }
            }
        }
    });
    best
}

/// The dual as an LP: `max (1-alpha) sum lambda - sum w t` s.t. `t_j >= a_j . lambda - 1`.
fn dual_by_lp(pieces: &[Piece], k: usize, alpha: f64) -> Result<(Vec<f64>, f64)> {
    let j = pieces.len();
    let mut c = vec![-(1.0 - alpha); k];
    c.extend(pieces.iter().map(|p| p.w));
    let rows = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = p.a.clone();
            row.resize(k + j, 0.0);
            row[k + i] = -1.0;
            (row, Sense::Le, 1.0)
        })
        .collect();
    let sol = simplex::solve(&LinearProgram { c, rows })?;
    let lam = sol.x[..k].to_vec();
    let val = phi(pieces, &lam, alpha);
    Ok((lam, val))
}

/// Projected supergradient ascent with `1/sqrt(t)` steps.
fn supergradient_warm_start(pieces: &[Piece], k: usize, alpha: f64, iters: usize) -> (Vec<f64>, f64) {
    let mut lam = vec![1.0; k];
    let mut best = (lam.clone(), phi(pieces, &lam, alpha));
    for t in 1..=iters {
        let mut g = vec![1.0 - alpha; k];
        for p in pieces {
            if dot(&p.a, &lam) > 1.0 {
                for (gi, ai) in g.iter_mut().zip(&p.a) {
                    *gi -= p.w * ai;
                }
            }
        }
        let step = 1.0 / (t as f64).sqrt();
        for (l, gi) in lam.iter_mut().zip(&g) {
            *l = (*l + step * gi).max(0.0);
        }
        let v = phi(pieces, &lam, alpha);
        if v > best.1 {
            best = (lam.clone(), v);
        }
    }
    best
}

fn certify(inst: &DiscreteInstance, lambda: Vec<f64>, value: f64, method: &str, warm: f64) -> Result<DualCertificate> {
    let pieces = inst.pieces();
    let target = 1.0 - inst.alpha;
    let h: Vec<f64> = pieces.iter().map(|p| dot(&p.a, &lambda)).collect();
    let mut inclusion: Vec<f64> = h.iter().map(|&v| if v > 1.0 + TIE_TOL { 1.0 } else { 0.0 }).collect();
    let tie_set: Vec<usize> = (0..h.len()).filter(|&j| (h[j] - 1.0).abs() <= TIE_TOL).collect();
    let active: Vec<bool> = lambda.iter().map(|&l| l > ACTIVITY_TOL).collect();

    if !tie_set.is_empty() {
        // min sum_T w Z s.t. active sources covered exactly, inactive at least.
        let base = inst.coverage(&inclusion);
        let mut rows = Vec::new();
        for k in 0..inst.k {
            let row: Vec<f64> = tie_set.iter().map(|&j| pieces[j].w * pieces[j].a[k]).collect();
            let sense = if active[k] { Sense::Eq } else { Sense::Ge };
            rows.push((row, sense, target - base[k]));
        }
        for i in 0..tie_set.len() {
            let mut row = vec![0.0; tie_set.len()];
            row[i] = 1.0;
            rows.push((row, Sense::Le, 1.0));
        }
        let c = tie_set.iter().map(|&j| pieces[j].w).collect();
        let sol = simplex::solve(&LinearProgram { c, rows }).map_err(|e| {
            MdcpError::NumericalFailure(format!("tie-set randomization failed: {e}"))
        })?;
        for (&j, z) in tie_set.iter().zip(sol.x) {
            inclusion[j] = z.clamp(0.0, 1.0);
        }
    }

    let coverage = inst.coverage(&inclusion);
    let primal = inst.size(&inclusion);
    let gap = primal - value;
    if gap.abs() > GAP_TOL {
        return Err(MdcpError::NumericalFailure(format!(
            "duality gap {gap:.3e} exceeds {GAP_TOL:.0e}"
        )));
    }
    let slackness = (0..inst.k)
        .map(|k| Slackness {
            source: k,
            lambda: lambda[k],
            active: active[k],
            coverage: coverage[k],
            residual: if active[k] {
                (coverage[k] - target).abs()
            } else {
                (target - coverage[k]).max(0.0)
            },
        })
        .collect();
    let nonunique = tie_set.iter().any(|&j| pieces[j].w > 0.0);
    Ok(DualCertificate {
        lambda_star: lambda,
        dual_value: value,
        primal_value: primal,
        duality_gap: gap,
        inclusion,
        per_source_coverage: coverage,
        tie_set,
        tie_set_nonunique: nonunique,
        slackness,
        method: method.to_string(),
        warm_start_value: warm,
    })
}

fn solve_dual(inst: &DiscreteInstance) -> Result<DualCertificate> {
    inst.validate()?;
    let pieces = inst.pieces();
    let (_, warm) = supergradient_warm_start(&pieces, inst.k, inst.alpha, 2000);
    let candidates = binomial(pieces.len() + inst.k, inst.k);
    let (lambda, value, method) = if candidates <= MAX_VERTEX_CANDIDATES {
        let (l, v) = enumerate_vertices(&pieces, inst.k, inst.alpha);
        (l, v, "vertex-enumeration")
    } else {
        let (l, v) = dual_by_lp(&pieces, inst.k, inst.alpha)?;
        (l, v, "dual-lp")
    };
    certify(inst, lambda, value, method, warm)
}

/// Maximises the conditional dual and builds the optimal randomized set.
pub fn solve_cond_dual(inst: &DiscreteInstance) -> Result<DualCertificate> {
    if inst.is_marginal() {
        return Err(MdcpError::Invalid("instance has a covariate grid; use solve_marginal_dual".into()));
    }
    solve_dual(inst)
}

/// Maximises the marginal dual over constant multipliers.
pub fn solve_marginal_dual(inst: &DiscreteInstance) -> Result<DualCertificate> {
    if !inst.is_marginal() {
        return Err(MdcpError::Invalid("marginal dual needs a covariate grid".into()));
    }
    solve_dual(inst)
}

/// Either dual, depending on whether the instance carries a grid.
pub fn solve_instance(inst: &DiscreteInstance) -> Result<DualCertificate> {
    solve_dual(inst)
}

/// Primal LP solution `(min size, inclusion)` by simplex.
pub fn solve_primal_lp(inst: &DiscreteInstance) -> Result<(f64, Vec<f64>)> {
    inst.validate()?;
    let pieces = inst.pieces();
    let j = pieces.len();
    let mut rows = Vec::with_capacity(inst.k + j);
    for k in 0..inst.k {
        rows.push((
            pieces.iter().map(|p| p.w * p.a[k]).collect(),
            Sense::Ge,
            1.0 - inst.alpha,
        ));
    }
    for i in 0..j {
        let mut row = vec![0.0; j];
        row[i] = 1.0;
        rows.push((row, Sense::Le, 1.0));
    }
    let sol = simplex::solve(&LinearProgram {
        c: pieces.iter().map(|p| p.w).collect(),
        rows,
    })?;
    Ok((sol.value, sol.x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Recomputes every certificate quantity from the instance.
pub fn verify_certificate(cert: &DualCertificate, inst: &DiscreteInstance) -> VerificationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64, tol: f64| {
        checks.push(Check {
            name: name.to_string(),
            passed: residual.is_finite() && residual <= tol,
            residual,
        });
    };
    let target = 1.0 - inst.alpha;
    let lam = &cert.lambda_star;
    let neg = lam.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    push("lambda_nonnegative", if lam.len() == inst.k { neg } else { f64::INFINITY }, 0.0);
    let phi_now = inst.dual_value(&lam.iter().map(|v| v.max(0.0)).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    push("dual_value", (phi_now - cert.dual_value).abs(), 1e-9);
    let bad_range = cert
        .inclusion
        .iter()
        .map(|&i| (-i).max(i - 1.0).max(0.0))
        .fold(0.0, f64::max);
    push("inclusion_in_unit_interval", bad_range, 0.0);
    let cov = inst.coverage(&cert.inclusion);
    let cov_err = cov
        .iter()
        .zip(&cert.per_source_coverage)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    push("coverage_consistent", cov_err, 1e-9);
    let infeas = cert
        .per_source_coverage
        .iter()
        .map(|c| (target - c).max(0.0))
        .fold(0.0, f64::max);
    push("coverage_feasible", infeas, 1e-9);
    let primal = inst.size(&cert.inclusion);
    push("duality_gap", (primal - phi_now).abs(), GAP_TOL);
    let slack = lam
        .iter()
        .zip(&cert.per_source_coverage)
        .filter(|(l, _)| **l > ACTIVITY_TOL)
        .map(|(_, c)| (c - target).abs())
        .fold(0.0, f64::max);
    push("complementary_slackness", slack, 1e-6);
    let h = inst.h_values(lam);
    let form = h
        .iter()
        .zip(&cert.inclusion)
        .map(|(&hv, &i)| {
            if hv > 1.0 + TIE_TOL {
                1.0 - i
            } else if hv < 1.0 - TIE_TOL {
                i
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    push("threshold_form", form, 1e-9);
    let any_active = lam.iter().any(|&l| l > ACTIVITY_TOL);
    push("nontrivial", if any_active { 0.0 } else { 1.0 }, 0.0);
    VerificationReport { checks }
}
