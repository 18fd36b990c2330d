//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`). `MDCP_ACCEPTANCE_ONLY=3,7`
//! restricts the run to some criteria. The process fails when a criterion
//! outside `KNOWN_RED` fails, or when any criterion fails and
//! `MDCP_ACCEPTANCE_STRICT=1` is set.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use mdcp::conformal::CalibrationBank;
use mdcp::data::{Features, TaskKind};
use mdcp::dgp::{Suite, SuiteConfig};
use mdcp::dualopt::{train_lambda, BasisConfig, BasisMap, DualProblem, DualRow, DualTrainConfig};
use mdcp::harness::{run_experiment, ExperimentConfig, Report, SuiteEntry};
use mdcp::oracle::{solve_cond_dual, solve_primal_lp, verify_certificate, DiscreteInstance};
use mdcp::regsets::{grid_search_set, IntervalUnion, YGrid};
use mdcp::rng::substream;

/// Criteria that are known not to hold; see the decisions ledger.
const KNOWN_RED: &[usize] = &[4];

const ALPHA: f64 = 0.1;

struct Line {
    id: usize,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn within(t: Instant, limit_s: u64) -> (bool, Duration) {
    let e = t.elapsed();
    (e <= Duration::from_secs(limit_s), e)
}

// 1. Strong duality of the discrete oracle.
fn oracle_duality() -> Line {
    let t = Instant::now();
    let mut rng = substream(101, &[1]);
    let (mut gap, mut slack, mut min_sum, mut bad) = (0.0f64, 0.0f64, f64::INFINITY, 0);
    for _ in 0..100 {
        let k = rng.random_range(1..=3);
        let l = rng.random_range(2..=6);
        let alpha = [0.05, 0.1, 0.2, 0.3][rng.random_range(0..4)];
        let inst = DiscreteInstance::random(&mut rng, k, l, alpha).unwrap();
        let (Ok(cert), Ok((primal, _))) = (solve_cond_dual(&inst), solve_primal_lp(&inst)) else {
            bad += 1;
            continue;
        };
        gap = gap.max((primal - cert.dual_value).abs());
        slack = cert.slackness.iter().fold(slack, |m, s| m.max(s.residual));
        if !verify_certificate(&cert, &inst).all_passed() {
            bad += 1;
        }
        min_sum = min_sum.min(cert.lambda_star.iter().sum());
    }
    let (fast, elapsed) = within(t, 10);
    Line {
        id: 1,
        pass: bad == 0 && gap <= 1e-6 && slack <= 1e-6 && min_sum > 0.0 && fast,
        detail: format!(
            "100 instances: max |primal - dual| {gap:.2e}, max slackness residual {slack:.2e}, \
             min sum lambda {min_sum:.4}, failed certificates {bad}"
        ),
        elapsed,
    }
}

// 2. Closed-form instances.
fn closed_forms() -> Line {
    let t = Instant::now();
    let sym = DiscreteInstance::conditional(0.1, vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let c = solve_cond_dual(&sym).unwrap();
    let e1 = (c.dual_value - 1.8)
        .abs()
        .max((c.lambda_star[0] - 1.0).abs())
        .max((c.lambda_star[1] - 1.0).abs());
    let one = DiscreteInstance::conditional(0.1, vec![vec![0.95, 0.05]]).unwrap();
    let c1 = solve_cond_dual(&one).unwrap();
    let e2 = (c1.dual_value - 0.9473684).abs();
    let e3 = (c1.lambda_star[0] - 1.0526316).abs();
    // The closed forms are 18/19 and 20/19; the decimals are rounded to 7 places.
    let e2x = (c1.dual_value - 18.0 / 19.0).abs();
    let e3x = (c1.lambda_star[0] - 20.0 / 19.0).abs();
    Line {
        id: 2,
        pass: e1 <= 1e-9 && e2x <= 1e-9 && e3x <= 1e-9 && e2 <= 5e-8 && e3 <= 5e-8,
        detail: format!(
            "symmetric: value {:.10} lambda ({:.10}, {:.10}); single source: value {:.10} lambda {:.10}",
            c.dual_value, c.lambda_star[0], c.lambda_star[1], c1.dual_value, c1.lambda_star[0]
        ),
        elapsed: t.elapsed(),
    }
}

/// Fixed score laws of comparable scale but different shape: continuous,
/// heavily tied, and skewed.
fn adversarial_score<R: Rng>(rng: &mut R, k: usize) -> f64 {
    match k {
        0 => StandardNormal.sample(rng),
        1 => (2.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).round() / 2.0,
        _ => <Exp1 as Distribution<f64>>::sample(&Exp1, rng) - 1.0,
    }
}

/// Asymptotic Kolmogorov tail `P(K > t)`.
fn kolmogorov_tail(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1.0f64).powf(j - 1.0) * (-2.0 * j * j * t * t).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

// 3. Finite-sample validity of the max-p set and uniformity of randomized p-values.
fn finite_sample_validity() -> Line {
    let t = Instant::now();
    let (k, n, m, trials) = (3, 500, 500, 200);
    let mut rng = substream(103, &[1]);
    let mut per_trial = vec![Vec::with_capacity(trials); k];
    for _ in 0..trials {
        let bank = CalibrationBank::new(
            (0..k)
                .map(|j| (0..n).map(|_| adversarial_score(&mut rng, j)).collect())
                .collect(),
        )
        .unwrap();
        for (src, cov) in per_trial.iter_mut().enumerate() {
            let mut hit = 0;
            for _ in 0..m {
                let s = adversarial_score(&mut rng, src);
                let p = (0..k)
                    .map(|j| bank.p_value_randomized(j, s, rng.random()).unwrap())
                    .fold(0.0, f64::max);
                hit += usize::from(p >= ALPHA);
            }
            cov.push(hit as f64 / m as f64);
        }
    }
    let mut worst_margin = f64::INFINITY;
    let mut covs = Vec::new();
    for c in &per_trial {
        let mean = c.iter().sum::<f64>() / trials as f64;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let mcse = (var / trials as f64).sqrt();
        worst_margin = worst_margin.min(mean - (1.0 - ALPHA - 3.0 * mcse));
        covs.push(mean);
    }

    // Fresh calibration set per draw so that the draws are independent.
    let draws = 100_000;
    let mut p: Vec<f64> = (0..draws)
        .map(|i| {
            let src = i % k;
            let cal: Vec<f64> = (0..19).map(|_| adversarial_score(&mut rng, src)).collect();
            let bank = CalibrationBank::new(vec![cal]).unwrap();
            let s = adversarial_score(&mut rng, src);
            bank.p_value_randomized(0, s, rng.random()).unwrap()
        })
        .collect();
    p.sort_by(f64::total_cmp);
    let nf = draws as f64;
    let d = p
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / nf - v).max(v - i as f64 / nf))
        .fold(0.0, f64::max);
    let ks_p = kolmogorov_tail((nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d);
    let (fast, elapsed) = within(t, 120);
    Line {
        id: 3,
        pass: worst_margin >= 0.0 && ks_p >= 0.001 && fast,
        detail: format!(
            "per-source coverage {:.4}/{:.4}/{:.4} (min margin over 0.9-3*MCSE {worst_margin:+.4}); \
             KS D = {d:.5}, p = {ks_p:.3}",
            covs[0], covs[1], covs[2]
        ),
        elapsed,
    }
}

fn classification() -> TaskKind {
    TaskKind::Classification { num_classes: 6 }
}

fn experiment(suites: Vec<SuiteConfig>, methods: &[&str], runs: usize, seed: u64) -> Report {
    let cfg = ExperimentConfig {
        suites: suites.into_iter().map(SuiteEntry::new).collect(),
        methods: methods.iter().map(|m| m.to_string()).collect(),
        runs,
        seed,
        record_wall_time: false,
        ..Default::default()
    };
    run_experiment(&cfg).unwrap()
}

fn mean(r: &Report, suite: &str, method: &str, metric: &str) -> f64 {
    r.mean_of(suite, method, metric)
        .unwrap_or_else(|| panic!("no {metric} for {suite}/{method}"))
}

const LINEAR_METHODS: &[&str] = &["mdcp", "mdcp-tuned", "baseline-agg", "baseline-src"];
const CLASS_SUITE: &str = "linear-classification-tau2.5";
const REG_SUITE: &str = "linear-regression-tau2.5";

// 4. Classification Linear suite.
fn classification_linear(r: &Report, elapsed: Duration) -> Line {
    let worst = mean(r, CLASS_SUITE, "mdcp", "worst_cov");
    let src = (0..3)
        .map(|k| mean(r, CLASS_SUITE, &format!("baseline-src-{k}"), "worst_cov"))
        .fold(0.0, f64::max);
    let ratio = mean(r, CLASS_SUITE, "mdcp", "mean_size") / mean(r, CLASS_SUITE, "baseline-agg", "mean_size");
    Line {
        id: 4,
        pass: (0.88..=0.93).contains(&worst) && src < 0.85 && ratio <= 0.85 && elapsed <= Duration::from_secs(600),
        detail: format!(
            "N=30: MDCP worst-case {worst:.4} (need [0.88, 0.93]); max baseline-src worst-case {src:.4} \
             (need < 0.85); size MDCP/agg {ratio:.4} (need <= 0.85)"
        ),
        elapsed,
    }
}

// 5. Regression Linear suite.
fn regression_linear(r: &Report, elapsed: Duration) -> Line {
    let worst = mean(r, REG_SUITE, "mdcp", "worst_cov");
    let agg = mean(r, REG_SUITE, "baseline-agg", "worst_cov");
    let ratio = mean(r, REG_SUITE, "mdcp", "mean_size") / mean(r, REG_SUITE, "baseline-agg", "mean_size");
    Line {
        id: 5,
        pass: (0.88..=0.93).contains(&worst) && ratio <= 0.90 && agg >= 0.93 && elapsed <= Duration::from_secs(600),
        detail: format!(
            "N=30: MDCP worst-case {worst:.4} (need [0.88, 0.93]); width MDCP/agg {ratio:.4} \
             (need <= 0.90); baseline-agg worst-case {agg:.4} (need >= 0.93)"
        ),
        elapsed,
    }
}

// 6. Temperature sweep.
fn temperature() -> Line {
    let t = Instant::now();
    let taus = [0.5, 1.5, 2.5, 3.5, 4.5];
    let suites = taus
        .iter()
        .map(|&tau| SuiteConfig {
            suite: Suite::Temperature,
            task: classification(),
            tau,
            ..Default::default()
        })
        .collect();
    let r = experiment(suites, &["mdcp", "baseline-src"], 10, 6);
    let mut src = Vec::new();
    let mut md = Vec::new();
    for tau in taus {
        let s = format!("temperature-classification-tau{tau}");
        let per_k: f64 = (0..3)
            .map(|k| mean(&r, &s, &format!("baseline-src-{k}"), "worst_cov"))
            .sum::<f64>()
            / 3.0;
        src.push(per_k);
        md.push(mean(&r, &s, "mdcp", "worst_cov"));
    }
    let rise = src.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let md_ok = md.iter().all(|v| (0.87..=0.94).contains(v));
    let (fast, elapsed) = within(t, 900);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Line {
        id: 6,
        pass: rise <= 0.02 && md_ok && fast,
        detail: format!(
            "tau 0.5..4.5, N=10: baseline-src worst-case [{}] (max rise {rise:+.4}, need <= 0.02); \
             MDCP worst-case [{}] (need [0.87, 0.94])",
            fmt(&src),
            fmt(&md)
        ),
        elapsed,
    }
}

/// Dual-solver instance: three sources over six labels, with a covariate
/// that carries no information. The oracle set has a single boundary label,
/// so the max-p set can match it; with several tied labels the oracle's
/// per-label randomization is not reachable by any threshold set.
fn solver_instance() -> DiscreteInstance {
    DiscreteInstance::conditional(
        ALPHA,
        vec![
            vec![0.30, 0.25, 0.20, 0.13, 0.08, 0.04],
            vec![0.50, 0.30, 0.10, 0.05, 0.03, 0.02],
            vec![0.35, 0.35, 0.20, 0.05, 0.03, 0.02],
        ],
    )
    .unwrap()
}

fn sample_label<R: Rng>(rng: &mut R, pmf: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (y, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return y;
        }
    }
    pmf.len() - 1
}

// 7. Trained multipliers against the oracle on exact densities.
fn dual_solver_agreement() -> Line {
    let t = Instant::now();
    let inst = solver_instance();
    let cert = solve_cond_dual(&inst).unwrap();
    let k = inst.k;
    let w = 1.0 / k as f64;
    let pool: Vec<f64> = (0..inst.labels)
        .map(|y| (0..k).map(|j| w * inst.f[j][y]).sum())
        .collect();
    let mut rng = substream(107, &[1]);
    let n = 50_000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let basis = BasisMap::fit(&Features::new(n, 1, xs.clone()).unwrap(), BasisConfig::default()).unwrap();
    let rows = xs
        .iter()
        .map(|&x| {
            let src = rng.random_range(0..k);
            let y = sample_label(&mut rng, &inst.f[src]);
            DualRow {
                features: basis.features(&[x]),
                f: (0..k).map(|j| inst.f[j][y]).collect(),
                p_pool: pool[y],
            }
        })
        .collect();
    let cfg = DualTrainConfig::default();
    let problem = DualProblem::new(rows, &basis, k, ALPHA, cfg.denom_floor).unwrap();
    let (lambda, curve) = train_lambda(&problem, &basis, &cfg, 0.0, 7).unwrap();
    let ratio = curve.best_objective / cert.dual_value;

    // Max-p sets from the learned score, calibrated and tested on fresh draws.
    let h = |x: f64, y: usize| -> f64 {
        let l = lambda.lambda_at(&[x]);
        (0..k).map(|j| l[j] * inst.f[j][y]).sum()
    };
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, src: usize| -> (f64, usize) {
        let x: f64 = rng.random();
        (x, sample_label(rng, &inst.f[src]))
    };
    let bank = CalibrationBank::new(
        (0..k)
            .map(|src| {
                (0..5000)
                    .map(|_| {
                        let (x, y) = draw(&mut rng, src);
                        -h(x, y)
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap();
    let m = 40_000;
    let cov: Vec<f64> = (0..k)
        .map(|src| {
            let mut hit = 0;
            for _ in 0..m {
                let (x, y) = draw(&mut rng, src);
                let s = -h(x, y);
                let p = (0..k)
                    .map(|j| bank.p_value_randomized(j, s, rng.random()).unwrap())
                    .fold(0.0, f64::max);
                hit += usize::from(p >= ALPHA);
            }
            hit as f64 / m as f64
        })
        .collect();
    let dev = cov
        .iter()
        .zip(&cert.per_source_coverage)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (fast, elapsed) = within(t, 180);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Line {
        id: 7,
        pass: ratio >= 0.98 && dev <= 0.01 && fast,
        detail: format!(
            "n=50000: objective {:.5} vs oracle {:.5} (ratio {ratio:.4}, need >= 0.98); coverage [{}] vs \
             oracle [{}] (max dev {dev:.4}, need <= 0.01); oracle lambda [{}], tie set {:?}",
            curve.best_objective,
            cert.dual_value,
            fmt(&cov),
            fmt(&cert.per_source_coverage),
            fmt(&cert.lambda_star),
            cert.tie_set
        ),
        elapsed,
    }
}

// 8. Analytic gradient against central finite differences.
fn gradient_check() -> Line {
    let t = Instant::now();
    let mut rng = substream(108, &[1]);
    let (k, d, n) = (3, 2, 64);
    let xs: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let basis = BasisMap::fit(&Features::new(n, d, xs.clone()).unwrap(), BasisConfig::default()).unwrap();
    let rows: Vec<DualRow> = (0..n)
        .map(|i| DualRow {
            features: basis.features(&xs[i * d..(i + 1) * d]),
            f: (0..k).map(|_| rng.random_range(0.01..1.0)).collect(),
            // Some pooled densities sit below the floor.
            p_pool: if i % 8 == 0 { 1e-6 } else { rng.random_range(0.01..1.0) },
        })
        .collect();
    let problem = DualProblem::new(rows, &basis, k, ALPHA, 1e-4).unwrap();
    let all: Vec<usize> = (0..n).collect();
    let eps = 1e-6;
    let (mut worst, mut checked) = (0.0f64, 0);
    while checked < 50 {
        let theta: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..basis.dim()).map(|_| 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect())
            .collect();
        let lambda = mdcp::dualopt::LambdaModel::new(basis.clone(), theta.clone()).unwrap();
        let near_kink = (0..n).any(|i| {
            let l = problem.lambda_row(&lambda, i);
            let h: f64 = l.iter().zip(&problem.rows[i].f).map(|(a, b)| a * b).sum();
            (h - 1.0).abs() < 1e-3
        });
        if near_kink {
            continue;
        }
        for gamma in [0.0, 0.5] {
            let g = problem.gradient(&theta, &all, gamma).unwrap();
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for kk in 0..k {
                for j in 0..basis.dim() {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[kk][j] += eps;
                    tm[kk][j] -= eps;
                    let fd = (problem.objective(&tp, &all, gamma).unwrap()
                        - problem.objective(&tm, &all, gamma).unwrap())
                        / (2.0 * eps);
                    num = num.max((g[kk][j] - fd).abs());
                    den = den.max(g[kk][j].abs());
                }
            }
            worst = worst.max(num / den.max(1e-12));
        }
        checked += 1;
    }
    let (fast, elapsed) = within(t, 5);
    Line {
        id: 8,
        pass: worst <= 1e-4 && fast,
        detail: format!("50 points x gamma in {{0, 0.5}}: max relative error {worst:.2e} (need <= 1e-4)"),
        elapsed,
    }
}

fn inside(outer: &IntervalUnion, lo: f64, hi: f64) -> bool {
    outer.intervals().iter().any(|i| i.lo <= lo && hi <= i.hi)
}

// 9. Grid-search sets contain every accepted grid point.
fn grid_superset() -> Line {
    let t = Instant::now();
    let mut rng = substream(109, &[1]);
    let (mut missed, mut malformed, mut nonmono) = (0, 0, 0);
    for _ in 0..1000 {
        let k = rng.random_range(1..=3);
        let centres: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let scales: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..3.0)).collect();
        let n = rng.random_range(5..200);
        let bank = CalibrationBank::new(
            (0..k)
                .map(|_| (0..n).map(|_| <Exp1 as Distribution<f64>>::sample(&Exp1, &mut rng)).collect())
                .collect(),
        )
        .unwrap();
        let u: Vec<f64> = (0..k).map(|_| rng.random()).collect();
        let labels: Vec<f64> = (0..20).map(|_| rng.random_range(-12.0..12.0)).collect();
        let grid = YGrid::build(&labels, rng.random_range(2..150)).unwrap();
        let p_agg = |y: f64| -> mdcp::Result<f64> {
            let mut best = 0.0f64;
            for j in 0..k {
                let s = (y - centres[j]).abs() / scales[j];
                best = best.max(bank.p_value_randomized(j, s, u[j])?);
            }
            Ok(best)
        };
        let a1 = rng.random_range(0.02..0.5);
        let a2 = a1 + rng.random_range(0.0..0.3);
        let s1 = grid_search_set(&grid, p_agg, a1).unwrap();
        let s2 = grid_search_set(&grid, p_agg, a2).unwrap();
        for y in grid.points() {
            if p_agg(y).unwrap() >= a1 && !s1.contains(y) {
                missed += 1;
            }
        }
        if !s1.is_well_formed() || !s2.is_well_formed() {
            malformed += 1;
        }
        if s2.intervals().iter().any(|i| !inside(&s1, i.lo, i.hi)) {
            nonmono += 1;
        }
    }
    let (fast, elapsed) = within(t, 30);
    Line {
        id: 9,
        pass: missed == 0 && malformed == 0 && nonmono == 0 && fast,
        detail: format!(
            "1000 instances: accepted points outside the set {missed}, malformed unions {malformed}, \
             alpha-monotonicity violations {nonmono}"
        ),
        elapsed,
    }
}

// 10. Penalty tuning changes little.
fn tuning_neutrality(class: &Report, reg: &Report, elapsed: Duration) -> Line {
    let mut worst_size = 0.0f64;
    let mut worst_cov = 0.0f64;
    let mut parts = Vec::new();
    for (r, s) in [(class, CLASS_SUITE), (reg, REG_SUITE)] {
        let size = mean(r, s, "mdcp-tuned", "mean_size") / mean(r, s, "mdcp", "mean_size") - 1.0;
        let cov = mean(r, s, "mdcp-tuned", "worst_cov") - mean(r, s, "mdcp", "worst_cov");
        worst_size = worst_size.max(size.abs());
        worst_cov = worst_cov.max(cov.abs());
        parts.push(format!("{s}: size {:+.2}%, worst-case {cov:+.4}", 100.0 * size));
    }
    Line {
        id: 10,
        pass: worst_size <= 0.05 && worst_cov <= 0.02 && elapsed <= Duration::from_secs(1200),
        detail: format!("N=30: {} (need within 5% and 0.02)", parts.join("; ")),
        elapsed,
    }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("MDCP_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let want = |id: usize| only.as_ref().is_none_or(|o| o.contains(&id));
    let strict = std::env::var("MDCP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut lines = Vec::new();
    let mut emit = |l: Line| {
        println!(
            "criterion {:>2}: {} ({:.1}s) {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.elapsed.as_secs_f64(),
            l.detail
        );
        lines.push((l.id, l.pass));
    };
    if want(1) {
        emit(oracle_duality());
    }
    if want(2) {
        emit(closed_forms());
    }
    if want(3) {
        emit(finite_sample_validity());
    }
    let linear = |task: TaskKind| SuiteConfig {
        suite: Suite::Linear,
        task,
        ..Default::default()
    };
    let class_run = (want(4) || want(10)).then(|| {
        let t = Instant::now();
        (experiment(vec![linear(classification())], LINEAR_METHODS, 30, 4), t.elapsed())
    });
    let reg_run = (want(5) || want(10)).then(|| {
        let t = Instant::now();
        (experiment(vec![linear(TaskKind::Regression)], LINEAR_METHODS, 30, 5), t.elapsed())
    });
    if let (true, Some((r, e))) = (want(4), &class_run) {
        emit(classification_linear(r, *e));
    }
    if let (true, Some((r, e))) = (want(5), &reg_run) {
        emit(regression_linear(r, *e));
    }
    if want(6) {
        emit(temperature());
    }
    if want(7) {
        emit(dual_solver_agreement());
    }
    if want(8) {
        emit(gradient_check());
    }
    if want(9) {
        emit(grid_superset());
    }
    if let (true, Some((c, ce)), Some((r, re))) = (want(10), &class_run, &reg_run) {
        emit(tuning_neutrality(c, r, *ce + *re));
    }
    let failed: Vec<usize> = lines.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    let unexpected: Vec<usize> = failed.iter().copied().filter(|id| !KNOWN_RED.contains(id)).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} (known red: {:?})",
        lines.len() - failed.len(),
        failed.len(),
        failed,
        KNOWN_RED
    );
    if !unexpected.is_empty() || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}
