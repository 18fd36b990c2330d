//! Multiplier training against the discrete oracle and finite differences.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mdcp::conformal::{classification_set, CalibrationBank, PValueMode};
use mdcp::data::{Features, Label};
use mdcp::dualopt::{
    softplus, train_lambda, tune_penalty, BasisConfig, BasisMap, DualProblem, DualRow, DualTrainConfig, LambdaModel,
};
use mdcp::oracle::{solve_cond_dual, DiscreteInstance};
use mdcp::rng::substream;

const ALPHA: f64 = 0.1;

fn draw_label(rng: &mut ChaCha8Rng, pmf: &[f64]) -> usize {
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

/// Pmfs `f[k][y]` as a function of a scalar covariate.
type Law = dyn Fn(f64) -> Vec<Vec<f64>>;

/// Pooled rows from equally weighted sources with exact densities.
fn exact_rows(law: &Law, n: usize, seed: u64) -> (BasisMap, Vec<DualRow>) {
    let mut rng = substream(seed, &[0]);
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let basis = BasisMap::fit(&Features::new(n, 1, xs.clone()).unwrap(), BasisConfig::default()).unwrap();
    let rows = xs
        .iter()
        .map(|&x| {
            let f = law(x);
            let k = f.len();
            let src = rng.random_range(0..k);
            let y = draw_label(&mut rng, &f[src]);
            DualRow {
                features: basis.features(&[x]),
                f: f.iter().map(|fk| fk[y]).collect(),
                p_pool: f.iter().map(|fk| fk[y]).sum::<f64>() / k as f64,
            }
        })
        .collect();
    (basis, rows)
}

/// Theta whose multipliers equal `lambda` everywhere: the spline block sums
/// to one, so a constant coefficient gives a constant linear predictor.
fn constant_theta(basis: &BasisMap, lambda: &[f64]) -> Vec<Vec<f64>> {
    lambda
        .iter()
        .map(|&l| {
            let t = if l > 1e-12 { l.exp_m1().ln() } else { -40.0 };
            let mut row = vec![t; basis.dim()];
            *row.last_mut().unwrap() = 0.0;
            row
        })
        .collect()
}

#[test]
fn objective_at_oracle_multipliers_matches_dual_value() {
    let inst = DiscreteInstance::conditional(
        ALPHA,
        vec![vec![0.5, 0.3, 0.15, 0.05], vec![0.1, 0.2, 0.3, 0.4], vec![0.25, 0.25, 0.25, 0.25]],
    )
    .unwrap();
    let cert = solve_cond_dual(&inst).unwrap();
    let f = inst.f.clone();
    let (basis, rows) = exact_rows(&move |_| f.clone(), 200_000, 1);
    let problem = DualProblem::new(rows, &basis, 3, ALPHA, 1e-4).unwrap();
    let theta = constant_theta(&basis, &cert.lambda_star);
    let lambda = LambdaModel::new(basis.clone(), theta.clone()).unwrap();
    for (got, want) in lambda.lambda_at(&[0.37]).iter().zip(&cert.lambda_star) {
        assert!((got - want).abs() < 1e-9);
    }
    // Each row contributes (1 - h)_- / p_pool + (1 - alpha) sum lambda; the
    // per-row values are bounded, so 200k rows give a standard error well
    // under 0.01 here.
    let emp = problem.full_objective(&theta, 0.0).unwrap();
    assert!(
        (emp - cert.dual_value).abs() < 0.02,
        "empirical {emp} vs dual {}",
        cert.dual_value
    );
}

#[test]
fn single_source_training_reaches_oracle_value() {
    let inst = DiscreteInstance::conditional(ALPHA, vec![vec![0.45, 0.3, 0.15, 0.06, 0.04]]).unwrap();
    let cert = solve_cond_dual(&inst).unwrap();
    let f = inst.f.clone();
    let (basis, rows) = exact_rows(&move |_| f.clone(), 20_000, 2);
    let problem = DualProblem::new(rows, &basis, 1, ALPHA, 1e-4).unwrap();
    let (_, curve) = train_lambda(&problem, &basis, &DualTrainConfig::default(), 0.0, 3).unwrap();
    assert!(
        curve.best_objective >= 0.98 * cert.dual_value,
        "{} vs {}",
        curve.best_objective,
        cert.dual_value
    );
    // Best-so-far objectives never decrease.
    assert!(curve.best_so_far.windows(2).all(|w| w[1] >= w[0]));
    assert!(curve.best_objective >= curve.initial_objective);
}

#[test]
fn zero_epochs_return_zero_theta_and_training_is_deterministic() {
    let f = vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.2, 0.6]];
    let (basis, rows) = exact_rows(&move |_| f.clone(), 2000, 4);
    let problem = DualProblem::new(rows, &basis, 2, ALPHA, 1e-4).unwrap();
    let none = DualTrainConfig {
        max_epochs: 0,
        ..Default::default()
    };
    let (m, curve) = train_lambda(&problem, &basis, &none, 0.0, 5).unwrap();
    assert!(m.theta.iter().flatten().all(|&v| v == 0.0));
    assert!(curve.epoch_objective.is_empty());
    let cfg = DualTrainConfig {
        max_epochs: 15,
        ..Default::default()
    };
    let a = train_lambda(&problem, &basis, &cfg, 0.0, 6).unwrap();
    let b = train_lambda(&problem, &basis, &cfg, 0.0, 6).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

fn random_problem(rng: &mut ChaCha8Rng, k: usize, d: usize, n: usize) -> (BasisMap, DualProblem) {
    let xs: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let basis = BasisMap::fit(&Features::new(n, d, xs.clone()).unwrap(), BasisConfig::default()).unwrap();
    let rows = (0..n)
        .map(|i| DualRow {
            features: basis.features(&xs[i * d..(i + 1) * d]),
            f: (0..k).map(|_| rng.random_range(0.02..1.2)).collect(),
            p_pool: rng.random_range(0.05..1.0),
        })
        .collect();
    let p = DualProblem::new(rows, &basis, k, ALPHA, 1e-4).unwrap();
    (basis, p)
}

fn finite_difference_error(p: &DualProblem, theta: &[Vec<f64>], gamma: f64, eps: f64) -> f64 {
    let all: Vec<usize> = (0..p.len()).collect();
    let g = p.gradient(theta, &all, gamma).unwrap();
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for k in 0..theta.len() {
        for j in 0..theta[k].len() {
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[k][j] += eps;
            down[k][j] -= eps;
            let fd = (p.objective(&up, &all, gamma).unwrap() - p.objective(&down, &all, gamma).unwrap()) / (2.0 * eps);
            err = err.max((fd - g[k][j]).abs());
            scale = scale.max(g[k][j].abs());
        }
    }
    err / scale.max(1e-12)
}

#[test]
fn gradient_matches_finite_differences_away_from_kinks() {
    let mut rng = substream(9, &[1]);
    let (basis, p) = random_problem(&mut rng, 2, 2, 40);
    let mut checked = 0;
    while checked < 50 {
        let theta: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..basis.dim()).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let model = LambdaModel::new(basis.clone(), theta.clone()).unwrap();
        let kink = (0..p.len()).any(|i| {
            let h: f64 = p.lambda_row(&model, i).iter().zip(&p.rows[i].f).map(|(a, b)| a * b).sum();
            (h - 1.0).abs() < 1e-4
        });
        if kink {
            continue;
        }
        for gamma in [0.0, 0.3] {
            let e = finite_difference_error(&p, &theta, gamma, 1e-5);
            assert!(e <= 1e-4, "relative error {e} at gamma {gamma}");
        }
        checked += 1;
    }
}

#[test]
fn penalty_gradient_at_unit_theta() {
    let mut rng = substream(10, &[1]);
    let (basis, p) = random_problem(&mut rng, 1, 1, 30);
    let mut theta = vec![vec![0.0; basis.dim()]];
    theta[0][0] = 1.0;
    let all: Vec<usize> = (0..p.len()).collect();
    // Penalty-only gradient: difference of the penalized and unpenalized gradients.
    let g1 = p.gradient(&theta, &all, 1.0).unwrap();
    let g0 = p.gradient(&theta, &all, 0.0).unwrap();
    let eps = 1e-5;
    for j in 0..basis.dim() {
        let pen = |t: &[Vec<f64>]| p.objective(t, &all, 0.0).unwrap() - p.objective(t, &all, 1.0).unwrap();
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[0][j] += eps;
        down[0][j] -= eps;
        let fd = (pen(&up) - pen(&down)) / (2.0 * eps);
        assert!((fd - (g0[0][j] - g1[0][j])).abs() <= 1e-6, "coordinate {j}");
    }
}

#[test]
fn lambda_is_positive_and_softplus_is_stable() {
    assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((softplus(20.0) - 20.000_000_002_061_153).abs() < 1e-12);
    assert!(softplus(-800.0) >= 0.0 && softplus(800.0) == 800.0);
    let basis = BasisMap::from_ranges(vec![0.0], vec![1.0], BasisConfig::default()).unwrap();
    let m = LambdaModel::new(basis.clone(), vec![vec![-30.0; basis.dim()], vec![30.0; basis.dim()]]).unwrap();
    for x in [-1.0, 0.0, 0.3, 1.0, 2.0] {
        assert!(m.lambda_at(&[x]).iter().all(|&l| l > 0.0));
    }
}

/// Two covariate regions where a different source is the hard one to cover.
fn switching_law(x: f64) -> Vec<Vec<f64>> {
    let wide = vec![0.28, 0.24, 0.2, 0.16, 0.12];
    let narrow = vec![0.04, 0.06, 0.1, 0.2, 0.6];
    if x < 0.5 {
        vec![wide, narrow]
    } else {
        vec![narrow, wide]
    }
}

/// Mean max-p set size on fresh test draws for multipliers trained with `gamma`.
fn mimic_size(gamma: f64) -> mdcp::Result<f64> {
    let (basis, rows) = exact_rows(&switching_law, 6000, 11);
    let problem = DualProblem::new(rows, &basis, 2, ALPHA, 1e-4)?;
    let (lambda, _) = train_lambda(&problem, &basis, &DualTrainConfig::default(), gamma, 12)?;
    let score = |x: &[f64], y: Label| -> f64 {
        let Label::Class(c) = y else { return f64::NAN };
        let f = switching_law(x[0]);
        let l = lambda.lambda_at(x);
        -(l[0] * f[0][c as usize] + l[1] * f[1][c as usize])
    };
    let mut rng = substream(13, &[0]);
    let calib = (0..2)
        .map(|k| {
            (0..2000)
                .map(|_| {
                    let x: f64 = rng.random();
                    let y = draw_label(&mut rng, &switching_law(x)[k]);
                    score(&[x], Label::Class(y as u32))
                })
                .collect()
        })
        .collect();
    let bank = CalibrationBank::new(calib)?;
    let n = 4000;
    let mut total = 0usize;
    for _ in 0..n {
        let x: f64 = rng.random();
        total += classification_set(&[&score], &bank, &[x], 5, ALPHA, &PValueMode::Deterministic)?.len();
    }
    Ok(total as f64 / n as f64)
}

#[test]
fn extreme_penalty_loses_to_unpenalized_fit() {
    let out = tune_penalty(&[1e9, 0.0], mimic_size).unwrap();
    let (s0, s9) = (out.sizes[0].1, out.sizes[1].1);
    assert!(s0 < s9, "unpenalized {s0} vs penalized {s9}");
    assert_eq!(out.gamma, 0.0);
}
