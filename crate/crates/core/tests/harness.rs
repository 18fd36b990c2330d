//! End-to-end behaviour of the experiment harness.

use mdcp::conformal::{classification_set, source_set, CalibrationBank, PValueMode, ScoreFunction};
use mdcp::data::{split, Folds, Label, MultiSourceData, SourceDataset, SplitPlan, TaskKind};
use mdcp::dgp::{generate, Suite, SuiteConfig};
use mdcp::dualopt::{BasisConfig, BasisMap, LambdaModel, SharedScore};
use mdcp::harness::{
    run_experiment, run_methods, verify_report, write_reports, ExperimentConfig, Method, RunSettings, SuiteEntry,
    TpsScore,
};
use mdcp::models::{FittedModels, ModelConfig};

fn folds(cfg: &SuiteConfig, seed: u64) -> Folds {
    let (_, data) = generate(cfg).unwrap();
    split(&data, &SplitPlan::standard(seed)).unwrap()
}

fn settings(seed: u64) -> RunSettings {
    RunSettings::from_experiment(&ExperimentConfig::default(), 0.1, seed)
}

fn small_experiment() -> ExperimentConfig {
    ExperimentConfig {
        suites: vec![
            SuiteEntry::new(SuiteConfig {
                n_per_source: 400,
                ..Default::default()
            }),
            SuiteEntry::new(SuiteConfig {
                task: TaskKind::Regression,
                n_per_source: 400,
                ..Default::default()
            }),
        ],
        methods: vec!["mdcp".into(), "baseline-agg".into(), "baseline-src".into()],
        runs: 2,
        seed: 11,
        record_wall_time: false,
        ..Default::default()
    }
}

#[test]
fn single_source_constant_lambda_matches_thresholded_probability_sets() {
    let f = folds(
        &SuiteConfig {
            k: 1,
            n_per_source: 1200,
            seed: 3,
            ..Default::default()
        },
        3,
    );
    let models = FittedModels::fit(&f.train, &ModelConfig::default()).unwrap();
    let basis = BasisMap::fit(f.train.source(0).features(), BasisConfig::default()).unwrap();
    let mut theta = vec![0.0; basis.dim()];
    *theta.last_mut().unwrap() = 0.7;
    let lambda = LambdaModel::new(basis, vec![theta]).unwrap();
    let x0 = f.test.source(0).x(0);
    let l0 = lambda.lambda_at(x0)[0];
    for i in 0..f.test.source(0).len() {
        assert!((lambda.lambda_at(f.test.source(0).x(i))[0] - l0).abs() < 1e-12);
    }

    let shared = SharedScore::new(&lambda, &models.per_source).unwrap();
    let tps = TpsScore::new(&models.per_source[0]);
    let shared_bank = CalibrationBank::calibrate(&[&shared as &dyn ScoreFunction], &f.calib).unwrap();
    let tps_bank = CalibrationBank::calibrate(&[&tps as &dyn ScoreFunction], &f.calib).unwrap();
    let mode = PValueMode::Deterministic;
    let src = f.test.source(0);
    for i in 0..src.len() {
        let a = classification_set(&[&shared], &shared_bank, src.x(i), 6, 0.1, &mode).unwrap();
        let b = source_set(&tps, &tps_bank, 0, src.x(i), 6, 0.1, &mode).unwrap();
        assert_eq!(a, b, "row {i}");
    }
}

#[test]
fn aggregated_baseline_dominates_every_single_source() {
    let f = folds(
        &SuiteConfig {
            n_per_source: 600,
            seed: 21,
            ..Default::default()
        },
        21,
    );
    let methods = [Method::BaselineAgg, Method::BaselineSrc(0), Method::BaselineSrc(1), Method::BaselineSrc(2)];
    let out = run_methods(&f, &methods, &settings(21)).unwrap();
    let agg = &out[0].metrics;
    for o in &out[1..] {
        assert!(agg.mean_size() >= o.metrics.mean_size());
        for k in 0..3 {
            assert!(agg.covered[k] >= o.metrics.covered[k], "{:?} source {k}", o.method);
        }
    }
}

#[test]
fn identical_sources_cost_little_to_aggregate() {
    // With a common score the per-source sets differ only through their
    // calibration folds, so the union is barely larger than one of them.
    let cfg = SuiteConfig {
        tau: 0.0,
        n_per_source: 2000,
        seed: 5,
        ..Default::default()
    };
    let (hp, data) = generate(&cfg).unwrap();
    let f = split(&data, &SplitPlan::standard(5)).unwrap();
    let truth = |x: &[f64], y: Label| match y {
        Label::Class(c) => -hp.class_probs(0, x)[c as usize],
        Label::Real(_) => f64::NAN,
    };
    let scores: [&dyn ScoreFunction; 3] = [&truth, &truth, &truth];
    let bank = CalibrationBank::calibrate(&scores, &f.calib).unwrap();
    let mode = PValueMode::Deterministic;
    let (mut agg, mut single, mut n) = (0usize, 0usize, 0usize);
    for src in f.test.sources() {
        for i in 0..src.len() {
            agg += classification_set(&scores, &bank, src.x(i), 6, 0.1, &mode).unwrap().len();
            single += source_set(&truth, &bank, 0, src.x(i), 6, 0.1, &mode).unwrap().len();
            n += 1;
        }
    }
    let ratio = agg as f64 / single as f64;
    assert!(ratio <= 1.1, "size ratio {ratio} over {n} points");
}

#[test]
fn homogeneous_sources_keep_single_source_coverage() {
    let runs = 8;
    let exp = ExperimentConfig {
        suites: vec![SuiteEntry::new(SuiteConfig {
            tau: 0.0,
            n_per_source: 1000,
            ..Default::default()
        })],
        methods: vec!["baseline-src".into()],
        runs,
        seed: 13,
        ..Default::default()
    };
    let report = run_experiment(&exp).unwrap();
    for row in report.rows.iter().take(3) {
        let covs: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.method == row.method)
            .flat_map(|r| r.cov_src.clone())
            .collect();
        let m = covs.len() as f64;
        let mean = covs.iter().sum::<f64>() / m;
        // Rows of one run share a calibration fold, so the run-level spread
        // is the honest standard error.
        let per_run: Vec<f64> = covs.chunks(3).map(|c| c.iter().sum::<f64>() / 3.0).collect();
        let r = per_run.len() as f64;
        let sd = (per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
        assert!(mean >= 0.9 - 3.0 * sd / r.sqrt(), "{}: {mean}", row.method);
    }
}

#[test]
fn mixture_of_sources_is_covered_by_mdcp() {
    // A test population drawn from a mixture of the sources: every row of
    // every test source, reweighted by arbitrary mixture weights.
    let exp = ExperimentConfig {
        suites: vec![SuiteEntry::new(SuiteConfig {
            n_per_source: 800,
            ..Default::default()
        })],
        methods: vec!["mdcp".into()],
        runs: 6,
        seed: 2,
        ..Default::default()
    };
    let report = run_experiment(&exp).unwrap();
    let weights = [0.2, 0.5, 0.3];
    let mixed: Vec<f64> = report
        .rows
        .iter()
        .map(|r| r.cov_src.iter().zip(&weights).map(|(c, w)| c * w).sum())
        .collect();
    let r = mixed.len() as f64;
    let mean = mixed.iter().sum::<f64>() / r;
    let sd = (mixed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    assert!(mean >= 0.9 - 3.0 * sd / r.sqrt(), "mixture coverage {mean}");
}

#[test]
fn reports_are_reproducible_and_verify() {
    let exp = small_experiment();
    let a = run_experiment(&exp).unwrap();
    let b = run_experiment(&exp).unwrap();
    assert_eq!(a, b);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_reports(&a, da.path()).unwrap();
    write_reports(&b, db.path()).unwrap();
    for file in ["runs.csv", "summary.csv", "long.csv", "summary.json", "report.json"] {
        let x = std::fs::read(da.path().join(file)).unwrap();
        let y = std::fs::read(db.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    let v = verify_report(da.path()).unwrap();
    let failed: Vec<_> = v.checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(a.mean_of("linear-regression-tau2.5", "baseline-src-2", "mean_size").is_some());
    assert_eq!(a.rows.len(), 2 * 2 * 5);
}

#[test]
fn tampered_report_fails_verification() {
    let exp = ExperimentConfig {
        suites: vec![SuiteEntry::new(SuiteConfig {
            n_per_source: 300,
            ..Default::default()
        })],
        methods: vec!["baseline-agg".into()],
        record_wall_time: false,
        ..Default::default()
    };
    let mut report = run_experiment(&exp).unwrap();
    report.rows[0].worst_cov += 0.01;
    let dir = tempfile::tempdir().unwrap();
    write_reports(&report, dir.path()).unwrap();
    let v = verify_report(dir.path()).unwrap();
    assert!(v.checks.iter().any(|c| !c.passed && c.name.ends_with("worst_is_min")));
}

#[test]
fn single_source_dataset_runs_every_method() {
    let (_, data) = generate(&SuiteConfig {
        suite: Suite::Linear,
        k: 1,
        n_per_source: 400,
        ..Default::default()
    })
    .unwrap();
    let only: SourceDataset = data.source(0).clone();
    let data = MultiSourceData::new(data.task(), vec![only]).unwrap();
    let f = split(&data, &SplitPlan::standard(9)).unwrap();
    let methods = Method::parse_list(&["mdcp".into(), "baseline-src".into()], 1).unwrap();
    let out = run_methods(&f, &methods, &settings(9)).unwrap();
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|o| o.metrics.mean_size() > 0.0));
}
