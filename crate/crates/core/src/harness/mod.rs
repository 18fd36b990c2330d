//! Experiment harness: runs the single-source baselines, their max-p
//! aggregate and MDCP on simulated or loaded data, then records coverage and
//! set-size metrics per run.

pub mod config;
pub mod report;
mod scores;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DatasetEntry, ExperimentConfig, PValueKind, SplitFractions, SuiteEntry};
pub use report::{aggregate, load_report, verify_report, write_reports, Report, RunRow, SummaryRow, VerifyOutcome};
pub use scores::{StandardizedResidual, TpsScore};

use crate::conformal::{classification_set, source_set, CalibrationBank, PValueMode, Radius, ScoreFunction};
use crate::data::{self, load_csv, pool, Folds, Label, MultiSourceData, SplitPlan, TaskKind};
use crate::dgp;
use crate::dualopt::{
    train_lambda, tune_penalty, BasisMap, DualProblem, DualTrainConfig, LambdaModel, SharedScore, TrainingCurve,
};
use crate::error::{MdcpError, Result};
use crate::models::FittedModels;
use crate::regsets::{grid_search_set, IntervalUnion, YGrid};
use crate::rng::{derive_seed, substream, tag};

/// A method requested in the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Mdcp,
    MdcpTuned,
    BaselineAgg,
    /// Split conformal with calibration data from one source only.
    BaselineSrc(usize),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Mdcp => "mdcp".into(),
            Method::MdcpTuned => "mdcp-tuned".into(),
            Method::BaselineAgg => "baseline-agg".into(),
            Method::BaselineSrc(k) => format!("baseline-src-{k}"),
        }
    }

    /// Parses method names for data with `k` sources; `baseline-src`
    /// expands to every source.
    pub fn parse_list(names: &[String], k: usize) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for raw in names {
            let name = raw.trim();
            let parsed: Vec<Method> = match name {
                "mdcp" => vec![Method::Mdcp],
                "mdcp-tuned" => vec![Method::MdcpTuned],
                "baseline-agg" => vec![Method::BaselineAgg],
                "baseline-src" => (0..k).map(Method::BaselineSrc).collect(),
                other => match other.strip_prefix("baseline-src-").map(str::parse::<usize>) {
                    Some(Ok(s)) if s < k => vec![Method::BaselineSrc(s)],
                    Some(Ok(s)) => return Err(MdcpError::UnknownSource(s)),
                    _ => return Err(MdcpError::Invalid(format!("unknown method `{other}`"))),
                },
            };
            for m in parsed {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(MdcpError::Invalid("no methods requested".into()));
        }
        Ok(out)
    }
}

/// A prediction set for one test point.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSet {
    Classes(Vec<u32>),
    Region(IntervalUnion),
}

impl PredictionSet {
    pub fn contains(&self, y: Label) -> bool {
        match (self, y) {
            (PredictionSet::Classes(c), Label::Class(v)) => c.contains(&v),
            (PredictionSet::Region(r), Label::Real(v)) => r.contains(v),
            _ => false,
        }
    }

    /// Cardinality for classes, total length for regions.
    pub fn size(&self) -> f64 {
        match self {
            PredictionSet::Classes(c) => c.len() as f64,
            PredictionSet::Region(r) => r.total_length(),
        }
    }
}

/// Covered counts and set sizes on a test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub covered: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub total_size: f64,
}

impl Metrics {
    pub fn per_source_coverage(&self) -> Vec<f64> {
        self.covered
            .iter()
            .zip(&self.test_counts)
            .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect()
    }

    /// Coverage over the pooled test fold, i.e. the test-count weighted mean.
    pub fn overall_coverage(&self) -> f64 {
        let n: usize = self.test_counts.iter().sum();
        self.covered.iter().sum::<usize>() as f64 / n.max(1) as f64
    }

    pub fn worst_coverage(&self) -> f64 {
        self.per_source_coverage()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_size(&self) -> f64 {
        let n: usize = self.test_counts.iter().sum();
        self.total_size / n.max(1) as f64
    }
}

/// Training diagnostics of the multiplier model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualDiagnostics {
    pub gamma: f64,
    pub initial_objective: f64,
    pub best_objective: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// `(gamma, mean mimic-test size)` for every tuned penalty weight.
    pub tuning: Option<Vec<(f64, f64)>>,
}

impl DualDiagnostics {
    fn from_curve(c: &TrainingCurve, tuning: Option<Vec<(f64, f64)>>) -> Self {
        Self {
            gamma: c.gamma,
            initial_objective: c.initial_objective,
            best_objective: c.best_objective,
            best_epoch: c.best_epoch,
            epochs_run: c.epoch_objective.len(),
            stopped_early: c.stopped_early,
            tuning,
        }
    }
}

/// Result of one method on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub metrics: Metrics,
    pub diagnostics: Option<DualDiagnostics>,
    pub wall_ms: u64,
}

/// Everything a run needs besides the data.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub alpha: f64,
    pub seed: u64,
    pub model: crate::models::ModelConfig,
    pub dual: DualTrainConfig,
    pub grid_size: usize,
    pub baseline_mode: PValueKind,
    pub mdcp_mode: PValueKind,
}

impl RunSettings {
    pub fn from_experiment(exp: &ExperimentConfig, alpha: f64, seed: u64) -> Self {
        Self {
            alpha,
            seed,
            model: exp.model,
            dual: exp.dual.clone(),
            grid_size: exp.grid_size,
            baseline_mode: exp.baseline_p_values,
            mdcp_mode: exp.mdcp_p_values,
        }
    }
}

/// Uniforms of one test fold: `u[source][row]` holds one draw per
/// calibration source.
fn test_uniforms(test: &MultiSourceData, seed: u64, stream: u64, k: usize) -> Vec<Vec<Vec<f64>>> {
    test.sources()
        .iter()
        .enumerate()
        .map(|(s, src)| {
            let mut rng = substream(seed, &[stream, s as u64]);
            (0..src.len())
                .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect()
}

fn mode_for(kind: PValueKind, u: &[f64]) -> PValueMode {
    match kind {
        PValueKind::Deterministic => PValueMode::Deterministic,
        PValueKind::Randomized => PValueMode::Randomized(u.to_vec()),
    }
}

/// Builds a set for every test row (in parallel, gathered in row order)
/// and accumulates coverage and size.
fn evaluate<F>(test: &MultiSourceData, uniforms: &[Vec<Vec<f64>>], predict: F) -> Result<Metrics>
where
    F: Fn(&[f64], &[f64]) -> Result<PredictionSet> + Sync,
{
    let mut covered = Vec::with_capacity(test.num_sources());
    let mut counts = Vec::with_capacity(test.num_sources());
    let mut total_size = 0.0;
    for (s, src) in test.sources().iter().enumerate() {
        let results = (0..src.len())
            .into_par_iter()
            .map(|i| {
                let set = predict(src.x(i), &uniforms[s][i])?;
                Ok((set.contains(src.y(i)), set.size()))
            })
            .collect::<Result<Vec<_>>>()?;
        covered.push(results.iter().filter(|r| r.0).count());
        counts.push(src.len());
        total_size += results.iter().map(|r| r.1).sum::<f64>();
    }
    Ok(Metrics {
        covered,
        test_counts: counts,
        total_size,
    })
}

fn interval_of(radius: Radius, mu: f64, sigma: f64) -> IntervalUnion {
    match radius {
        Radius::Empty => IntervalUnion::empty(),
        Radius::Finite(r) => IntervalUnion::single(mu - r * sigma, mu + r * sigma),
        Radius::Unbounded => IntervalUnion::single(f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// Max-p baseline over `members` (one source for `baseline-src-k`, all
/// sources for `baseline-agg`).
fn run_baseline(
    folds: &Folds,
    models: &FittedModels,
    members: &[usize],
    settings: &RunSettings,
    uniforms: &[Vec<Vec<f64>>],
) -> Result<Metrics> {
    let alpha = settings.alpha;
    match folds.train.task() {
        TaskKind::Classification { num_classes } => {
            let owned: Vec<TpsScore> = models.per_source.iter().map(TpsScore::new).collect();
            let refs: Vec<&dyn ScoreFunction> = owned.iter().map(|s| s as &dyn ScoreFunction).collect();
            let bank = CalibrationBank::calibrate(&refs, &folds.calib).map_err(|e| e.at_stage("calibrate"))?;
            evaluate(&folds.test, uniforms, |x, u| {
                let mode = mode_for(settings.baseline_mode, u);
                let mut set: Vec<u32> = Vec::new();
                for &k in members {
                    set.extend(source_set(refs[k], &bank, k, x, num_classes, alpha, &mode)?);
                }
                set.sort_unstable();
                set.dedup();
                Ok(PredictionSet::Classes(set))
            })
        }
        TaskKind::Regression => {
            let owned: Vec<StandardizedResidual> = models.per_source.iter().map(StandardizedResidual::new).collect();
            let refs: Vec<&dyn ScoreFunction> = owned.iter().map(|s| s as &dyn ScoreFunction).collect();
            let bank = CalibrationBank::calibrate(&refs, &folds.calib).map_err(|e| e.at_stage("calibrate"))?;
            evaluate(&folds.test, uniforms, |x, u| {
                let mode = mode_for(settings.baseline_mode, u);
                let mut region = IntervalUnion::empty();
                for &k in members {
                    let (mu, sigma) = owned[k].location_scale(x)?;
                    let r = bank.interval_radius(k, alpha, &mode)?;
                    region = region.union(&interval_of(r, mu, sigma));
                }
                Ok(PredictionSet::Region(region))
            })
        }
    }
}

/// Sets induced by the shared score `-h` with calibration on `calib`.
fn mdcp_sets(
    lambda: &LambdaModel,
    models: &FittedModels,
    calib: &MultiSourceData,
    test: &MultiSourceData,
    grid: Option<&YGrid>,
    settings: &RunSettings,
    uniforms: &[Vec<Vec<f64>>],
) -> Result<Metrics> {
    let score = SharedScore::new(lambda, &models.per_source)?;
    let bank = CalibrationBank::calibrate(&[&score], calib).map_err(|e| e.at_stage("calibrate"))?;
    let k_total = bank.num_sources();
    let alpha = settings.alpha;
    match calib.task() {
        TaskKind::Classification { num_classes } => evaluate(test, uniforms, |x, u| {
            let mode = mode_for(settings.mdcp_mode, u);
            Ok(PredictionSet::Classes(classification_set(
                &[&score],
                &bank,
                x,
                num_classes,
                alpha,
                &mode,
            )?))
        }),
        TaskKind::Regression => {
            let grid = grid.ok_or_else(|| MdcpError::Invalid("regression needs a label grid".into()))?;
            evaluate(test, uniforms, |x, u| {
                let mode = mode_for(settings.mdcp_mode, u);
                let local = score.local(x);
                let region = grid_search_set(
                    grid,
                    |y| {
                        let s = local.score(Label::Real(y));
                        let mut best = 0.0f64;
                        for k in 0..k_total {
                            best = best.max(bank.p_value(k, s, &mode)?);
                        }
                        Ok(best)
                    },
                    alpha,
                )?;
                Ok(PredictionSet::Region(region))
            })
        }
    }
}

fn label_grid(folds: &Folds, m: usize) -> Result<Option<YGrid>> {
    if folds.train.task() != TaskKind::Regression {
        return Ok(None);
    }
    let mut labels = pool(&folds.train).labels().as_f64();
    labels.extend(pool(&folds.calib).labels().as_f64());
    Ok(Some(YGrid::build(&labels, m)?))
}

/// Pooled training rows, basis and dual problem for the multiplier model.
pub fn dual_problem(
    train: &MultiSourceData,
    models: &FittedModels,
    dual: &DualTrainConfig,
    alpha: f64,
) -> Result<(BasisMap, DualProblem)> {
    let pooled = pool(train);
    let basis = BasisMap::fit(pooled.features(), dual.basis)?;
    let problem = DualProblem::from_models(&basis, models, &pooled, alpha, dual.denom_floor)?;
    Ok((basis, problem))
}

/// Splits the training fold of every source in half: mimic calibration and
/// mimic test rows for penalty tuning.
fn mimic_split(train: &MultiSourceData, seed: u64) -> Result<(MultiSourceData, MultiSourceData)> {
    let mut cal = Vec::new();
    let mut test = Vec::new();
    for (k, src) in train.sources().iter().enumerate() {
        let mut perm: Vec<usize> = (0..src.len()).collect();
        perm.shuffle(&mut substream(seed, &[tag::TUNE, k as u64]));
        let half = src.len() / 2;
        if half == 0 {
            return Err(MdcpError::TooFewSamples(format!("source {k} training fold is too small to tune on")));
        }
        cal.push(src.subset(&perm[..half]));
        test.push(src.subset(&perm[half..]));
    }
    Ok((
        MultiSourceData::new(train.task(), cal)?,
        MultiSourceData::new(train.task(), test)?,
    ))
}

/// Runs every method on prepared folds. Models are fit once and shared.
pub fn run_methods(folds: &Folds, methods: &[Method], settings: &RunSettings) -> Result<Vec<MethodOutcome>> {
    let start = Instant::now();
    let models = FittedModels::fit(&folds.train, &settings.model).map_err(|e| e.at_stage("fit_models"))?;
    let grid = label_grid(folds, settings.grid_size).map_err(|e| e.at_stage("grid"))?;
    let k = folds.train.num_sources();
    let uniforms = test_uniforms(&folds.test, settings.seed, tag::TEST_UNIFORM, k);
    let shared_ms = start.elapsed().as_millis() as u64;

    let needs_dual = methods.iter().any(|m| matches!(m, Method::Mdcp | Method::MdcpTuned));
    let dual = if needs_dual {
        Some(dual_problem(&folds.train, &models, &settings.dual, settings.alpha).map_err(|e| e.at_stage("dual_problem"))?)
    } else {
        None
    };
    // Trained multiplier models keyed by the bits of gamma.
    let mut trained: HashMap<u64, (LambdaModel, TrainingCurve)> = HashMap::new();
    let mut train_for = |gamma: f64| -> Result<(LambdaModel, TrainingCurve)> {
        if let Some(hit) = trained.get(&gamma.to_bits()) {
            return Ok(hit.clone());
        }
        let (basis, problem) = dual.as_ref().expect("dual problem prepared");
        let out = train_lambda(problem, basis, &settings.dual, gamma, settings.seed).map_err(|e| e.at_stage("train_lambda"))?;
        trained.insert(gamma.to_bits(), out.clone());
        Ok(out)
    };

    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let t0 = Instant::now();
        let (metrics, diagnostics) = match method {
            Method::BaselineSrc(s) => (
                run_baseline(folds, &models, &[s], settings, &uniforms).map_err(|e| e.at_stage("baseline_src"))?,
                None,
            ),
            Method::BaselineAgg => {
                let all: Vec<usize> = (0..k).collect();
                (
                    run_baseline(folds, &models, &all, settings, &uniforms).map_err(|e| e.at_stage("baseline_agg"))?,
                    None,
                )
            }
            Method::Mdcp => {
                let (lambda, curve) = train_for(settings.dual.penalty_gamma)?;
                let m = mdcp_sets(&lambda, &models, &folds.calib, &folds.test, grid.as_ref(), settings, &uniforms)
                    .map_err(|e| e.at_stage("predict"))?;
                (m, Some(DualDiagnostics::from_curve(&curve, None)))
            }
            Method::MdcpTuned => {
                let (mimic_cal, mimic_test) = mimic_split(&folds.train, settings.seed).map_err(|e| e.at_stage("tune_penalty"))?;
                let mimic_u = test_uniforms(&mimic_test, settings.seed, tag::TUNE, k);
                let outcome = tune_penalty(&settings.dual.penalty_grid, |g| {
                    let (lambda, _) = train_for(g)?;
                    let m = mdcp_sets(&lambda, &models, &mimic_cal, &mimic_test, grid.as_ref(), settings, &mimic_u)?;
                    Ok(m.mean_size())
                })
                .map_err(|e| e.at_stage("tune_penalty"))?;
                let (lambda, curve) = train_for(outcome.gamma)?;
                let m = mdcp_sets(&lambda, &models, &folds.calib, &folds.test, grid.as_ref(), settings, &uniforms)
                    .map_err(|e| e.at_stage("predict"))?;
                (m, Some(DualDiagnostics::from_curve(&curve, Some(outcome.sizes))))
            }
        };
        outcomes.push(MethodOutcome {
            method,
            metrics,
            diagnostics,
            wall_ms: shared_ms + t0.elapsed().as_millis() as u64,
        });
    }
    Ok(outcomes)
}

/// One unit of work: a suite or dataset together with its run index.
#[derive(Debug, Clone)]
struct Job {
    workload: usize,
    run: usize,
}

enum Workload {
    Synthetic(SuiteEntry),
    Loaded {
        name: String,
        alpha: f64,
        data: Arc<MultiSourceData>,
    },
}

impl Workload {
    fn name(&self) -> String {
        match self {
            Workload::Synthetic(s) => s.display_name(),
            Workload::Loaded { name, .. } => name.clone(),
        }
    }

    fn alpha(&self) -> f64 {
        match self {
            Workload::Synthetic(s) => s.config.alpha,
            Workload::Loaded { alpha, .. } => *alpha,
        }
    }
}

/// Run `r` of every workload uses the same seed, so suites that differ in
/// one level parameter are compared on common random draws.
fn run_job(exp: &ExperimentConfig, w: &Workload, run: usize) -> Result<Vec<RunRow>> {
    let seed = derive_seed(exp.seed, &[tag::RUN, run as u64]);
    let data = match w {
        Workload::Synthetic(s) => {
            let cfg = dgp::SuiteConfig { seed, ..s.config };
            Arc::new(dgp::generate(&cfg).map_err(|e| e.at_stage("generate"))?.1)
        }
        Workload::Loaded { data, .. } => Arc::clone(data),
    };
    let plan = SplitPlan {
        seed: derive_seed(seed, &[tag::SPLIT]),
        train: exp.split.train,
        calib: exp.split.calib,
        test: exp.split.test,
    };
    let folds = data::split(&data, &plan).map_err(|e| e.at_stage("split"))?;
    let methods = Method::parse_list(&exp.methods, data.num_sources())?;
    let settings = RunSettings::from_experiment(exp, w.alpha(), seed);
    let outcomes = run_methods(&folds, &methods, &settings)?;
    Ok(outcomes
        .into_iter()
        .map(|o| RunRow::from_outcome(&w.name(), run, seed, settings.alpha, o, exp.record_wall_time))
        .collect())
}

/// Runs every configured suite and dataset `exp.runs` times. Runs execute
/// in parallel on the current rayon pool; rows are ordered by workload,
/// run and method regardless of scheduling.
pub fn run_experiment(exp: &ExperimentConfig) -> Result<Report> {
    exp.validate()?;
    let mut workloads: Vec<Workload> = exp.suites.iter().cloned().map(Workload::Synthetic).collect();
    for d in &exp.datasets {
        workloads.push(Workload::Loaded {
            name: d.name.clone(),
            alpha: d.alpha,
            data: Arc::new(load_csv(&d.path, d.task).map_err(|e| e.at_stage("load"))?),
        });
    }
    let jobs: Vec<Job> = (0..workloads.len())
        .flat_map(|workload| (0..exp.runs).map(move |run| Job { workload, run }))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|j| run_job(exp, &workloads[j.workload], j.run))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    Ok(Report::new(exp.clone(), rows))
}

/// Runs `f` on a rayon pool with `threads` workers (`None`: rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| MdcpError::Invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
