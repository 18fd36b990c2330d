//! Synthetic multi-source simulation suites.
//!
//! Covariates are Gaussian with equicorrelated covariance
//! `Sigma_ij = 0.2 + 0.8 * 1{i = j}`; labels depend on `X` only through a
//! random informative set of 4 coordinates. Classification labels follow a
//! multinomial logit per source, regression labels a Gaussian linear model
//! with signal-to-noise ratio calibrated on the realized covariates.
//! Covariate-shift suites move the source means along a random direction.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Features, Labels, MultiSourceData, SourceDataset, TaskKind};
use crate::error::{MdcpError, Result};
use crate::rng::{substream, tag, Rng as StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Linear,
    NonlinearInteraction,
    NonlinearSinusoid,
    NonlinearSoftplus,
    Temperature,
    CovariateShift,
    CovariateAndConceptShift,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Linear => "linear",
            Suite::NonlinearInteraction => "nonlinear_interaction",
            Suite::NonlinearSinusoid => "nonlinear_sinusoid",
            Suite::NonlinearSoftplus => "nonlinear_softplus",
            Suite::Temperature => "temperature",
            Suite::CovariateShift => "covariate_shift",
            Suite::CovariateAndConceptShift => "covariate_and_concept_shift",
        }
    }

    fn is_shift(&self) -> bool {
        matches!(self, Suite::CovariateShift | Suite::CovariateAndConceptShift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub task: TaskKind,
    pub k: usize,
    pub d: usize,
    pub tau: f64,
    pub delta_x: f64,
    pub n_per_source: usize,
    pub alpha: f64,
    pub seed: u64,
    pub informative: usize,
    /// Standardize each feature after sampling; off in every built-in suite.
    pub standardize: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Linear,
            task: TaskKind::Classification { num_classes: 6 },
            k: 3,
            d: 10,
            tau: 2.5,
            delta_x: 0.0,
            n_per_source: 2000,
            alpha: 0.1,
            seed: 0,
            informative: 4,
            standardize: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !(self.delta_x >= 0.0) {
            return Err(MdcpError::Invalid("tau and delta_x must be nonnegative".into()));
        }
        if self.k == 0 || self.informative == 0 || self.informative > self.d {
            return Err(MdcpError::Invalid(format!(
                "need K >= 1 and 1 <= |I| = {} <= d = {}",
                self.informative, self.d
            )));
        }
        if let TaskKind::Classification { num_classes } = self.task {
            if num_classes < 2 {
                return Err(MdcpError::Invalid("need at least 2 classes".into()));
            }
        }
        if matches!(self.suite, Suite::NonlinearSinusoid | Suite::NonlinearSoftplus) && self.informative < 3
        {
            return Err(MdcpError::Invalid("projection units need |I| >= 3".into()));
        }
        Ok(())
    }
}

/// One projection unit `a * phi(u . x + b)` of a nonlinear component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub u: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinear {
    /// `2 sum_{(u,v) in I x I} w_uv x_u x_v`.
    Interaction { pairs: Vec<(usize, usize, f64)> },
    Sinusoid { units: Vec<Unit> },
    Softplus { units: Vec<Unit> },
}

impl Nonlinear {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let proj = |u: &Unit| u.u.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + u.b;
        2.0 * match self {
            Nonlinear::Interaction { pairs } => pairs.iter().map(|&(i, j, w)| w * x[i] * x[j]).sum(),
            Nonlinear::Sinusoid { units } => units.iter().map(|u| u.a * proj(u).sin()).sum(),
            Nonlinear::Softplus { units } => units
                .iter()
                .map(|u| u.a * crate::dualopt::softplus(proj(u)))
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHyper {
    pub xi: Vec<f64>,
    /// `b[k][c]`.
    pub b: Vec<Vec<f64>>,
    pub beta_bar: Vec<Vec<f64>>,
    /// `beta[k][c]`, length `d`.
    pub beta: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegHyper {
    pub beta_bar: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub snr: f64,
    /// Multiplies every calibrated noise level (temperature suite only).
    pub noise_multiplier: f64,
    /// Noise levels are calibrated once, on source 0, and shared.
    pub shared_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawnHyperparams {
    pub informative: Vec<usize>,
    pub classification: Option<ClassHyper>,
    pub regression: Option<RegHyper>,
    pub nonlinear: Option<Nonlinear>,
    /// Unit shift direction, supported on the informative set.
    pub shift_direction: Option<Vec<f64>>,
    /// Covariate mean of every source.
    pub means: Vec<Vec<f64>>,
}

fn normal_on<R: Rng>(rng: &mut R, d: usize, support: &[usize], sd: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for &j in support {
        let z: f64 = StandardNormal.sample(rng);
        v[j] = sd * z;
    }
    v
}

fn normal<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

fn projection_units<R: Rng>(rng: &mut R, d: usize, informative: &[usize], a: (f64, f64), b: (f64, f64)) -> Vec<Unit> {
    (0..3)
        .map(|_| {
            let support: Vec<usize> = sample(rng, informative.len(), 3)
                .into_iter()
                .map(|i| informative[i])
                .collect();
            let mag = rng.random_range(0.375..0.875);
            let dir: Vec<f64> = (0..3).map(|_| StandardNormal.sample(rng)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut u = vec![0.0; d];
            for (&j, dv) in support.iter().zip(&dir) {
                u[j] = mag * dv / norm;
            }
            Unit {
                u,
                b: rng.random_range(b.0..b.1),
                a: rng.random_range(a.0..a.1),
            }
        })
        .collect()
}

/// Draws every hyperparameter of a run from the `HYPER` substream of `cfg.seed`.
pub fn sample_hyperparams(cfg: &SuiteConfig) -> Result<DrawnHyperparams> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, &[tag::HYPER]);
    let (k, d, tau) = (cfg.k, cfg.d, cfg.tau);
    let mut informative: Vec<usize> = sample(&mut rng, d, cfg.informative).into_vec();
    informative.sort_unstable();

    let shift_direction = cfg.suite.is_shift().then(|| {
        let v = normal_on(&mut rng, d, &informative, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect::<Vec<f64>>()
    });
    let means = (0..k)
        .map(|s| match &shift_direction {
            // Sources alternate: 0, +delta v, -delta v, +delta v, ...
            Some(v) if s > 0 => {
                let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
                v.iter().map(|x| sign * cfg.delta_x * x).collect()
            }
            _ => vec![0.0; d],
        })
        .collect();

    let nonlinear = match cfg.suite {
        Suite::NonlinearInteraction => {
            let mut pairs = Vec::with_capacity(informative.len().pow(2));
            for &i in &informative {
                for &j in &informative {
                    pairs.push((i, j, normal(&mut rng, 1.1)));
                }
            }
            Some(Nonlinear::Interaction { pairs })
        }
        Suite::NonlinearSinusoid => Some(Nonlinear::Sinusoid {
            units: projection_units(&mut rng, d, &informative, (0.5, 1.5), (-PI / 3.0, PI / 3.0)),
        }),
        Suite::NonlinearSoftplus => Some(Nonlinear::Softplus {
            units: projection_units(&mut rng, d, &informative, (0.75, 2.0), (-0.5, 0.5)),
        }),
        _ => None,
    };

    let mut classification = None;
    let mut regression = None;
    match cfg.task {
        TaskKind::Classification { num_classes: c } => {
            let beta_bar: Vec<Vec<f64>> = (0..c).map(|_| normal_on(&mut rng, d, &informative, 1.0)).collect();
            let h = match cfg.suite {
                Suite::CovariateShift => {
                    let shared: Vec<f64> = (0..c).map(|_| normal(&mut rng, 0.4 * tau)).collect();
                    ClassHyper {
                        xi: vec![tau; k],
                        b: vec![shared; k],
                        beta: vec![beta_bar.clone(); k],
                        beta_bar,
                    }
                }
                _ => {
                    let scale = if cfg.suite == Suite::CovariateAndConceptShift { tau } else { 2.5 };
                    let xi = (0..k)
                        .map(|_| scale * (1.0 + 0.25 * tau * rng.random_range(-1.0..=1.0)))
                        .collect();
                    let b = (0..k)
                        .map(|_| (0..c).map(|_| normal(&mut rng, 0.4 * tau)).collect())
                        .collect();
                    let beta = (0..k)
                        .map(|_| {
                            beta_bar
                                .iter()
                                .map(|bb| {
                                    let delta = normal_on(&mut rng, d, &informative, 0.15);
                                    bb.iter().zip(&delta).map(|(x, y)| x + tau * y).collect()
                                })
                                .collect()
                        })
                        .collect();
                    ClassHyper { xi, b, beta, beta_bar }
                }
            };
            classification = Some(h);
        }
        TaskKind::Regression => {
            let beta_bar = normal_on(&mut rng, d, &informative, 1.0);
            let b = normal(&mut rng, 0.5);
            let (beta, intercept) = if cfg.suite == Suite::CovariateShift {
                (vec![beta_bar.clone(); k], vec![b; k])
            } else {
                let mut beta = Vec::with_capacity(k);
                let mut intercept = Vec::with_capacity(k);
                for _ in 0..k {
                    let delta = normal_on(&mut rng, d, &informative, 1.0);
                    beta.push(beta_bar.iter().zip(&delta).map(|(x, y)| x + 0.2 * tau * y).collect());
                    intercept.push(b + tau * normal(&mut rng, 0.5));
                }
                (beta, intercept)
            };
            let snr = rng.random_range(5.0..=10.0);
            let noise_multiplier = if cfg.suite == Suite::Temperature {
                let lo = (1.0 - tau / 4.0).max(0.0);
                let hi = 1.0 + tau / 4.0;
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            } else {
                1.0
            };
            regression = Some(RegHyper {
                beta_bar,
                beta,
                intercept,
                snr,
                noise_multiplier,
                shared_noise: cfg.suite == Suite::CovariateShift,
            });
        }
    }
    Ok(DrawnHyperparams {
        informative,
        classification,
        regression,
        nonlinear,
        shift_direction,
        means,
    })
}

fn dot_on(a: &[f64], x: &[f64], support: &[usize]) -> f64 {
    support.iter().map(|&j| a[j] * x[j]).sum()
}

impl DrawnHyperparams {
    fn g(&self, x: &[f64]) -> f64 {
        self.nonlinear.as_ref().map_or(0.0, |n| n.eval(x))
    }

    /// Logits `eta_kc(x) = xi_k (b_kc + beta_kc . x) + 1{c > 0} g(x)`.
    pub fn logits(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let h = self.classification.as_ref().expect("classification hyperparameters");
        let g = self.g(x);
        (0..h.b[k].len())
            .map(|c| {
                let lin = h.xi[k] * (h.b[k][c] + dot_on(&h.beta[k][c], x, &self.informative));
                if c > 0 {
                    lin + g
                } else {
                    lin
                }
            })
            .collect()
    }

    pub fn class_probs(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let eta = self.logits(k, x);
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    /// `mu_k(x) = beta_k . x + b_k + g(x)`.
    pub fn regression_mean(&self, k: usize, x: &[f64]) -> f64 {
        let h = self.regression.as_ref().expect("regression hyperparameters");
        dot_on(&h.beta[k], x, &self.informative) + h.intercept[k] + self.g(x)
    }
}

/// `X ~ N(mean, Sigma)` with `Sigma = 0.2 * 11^T + 0.8 * I`.
fn sample_x<R: Rng>(rng: &mut R, mean: &[f64]) -> Vec<f64> {
    let common: f64 = StandardNormal.sample(rng);
    mean.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            m + 0.2f64.sqrt() * common + 0.8f64.sqrt() * z
        })
        .collect()
}

fn sample_features(cfg: &SuiteConfig, hp: &DrawnHyperparams, k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..cfg.n_per_source).map(|_| sample_x(rng, &hp.means[k])).collect()
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn standardize_all(rows: &mut [Vec<Vec<f64>>]) {
    let Some(d) = rows.iter().flatten().next().map(Vec::len) else {
        return;
    };
    for j in 0..d {
        let col: Vec<f64> = rows.iter().flatten().map(|r| r[j]).collect();
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = variance(&col).sqrt().max(1e-12);
        for r in rows.iter_mut().flatten() {
            r[j] = (r[j] - mean) / sd;
        }
    }
}

fn assemble(task: TaskKind, xs: Vec<Vec<Vec<f64>>>, ys: Vec<Labels>) -> Result<MultiSourceData> {
    let sources = xs
        .into_iter()
        .zip(ys)
        .enumerate()
        .map(|(k, (x, y))| SourceDataset::new(k, Features::from_rows(&x)?, y))
        .collect::<Result<Vec<_>>>()?;
    MultiSourceData::new(task, sources)
}

fn draw_features(cfg: &SuiteConfig, hp: &DrawnHyperparams) -> (Vec<Vec<Vec<f64>>>, Vec<StreamRng>) {
    let mut rngs: Vec<StreamRng> = (0..cfg.k)
        .map(|k| substream(cfg.seed, &[tag::DATA, k as u64]))
        .collect();
    let mut xs: Vec<Vec<Vec<f64>>> = rngs
        .iter_mut()
        .enumerate()
        .map(|(k, rng)| sample_features(cfg, hp, k, rng))
        .collect();
    if cfg.standardize {
        standardize_all(&mut xs);
    }
    (xs, rngs)
}

pub fn generate_classification(hp: &DrawnHyperparams, cfg: &SuiteConfig) -> Result<MultiSourceData> {
    if hp.classification.is_none() {
        return Err(MdcpError::Invalid("hyperparameters are not for classification".into()));
    }
    let (xs, mut rngs) = draw_features(cfg, hp);
    let ys = xs
        .iter()
        .zip(rngs.iter_mut())
        .enumerate()
        .map(|(k, (x, rng))| {
            Labels::Class(
                x.iter()
                    .map(|row| {
                        let p = hp.class_probs(k, row);
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        for (c, pc) in p.iter().enumerate() {
                            acc += pc;
                            if u < acc {
                                return c as u32;
                            }
                        }
                        (p.len() - 1) as u32
                    })
                    .collect(),
            )
        })
        .collect();
    assemble(cfg.task, xs, ys)
}

/// Noise standard deviation of every source, calibrated on the realized design.
pub fn noise_levels(hp: &DrawnHyperparams, xs: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let h = hp.regression.as_ref().expect("regression hyperparameters");
    let sigma_of = |k: usize| {
        let mu: Vec<f64> = xs[k].iter().map(|x| hp.regression_mean(k, x)).collect();
        (variance(&mu) / h.snr).sqrt() * h.noise_multiplier
    };
    if h.shared_noise {
        vec![sigma_of(0); xs.len()]
    } else {
        (0..xs.len()).map(sigma_of).collect()
    }
}

pub fn generate_regression(hp: &DrawnHyperparams, cfg: &SuiteConfig) -> Result<MultiSourceData> {
    if hp.regression.is_none() {
        return Err(MdcpError::Invalid("hyperparameters are not for regression".into()));
    }
    let (xs, mut rngs) = draw_features(cfg, hp);
    let sigma = noise_levels(hp, &xs);
    let ys = xs
        .iter()
        .zip(rngs.iter_mut())
        .enumerate()
        .map(|(k, (x, rng))| {
            let noise = Normal::new(0.0, sigma[k].max(0.0)).expect("finite noise level");
            Labels::Real(
                x.iter()
                    .map(|row| hp.regression_mean(k, row) + noise.sample(rng))
                    .collect(),
            )
        })
        .collect();
    assemble(cfg.task, xs, ys)
}

/// Hyperparameters and data for one run.
pub fn generate(cfg: &SuiteConfig) -> Result<(DrawnHyperparams, MultiSourceData)> {
    let hp = sample_hyperparams(cfg)?;
    let data = match cfg.task {
        TaskKind::Classification { .. } => generate_classification(&hp, cfg)?,
        TaskKind::Regression => generate_regression(&hp, cfg)?,
    };
    Ok((hp, data))
}
