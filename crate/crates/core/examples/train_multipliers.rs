//! Fit source models, train the multiplier network and inspect lambda(x).
//!
//! `cargo run --release --example train_multipliers`

use mdcp::data::{split, SplitPlan};
use mdcp::dgp::{generate, SuiteConfig};
use mdcp::dualopt::{train_lambda, DualTrainConfig};
use mdcp::harness::dual_problem;
use mdcp::models::{FittedModels, ModelConfig};

fn main() -> mdcp::Result<()> {
    let (_, data) = generate(&SuiteConfig {
        n_per_source: 1500,
        seed: 2,
        ..Default::default()
    })?;
    let folds = split(&data, &SplitPlan::standard(2))?;
    let models = FittedModels::fit(&folds.train, &ModelConfig::default())?;
    let cfg = DualTrainConfig::default();
    let (basis, problem) = dual_problem(&folds.train, &models, &cfg, 0.1)?;
    println!("{} training rows, {} basis features", problem.len(), basis.dim());

    let (lambda, curve) = train_lambda(&problem, &basis, &cfg, cfg.penalty_gamma, 2)?;
    println!(
        "objective {:.4} -> {:.4} (best epoch {} of {})",
        curve.initial_objective,
        curve.best_objective,
        curve.best_epoch,
        curve.epoch_objective.len()
    );
    for i in 0..5 {
        let x = folds.test.source(0).x(i);
        println!("lambda(x_{i}) = {:.3?}", lambda.lambda_at(x));
    }
    Ok(())
}
