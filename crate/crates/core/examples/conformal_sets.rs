//! Per-source and max-p aggregated sets from hand-written scores.
//!
//! `cargo run --example conformal_sets`

use mdcp::conformal::{class_p_values, classification_set, CalibrationBank, PValueMode, ScoreFunction};
use mdcp::data::Label;

fn class(y: Label) -> usize {
    match y {
        Label::Class(c) => c as usize,
        Label::Real(_) => unreachable!("classification example"),
    }
}

fn main() -> mdcp::Result<()> {
    // Two sources that favour different classes; the score ignores x.
    let probs = [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]];
    let s0 = |_: &[f64], y: Label| -probs[0][class(y)];
    let s1 = |_: &[f64], y: Label| -probs[1][class(y)];
    let scores: [&dyn ScoreFunction; 2] = [&s0, &s1];

    // Calibration scores: labels drawn in proportion to each source's pmf.
    let calib = |p: [f64; 3]| -> Vec<f64> {
        p.iter()
            .flat_map(|&q| std::iter::repeat(-q).take((q * 40.0) as usize))
            .collect()
    };
    let bank = CalibrationBank::new(vec![calib(probs[0]), calib(probs[1])])?;

    let x = [0.0];
    let p = class_p_values(&scores, &bank, &x, 3, &PValueMode::Deterministic)?;
    for (y, pk) in p.iter().enumerate() {
        println!("class {y}: p-values {pk:.3?}");
    }
    for alpha in [0.1, 0.3, 0.5] {
        let set = classification_set(&scores, &bank, &x, 3, alpha, &PValueMode::Deterministic)?;
        println!("alpha {alpha}: max-p set {set:?}");
    }
    let randomized = PValueMode::randomized(vec![0.5, 0.5])?;
    let set = classification_set(&scores, &bank, &x, 3, 0.45, &randomized)?;
    println!("alpha 0.45, randomized (u = 0.5): {set:?}");
    Ok(())
}
