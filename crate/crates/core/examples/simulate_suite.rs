//! Draw one simulation suite and summarize each source.
//!
//! `cargo run --example simulate_suite`

use mdcp::data::{Label, TaskKind};
use mdcp::dgp::{generate, Suite, SuiteConfig};

fn main() -> mdcp::Result<()> {
    for task in [TaskKind::Classification { num_classes: 6 }, TaskKind::Regression] {
        let cfg = SuiteConfig {
            suite: Suite::CovariateAndConceptShift,
            task,
            delta_x: 1.0,
            n_per_source: 2000,
            seed: 1,
            ..Default::default()
        };
        let (_, data) = generate(&cfg)?;
        println!("{:?}", task);
        for (k, src) in data.sources().iter().enumerate() {
            let x0 = src.features().column(0);
            let mean_x0 = x0.iter().sum::<f64>() / x0.len() as f64;
            let summary = match task {
                TaskKind::Classification { num_classes } => {
                    let mut counts = vec![0usize; num_classes];
                    for i in 0..src.len() {
                        if let Label::Class(c) = src.y(i) {
                            counts[c as usize] += 1;
                        }
                    }
                    format!("class counts {counts:?}")
                }
                TaskKind::Regression => {
                    let y = src.labels().as_f64();
                    format!("mean y {:.3}", y.iter().sum::<f64>() / y.len() as f64)
                }
            };
            println!("  source {k}: n={} mean x0 {mean_x0:+.3} {summary}", src.len());
        }
    }
    Ok(())
}
