//! A small end-to-end experiment written to a report directory.
//!
//! `cargo run --release --example run_experiment [out_dir]`

use mdcp::data::TaskKind;
use mdcp::dgp::SuiteConfig;
use mdcp::harness::{run_experiment, verify_report, write_reports, ExperimentConfig, SuiteEntry};

fn main() -> mdcp::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "mdcp-example-report".into());
    let suite = |task| {
        SuiteEntry::new(SuiteConfig {
            task,
            n_per_source: 800,
            ..Default::default()
        })
    };
    let exp = ExperimentConfig {
        suites: vec![suite(TaskKind::Classification { num_classes: 6 }), suite(TaskKind::Regression)],
        methods: vec!["mdcp".into(), "baseline-agg".into(), "baseline-src".into()],
        runs: 3,
        seed: 7,
        ..Default::default()
    };
    let report = run_experiment(&exp)?;
    for s in report.summary.iter().filter(|s| s.metric == "worst_cov" || s.metric == "mean_size") {
        println!("{:<32} {:<16} {:<10} {:.3} (sd {:.3})", s.suite, s.method, s.metric, s.mean, s.sd);
    }
    write_reports(&report, out.as_ref())?;
    let v = verify_report(out.as_ref())?;
    println!("wrote {out}; {} identity checks passed: {}", v.checks.len(), v.all_passed());
    Ok(())
}
