//! Per-run rows, summaries and their CSV/JSON files.
//!
//! A report directory holds `runs.csv` (one row per run and method),
//! `summary.csv`/`summary.json` (mean and sample SD per suite, method and
//! metric), `long.csv` (one row per run, method and metric, for plotting)
//! and `report.json` with the configuration and every row.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{DualDiagnostics, MethodOutcome};
use crate::error::{MdcpError, Result};
use crate::oracle::{Check, VerificationReport};
use crate::rng::RNG_ALGORITHM;

pub type VerifyOutcome = VerificationReport;

const REPORT_FORMAT: &str = "mdcp-report";
const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub suite: String,
    pub method: String,
    pub run: usize,
    pub seed: u64,
    pub alpha: f64,
    pub overall_cov: f64,
    pub worst_cov: f64,
    pub cov_src: Vec<f64>,
    pub covered: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub mean_size: f64,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DualDiagnostics>,
}

impl RunRow {
    pub fn from_outcome(suite: &str, run: usize, seed: u64, alpha: f64, o: MethodOutcome, record_wall: bool) -> Self {
        let m = &o.metrics;
        Self {
            suite: suite.to_string(),
            method: o.method.name(),
            run,
            seed,
            alpha,
            overall_cov: m.overall_coverage(),
            worst_cov: m.worst_coverage(),
            cov_src: m.per_source_coverage(),
            covered: m.covered.clone(),
            test_counts: m.test_counts.clone(),
            mean_size: m.mean_size(),
            wall_ms: if record_wall { o.wall_ms } else { 0 },
            diagnostics: o.diagnostics,
        }
    }

    /// `(metric, value)` pairs in report order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("overall_cov".to_string(), self.overall_cov),
            ("worst_cov".to_string(), self.worst_cov),
            ("mean_size".to_string(), self.mean_size),
        ];
        out.extend(self.cov_src.iter().enumerate().map(|(k, &c)| (format!("cov_src_{k}"), c)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub rng: String,
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

impl Report {
    pub fn new(config: ExperimentConfig, rows: Vec<RunRow>) -> Self {
        let summary = aggregate(&rows);
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            rng: RNG_ALGORITHM.into(),
            config,
            rows,
            summary,
        }
    }

    /// Summary value of one metric, if present.
    pub fn mean_of(&self, suite: &str, method: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.suite == suite && r.method == method && r.metric == metric)
            .map(|r| r.mean)
    }
}

/// Mean and sample SD per `(suite, method, metric)`, in first-seen order.
pub fn aggregate(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, String, String), Vec<f64>)> = Vec::new();
    for r in rows {
        for (metric, v) in r.metrics() {
            let key = (r.suite.clone(), r.method.clone(), metric);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, vals)) => vals.push(v),
                None => groups.push((key, vec![v])),
            }
        }
    }
    groups
        .into_iter()
        .map(|((suite, method, metric), vals)| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                suite,
                method,
                metric,
                mean,
                sd,
                n,
            }
        })
        .collect()
}

fn max_sources(rows: &[RunRow]) -> usize {
    rows.iter().map(|r| r.cov_src.len()).max().unwrap_or(0)
}

fn runs_csv(rows: &[RunRow]) -> Result<Vec<u8>> {
    let k = max_sources(rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["suite", "method", "run", "seed", "alpha", "overall_cov", "worst_cov"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..k).map(|i| format!("cov_src_{i}")));
    header.extend(["mean_size".to_string(), "wall_ms".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.suite.clone(),
            r.method.clone(),
            r.run.to_string(),
            r.seed.to_string(),
            r.alpha.to_string(),
            r.overall_cov.to_string(),
            r.worst_cov.to_string(),
        ];
        rec.extend((0..k).map(|i| r.cov_src.get(i).map_or(String::new(), f64::to_string)));
        rec.extend([r.mean_size.to_string(), r.wall_ms.to_string()]);
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| MdcpError::Invalid(e.to_string()))
}

fn summary_csv(summary: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in summary {
        w.serialize(s)?;
    }
    w.into_inner().map_err(|e| MdcpError::Invalid(e.to_string()))
}

fn long_csv(rows: &[RunRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "method", "run", "metric", "value"])?;
    for r in rows {
        for (metric, v) in r.metrics() {
            w.write_record([r.suite.as_str(), &r.method, &r.run.to_string(), &metric, &v.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| MdcpError::Invalid(e.to_string()))
}

pub fn write_reports(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), runs_csv(&report.rows)?)?;
    fs::write(dir.join("summary.csv"), summary_csv(&report.summary)?)?;
    fs::write(dir.join("long.csv"), long_csv(&report.rows)?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&report.summary)?)?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn load_report(dir: &Path) -> Result<Report> {
    let report: Report = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)?;
    if report.format != REPORT_FORMAT || report.version != REPORT_VERSION {
        return Err(MdcpError::Invalid(format!(
            "unsupported report {} v{}",
            report.format, report.version
        )));
    }
    Ok(report)
}

const IDENTITY_TOL: f64 = 1e-12;

/// Re-checks the metric identities of a written report: rates in `[0, 1]`,
/// per-source coverage equal to covered/count, worst-case equal to the
/// minimum, overall equal to the test-count weighted mean, summaries equal
/// to a fresh aggregation, and CSV files equal to the JSON rows.
pub fn verify_report(dir: &Path) -> Result<VerifyOutcome> {
    let report = load_report(dir)?;
    let mut checks = Vec::new();
    let mut push = |name: String, residual: f64| {
        checks.push(Check {
            name,
            passed: residual.is_finite() && residual <= IDENTITY_TOL,
            residual,
        })
    };
    for r in &report.rows {
        let tag = format!("{}/{}/run{}", r.suite, r.method, r.run);
        let rates = r.cov_src.iter().chain([&r.overall_cov, &r.worst_cov]);
        let out_of_range = rates.map(|&v| (-v).max(v - 1.0).max(0.0)).fold(0.0, f64::max);
        push(format!("{tag}: rates_in_unit_interval"), out_of_range);
        let shapes_ok = r.cov_src.len() == r.covered.len() && r.covered.len() == r.test_counts.len();
        let per_source = if shapes_ok {
            r.cov_src
                .iter()
                .zip(r.covered.iter().zip(&r.test_counts))
                .map(|(&c, (&a, &n))| (c - a as f64 / n.max(1) as f64).abs())
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        push(format!("{tag}: per_source_is_covered_over_count"), per_source);
        let min = r.cov_src.iter().copied().fold(f64::INFINITY, f64::min);
        push(format!("{tag}: worst_is_min"), (r.worst_cov - min).abs());
        let n: usize = r.test_counts.iter().sum();
        let weighted = r
            .cov_src
            .iter()
            .zip(&r.test_counts)
            .map(|(&c, &m)| c * m as f64)
            .sum::<f64>()
            / n.max(1) as f64;
        push(format!("{tag}: overall_is_weighted_mean"), (r.overall_cov - weighted).abs());
        push(
            format!("{tag}: size_nonnegative"),
            if r.mean_size >= 0.0 { 0.0 } else { f64::INFINITY },
        );
    }
    let fresh = aggregate(&report.rows);
    let summary_residual = if fresh.len() == report.summary.len() {
        fresh
            .iter()
            .zip(&report.summary)
            .map(|(a, b)| {
                if (&a.suite, &a.method, &a.metric, a.n) == (&b.suite, &b.method, &b.metric, b.n) {
                    (a.mean - b.mean).abs().max((a.sd - b.sd).abs())
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    push("summary_matches_rows".into(), summary_residual);
    let csv_ok = fs::read(dir.join("runs.csv"))? == runs_csv(&report.rows)?
        && fs::read(dir.join("summary.csv"))? == summary_csv(&report.summary)?
        && fs::read(dir.join("long.csv"))? == long_csv(&report.rows)?;
    push("csv_matches_json".into(), if csv_ok { 0.0 } else { f64::INFINITY });
    Ok(VerificationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, run: usize, cov: [f64; 2]) -> RunRow {
        RunRow {
            suite: "s".into(),
            method: method.into(),
            run,
            seed: 1,
            alpha: 0.1,
            overall_cov: (cov[0] + cov[1]) / 2.0,
            worst_cov: cov[0].min(cov[1]),
            cov_src: cov.to_vec(),
            covered: vec![(cov[0] * 100.0).round() as usize, (cov[1] * 100.0).round() as usize],
            test_counts: vec![100, 100],
            mean_size: 2.0,
            wall_ms: 0,
            diagnostics: None,
        }
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[row("m", 0, [0.9, 0.9])]);
        let worst = one.iter().find(|s| s.metric == "worst_cov").unwrap();
        assert_eq!((worst.mean, worst.sd, worst.n), (0.9, 0.0, 1));

        let two = aggregate(&[row("m", 0, [0.88, 0.95]), row("m", 1, [0.92, 0.95])]);
        let worst = two.iter().find(|s| s.metric == "worst_cov").unwrap();
        assert!((worst.mean - 0.90).abs() < 1e-12);
        assert!((worst.sd - 0.028_284_3).abs() < 1e-7);

        let mixed = aggregate(&[row("a", 0, [0.9, 0.9]), row("b", 0, [0.9, 0.9])]);
        // Two methods times five metrics.
        assert_eq!(mixed.len(), 10);
        let mut keys: Vec<_> = mixed.iter().map(|s| (&s.method, &s.metric)).collect();
        keys.dedup();
        assert_eq!(keys.len(), 10);
    }

    #[test]
    fn written_reports_verify_and_tampering_is_caught() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report::new(
            ExperimentConfig::default(),
            vec![row("m", 0, [0.88, 0.95]), row("m", 1, [0.92, 0.95])],
        );
        write_reports(&report, dir.path()).unwrap();
        let v = verify_report(dir.path()).unwrap();
        assert!(v.all_passed(), "{v:?}");

        let mut bad = report.clone();
        bad.rows[0].worst_cov = 0.95;
        fs::write(dir.path().join("report.json"), serde_json::to_string(&bad).unwrap()).unwrap();
        let v = verify_report(dir.path()).unwrap();
        assert!(!v.all_passed());
        assert!(!v.check("s/m/run0: worst_is_min").unwrap().passed);
    }
}
