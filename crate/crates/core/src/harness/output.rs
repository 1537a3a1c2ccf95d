//! `summary.json`, `coverage.csv` and `estimates.csv`.

use std::fmt::Write as _;
use std::path::Path;

use super::config::DEFAULT_LEVELS;
use super::run::{CoverageReport, ExperimentOutcome};
use crate::error::Result;

pub const COVERAGE_HEADER: &str = "group,level,coverage,mean_width";
pub const ESTIMATES_HEADER: &str =
    "replicate,target_id,truth,point_mean,point_median,lo90,hi90,lo95,hi95,lo99,hi99";

/// Seventeen significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn coverage_csv(report: &CoverageReport) -> String {
    let mut out = String::new();
    out.push_str(COVERAGE_HEADER);
    out.push('\n');
    for g in &report.groups {
        for c in &g.coverage {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                g.group,
                fmt_real(c.level),
                fmt_real(c.coverage),
                fmt_real(c.mean_width)
            );
        }
    }
    out
}

pub fn estimates_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    out.push_str(ESTIMATES_HEADER);
    out.push('\n');
    for r in &outcome.replicates {
        let s = &r.summary;
        for (j, &t) in r.truth.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.replicate,
                j,
                fmt_real(t),
                fmt_real(s.point_mean[j]),
                fmt_real(s.point_median[j])
            );
            for level in DEFAULT_LEVELS {
                let iv = s.interval(level, j).expect("CSV levels are always summarized");
                let _ = write!(out, ",{},{}", fmt_real(iv.lower), fmt_real(iv.upper));
            }
            out.push('\n');
        }
    }
    out
}

pub fn summary_json(report: &CoverageReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_summary(text: &str) -> Result<CoverageReport> {
    Ok(serde_json::from_str(text)?)
}

/// Write the three result files into `dir`, creating it if needed.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.json"), summary_json(&outcome.report)?)?;
    std::fs::write(dir.join("coverage.csv"), coverage_csv(&outcome.report))?;
    std::fs::write(dir.join("estimates.csv"), estimates_csv(outcome))?;
    Ok(())
}
