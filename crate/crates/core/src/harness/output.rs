//! File formats of experiment results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentOutcome, Summary, TrialRecord};
use crate::error::HarnessError;

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Decimal float with 17 significant digits, enough to round-trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per trial and user; users are 1-based. Failed trials keep their
/// rows with `NaN` rates and `converged = false`.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], num_users: usize, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "seed",
        "rejections",
        "user",
        "rate_ne_bits",
        "rate_sg_bits",
        "ratio",
        "converged",
    ])?;
    let at = |v: &[f64], u: usize| format_float(v.get(u).copied().unwrap_or(f64::NAN));
    for r in records {
        for u in 0..num_users {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                r.rejections.to_string(),
                (u + 1).to_string(),
                at(&r.rates_ne, u),
                at(&r.rates_sg, u),
                at(&r.ratios, u),
                r.converged().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf_csv<W: Write>(cdf: &[(f64, f64)], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fraction"])?;
    for &(t, p) in cdf {
        w.write_record([format_float(t), format_float(p)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_json(summary: &Summary) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(summary)? + "\n")
}

pub fn cdf_file_name(user: usize) -> String {
    format!("cdf_user{}.csv", user + 1)
}

/// Writes `trials.csv`, `summary.json` and one `cdf_user{k}.csv` per user
/// into `dir`, creating it if needed. Returns the written paths.
pub fn write_outcome(outcome: &ExperimentOutcome, num_users: usize, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join(TRIALS_FILE);
    write_trials_csv(&outcome.records, num_users, fs::File::create(&path)?)?;
    written.push(path);
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary_json(&outcome.summary)?)?;
    written.push(path);
    for (u, cdf) in outcome.cdfs.iter().enumerate() {
        let path = dir.join(cdf_file_name(u));
        write_cdf_csv(cdf, fs::File::create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}
