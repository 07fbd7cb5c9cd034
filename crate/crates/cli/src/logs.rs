//! CSV outputs of a run directory.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const METRICS: &str = "metrics.csv";
pub const EXPLOITABILITY: &str = "exploitability.csv";
pub const TIMING: &str = "timing.csv";
pub const HEAD_TO_HEAD: &str = "head_to_head.csv";
pub const DISAGREEMENT: &str = "disagreement.csv";

pub const METRICS_HEADER: [&str; 13] = [
    "run_id",
    "iteration",
    "traverser",
    "advantage_samples",
    "strategy_samples",
    "advantage_len_p0",
    "advantage_len_p1",
    "strategy_len_p0",
    "strategy_len_p1",
    "root_value",
    "value_loss_first",
    "value_loss_final",
    "fallbacks",
];
pub const EXPLOITABILITY_HEADER: [&str; 5] = ["run_id", "iteration", "e_total_mA", "e_per_player_mA", "method"];
pub const TIMING_HEADER: [&str; 4] = ["run_id", "iteration", "phase", "seconds"];
pub const HEAD_TO_HEAD_HEADER: [&str; 8] = ["iteration", "mean", "ci95", "n_hands", "units", "a", "b", "seed"];
pub const DISAGREEMENT_HEADER: [&str; 7] = ["depth", "round", "mean", "ci95", "std", "n", "iteration"];

/// Appends one row to `dir/file`, writing `header` first if the file is new.
pub fn append_row(dir: &Path, file: &str, header: &[&str], row: &[String]) -> Result<(), CliError> {
    let path = dir.join(file);
    let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
    let f = OpenOptions::new().create(true).append(true).open(&path)?;
    let mut w = csv::Writer::from_writer(f);
    if fresh {
        w.write_record(header)?;
    }
    w.write_record(row)?;
    w.flush()?;
    Ok(())
}

/// Drops rows whose `iteration` column exceeds `max_iteration`.
pub fn truncate_after(path: &PathBuf, max_iteration: u64) -> Result<(), CliError> {
    if !path.exists() {
        return Ok(());
    }
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let Some(col) = headers.iter().position(|h| h == "iteration") else {
        return Ok(());
    };
    let mut keep = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let it: u64 = rec
            .get(col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::CorruptRun(format!("{}: bad iteration field", path.display())))?;
        if it <= max_iteration {
            keep.push(rec);
        }
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(&headers)?;
        for rec in &keep {
            w.write_record(rec)?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

/// Shortest round-trip text for a float, so reruns print identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_and_truncate() {
        let dir = tempfile::tempdir().unwrap();
        for it in 1..=5u64 {
            append_row(dir.path(), "x.csv", &["run_id", "iteration"], &["r".into(), it.to_string()]).unwrap();
        }
        let path = dir.path().join("x.csv");
        truncate_after(&path, 3).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "run_id,iteration\nr,1\nr,2\nr,3\n");
    }
}
