use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the per-trial CSV export.
pub const CSV_HEADER: [&str; 7] = [
    "trial_id",
    "metric",
    "outcome",
    "candidates_tested",
    "depth",
    "elapsed_ms",
    "seed",
];

/// One game played by one trial.
///
/// `outcome` is a short tag whose vocabulary depends on `metric`; every
/// aggregate in the report is a count over these tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial_id: usize,
    pub metric: String,
    pub outcome: String,
    pub candidates_tested: u64,
    pub depth: usize,
    pub elapsed_ms: f64,
    /// Substream seed; replays this trial alone.
    pub seed: u64,
}

/// Binomial point estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub trials: usize,
    pub std_error: f64,
    /// Success rate of the matching naive strategy, when one exists.
    pub baseline: Option<f64>,
}

impl Metric {
    pub fn from_counts(name: &str, successes: usize, trials: usize, baseline: Option<f64>) -> Self {
        let (estimate, std_error) = if trials == 0 {
            (0.0, 0.0)
        } else {
            let p = successes as f64 / trials as f64;
            (p, (p * (1.0 - p) / trials as f64).sqrt())
        };
        Metric {
            name: name.to_string(),
            estimate,
            trials,
            std_error,
            baseline,
        }
    }

    /// Fraction of `rows` accepted by `within` that also satisfy `hit`.
    pub fn from_rows(
        name: &str,
        rows: &[TrialRow],
        within: impl Fn(&TrialRow) -> bool,
        hit: impl Fn(&TrialRow) -> bool,
        baseline: Option<f64>,
    ) -> Self {
        let selected: Vec<&TrialRow> = rows.iter().filter(|r| within(r)).collect();
        let successes = selected.iter().filter(|r| hit(r)).count();
        Metric::from_counts(name, successes, selected.len(), baseline)
    }
}

/// Wall-clock summary of one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStat {
    pub operation: String,
    pub samples: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

impl TimingStat {
    pub fn from_samples(operation: &str, samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median_ms = match k {
            0 => 0.0,
            _ if k % 2 == 1 => sorted[k / 2],
            _ => (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0,
        };
        TimingStat {
            operation: operation.to_string(),
            samples: k,
            median_ms,
            mean_ms: if k == 0 {
                0.0
            } else {
                sorted.iter().sum::<f64>() / k as f64
            },
            max_ms: sorted.last().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    /// Inputs echoed back for provenance of the numbers.
    pub settings: BTreeMap<String, serde_json::Value>,
    pub metrics: Vec<Metric>,
    /// Derived figures that are not rates (advantages, costs, means).
    pub context: BTreeMap<String, f64>,
    pub timings: Vec<TimingStat>,
    pub rows: Vec<TrialRow>,
}

impl ExperimentReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn timing(&self, operation: &str) -> Option<&TimingStat> {
        self.timings.iter().find(|t| t.operation == operation)
    }

    /// Adds a context figure, skipping non-finite values so the JSON form
    /// round-trips.
    pub(crate) fn note(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.context.insert(key.to_string(), value);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidParams(format!("unknown report format {other:?}"))),
        }
    }
}

/// Writes the full report as JSON, or its trial rows as CSV.
pub fn emit_report<W: Write>(report: &ExperimentReport, format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(CSV_HEADER)?;
            for row in &report.rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    emit_report(report, format, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial_id: usize, outcome: &str) -> TrialRow {
        TrialRow {
            trial_id,
            metric: "rec".into(),
            outcome: outcome.into(),
            candidates_tested: 3,
            depth: 1,
            elapsed_ms: 0.25,
            seed: 99,
        }
    }

    #[test]
    fn binomial_standard_error() {
        let m = Metric::from_counts("x", 25, 100, Some(0.5));
        assert_eq!(m.estimate, 0.25);
        assert!((m.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(Metric::from_counts("x", 0, 0, None).estimate, 0.0);
    }

    #[test]
    fn median_of_even_and_odd_samples() {
        assert_eq!(TimingStat::from_samples("a", &[3.0, 1.0, 2.0]).median_ms, 2.0);
        let t = TimingStat::from_samples("a", &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!((t.median_ms, t.mean_ms, t.max_ms), (2.5, 2.5, 4.0));
    }

    #[test]
    fn csv_has_fixed_header_and_one_line_per_row() {
        let report = ExperimentReport {
            rows: vec![row(0, "recovered"), row(1, "no-match")],
            ..Default::default()
        };
        let mut buf = Vec::new();
        emit_report(&report, ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1], "0,rec,recovered,3,1,0.25,99");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        emit_report(&ExperimentReport::default(), ReportFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn json_round_trip() {
        let mut report = ExperimentReport {
            experiment: "rec".into(),
            seed: 7,
            rows: vec![row(0, "recovered")],
            metrics: vec![Metric::from_counts("rec", 1, 1, None)],
            timings: vec![TimingStat::from_samples("recover_key", &[0.1, 0.30000000000000004])],
            ..Default::default()
        };
        report.settings.insert("l".into(), serde_json::json!(16));
        report.note("ratio", 1.0 / 3.0);
        report.note("skipped", f64::INFINITY);
        assert!(!report.context.contains_key("skipped"));
        let mut buf = Vec::new();
        emit_report(&report, ReportFormat::Json, &mut buf).unwrap();
        let back: ExperimentReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, report);
    }
}
