use std::time::Instant;

use serde_json::json;

use super::estimators::{classify_recovery, is_recovered, millis};
use super::report::{ExperimentReport, Metric, TimingStat, TrialRow};
use super::{seeded_rng, trial_seed, TrialConfig};
use crate::bitcore::BitString;
use crate::cryptanalysis::{recover_key, recover_key_modified};
use crate::error::Result;
use crate::vault::{key_bind, key_release, FakePolicy, Key, Release};

/// Operations timed by [`run_timing_bench`], in row order.
pub const TIMED_OPERATIONS: [&str; 4] = ["key_bind", "key_release", "recover_key", "recover_key_modified"];

/// Times binding, release and both recovery attacks at the configured
/// sizes. Trials run one after another so timings do not compete for cores.
///
/// `key_bind`, `key_release` and `recover_key` work on a vault built with
/// the configured shared policy (shared random if the configured policy is
/// per-bit); `recover_key_modified` attacks a per-bit vault for the same
/// template and key. Context carries the modified attack's median over the
/// trials that needed no fallback.
pub fn run_timing_bench(config: &TrialConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = &config.params;
    let shared = if config.fake_policy.is_shared() {
        config.fake_policy
    } else {
        FakePolicy::SharedRandom
    };
    let mut rows = Vec::with_capacity(4 * config.trials);
    for t in 0..config.trials {
        let seed = trial_seed(config.seed, t as u64);
        let mut rng = seeded_rng(seed);
        let x = BitString::random(params.n(), &mut rng);
        let key = Key::random(config.key_len, &mut rng);
        let mut capture = x.clone();
        for i in 0..params.n() {
            if config.noise_rate > 0.0 && rand::Rng::gen_bool(&mut rng, config.noise_rate) {
                capture.flip(i);
            }
        }
        let row = |metric: &str, outcome: &str, tested: u64, depth: usize, elapsed_ms: f64| TrialRow {
            trial_id: t,
            metric: metric.into(),
            outcome: outcome.into(),
            candidates_tested: tested,
            depth,
            elapsed_ms,
            seed,
        };

        let start = Instant::now();
        let vault = key_bind(&x, &key, params, shared, &mut rng)?;
        rows.push(row("key_bind", "ok", 0, 0, millis(start, true)));

        let start = Instant::now();
        let released = key_release(&capture, &vault, params.tau)?;
        let elapsed = millis(start, true);
        let tag = match released {
            Release::Released(ref k) if k == &key => "released",
            Release::Released(_) => "wrong-key",
            Release::Rejected { .. } => "rejected",
        };
        rows.push(row("key_release", tag, 1, 0, elapsed));

        let start = Instant::now();
        let attempt = recover_key(&vault.public_view(), config.budget);
        let elapsed = millis(start, true);
        let (tag, tested, depth) = classify_recovery(attempt, &key)?;
        rows.push(row("recover_key", tag, tested, depth, elapsed));

        let per_bit = key_bind(&x, &key, params, FakePolicy::PerBitRandom, &mut rng)?;
        let start = Instant::now();
        let attempt = recover_key_modified(&per_bit.public_view(), config.budget);
        let elapsed = millis(start, true);
        let (tag, tested, depth) = classify_recovery(attempt, &key)?;
        rows.push(row("recover_key_modified", tag, tested, depth, elapsed));
    }

    let mut report = ExperimentReport {
        experiment: "timing".into(),
        seed: config.seed,
        ..Default::default()
    };
    report.settings.insert("config".into(), json!(config));
    for op in TIMED_OPERATIONS {
        let samples: Vec<f64> = rows.iter().filter(|r| r.metric == op).map(|r| r.elapsed_ms).collect();
        report.timings.push(TimingStat::from_samples(op, &samples));
    }
    report.metrics.push(Metric::from_rows(
        "key_release",
        &rows,
        |r| r.metric == "key_release",
        |r| r.outcome == "released",
        None,
    ));
    for op in ["recover_key", "recover_key_modified"] {
        report
            .metrics
            .push(Metric::from_rows(op, &rows, |r| r.metric == op, is_recovered, None));
    }
    report.metrics.push(Metric::from_rows(
        "recover_key_modified.fallback",
        &rows,
        |r| r.metric == "recover_key_modified",
        |r| r.outcome == "recovered-fallback",
        None,
    ));
    let clean: Vec<f64> = rows
        .iter()
        .filter(|r| r.metric == "recover_key_modified" && r.outcome == "recovered")
        .map(|r| r.elapsed_ms)
        .collect();
    if !clean.is_empty() {
        report.note(
            "recover_key_modified.median_ms_without_fallback",
            TimingStat::from_samples("", &clean).median_ms,
        );
    }
    report.rows = rows;
    Ok(report)
}
