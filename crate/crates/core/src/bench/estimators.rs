//! Attack games, each played `trials` times on independent substreams.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::report::{ExperimentReport, Metric, TrialRow};
use super::{seeded_rng, trial_seed, SyntheticUserModel, TrialConfig};
use crate::bioencoding::{authenticate, enroll, enroll_with, Decision, PublicParams};
use crate::bitcore::BitString;
use crate::cryptanalysis::{
    eliminate_minorities, forge_preimage_from, link_biocodes, recover_key, recover_key_modified, LinkOutcome,
    RecoveryReport,
};
use crate::error::{Error, Result};
use crate::vault::{key_bind, Key};

/// Substream index reserved for game randomness; user templates use the
/// low indices.
const GAME_STREAM: u64 = 1 << 63;

pub(super) fn run_trials<T, F>(trials: usize, seed: u64, play: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| play(t, trial_seed(seed, t as u64)))
        .collect()
}

pub(super) fn millis(start: Instant, enabled: bool) -> f64 {
    if enabled {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Outcome tag, candidates tested and depth of one recovery attempt.
///
/// Tags: `recovered`, `recovered-fallback`, `wrong-key`, `budget-exceeded`,
/// `no-match`.
pub(super) fn classify_recovery(attempt: Result<RecoveryReport>, key: &Key) -> Result<(&'static str, u64, usize)> {
    match attempt {
        Ok(r) if r.recovered_key.as_ref() == Some(key) => {
            let tag = if r.fallback_used {
                "recovered-fallback"
            } else {
                "recovered"
            };
            Ok((tag, r.candidates_tested, r.max_depth))
        }
        Ok(r) => Ok(("wrong-key", r.candidates_tested, r.max_depth)),
        Err(Error::BudgetExceeded { tested }) => Ok(("budget-exceeded", tested, 0)),
        Err(Error::NoCandidateMatched { tested }) => Ok(("no-match", tested, 0)),
        Err(e) => Err(e),
    }
}

pub(super) fn is_recovered(row: &TrialRow) -> bool {
    row.outcome.starts_with("recovered")
}

fn require_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(Error::InvalidParams(format!(
            "need at least {min} trials, got {trials}"
        )));
    }
    Ok(())
}

fn params_json(params: &PublicParams) -> serde_json::Value {
    json!({"n": params.geometry.n, "m1": params.geometry.m1, "m2": params.geometry.m2, "tau": params.tau})
}

/// False-match rate: an impostor's fresh capture authenticates against a
/// user's biocode at threshold `tau`.
///
/// Rows use metric `fmr` with outcome `accept` or `reject`; `depth` is the
/// biocode's word count.
pub fn estimate_fmr(
    model: &SyntheticUserModel,
    params: &PublicParams,
    tau: usize,
    trials: usize,
) -> Result<ExperimentReport> {
    require_trials(trials, 100)?;
    check_model(model, params)?;
    let game_seed = trial_seed(model.seed, GAME_STREAM);
    let rows = run_trials(trials, game_seed, |t, seed| {
        let mut rng = seeded_rng(seed);
        let (u, v) = model.sample_pair(&mut rng);
        let bc = enroll(&model.template(u), &params.geometry, &mut rng)?;
        let (decision, _) = authenticate(&model.capture(v, &mut rng), &bc, tau)?;
        Ok(TrialRow {
            trial_id: t,
            metric: "fmr".into(),
            outcome: if decision == Decision::Success {
                "accept"
            } else {
                "reject"
            }
            .into(),
            candidates_tested: 0,
            depth: bc.d2(),
            elapsed_ms: 0.0,
            seed,
        })
    })?;
    let mut report = ExperimentReport {
        experiment: "fmr".into(),
        seed: model.seed,
        ..Default::default()
    };
    report.settings.insert("params".into(), params_json(params));
    report.settings.insert("tau".into(), json!(tau));
    report.settings.insert("model".into(), json!(model));
    report.settings.insert("trials".into(), json!(trials));
    report.metrics.push(Metric::from_rows(
        "fmr",
        &rows,
        |_| true,
        |r| r.outcome == "accept",
        None,
    ));
    report.rows = rows;
    Ok(report)
}

fn check_model(model: &SyntheticUserModel, params: &PublicParams) -> Result<()> {
    if model.n != params.n() {
        return Err(Error::LengthMismatch {
            left: model.n,
            right: params.n(),
        });
    }
    params.geometry.validate(false)
}

/// Key-recovery game: bind a random key to a random template, then attack
/// the vault with the shared-fake attack or, for per-bit fakes, the
/// modified attack.
///
/// Rows use metric `rec`, tagged as in the recovery outcome vocabulary.
/// Attacks that run out of budget are counted, not raised.
pub fn estimate_rate_rec(config: &TrialConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let params = &config.params;
    let per_bit = !config.fake_policy.is_shared();
    let played = run_trials(config.trials, config.seed, |t, seed| {
        let mut rng = seeded_rng(seed);
        let x = BitString::random(params.n(), &mut rng);
        let key = Key::random(config.key_len, &mut rng);
        let vault = key_bind(&x, &key, params, config.fake_policy, &mut rng)?;
        let view = vault.public_view();
        let start = Instant::now();
        let attempt = if per_bit {
            recover_key_modified(&view, config.budget)
        } else {
            recover_key(&view, config.budget)
        };
        let elapsed_ms = millis(start, config.timing);
        let eliminated = match (&attempt, per_bit) {
            (Ok(r), true) => r.eliminated_per_depth.clone(),
            (Err(_), true) => eliminate_minorities(&view).per_depth,
            _ => Vec::new(),
        };
        let (tag, tested, depth) = classify_recovery(attempt, &key)?;
        let row = TrialRow {
            trial_id: t,
            metric: "rec".into(),
            outcome: tag.into(),
            candidates_tested: tested,
            depth,
            elapsed_ms,
            seed,
        };
        Ok((row, eliminated))
    })?;
    let (rows, eliminated): (Vec<TrialRow>, Vec<Vec<usize>>) = played.into_iter().unzip();

    let fmr_model = SyntheticUserModel::new(params.n(), u64::MAX, 0.0, trial_seed(config.seed, GAME_STREAM))?;
    let fmr = estimate_fmr(&fmr_model, params, params.tau, config.trials.max(100))?;
    let fmr = fmr.metric("fmr").map_or(0.0, |m| m.estimate);

    let mut report = ExperimentReport {
        experiment: "rec".into(),
        seed: config.seed,
        ..Default::default()
    };
    report.settings.insert("config".into(), json!(config));
    report
        .metrics
        .push(Metric::from_rows("rec", &rows, |_| true, is_recovered, Some(fmr)));
    report.metrics.push(Metric::from_rows(
        "rec.fallback",
        &rows,
        |_| true,
        |r| r.outcome == "recovered-fallback",
        None,
    ));
    report.metrics.push(Metric::from_rows(
        "rec.budget_exceeded",
        &rows,
        |_| true,
        |r| r.outcome == "budget-exceeded",
        None,
    ));
    report.note("fmr", fmr);
    report.note("naive_release_attempts", 1.0 / fmr);
    report.note(
        "mean_candidates_tested",
        rows.iter().map(|r| r.candidates_tested as f64).sum::<f64>() / rows.len() as f64,
    );
    if per_bit {
        for depth in 0..3 {
            let total: usize = eliminated.iter().map(|e| e.get(depth).copied().unwrap_or(0)).sum();
            report.note(
                &format!("mean_eliminated_depth_{}", depth + 1),
                total as f64 / rows.len() as f64,
            );
        }
    }
    if config.timing {
        let samples: Vec<f64> = rows.iter().map(|r| r.elapsed_ms).collect();
        let op = if per_bit { "recover_key_modified" } else { "recover_key" };
        report.timings.push(super::TimingStat::from_samples(op, &samples));
    }
    report.rows = rows;
    Ok(report)
}

fn verdict_tag(outcome: LinkOutcome) -> &'static str {
    match outcome {
        LinkOutcome::SameUser => "same-user",
        LinkOutcome::DifferentUsers => "different-users",
        LinkOutcome::Failure => "failure",
    }
}

/// Linkability game: the challenger flips `c`, enrolls two captures of one
/// user (`c = 1`) or of two users (`c = 0`), and the adversary answers
/// with [`link_biocodes`]. A `Failure` verdict is answered with a fair coin.
///
/// Rows use metric `link` with outcome `truth/verdict/guess`, where truth
/// and guess are `same` or `different`; `depth` is the deciding word.
/// With `condition_same_p` both enrollments share one selector.
pub fn estimate_rate_link(
    model: &SyntheticUserModel,
    params: &PublicParams,
    trials: usize,
    condition_same_p: bool,
) -> Result<ExperimentReport> {
    require_trials(trials, 1000)?;
    check_model(model, params)?;
    let g = params.geometry;
    let game_seed = trial_seed(model.seed, GAME_STREAM + 1);
    let rows = run_trials(trials, game_seed, |t, seed| {
        let mut rng = seeded_rng(seed);
        let same = rng.gen::<bool>();
        let (u, v) = model.sample_pair(&mut rng);
        let xa = model.capture(u, &mut rng);
        let xb = model.capture(if same { u } else { v }, &mut rng);
        let (a, b) = if condition_same_p {
            let p = BitString::random(g.n, &mut rng);
            let ra = BitString::random(g.n, &mut rng);
            let rb = BitString::random(g.n, &mut rng);
            (enroll_with(&xa, &g, &ra, &p)?, enroll_with(&xb, &g, &rb, &p)?)
        } else {
            (enroll(&xa, &g, &mut rng)?, enroll(&xb, &g, &mut rng)?)
        };
        let verdict = link_biocodes(&a, &b)?;
        let guess_same = match verdict.outcome {
            LinkOutcome::SameUser => true,
            LinkOutcome::DifferentUsers => false,
            LinkOutcome::Failure => rng.gen::<bool>(),
        };
        let word = |s: bool| if s { "same" } else { "different" };
        Ok(TrialRow {
            trial_id: t,
            metric: "link".into(),
            outcome: format!("{}/{}/{}", word(same), verdict_tag(verdict.outcome), word(guess_same)),
            candidates_tested: 0,
            depth: verdict.deciding_word.unwrap_or(0),
            elapsed_ms: 0.0,
            seed,
        })
    })?;
    let field = |r: &TrialRow, k: usize| r.outcome.split('/').nth(k).unwrap_or("").to_string();

    let mut report = ExperimentReport {
        experiment: "link".into(),
        seed: model.seed,
        ..Default::default()
    };
    report.settings.insert("params".into(), params_json(params));
    report.settings.insert("model".into(), json!(model));
    report.settings.insert("trials".into(), json!(trials));
    report
        .settings
        .insert("condition_same_p".into(), json!(condition_same_p));
    report.metrics.push(Metric::from_rows(
        "link",
        &rows,
        |_| true,
        |r| field(r, 0) == field(r, 2),
        Some(0.5),
    ));
    report.metrics.push(Metric::from_rows(
        "link.failure",
        &rows,
        |_| true,
        |r| field(r, 1) == "failure",
        None,
    ));
    report.metrics.push(Metric::from_rows(
        "link.different_detected",
        &rows,
        |r| field(r, 0) == "different",
        |r| field(r, 1) == "different-users",
        None,
    ));
    report.metrics.push(Metric::from_rows(
        "link.same_misread",
        &rows,
        |r| field(r, 0) == "same",
        |r| field(r, 1) == "different-users",
        None,
    ));
    let link = report.metrics[0].clone();
    report.note("advantage", link.estimate - 0.5);
    report.note("advantage_sigmas", (link.estimate - 0.5) / link.std_error);
    report.rows = rows;
    Ok(report)
}

/// Authentication game against one enrolled user, played by the preimage
/// forger and by the naive random-template adversary on the same biocode.
///
/// Rows use metric `auth` with outcome `forge=<accept|reject>;random=<accept|reject>`.
pub fn estimate_rate_auth(
    model: &SyntheticUserModel,
    params: &PublicParams,
    tau: usize,
    trials: usize,
) -> Result<ExperimentReport> {
    require_trials(trials, 100)?;
    check_model(model, params)?;
    let game_seed = trial_seed(model.seed, GAME_STREAM + 2);
    let rows = run_trials(trials, game_seed, |t, seed| {
        let mut rng = seeded_rng(seed);
        let u = model.sample_user(&mut rng);
        let bc = enroll(&model.template(u), &params.geometry, &mut rng)?;
        let forged = forge_preimage_from(&bc, &BitString::random(params.n(), &mut rng))?;
        let random = BitString::random(params.n(), &mut rng);
        let tag = |x: &BitString| -> Result<&'static str> {
            Ok(match authenticate(x, &bc, tau)?.0 {
                Decision::Success => "accept",
                Decision::Failure => "reject",
            })
        };
        Ok(TrialRow {
            trial_id: t,
            metric: "auth".into(),
            outcome: format!("forge={};random={}", tag(&forged)?, tag(&random)?),
            candidates_tested: 0,
            depth: bc.d2(),
            elapsed_ms: 0.0,
            seed,
        })
    })?;
    let random = Metric::from_rows(
        "auth.random",
        &rows,
        |_| true,
        |r| r.outcome.ends_with("random=accept"),
        None,
    );
    let forge = Metric::from_rows(
        "auth.forge",
        &rows,
        |_| true,
        |r| r.outcome.starts_with("forge=accept"),
        Some(random.estimate),
    );
    let mut report = ExperimentReport {
        experiment: "auth".into(),
        seed: model.seed,
        ..Default::default()
    };
    report.settings.insert("params".into(), params_json(params));
    report.settings.insert("tau".into(), json!(tau));
    report.settings.insert("model".into(), json!(model));
    report.settings.insert("trials".into(), json!(trials));
    report.note("advantage", forge.estimate - random.estimate);
    report.note(
        "advantage_std_error",
        (forge.std_error.powi(2) + random.std_error.powi(2)).sqrt(),
    );
    report.metrics = vec![forge, random];
    report.rows = rows;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bioencoding::Geometry;
    use crate::vault::FakePolicy;

    fn params(n: usize, tau: usize) -> PublicParams {
        PublicParams {
            geometry: Geometry::new(n, 3, 5).unwrap(),
            tau,
        }
    }

    #[test]
    fn fmr_is_one_at_full_threshold() {
        let model = SyntheticUserModel::new(16, 1000, 0.0, 1).unwrap();
        // n = 16 with (3, 5) never yields more than 6 words
        let r = estimate_fmr(&model, &params(16, 1), 6, 200).unwrap();
        assert_eq!(r.metric("fmr").unwrap().estimate, 1.0);
    }

    #[test]
    fn fmr_is_monotone_in_tau() {
        let model = SyntheticUserModel::new(24, 1000, 0.05, 3).unwrap();
        let p = params(24, 1);
        let rates: Vec<f64> = (0..=4)
            .map(|tau| {
                estimate_fmr(&model, &p, tau, 400)
                    .unwrap()
                    .metric("fmr")
                    .unwrap()
                    .estimate
            })
            .collect();
        assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
    }

    #[test]
    fn fmr_at_zero_matches_word_count() {
        // each impostor matches all d2 independent parities with probability 2^-d2
        let model = SyntheticUserModel::new(24, 1 << 20, 0.0, 8).unwrap();
        let r = estimate_fmr(&model, &params(24, 1), 0, 20_000).unwrap();
        let expected: f64 = r.rows.iter().map(|row| 0.5f64.powi(row.depth as i32)).sum::<f64>() / r.rows.len() as f64;
        let m = r.metric("fmr").unwrap();
        let se = (expected * (1.0 - expected) / m.trials as f64).sqrt();
        assert!(
            (m.estimate - expected).abs() <= 3.0 * se,
            "{} vs {expected}",
            m.estimate
        );
    }

    #[test]
    fn rec_rows_reproduce_metrics_and_are_deterministic() {
        let cfg = TrialConfig::new(params(32, 1), 16, FakePolicy::SharedRandom, 50, 11);
        let a = estimate_rate_rec(&cfg).unwrap();
        let b = estimate_rate_rec(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let rec = a.metric("rec").unwrap();
        assert_eq!(rec.estimate, 1.0);
        assert_eq!(rec.trials, a.rows.len());
        assert!(a.rows.iter().all(|r| r.elapsed_ms == 0.0));
    }

    #[test]
    fn rec_per_bit_reports_elimination_means() {
        let cfg = TrialConfig::new(params(64, 1), 16, FakePolicy::PerBitRandom, 20, 5);
        let r = estimate_rate_rec(&cfg).unwrap();
        assert_eq!(r.metric("rec").unwrap().estimate, 1.0);
        assert!(r.context.contains_key("mean_eliminated_depth_1"));
    }

    #[test]
    fn rec_counts_budget_exhaustion() {
        let mut cfg = TrialConfig::new(params(64, 1), 64, FakePolicy::PerBitRandom, 4, 5);
        cfg.budget = 1;
        let r = estimate_rate_rec(&cfg).unwrap();
        let exhausted = r.metric("rec.budget_exceeded").unwrap();
        let rec = r.metric("rec").unwrap();
        assert!((exhausted.estimate + rec.estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn link_same_user_zero_noise_never_reads_different() {
        let model = SyntheticUserModel::new(64, 50, 0.0, 4).unwrap();
        let r = estimate_rate_link(&model, &params(64, 1), 2000, false).unwrap();
        assert_eq!(r.metric("link.same_misread").unwrap().estimate, 0.0);
        assert!(r.metric("link").unwrap().estimate > 0.5);
    }

    #[test]
    fn link_advantage_is_significant() {
        let model = SyntheticUserModel::new(64, 1 << 20, 0.0, 6).unwrap();
        let r = estimate_rate_link(&model, &params(64, 1), 10_000, false).unwrap();
        assert!(r.context["advantage_sigmas"] >= 5.0, "{:?}", r.context);
    }

    #[test]
    fn auth_forger_always_wins_at_zero() {
        let model = SyntheticUserModel::new(64, 100, 0.0, 2).unwrap();
        let r = estimate_rate_auth(&model, &params(64, 1), 0, 500).unwrap();
        let forge = r.metric("auth.forge").unwrap();
        assert_eq!(forge.estimate, 1.0);
        assert_eq!(forge.baseline, Some(r.metric("auth.random").unwrap().estimate));
    }

    #[test]
    fn minimum_trial_counts() {
        let model = SyntheticUserModel::new(32, 10, 0.0, 2).unwrap();
        assert!(estimate_fmr(&model, &params(32, 1), 1, 99).is_err());
        assert!(estimate_rate_link(&model, &params(32, 1), 999, true).is_err());
        assert!(estimate_rate_auth(&model, &params(32, 1), 1, 10).is_err());
    }
}
