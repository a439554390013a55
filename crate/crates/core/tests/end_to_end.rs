use cbv_core::bench::{
    estimate_rate_auth, estimate_rate_link, run_timing_bench, write_report, ReportFormat, SyntheticUserModel,
    TrialConfig, CSV_HEADER, TIMED_OPERATIONS,
};
use cbv_core::cryptanalysis::{recover_key, recover_key_modified, DEFAULT_BUDGET};
use cbv_core::fixtures;
use cbv_core::{key_bind, key_release, BitString, FakePolicy, Geometry, Key, PublicParams, Release, VaultRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_examples_bind_release_and_fall() {
    for ex in [fixtures::example_one(), fixtures::example_two()] {
        let vault = fixtures::bind_example(&ex).unwrap();
        assert_eq!(vault.biocodes, ex.biocodes);
        let released = key_release(&ex.x_enroll, &vault, ex.params.tau).unwrap();
        assert_eq!(released, Release::Released(ex.key.clone()));
        let report = recover_key(&vault.public_view(), DEFAULT_BUDGET).unwrap();
        assert_eq!(report.recovered_key, Some(ex.key.clone()));
    }
}

#[test]
fn vault_file_round_trip_then_attack() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vault.json");
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = PublicParams::new(Geometry::new(128, 3, 5).unwrap(), 1).unwrap();
    let x = BitString::random(128, &mut rng);
    let key = Key::random(64, &mut rng);
    for policy in [FakePolicy::SharedPermuted, FakePolicy::PerBitRandom] {
        let vault = key_bind(&x, &key, &params, policy, &mut rng).unwrap();
        std::fs::write(&path, vault.to_json().unwrap()).unwrap();
        let loaded = VaultRecord::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(loaded, vault);
        let report = if policy.is_shared() {
            recover_key(&loaded.public_view(), DEFAULT_BUDGET)
        } else {
            recover_key_modified(&loaded.public_view(), DEFAULT_BUDGET)
        }
        .unwrap();
        assert_eq!(report.recovered_key.as_ref(), Some(&key));
    }
}

#[test]
fn reports_written_to_disk() {
    let dir = tempfile::tempdir().unwrap();
    let params = PublicParams::new(Geometry::new(64, 3, 5).unwrap(), 1).unwrap();
    let model = SyntheticUserModel::new(64, 1 << 16, 0.0, 3).unwrap();
    let auth = estimate_rate_auth(&model, &params, 0, 100).unwrap();
    let csv_path = dir.path().join("auth.csv");
    write_report(&auth, ReportFormat::Csv, &csv_path).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 101);

    let link = estimate_rate_link(&model, &params, 1000, true).unwrap();
    let json_path = dir.path().join("link.json");
    write_report(&link, ReportFormat::Json, &json_path).unwrap();
    let back: cbv_core::bench::ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(back, link);

    let cfg = TrialConfig::new(params, 32, FakePolicy::SharedRandom, 2, 1);
    let timing = run_timing_bench(&cfg).unwrap();
    assert_eq!(timing.timings.len(), TIMED_OPERATIONS.len());
    assert!(write_report(&timing, ReportFormat::Json, &dir.path().join("missing/dir/t.json")).is_err());
}
