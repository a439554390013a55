use cbv_core::bench::{emit_report, estimate_rate_rec, ExperimentReport, ReportFormat, TrialConfig};
use cbv_core::cryptanalysis::{
    count_exact_preimages, enumerate_preimages, forge_preimage_from, link_biocodes, recover_key, GroupPartition,
    LinkOutcome, NodeKind, SlotComponents, DEFAULT_BUDGET,
};
use cbv_core::vault::{key_bind_with, winnow, BindingMaterial};
use cbv_core::{
    authenticate, derive_layout, enroll_with, BitString, Decision, Error, FakePolicy, Geometry, Key, PublicParams,
    Release,
};
use proptest::prelude::*;

fn bits(len: usize) -> impl Strategy<Value = BitString> {
    proptest::collection::vec(any::<bool>(), len).prop_map(BitString::from_bools)
}

fn bit_pair() -> impl Strategy<Value = (BitString, BitString)> {
    (1usize..200).prop_flat_map(|n| (bits(n), bits(n)))
}

fn geometry() -> impl Strategy<Value = Geometry> {
    (2usize..9)
        .prop_flat_map(|m2| (1..m2, Just(m2), m2..120))
        .prop_map(|(m1, m2, n)| Geometry { n, m1, m2 })
}

/// Geometry plus template, mask and selector of matching length.
fn enrollment() -> impl Strategy<Value = (Geometry, BitString, BitString, BitString)> {
    geometry().prop_flat_map(|g| (Just(g), bits(g.n), bits(g.n), bits(g.n)))
}

fn shared_vault() -> impl Strategy<Value = (PublicParams, BitString, Key, BindingMaterial)> {
    (16usize..64, 1usize..24).prop_flat_map(|(n, l)| {
        let masks = proptest::collection::vec((bits(n), bits(n)), l);
        (Just(n), bits(n), bits(n), bits(l), masks).prop_filter_map(
            "fake equals template",
            |(n, x, fake, key, masks)| {
                if fake == x {
                    return None;
                }
                let params = PublicParams::new(Geometry::new(n, 3, 5).ok()?, 1).ok()?;
                let material = BindingMaterial {
                    fakes: vec![fake],
                    masks,
                };
                Some((params, x, Key::new(key).ok()?, material))
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hamming_is_popcount_of_xor((a, b) in bit_pair()) {
        prop_assert_eq!(a.hamming(&b).unwrap(), a.xor(&b).unwrap().count_ones());
    }

    #[test]
    fn parity_distributes_over_xor((a, b) in bit_pair()) {
        prop_assert_eq!(a.xor(&b).unwrap().parity().unwrap(), a.parity().unwrap() ^ b.parity().unwrap());
    }

    #[test]
    fn text_and_hex_round_trip((a, _) in bit_pair()) {
        prop_assert_eq!(a.to_string().parse::<BitString>().unwrap(), a.clone());
        prop_assert_eq!(BitString::from_hex(&a.to_hex(), a.len()).unwrap(), a);
    }

    #[test]
    fn slicing_then_concatenating_is_identity((g, x, _, p) in enrollment()) {
        let layout = derive_layout(&p, &g).unwrap();
        let words = x.slice_words(layout.lengths()).unwrap();
        prop_assert_eq!(BitString::concat(&words), x);
    }

    #[test]
    fn layout_invariants((g, _, _, p) in enrollment()) {
        let layout = derive_layout(&p, &g).unwrap();
        let lengths = layout.lengths();
        prop_assert_eq!(lengths.iter().sum::<usize>(), g.n);
        let (last, body) = lengths.split_last().unwrap();
        for (i, &w) in body.iter().enumerate() {
            prop_assert_eq!(w, if p.get(i) { g.m2 } else { g.m1 });
        }
        prop_assert!(*last >= 1 && *last <= g.m2);
        prop_assert_eq!(layout.p_prefix(), &p.truncated(layout.d2()));
    }

    #[test]
    fn leakage_identity((g, x, r, p) in enrollment()) {
        let bc = enroll_with(&x, &g, &r, &p).unwrap();
        prop_assert_eq!(bc.leaked_parities(), bc.layout().word_parities(&x).unwrap());
        prop_assert_eq!(authenticate(&x, &bc, 0).unwrap(), (Decision::Success, 0));
    }

    #[test]
    fn forged_templates_authenticate((g, x, r, p) in enrollment(), base_seed in any::<u64>()) {
        let bc = enroll_with(&x, &g, &r, &p).unwrap();
        let base = BitString::random(g.n, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(base_seed));
        let forged = forge_preimage_from(&bc, &base).unwrap();
        prop_assert!(forged.hamming(&base).unwrap() <= bc.d2());
        prop_assert_eq!(authenticate(&forged, &bc, 0).unwrap().0, Decision::Success);
    }

    #[test]
    fn same_template_never_links_as_different((g, x, r, p) in enrollment(), (r2, p2) in (bits(200), bits(200))) {
        let a = enroll_with(&x, &g, &r, &p).unwrap();
        let b = enroll_with(&x, &g, &r2.truncated(g.n), &p2.truncated(g.n)).unwrap();
        prop_assert_ne!(link_biocodes(&a, &b).unwrap().outcome, LinkOutcome::DifferentUsers);
    }

    #[test]
    fn candidates_come_in_complement_pairs((params, x, key, material) in shared_vault()) {
        let vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        let partition = GroupPartition::build(&vault.public_view());
        prop_assume!(partition.leaves().len() <= 10);
        let candidates = partition.candidates(key.len());
        let last = candidates.len() - 1;
        for (j, c) in candidates.iter().enumerate() {
            prop_assert_eq!(c, &candidates[last - j].not());
        }
    }

    #[test]
    fn partition_covers_every_slot_once((params, x, key, material) in shared_vault()) {
        let vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        let view = vault.public_view();
        let partition = GroupPartition::build(&view);
        let mut seen: Vec<usize> = partition.leaves().iter().flat_map(|l| l.members.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..key.len()).collect::<Vec<_>>());
        for leaf in partition.leaves() {
            let z: Vec<bool> = leaf.members.iter().map(|&i| view.biocodes[i].leaked_parity(leaf.word_depth - 1)).collect();
            match &leaf.kind {
                NodeKind::Split { classes } => {
                    prop_assert!(!classes[0].is_empty() && !classes[1].is_empty());
                    for (zi, class) in classes.iter().enumerate() {
                        for &i in class {
                            prop_assert_eq!(usize::from(view.biocodes[i].leaked_parity(leaf.word_depth - 1)), zi);
                        }
                    }
                }
                NodeKind::Unsplit => prop_assert!(z.iter().all(|&b| b == z[0])),
                NodeKind::Descend { .. } => prop_assert!(false, "leaf descends"),
            }
        }
    }

    #[test]
    fn true_labeling_is_a_slot_candidate((params, x, key, material) in shared_vault()) {
        let vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        let slots = SlotComponents::build(&vault.public_view()).unwrap();
        prop_assume!(slots.components.len() <= 12);
        let found = (0..1u64 << slots.components.len()).any(|i| &slots.candidate(i, key.len()) == key.bits());
        prop_assert!(found);
    }

    #[test]
    fn shared_fake_vaults_are_recovered((params, x, key, material) in shared_vault()) {
        let vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        let report = recover_key(&vault.public_view(), DEFAULT_BUDGET).unwrap();
        prop_assert_eq!(report.recovered_key, Some(key));
    }

    #[test]
    fn zero_noise_round_trip_conditional((params, x, key, material) in shared_vault()) {
        let vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        let winnowed = winnow(&x, &vault, params.tau).unwrap();
        for (k, w) in key.bits().iter().zip(winnowed.iter()) {
            prop_assert!(!k || w, "genuine slot dropped");
        }
        let release = cbv_core::key_release(&x, &vault, params.tau).unwrap();
        if &winnowed == key.bits() {
            prop_assert_eq!(release, Release::Released(key));
        } else {
            let rejected = matches!(release, Release::Rejected { .. });
            prop_assert!(rejected);
        }
    }

    #[test]
    fn tampered_digest_is_never_accepted((params, x, key, material) in shared_vault(), byte in 0usize..32, bit in 0u8..8) {
        let mut vault = key_bind_with(&x, &key, &params, FakePolicy::SharedRandom, &material).unwrap();
        vault.key_digest[byte] ^= 1 << bit;
        let rejected = matches!(cbv_core::key_release(&x, &vault, params.tau).unwrap(), Release::Rejected { .. });
        prop_assert!(rejected);
        let refused = matches!(
            recover_key(&vault.public_view(), 1 << 12),
            Err(Error::NoCandidateMatched { .. } | Error::BudgetExceeded { .. })
        );
        prop_assert!(refused);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_preimage_count_matches_enumeration((g, x, r, p) in (6usize..=11).prop_flat_map(|n| {
        (Just(Geometry::new(n, 2, 3).unwrap()), bits(n), bits(n), bits(n))
    })) {
        let bc = enroll_with(&x, &g, &r, &p).unwrap();
        let found = enumerate_preimages(&bc, 0).unwrap().len();
        prop_assert_eq!(count_exact_preimages(g.n, bc.d2()).unwrap(), found.into());
    }

    #[test]
    fn reports_are_deterministic_and_round_trip(seed in any::<u64>(), trials in 1usize..6) {
        let params = PublicParams::new(Geometry::new(32, 3, 5).unwrap(), 1).unwrap();
        let cfg = TrialConfig::new(params, 16, FakePolicy::SharedRandom, trials, seed);
        let a = estimate_rate_rec(&cfg).unwrap();
        let b = estimate_rate_rec(&cfg).unwrap();
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        emit_report(&a, ReportFormat::Json, &mut ja).unwrap();
        emit_report(&b, ReportFormat::Json, &mut jb).unwrap();
        prop_assert_eq!(&ja, &jb);
        let back: ExperimentReport = serde_json::from_slice(&ja).unwrap();
        prop_assert_eq!(&back, &a);
        let mut csv = Vec::new();
        emit_report(&a, ReportFormat::Csv, &mut csv).unwrap();
        prop_assert_eq!(String::from_utf8(csv).unwrap().lines().count(), trials + 1);
        let rec = a.metric("rec").unwrap();
        let recovered = a.rows.iter().filter(|r| r.outcome.starts_with("recovered")).count();
        prop_assert_eq!(rec.estimate, recovered as f64 / trials as f64);
    }
}
