use leuvenshtein::kernel::{BandMode, KernelConfig};
use leuvenshtein::oracle::levenshtein;
use leuvenshtein::preprocess::pbs_per_entry;
use leuvenshtein::{
    build_eq_table, decrypt_score, distance_preprocessed, encrypt_string, encrypted_distance,
    AlphabetSpec, Backend, EqTable, Parallelism, SimBackend,
};
use proptest::prelude::*;

fn word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd']), 0..=max)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_matches_online_pipeline(a in word(12), b in word(12), mode_pick in 0usize..3) {
        let mode = [BandMode::Exact, BandMode::Skip, BandMode::Approx(a.len().abs_diff(b.len()) + 1)][mode_pick];
        let spec = AlphabetSpec::lower26();
        let cfg = KernelConfig::default();

        let be = SimBackend::default();
        let xa = encrypt_string(&a, &spec, &be).unwrap();
        let table = build_eq_table(&be, &xa, &spec, None, Parallelism::Parallel).unwrap();
        let build = be.stats().pbs_count;
        prop_assert_eq!(build, (pbs_per_entry(&spec) * 26 * a.len()) as u64);
        let pre = distance_preprocessed(&be, &table, &b, mode, &cfg).unwrap();
        let main_phase = be.stats().pbs_count - build;
        prop_assert_eq!(main_phase, pre.visited_cells);

        let be2 = SimBackend::default();
        let xb = encrypt_string(&b, &spec, &be2).unwrap();
        let xa2 = encrypt_string(&a, &spec, &be2).unwrap();
        let online = encrypted_distance(&be2, &xa2, &xb, mode, &cfg).unwrap();
        prop_assert_eq!(decrypt_score(&be, &pre.score), decrypt_score(&be2, &online.score));
        prop_assert_eq!(be2.stats().pbs_count, 3 * main_phase);
        if mode == BandMode::Exact {
            prop_assert_eq!(decrypt_score(&be, &pre.score), levenshtein(&a, &b) as i64);
        }
    }

    #[test]
    fn table_columns_hold_one_match(a in word(10)) {
        let be = SimBackend::default();
        let spec = AlphabetSpec::lower26();
        let xa = encrypt_string(&a, &spec, &be).unwrap();
        let table = build_eq_table(&be, &xa, &spec, None, Parallelism::Sequential).unwrap();
        for (i, c) in a.chars().enumerate() {
            let col: Vec<u8> = table.subset().iter().map(|&s| be.decrypt(table.lookup(s, i + 1).unwrap())).collect();
            prop_assert_eq!(col.iter().filter(|&&v| v == 9).count(), 1);
            prop_assert!(col.iter().all(|&v| v == 0 || v == 9));
            prop_assert_eq!(be.decrypt(table.lookup(c, i + 1).unwrap()), 9);
        }
        let back = EqTable::from_bytes(&table.to_bytes()).unwrap();
        prop_assert_eq!(back.subset(), table.subset());
    }
}

#[test]
fn table_reuse_pays_build_once() {
    let be = SimBackend::default();
    let spec = AlphabetSpec::dna4();
    let xa = encrypt_string("GATTACAGATTACA", &spec, &be).unwrap();
    let table = build_eq_table(&be, &xa, &spec, None, Parallelism::Sequential).unwrap();
    let build = be.stats().pbs_count;
    assert_eq!(build, 4 * 14);
    let queries = ["GATTACA", "TTTTTTTTTTTTTT", "ACGTACGTACGTAC", ""];
    let mut cells = 0;
    for q in queries {
        let r = distance_preprocessed(&be, &table, q, BandMode::Exact, &KernelConfig::default())
            .unwrap();
        assert_eq!(
            decrypt_score(&be, &r.score),
            levenshtein("GATTACAGATTACA", q) as i64
        );
        cells += r.visited_cells;
    }
    assert_eq!(be.stats().pbs_count, build + cells);
}
