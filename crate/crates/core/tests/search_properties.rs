use std::sync::OnceLock;

use proptest::prelude::*;
use vlq_adc::search::candidate_ids;
use vlq_adc::{
    gen_synthetic, search_one, select_topk, train_quantizers, Index32, QueryParams, TrainParams,
    VectorSet32,
};

fn fixture() -> &'static (Index32, VectorSet32) {
    static CELL: OnceLock<(Index32, VectorSet32)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut base: VectorSet32 = gen_synthetic(4_040, 8, 12, 0.1, 31).unwrap();
        let queries = base.split_off(4_000);
        let params = TrainParams { k: 32, n: 5, m: 4, iters: 8, seed: 1, clamp_lambda: true };
        let q = train_quantizers(&base, &params).unwrap();
        (Index32::build(&base, &q, 999).unwrap(), queries)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn results_sorted_unique_and_bounded(q in 0usize..40, w1 in 1usize..=32, alpha in 0.01f64..=1.0, k in 1usize..200) {
        let (index, queries) = fixture();
        let params = QueryParams { w1, alpha, k, max_codes: None };
        let r = search_one(index, queries.row(q), &params).unwrap();
        prop_assert_eq!(r.ids.len(), k.min(r.scanned));
        prop_assert!(r.dists.windows(2).all(|w| w[0] <= w[1]));
        let mut ids = r.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), r.ids.len());
        let cands = candidate_ids(index, queries.row(q), &params).unwrap();
        prop_assert_eq!(cands.len(), r.scanned);
        prop_assert!(r.ids.iter().all(|id| cands.contains(id)));
    }

    #[test]
    fn max_codes_caps_scan(q in 0usize..40, cap in 1usize..500) {
        let (index, queries) = fixture();
        let params = QueryParams { w1: 16, alpha: 0.5, k: 10, max_codes: Some(cap) };
        let r = search_one(index, queries.row(q), &params).unwrap();
        prop_assert!(r.scanned <= cap);
    }

    #[test]
    fn select_topk_matches_full_sort(v in prop::collection::vec((0u32..50, -5i32..5), 0..80), k in 0usize..90) {
        let cands: Vec<(u32, f32)> = v.iter().enumerate().map(|(i, &(_, d))| (i as u32, d as f32)).collect();
        let mut sorted = cands.clone();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        sorted.truncate(k);
        let r = select_topk(cands, k);
        prop_assert_eq!(r.ids, sorted.iter().map(|c| c.0).collect::<Vec<_>>());
        prop_assert_eq!(r.dists, sorted.iter().map(|c| c.1).collect::<Vec<_>>());
    }
}
