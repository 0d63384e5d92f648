use vlq_adc::{
    brute_force_gt, deserialize_index, gen_synthetic, recall_at, search_batch, serialize_index,
    train_quantizers, Index32, Index64, QueryParams, TrainParams, VectorSet64,
};

fn params() -> TrainParams {
    TrainParams {
        k: 32,
        n: 6,
        m: 4,
        iters: 10,
        seed: 8,
        clamp_lambda: true,
    }
}

#[test]
fn f64_pipeline_end_to_end() {
    let mut base: VectorSet64 = gen_synthetic(5_050, 8, 10, 0.1, 4).unwrap();
    let queries = base.split_off(5_000);
    let q = train_quantizers(&base, &params()).unwrap();
    let index = Index64::build(&base, &q, 1_000).unwrap();
    let gt = brute_force_gt(&base, &queries, 100).unwrap();
    let qp = QueryParams { w1: 8, alpha: 0.5, k: 100, max_codes: None };
    let res = search_batch(&index, &queries, &qp).unwrap();
    let (r1, r10, r100) = (
        recall_at(&res, &gt, 1).unwrap(),
        recall_at(&res, &gt, 10).unwrap(),
        recall_at(&res, &gt, 100).unwrap(),
    );
    assert!(r1 <= r10 && r10 <= r100);
    assert!(r100 > 0.5, "R@100 = {r100}");
}

#[test]
fn f32_and_f64_agree_on_partition_sizes() {
    let base64: VectorSet64 = gen_synthetic(3_000, 8, 6, 0.1, 12).unwrap();
    let base32 = base64.cast::<f32>();
    let i64 = Index64::build(&base64, &train_quantizers(&base64, &params()).unwrap(), 500).unwrap();
    let i32 = Index32::build(&base32, &train_quantizers(&base32, &params()).unwrap(), 500).unwrap();
    assert_eq!(i64.base_count(), i32.base_count());
    assert_eq!(i64.num_cells(), i32.num_cells());
    let total = |l: &[vlq_adc::PostingList]| l.iter().map(|p| p.len()).sum::<usize>();
    assert_eq!(total(i64.lists()), total(i32.lists()));
}

#[test]
fn f64_index_roundtrip_is_structurally_identical() {
    let base: VectorSet64 = gen_synthetic(2_000, 8, 5, 0.1, 2).unwrap();
    let index = Index64::build(&base, &train_quantizers(&base, &params()).unwrap(), 400).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f64.vlq");
    serialize_index(&index, &path).unwrap();
    let loaded: Index64 = deserialize_index(&path).unwrap();
    assert_eq!(loaded.lists(), index.lists());
    assert_eq!(loaded.graph().ids(), index.graph().ids());
    // Floating-point payloads are stored as f32.
    for (a, b) in loaded.codebook().centroids().iter().zip(index.codebook().centroids()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
    }
}
