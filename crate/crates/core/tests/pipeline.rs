use std::sync::Arc;
use std::thread;

use kvshare_core::format::{decode_snapshot, encode_snapshot};
use kvshare_core::{
    attach_agent, build_pool_with, distortion_report, read_dump, read_snapshot,
    synth_gaussian_dump, write_dump, write_snapshot, ModelGeometry, PoolConfig,
};
use proptest::prelude::*;
use tempfile::TempDir;

fn geometry() -> ModelGeometry {
    ModelGeometry::new(3, 1, 4, 40, 64, 16).unwrap()
}

#[test]
fn dump_pool_snapshot_roundtrip_through_files() {
    let dir = TempDir::new().unwrap();
    let dump = synth_gaussian_dump(&geometry(), 11).unwrap();
    let dump_path = dir.path().join("d.pkvd");
    write_dump(&dump, &dump_path).unwrap();
    let dump = read_dump(&dump_path).unwrap();

    for (packed, sign_seed) in [(false, None), (true, None), (true, Some(42))] {
        let mut config = PoolConfig::default();
        config.value.packed = packed;
        config.value.sign_seed = sign_seed;
        let pool = build_pool_with(&dump, config).unwrap();
        let path = dir.path().join("p.pkvp");
        write_snapshot(&pool, &path).unwrap();
        let back = Arc::new(read_snapshot(&path).unwrap());
        assert_eq!(*back, *pool);
        assert_eq!(back.config(), config);

        let a = attach_agent(&pool, 32).unwrap().inject_all().unwrap();
        let b = attach_agent(&back, 32).unwrap().inject_all().unwrap();
        assert_eq!(a.checksums(), b.checksums());
    }
}

#[test]
fn fifteen_concurrent_agents_read_identical_sequences() {
    let dump = synth_gaussian_dump(&geometry(), 12).unwrap();
    let pool = build_pool_with(&dump, PoolConfig::default()).unwrap();
    let reference = attach_agent(&pool, 16).unwrap().inject_all().unwrap();
    let views: Vec<_> = (0..15).map(|_| attach_agent(&pool, 16).unwrap()).collect();
    let transcripts: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = views
            .iter()
            .map(|v| s.spawn(move || v.inject_all()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap().unwrap())
            .collect()
    });
    let mut ids: Vec<_> = transcripts.iter().map(|t| t.agent).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 15);
    for t in &transcripts {
        assert_eq!(t.checksums(), reference.checksums());
        let layers: Vec<_> = t.entries.iter().map(|e| e.layer).collect();
        assert_eq!(layers, vec![0, 1, 2]);
    }
    assert_eq!(pool.attached_agents(), 16);
}

#[test]
fn lazy_and_eager_decoding_agree() {
    let dump = synth_gaussian_dump(&geometry(), 13).unwrap();
    let pool = build_pool_with(&dump, PoolConfig::default()).unwrap();
    let view = attach_agent(&pool, 32).unwrap();
    let eager = view.inject_all().unwrap();
    for e in &eager.entries {
        let (k, v) = view.get_kv_for_layer(e.layer).unwrap();
        let single = kvshare_core::pool::checksum_pair(
            k.as_slice(),
            v.as_slice(),
            kvshare_core::DecodePrecision::F32,
        );
        assert_eq!(single, (e.k_checksum, e.v_checksum));
    }
}

#[test]
fn report_on_reloaded_pool_matches_original() {
    let dump = synth_gaussian_dump(&geometry(), 14).unwrap();
    let pool = build_pool_with(&dump, PoolConfig::default()).unwrap();
    let mut bytes = Vec::new();
    encode_snapshot(&pool, &mut bytes).unwrap();
    let back = decode_snapshot(&bytes).unwrap();
    assert_eq!(
        distortion_report(&dump, &pool).unwrap(),
        distortion_report(&dump, &back).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_valid_geometry_roundtrips(
        layers in 1usize..4,
        heads in 1usize..4,
        seq in 1usize..20,
        log_d in 1u32..8,
        seed in any::<u64>(),
        packed in any::<bool>(),
    ) {
        let g = ModelGeometry::new(layers, 1, heads, seq, 1 << log_d, 16).unwrap();
        let dump = synth_gaussian_dump(&g, seed).unwrap();
        let mut config = PoolConfig::default();
        config.value.packed = packed;
        let pool = build_pool_with(&dump, config).unwrap();
        let mut bytes = Vec::new();
        encode_snapshot(&pool, &mut bytes).unwrap();
        let back = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(&back, &*pool);
        let report = distortion_report(&dump, &back).unwrap();
        for l in &report.layers {
            prop_assert!(l.k_within_bound(), "{:?}", l);
        }
    }
}
