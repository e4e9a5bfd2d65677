mod common;

use common::{check_binary, check_bucket, check_funnel, random_trace, MinMapOracle, Op};
use copq::binary::BinaryHeap;
use copq::bucket::{bucket_capacity, BucketHeap};
use copq::funnel::FunnelHeap;
use copq::Entry;
use proptest::prelude::*;

const SMALL_CACHE: usize = 64 * 1024;

#[test]
fn binary_random_traces() {
    for seed in 0..4 {
        check_binary(&random_trace(10_000, seed, false), SMALL_CACHE).unwrap();
        // Reused ids exercise the duplicate-id rejection.
        check_binary(&random_trace(10_000, 100 + seed, true), SMALL_CACHE).unwrap();
    }
}

#[test]
fn funnel_random_traces() {
    for seed in 0..4 {
        check_funnel(&random_trace(20_000, seed, false), SMALL_CACHE).unwrap();
        check_funnel(&random_trace(20_000, 200 + seed, true), SMALL_CACHE).unwrap();
    }
}

#[test]
fn bucket_random_traces() {
    for seed in 0..4 {
        check_bucket(&random_trace(20_000, 300 + seed, true), SMALL_CACHE).unwrap();
        check_bucket(&random_trace(20_000, seed, false), SMALL_CACHE).unwrap();
    }
}

#[test]
fn binary_decrease_key_matches_map_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut h = BinaryHeap::new(SMALL_CACHE, 4096).unwrap();
    let mut oracle = MinMapOracle::default();
    let mut live: Vec<u64> = Vec::new();
    let mut next = 0;
    for _ in 0..20_000 {
        match rng.gen_range(0..3) {
            0 => {
                let key = rng.gen_range(0..1000);
                h.insert(Entry::new(next, key)).unwrap();
                oracle.update(next, key);
                live.push(next);
                next += 1;
            }
            1 if !live.is_empty() => {
                let id = live[rng.gen_range(0..live.len())];
                let cur = h.key_of(id).unwrap();
                let new = rng.gen_range(0..=cur);
                h.decrease_key(id, new).unwrap();
                oracle.update(id, new);
            }
            _ => {
                let got = h.delete_min();
                assert_eq!(got, oracle.delete_min());
                if let Some(e) = got {
                    live.retain(|&x| x != e.id);
                }
            }
        }
    }
    h.validate().unwrap();
}

#[test]
fn binary_ten_thousand_inserts_pop_sorted() {
    let ops: Vec<Op> = random_trace(10_000, 5, false)
        .into_iter()
        .filter(|op| matches!(op, Op::Insert(_)))
        .collect();
    check_binary(&ops, SMALL_CACHE).unwrap();
}

#[test]
fn funnel_validates_through_growth() {
    let mut h = FunnelHeap::new(SMALL_CACHE, 4096).unwrap();
    for i in 0..30_000u64 {
        h.insert(Entry::new(i, (i * 7919) % 10_007));
        if i % 997 == 0 {
            h.validate().unwrap();
        }
    }
    assert!(h.link_count() >= 4);
    let mut prev = None;
    for _ in 0..15_000 {
        let e = h.delete_min().unwrap();
        assert!(prev <= Some(e));
        prev = Some(e);
    }
    h.validate().unwrap();
}

#[test]
fn bucket_levels_grow_logarithmically() {
    let n = 1u64 << 16;
    let mut h = BucketHeap::new(16 << 20, 4096).unwrap();
    for i in 0..n {
        h.update(i, (i * 2_654_435_761) % (1 << 32));
    }
    h.resolve_all();
    h.validate(true).unwrap();
    // Capacities grow by 4 per level, so 2^16 elements need at most 8 levels.
    let levels = h.level_count();
    assert!(levels <= 8, "{levels} levels for {n} elements");
    let total: u64 = (0..levels).map(bucket_capacity).sum();
    assert!(total >= n);
}

#[test]
fn bucket_forced_cascade_reaches_level_two() {
    let mut h = BucketHeap::new(SMALL_CACHE, 4096).unwrap();
    let count = bucket_capacity(0) + bucket_capacity(1) + 1;
    for id in 0..count {
        h.update(id, count - id);
    }
    h.resolve_all();
    assert!(h.level_count() >= 3);
    h.validate(true).unwrap();
    for k in 1..=count {
        assert_eq!(h.delete_min().map(|e| e.key), Some(k));
    }
    assert_eq!(h.delete_min(), None);
}

fn op_strategy(reuse: bool) -> impl Strategy<Value = Op> {
    let ids = if reuse { 0..16u64 } else { 0..1u64 << 20 };
    prop_oneof![
        4 => (ids.clone(), 0..32u64).prop_map(|(id, key)| Op::Insert(Entry::new(id, key))),
        3 => Just(Op::DeleteMin),
        1 => ids.prop_map(Op::Delete),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_matches_oracle(ops in prop::collection::vec(op_strategy(true), 0..400)) {
        check_binary(&ops, 8192).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn funnel_matches_oracle(ops in prop::collection::vec(op_strategy(true), 0..600)) {
        check_funnel(&ops, 8192).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn bucket_matches_oracle(ops in prop::collection::vec(op_strategy(true), 0..600)) {
        check_bucket(&ops, 8192).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn bucket_invariants_after_every_op(ops in prop::collection::vec(op_strategy(true), 0..200)) {
        let mut h = BucketHeap::new(8192, 4096).unwrap();
        for op in ops {
            match op {
                Op::Insert(e) => h.update(e.id, e.key),
                Op::Delete(id) => h.delete(id),
                Op::DeleteMin => { h.delete_min(); }
            }
            h.validate(false).map_err(TestCaseError::fail)?;
        }
        h.resolve_all();
        h.validate(true).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn binary_heap_order_after_every_op(ops in prop::collection::vec(op_strategy(false), 0..200)) {
        let mut h = BinaryHeap::new(8192, 4096).unwrap();
        for op in ops {
            match op {
                Op::Insert(e) => { let _ = h.insert(e); }
                Op::DeleteMin => { h.delete_min(); }
                Op::Delete(_) => {}
            }
            h.validate().map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn funnel_conserves_multiset(keys in prop::collection::vec(0..1000u64, 0..2000)) {
        let mut h = FunnelHeap::new(8192, 4096).unwrap();
        for (i, &k) in keys.iter().enumerate() {
            h.insert(Entry::new(i as u64, k));
        }
        h.validate().map_err(TestCaseError::fail)?;
        let mut sorted: Vec<Entry> = keys.iter().enumerate().map(|(i, &k)| Entry::new(i as u64, k)).collect();
        sorted.sort();
        let popped: Vec<Entry> = std::iter::from_fn(|| h.delete_min()).collect();
        prop_assert_eq!(popped, sorted);
    }
}
