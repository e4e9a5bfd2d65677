mod common;

use common::{bellman_ford, structured_suite};
use copq::graph::{gen_gnp, load_csr, GnpSpec, Graph};
use copq::sssp::{sssp_binary, sssp_bucket, sssp_funnel, sssp_reference, DistanceResult, RunOptions};
use proptest::prelude::*;

const OPTS: RunOptions = RunOptions { cache_bytes: 64 * 1024, block_bytes: 4096, deadline: None };

fn all_variants(g: &Graph, s: u64) -> [DistanceResult; 3] {
    let mut eg = load_csr(g, 64 * 1024, 4096).unwrap();
    [sssp_binary(&mut eg, s, &OPTS).unwrap(), sssp_funnel(&mut eg, s, &OPTS).unwrap(), sssp_bucket(&mut eg, s, &OPTS).unwrap()]
}

fn check_triangle_inequality(g: &Graph, r: &DistanceResult) {
    for (u, v, w) in g.arc_list() {
        if let Some(du) = r.dist[u as usize] {
            assert!(r.dist[v as usize].is_some_and(|dv| dv <= du + w));
        }
    }
}

#[test]
fn reference_agrees_with_bellman_ford() {
    for seed in 0..100 {
        let g = gen_gnp(&GnpSpec { n: 200, p: 0.03, weight_max: 100, seed });
        let s = seed % 200;
        assert_eq!(sssp_reference(&g, s).unwrap().dist, bellman_ford(&g, s), "seed {seed}");
    }
}

#[test]
fn structured_graphs() {
    for (name, g) in structured_suite() {
        for s in [0, g.vertex_count() / 2, g.vertex_count() - 1] {
            let reference = sssp_reference(&g, s).unwrap();
            assert_eq!(reference.dist, bellman_ford(&g, s));
            for r in all_variants(&g, s) {
                assert_eq!(r.dist, reference.dist, "{name} from {s}");
                check_triangle_inequality(&g, &r);
                assert_eq!(r.dist[s as usize], Some(0));
            }
        }
    }
}

#[test]
fn random_sparse_graphs() {
    for log_n in 6..=10 {
        for seed in 0..5 {
            let g = gen_gnp(&GnpSpec::sparse(1 << log_n, seed));
            let s = seed * 7 % g.vertex_count();
            let reference = sssp_reference(&g, s).unwrap();
            let [binary, funnel, bucket] = all_variants(&g, s);
            assert_eq!(binary.dist, reference.dist);
            assert_eq!(funnel.dist, reference.dist);
            assert_eq!(bucket.dist, reference.dist);
            assert!(funnel.inserts <= g.arc_count() + 1);
            assert!(binary.peak_heap_entries <= g.vertex_count());
            let mut settled = bucket.settled_order.clone();
            settled.sort_unstable();
            settled.dedup();
            assert_eq!(settled.len(), bucket.settled_order.len());
        }
    }
}

#[test]
fn graph_and_heap_counters_are_separate() {
    let g = gen_gnp(&GnpSpec::sparse(2048, 3));
    for r in all_variants(&g, 0) {
        assert!(r.graph_stats.block_reads > 0);
        assert!(r.pq_stats.block_reads > 0);
        assert_eq!(r.graph_stats.block_writes, 0);
    }
}

#[test]
fn funnel_heap_holds_more_than_vertices() {
    let g = gen_gnp(&GnpSpec::sparse(1 << 12, 1));
    let [binary, funnel, _] = all_variants(&g, 0);
    assert!(funnel.peak_heap_entries > g.vertex_count());
    assert!(funnel.peak_heap_entries <= g.arc_count() + 1);
    assert!(binary.peak_heap_entries <= g.vertex_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variants_match_reference(
        n in 2u64..60,
        edges in prop::collection::vec((0u64..60, 0u64..60, 1u64..8), 0..150),
        s in 0u64..60,
    ) {
        let edges: Vec<_> = edges.into_iter().map(|(u, v, w)| (u % n, v % n, w)).filter(|(u, v, _)| u != v).collect();
        let g = Graph::from_edges(n, &edges);
        let s = s % n;
        let reference = sssp_reference(&g, s).unwrap();
        for r in all_variants(&g, s) {
            prop_assert_eq!(&r.dist, &reference.dist);
        }
    }
}
