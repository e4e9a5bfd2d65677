//! Dijkstra single-source shortest paths over the three heaps.
//!
//! The graph is read through an [`ExternalGraph`], so its transfers are
//! reported apart from the priority-queue transfers.

use std::cmp::Reverse;
use std::time::Instant;

use bitvec::vec::BitVec;
use thiserror::Error;

use crate::binary::{BinaryHeap, Slot};
use crate::bucket::BucketHeap;
use crate::em::{EmError, IoStats, DEFAULT_BLOCK_BYTES, DEFAULT_CACHE_BYTES};
use crate::entry::Entry;
use crate::funnel::FunnelHeap;
use crate::graph::{ExternalGraph, Graph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SsspError {
    #[error("source {vertex} is not a vertex of a graph with {vertex_count} vertices")]
    InvalidSource { vertex: u64, vertex_count: u64 },
    #[error("the bucket-heap variant needs an undirected graph")]
    DirectedInput,
    #[error("vertex {vertex} settled twice (distances {first} and {second})")]
    DoubleSettle { vertex: u64, first: u64, second: u64 },
    #[error("run exceeded its time limit")]
    Timeout,
    #[error(transparent)]
    Em(#[from] EmError),
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Cache given to each priority-queue vector.
    pub cache_bytes: usize,
    pub block_bytes: usize,
    pub deadline: Option<Instant>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { cache_bytes: DEFAULT_CACHE_BYTES, block_bytes: DEFAULT_BLOCK_BYTES, deadline: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistanceResult {
    /// `None` marks an unreachable vertex.
    pub dist: Vec<Option<u64>>,
    pub settled_order: Vec<u64>,
    pub pq_stats: IoStats,
    pub graph_stats: IoStats,
    pub peak_heap_entries: u64,
    /// Heap inserts or updates issued, including the source.
    pub inserts: u64,
    /// Guard entries popped from the second heap (bucket variant).
    pub guard_deletions: u64,
    /// Relaxations aimed at an already settled vertex (bucket variant).
    pub spurious_updates: u64,
}

fn check_source(vertex_count: u64, source: u64) -> Result<(), SsspError> {
    if source >= vertex_count {
        return Err(SsspError::InvalidSource { vertex: source, vertex_count });
    }
    Ok(())
}

struct Clock {
    deadline: Option<Instant>,
    ticks: u64,
}

impl Clock {
    fn tick(&mut self) -> Result<(), SsspError> {
        self.ticks += 1;
        if self.ticks % 1024 == 0 && self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(SsspError::Timeout);
        }
        Ok(())
    }
}

/// In-memory Dijkstra with lazy deletion; the oracle for the other variants.
pub fn sssp_reference(g: &Graph, source: u64) -> Result<DistanceResult, SsspError> {
    check_source(g.vertex_count(), source)?;
    let mut dist = vec![None; g.vertex_count() as usize];
    let mut order = Vec::new();
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    let mut best = vec![u64::MAX; g.vertex_count() as usize];
    best[source as usize] = 0;
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u as usize].is_some() {
            continue;
        }
        dist[u as usize] = Some(d);
        order.push(u);
        for a in g.neighbors(u) {
            let nd = d + a.weight;
            if nd < best[a.target as usize] {
                best[a.target as usize] = nd;
                heap.push(Reverse((nd, a.target)));
            }
        }
    }
    Ok(DistanceResult { dist, settled_order: order, ..Default::default() })
}

fn settle(dist: &mut [Option<u64>], order: &mut Vec<u64>, v: u64, d: u64) -> Result<(), SsspError> {
    if let Some(first) = dist[v as usize] {
        return Err(SsspError::DoubleSettle { vertex: v, first, second: d });
    }
    dist[v as usize] = Some(d);
    order.push(v);
    Ok(())
}

/// Dijkstra with decrease-key on the binary heap.
pub fn sssp_binary(g: &mut ExternalGraph, source: u64, opts: &RunOptions) -> Result<DistanceResult, SsspError> {
    check_source(g.vertex_count(), source)?;
    let graph_start = g.stats();
    let mut heap = BinaryHeap::new(opts.cache_bytes, opts.block_bytes)?;
    let mut clock = Clock { deadline: opts.deadline, ticks: 0 };
    let mut dist = vec![None; g.vertex_count() as usize];
    let mut order = Vec::new();
    let mut inserts = 1;
    let mut peak = 1;
    heap.insert(Entry::new(source, 0)).expect("fresh heap");
    while let Some(Entry { id: u, key: d }) = heap.delete_min() {
        clock.tick()?;
        settle(&mut dist, &mut order, u, d)?;
        for i in g.arc_range(u) {
            let a = g.arc(i);
            let nd = d + a.weight;
            match heap.slot(a.target) {
                Slot::Removed => {}
                Slot::Never => {
                    heap.insert(Entry::new(a.target, nd)).expect("id is new");
                    inserts += 1;
                    peak = peak.max(heap.len());
                }
                Slot::Live(_) => {
                    if heap.key_of(a.target).is_some_and(|k| nd < k) {
                        heap.decrease_key(a.target, nd).expect("id is live and key is smaller");
                    }
                }
            }
        }
    }
    Ok(DistanceResult {
        dist,
        settled_order: order,
        pq_stats: heap.heap_stats() + heap.position_stats(),
        graph_stats: g.stats().since(&graph_start),
        peak_heap_entries: peak,
        inserts,
        ..Default::default()
    })
}

/// Dijkstra with insert in place of decrease-key; stale entries are
/// discarded through an in-memory visited bit per vertex.
pub fn sssp_funnel(g: &mut ExternalGraph, source: u64, opts: &RunOptions) -> Result<DistanceResult, SsspError> {
    check_source(g.vertex_count(), source)?;
    let graph_start = g.stats();
    let mut heap = FunnelHeap::new(opts.cache_bytes, opts.block_bytes)?;
    let mut clock = Clock { deadline: opts.deadline, ticks: 0 };
    let mut visited: BitVec = BitVec::repeat(false, g.vertex_count() as usize);
    let mut dist = vec![None; g.vertex_count() as usize];
    let mut order = Vec::new();
    let mut inserts = 1;
    heap.insert(Entry::new(source, 0));
    while let Some(Entry { id: u, key: d }) = heap.delete_min() {
        clock.tick()?;
        if visited[u as usize] {
            continue;
        }
        visited.set(u as usize, true);
        settle(&mut dist, &mut order, u, d)?;
        for i in g.arc_range(u) {
            let a = g.arc(i);
            if !visited[a.target as usize] {
                heap.insert(Entry::new(a.target, d + a.weight));
                inserts += 1;
            }
        }
    }
    Ok(DistanceResult {
        dist,
        settled_order: order,
        pq_stats: heap.stats(),
        graph_stats: g.stats().since(&graph_start),
        peak_heap_entries: heap.peak_len(),
        inserts,
        ..Default::default()
    })
}

/// Dijkstra on bucket heaps without a visited set.
///
/// Relaxing an arc out of a settled vertex `u` may later re-insert `u` into
/// the main heap. Each such arc also puts a guard for `u` into a second heap
/// whose key is no larger than the spurious entry's, so the guard surfaces
/// first and deletes `u`. A guard whose key ties the current minimum is kept
/// on a tie list and re-applied after every extraction at that key, since
/// the spurious entry it protects against may be created by one of them.
///
/// Guard ids are `u * stride + j` for the `j`-th arc of `u`, which keeps one
/// guard per arc alive under update semantics and decodes to `u` without
/// touching the graph.
pub fn sssp_bucket(g: &mut ExternalGraph, source: u64, opts: &RunOptions) -> Result<DistanceResult, SsspError> {
    check_source(g.vertex_count(), source)?;
    let graph_start = g.stats();
    let mut main = BucketHeap::new(opts.cache_bytes, opts.block_bytes)?;
    let mut guards = BucketHeap::new(opts.cache_bytes, opts.block_bytes)?;
    let mut clock = Clock { deadline: opts.deadline, ticks: 0 };
    let stride = g.max_degree().max(1);
    let mut dist: Vec<Option<u64>> = vec![None; g.vertex_count() as usize];
    let mut order = Vec::new();
    let (mut inserts, mut guard_deletions, mut spurious) = (1, 0, 0);
    let mut ties: Vec<u64> = Vec::new();
    let mut tie_key = None;
    main.update(source, 0);
    loop {
        clock.tick()?;
        // Drop guards at or below the current minimum until none surface.
        let Some(min) = (loop {
            let Some(m) = main.find_min() else { break None };
            let mut popped = false;
            while let Some(gd) = guards.find_min().filter(|gd| gd.key <= m.key) {
                guards.delete_min();
                let u = gd.id / stride;
                main.delete(u);
                guard_deletions += 1;
                popped = true;
                if tie_key != Some(m.key) {
                    ties.clear();
                    tie_key = Some(m.key);
                }
                // Guards of one vertex at one key pop consecutively.
                if gd.key == m.key && ties.last() != Some(&u) {
                    ties.push(u);
                }
            }
            if !popped {
                break Some(m);
            }
        }) else {
            break;
        };
        let e = main.delete_min().expect("minimum was just observed");
        debug_assert_eq!(e, min);
        if tie_key != Some(e.key) {
            ties.clear();
            tie_key = Some(e.key);
        }
        let (u, d) = (e.id, e.key);
        settle(&mut dist, &mut order, u, d)?;
        let range = g.arc_range(u);
        let start = range.start;
        for i in range {
            let a = g.arc(i);
            if a.target == u {
                continue;
            }
            if dist[a.target as usize].is_some() {
                spurious += 1;
            }
            main.update(a.target, d + a.weight);
            guards.update(u * stride + (i - start), d + a.weight);
            inserts += 1;
        }
        for &v in &ties {
            main.delete(v);
        }
    }
    Ok(DistanceResult {
        dist,
        settled_order: order,
        pq_stats: main.stats() + guards.stats(),
        graph_stats: g.stats().since(&graph_start),
        peak_heap_entries: main.peak_stored(),
        inserts,
        guard_deletions,
        spurious_updates: spurious,
    })
}

/// [`sssp_bucket`] after checking that every arc has its reverse.
pub fn sssp_bucket_checked(g: &Graph, eg: &mut ExternalGraph, source: u64, opts: &RunOptions) -> Result<DistanceResult, SsspError> {
    if !g.is_symmetric() {
        return Err(SsspError::DirectedInput);
    }
    sssp_bucket(eg, source, opts)
}
