//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use copq::graph::Graph;
use copq::Entry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sorted multiset: the abstract model of the binary and funnel heaps.
#[derive(Default)]
pub struct MultisetOracle {
    heap: BinaryHeap<Reverse<Entry>>,
}

impl MultisetOracle {
    pub fn insert(&mut self, e: Entry) {
        self.heap.push(Reverse(e));
    }
    pub fn delete_min(&mut self) -> Option<Entry> {
        self.heap.pop().map(|r| r.0)
    }
    pub fn len(&self) -> usize {
        self.heap.len()
    }
}

/// Map with min-semantics update: the abstract model of the bucket heap.
#[derive(Default)]
pub struct MinMapOracle {
    keys: HashMap<u64, u64>,
    order: BTreeSet<Entry>,
}

impl MinMapOracle {
    pub fn update(&mut self, id: u64, key: u64) {
        match self.keys.get(&id) {
            Some(&k) if k <= key => {}
            Some(&k) => {
                self.order.remove(&Entry::new(id, k));
                self.order.insert(Entry::new(id, key));
                self.keys.insert(id, key);
            }
            None => {
                self.order.insert(Entry::new(id, key));
                self.keys.insert(id, key);
            }
        }
    }
    pub fn delete(&mut self, id: u64) {
        if let Some(k) = self.keys.remove(&id) {
            self.order.remove(&Entry::new(id, k));
        }
    }
    pub fn delete_min(&mut self) -> Option<Entry> {
        let e = self.order.pop_first()?;
        self.keys.remove(&e.id);
        Some(e)
    }
    pub fn len(&self) -> usize {
        self.keys.len()
    }
}

/// List-based LRU over block ids; returns the number of faults.
pub fn lru_faults(trace: &[u64], frames: usize) -> u64 {
    let mut lru: VecDeque<u64> = VecDeque::new();
    let mut faults = 0;
    for &b in trace {
        if let Some(pos) = lru.iter().position(|&x| x == b) {
            lru.remove(pos);
        } else {
            faults += 1;
            if lru.len() == frames {
                lru.pop_back();
            }
        }
        lru.push_front(b);
    }
    faults
}

/// Bellman–Ford over the arc list.
pub fn bellman_ford(g: &Graph, source: u64) -> Vec<Option<u64>> {
    let mut dist = vec![None; g.vertex_count() as usize];
    dist[source as usize] = Some(0u64);
    let arcs = g.arc_list();
    for _ in 0..g.vertex_count() {
        let mut changed = false;
        for &(u, v, w) in &arcs {
            if let Some(du) = dist[u as usize] {
                if dist[v as usize].is_none_or(|dv| du + w < dv) {
                    dist[v as usize] = Some(du + w);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Operation of a randomized heap trace.
#[derive(Debug, Clone, Copy)]
pub enum Op {
    Insert(Entry),
    DeleteMin,
    Delete(u64),
}

/// Insert/delete-min trace with occasional repeated keys. Ids are fresh per
/// insert unless `reuse_ids`, in which case they come from a small pool
/// and deletes are mixed in.
pub fn random_trace(len: usize, seed: u64, reuse_ids: bool) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key_range = if rng.gen_bool(0.5) { 64 } else { 1 << 30 };
    let id_pool = (len as u64 / 4).max(8);
    let insert_bias = rng.gen_range(0.45..0.7);
    let mut next_id = 0;
    (0..len)
        .map(|_| {
            let r: f64 = rng.gen();
            if r < insert_bias {
                let id = if reuse_ids {
                    rng.gen_range(0..id_pool)
                } else {
                    next_id += 1;
                    next_id - 1
                };
                Op::Insert(Entry::new(id, rng.gen_range(0..key_range)))
            } else if reuse_ids && r < insert_bias + 0.1 {
                Op::Delete(rng.gen_range(0..id_pool))
            } else {
                Op::DeleteMin
            }
        })
        .collect()
}

pub fn path_graph(n: u64) -> Graph {
    let edges: Vec<_> = (1..n).map(|v| (v - 1, v, v % 7 + 1)).collect();
    Graph::from_edges(n, &edges)
}

pub fn cycle_graph(n: u64) -> Graph {
    let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n, 3 + v % 5)).collect();
    Graph::from_edges(n, &edges)
}

pub fn star_graph(n: u64) -> Graph {
    let edges: Vec<_> = (1..n).map(|v| (0, v, 1 + v % 11)).collect();
    Graph::from_edges(n, &edges)
}

pub fn complete_graph(n: u64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v, rng.gen_range(1..=20)));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Two cliques with no edge between them.
pub fn disconnected_graph(n: u64) -> Graph {
    let half = n / 2;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if (u < half) == (v < half) && (v - u) % 3 != 0 {
                edges.push((u, v, 1 + (u * v) % 9));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// The structured suite: name and graph.
pub fn structured_suite() -> Vec<(&'static str, Graph)> {
    vec![
        ("path", path_graph(200)),
        ("cycle", cycle_graph(151)),
        ("star", star_graph(300)),
        ("complete", complete_graph(40, 7)),
        ("disconnected", disconnected_graph(60)),
    ]
}

/// Replays `ops` on a binary heap and the multiset oracle. Deletes are
/// skipped; inserts of a live id must be rejected.
pub fn check_binary(ops: &[Op], cache_bytes: usize) -> Result<(), String> {
    let mut h = copq::binary::BinaryHeap::new(cache_bytes, 4096).unwrap();
    let mut oracle = MultisetOracle::default();
    let mut live = std::collections::HashSet::new();
    for (step, op) in ops.iter().enumerate() {
        match *op {
            Op::Insert(e) => {
                let fresh = live.insert(e.id);
                match (h.insert(e), fresh) {
                    (Ok(()), true) => oracle.insert(e),
                    (Err(_), false) => {}
                    (r, _) => return Err(format!("step {step}: insert {e:?} gave {r:?}")),
                }
            }
            Op::DeleteMin => {
                let (got, want) = (h.delete_min(), oracle.delete_min());
                if got != want {
                    return Err(format!("step {step}: delete_min gave {got:?}, oracle {want:?}"));
                }
                if let Some(e) = got {
                    live.remove(&e.id);
                }
            }
            Op::Delete(_) => {}
        }
    }
    drain_equal(step_pop(|| h.delete_min()), step_pop(|| oracle.delete_min()))
}

pub fn check_funnel(ops: &[Op], cache_bytes: usize) -> Result<(), String> {
    let mut h = copq::funnel::FunnelHeap::new(cache_bytes, 4096).unwrap();
    let mut oracle = MultisetOracle::default();
    for (step, op) in ops.iter().enumerate() {
        match *op {
            Op::Insert(e) => {
                h.insert(e);
                oracle.insert(e);
            }
            Op::DeleteMin => {
                let (got, want) = (h.delete_min(), oracle.delete_min());
                if got != want {
                    return Err(format!("step {step}: delete_min gave {got:?}, oracle {want:?}"));
                }
            }
            Op::Delete(_) => {}
        }
        if h.len() != oracle.len() as u64 {
            return Err(format!("step {step}: length {} vs oracle {}", h.len(), oracle.len()));
        }
    }
    drain_equal(step_pop(|| h.delete_min()), step_pop(|| oracle.delete_min()))
}

pub fn check_bucket(ops: &[Op], cache_bytes: usize) -> Result<(), String> {
    let mut h = copq::bucket::BucketHeap::new(cache_bytes, 4096).unwrap();
    let mut oracle = MinMapOracle::default();
    for (step, op) in ops.iter().enumerate() {
        match *op {
            Op::Insert(e) => {
                h.update(e.id, e.key);
                oracle.update(e.id, e.key);
            }
            Op::Delete(id) => {
                h.delete(id);
                oracle.delete(id);
            }
            Op::DeleteMin => {
                let (got, want) = (h.delete_min(), oracle.delete_min());
                if got != want {
                    return Err(format!("step {step}: delete_min gave {got:?}, oracle {want:?}"));
                }
            }
        }
    }
    drain_equal(step_pop(|| h.delete_min()), step_pop(|| oracle.delete_min()))
}

fn step_pop(mut pop: impl FnMut() -> Option<Entry>) -> Vec<Entry> {
    std::iter::from_fn(&mut pop).collect()
}

fn drain_equal(got: Vec<Entry>, want: Vec<Entry>) -> Result<(), String> {
    if got != want {
        let at = got.iter().zip(&want).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
        return Err(format!("final drain differs at {at}: {} vs {} entries", got.len(), want.len()));
    }
    Ok(())
}
