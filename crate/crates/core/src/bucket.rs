//! Bucket Heap: a cache-oblivious priority queue with Update, Delete and
//! DeleteMin.
//!
//! Level `i` (1-based) owns an element bucket `B_i` of capacity `4^(i+1)` and
//! a signal buffer `S_i` of capacity `2^(2i+1)`. Operations only append a
//! signal to `S_1`; signals are applied lazily, one whole buffer at a time,
//! and whatever a level cannot absorb is forwarded to the next level's signal
//! buffer. Every element in `B_i` has a key (ties broken by id) no larger than
//! the level's splitter `u_i`, and every element deeper has a larger one, so
//! the minimum is always found in the shallowest non-empty bucket once the
//! signals above it have been applied.
//!
//! Update is decrease-only: updating a live id with a larger key is a no-op.
//! Deleting an absent id is a no-op.
//!
//! Buckets and signal buffers are stored in one [`BlockVector`], and every
//! step of applying a signal buffer (sorting by id, merging with the bucket,
//! selecting the overflow by key) runs through it, so only O(1) records are
//! held in ordinary memory at any time.

use std::collections::HashMap;

use crate::em::{BlockVector, EmConfig, EmError, IoStats};
use crate::entry::{Entry, PriorityQueue};

const DELETE_FLAG: u64 = 1 << 63;

/// A pending operation travelling down the levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Update { id: u64, key: u64 },
    Delete { id: u64 },
}

impl Signal {
    fn id(self) -> u64 {
        match self {
            Signal::Update { id, .. } | Signal::Delete { id } => id,
        }
    }

    fn encode(self) -> Entry {
        match self {
            Signal::Update { id, key } => Entry::new(id, key),
            Signal::Delete { id } => Entry::new(id | DELETE_FLAG, 0),
        }
    }

    fn decode(e: Entry) -> Signal {
        if e.id & DELETE_FLAG != 0 {
            Signal::Delete { id: e.id & !DELETE_FLAG }
        } else {
            Signal::Update { id: e.id, key: e.key }
        }
    }
}

/// Bucket capacity of 0-based level `j`.
pub fn bucket_capacity(j: usize) -> u64 {
    1u64 << (2 * (j + 1) + 2)
}

/// Signal buffer capacity of 0-based level `j`.
pub fn signal_capacity(j: usize) -> u64 {
    1u64 << (2 * (j + 1) + 1)
}

/// Largest batch a signal buffer can receive at once: one signal from an
/// operation at level 0, otherwise every signal of the level above plus the
/// overflow of its bucket.
fn max_incoming(j: usize) -> u64 {
    if j == 0 {
        1
    } else {
        2 * signal_capacity(j - 1)
    }
}

#[derive(Debug, Clone)]
struct Level {
    bucket_base: u64,
    bucket_len: u64,
    signal_base: u64,
    signal_len: u64,
    /// `None` means unbounded (last level).
    splitter: Option<Entry>,
    /// The bucket is known to be in id order.
    id_sorted: bool,
}

pub struct BucketHeap {
    store: BlockVector<Entry>,
    levels: Vec<Level>,
    stored: u64,
    peak: u64,
    signals_applied: u64,
}

impl BucketHeap {
    pub fn new(cache_bytes: usize, block_bytes: usize) -> Result<Self, EmError> {
        let store = BlockVector::new(EmConfig::for_record::<Entry>(cache_bytes, block_bytes)?)?;
        let mut h = BucketHeap { store, levels: Vec::new(), stored: 0, peak: 0, signals_applied: 0 };
        h.add_level();
        Ok(h)
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Elements currently held in buckets (includes not-yet-cancelled copies).
    pub fn stored_elements(&self) -> u64 {
        self.stored
    }

    pub fn peak_stored(&self) -> u64 {
        self.peak
    }

    pub fn signals_applied(&self) -> u64 {
        self.signals_applied
    }

    pub fn stats(&self) -> IoStats {
        self.store.stats()
    }

    /// Sets `key(id) := min(key(id), key)`, inserting `id` if absent.
    ///
    /// Panics if `id` has its top bit set.
    pub fn update(&mut self, id: u64, key: u64) {
        assert!(id & DELETE_FLAG == 0, "bucket heap ids must be below 2^63");
        self.push_signal(Signal::Update { id, key });
    }

    /// Removes `id` if present.
    pub fn delete(&mut self, id: u64) {
        assert!(id & DELETE_FLAG == 0, "bucket heap ids must be below 2^63");
        self.push_signal(Signal::Delete { id });
    }

    /// The minimum (key, id) without removing it.
    pub fn find_min(&mut self) -> Option<Entry> {
        if !self.surface_min() {
            return None;
        }
        self.min_in_first_bucket().map(|(_, e)| e)
    }

    pub fn delete_min(&mut self) -> Option<Entry> {
        if !self.surface_min() {
            return None;
        }
        let (pos, e) = self.min_in_first_bucket()?;
        let level = &mut self.levels[0];
        let last = level.bucket_base + level.bucket_len - 1;
        let moved = self.store.get(last);
        self.store.set(level.bucket_base + pos, moved);
        level.bucket_len -= 1;
        level.id_sorted = false;
        self.stored -= 1;
        Some(e)
    }

    fn push_signal(&mut self, s: Signal) {
        let level = &mut self.levels[0];
        self.store.set(level.signal_base + level.signal_len, s.encode());
        level.signal_len += 1;
        if self.levels[0].signal_len + max_incoming(0) > signal_capacity(0) {
            self.apply_signals(0);
        }
    }

    fn add_level(&mut self) {
        let j = self.levels.len();
        let bucket_base = self.store.len();
        let signal_base = bucket_base + bucket_capacity(j);
        self.store.extend_zeroed(bucket_capacity(j) + signal_capacity(j));
        if let Some(prev) = self.levels.last_mut() {
            debug_assert!(prev.splitter.is_none());
        }
        self.levels.push(Level { bucket_base, bucket_len: 0, signal_base, signal_len: 0, splitter: None, id_sorted: true });
    }

    fn copy_run(&mut self, from: u64, to: u64, len: u64) {
        for k in 0..len {
            let e = self.store.get(from + k);
            self.store.set(to + k, e);
        }
    }

    /// Applies every signal in `S_j` to `B_j`, forwarding the rest to `S_{j+1}`.
    ///
    /// Both runs are sorted by id (stably, so signals for one id keep their
    /// arrival order) and merged into a scratch run past the end of the store.
    fn apply_signals(&mut self, j: usize) {
        let Level { bucket_base, bucket_len, signal_base, signal_len, splitter, id_sorted } = self.levels[j].clone();
        if signal_len == 0 {
            return;
        }
        self.signals_applied += signal_len;
        sort_range(&mut self.store, signal_base, signal_len, |e| e.id & !DELETE_FLAG);
        if !id_sorted {
            sort_range(&mut self.store, bucket_base, bucket_len, |e| e.id);
        }
        self.levels[j].signal_len = 0;
        let last = splitter.is_none();

        let out = self.store.len();
        let (mut s, mut b) = (0, 0);
        while s < signal_len || b < bucket_len {
            let sig = (s < signal_len).then(|| Signal::decode(self.store.get(signal_base + s)));
            let elem = (b < bucket_len).then(|| self.store.get(bucket_base + b));
            let id = match (sig, elem) {
                (Some(sig), Some(e)) => sig.id().min(e.id),
                (Some(sig), None) => sig.id(),
                (None, Some(e)) => e.id,
                (None, None) => unreachable!(),
            };
            let mut present = match elem {
                Some(e) if e.id == id => {
                    b += 1;
                    Some(e.key)
                }
                _ => None,
            };
            while s < signal_len {
                let sig = Signal::decode(self.store.get(signal_base + s));
                if sig.id() != id {
                    break;
                }
                s += 1;
                match sig {
                    Signal::Delete { .. } => {
                        if present.take().is_none() && !last {
                            self.forward(j, sig);
                        }
                    }
                    Signal::Update { key, .. } => match present {
                        Some(k) => present = Some(k.min(key)),
                        None if splitter.is_none_or(|u| Entry::new(id, key) <= u) => {
                            present = Some(key);
                            // A copy may still live deeper; it must not resurface.
                            if !last {
                                self.forward(j, Signal::Delete { id });
                            }
                        }
                        None => self.forward(j, sig),
                    },
                }
            }
            if let Some(key) = present {
                self.store.push(Entry::new(id, key));
            }
        }

        let mut len = self.store.len() - out;
        let cap = bucket_capacity(j);
        let mut keep_scratch = false;
        let overflowed = len > cap;
        if overflowed {
            sort_range(&mut self.store, out, len, |e| *e);
            if last {
                // The new level lands past the scratch run, which then stays
                // behind as an unused gap.
                self.add_level();
                keep_scratch = true;
            }
            for k in cap..len {
                let e = self.store.get(out + k);
                self.forward(j, Signal::Update { id: e.id, key: e.key });
            }
            self.levels[j].splitter = Some(self.store.get(out + cap - 1));
            len = cap;
        }
        // The merge emits id order; an overflow re-sorts by key.
        self.levels[j].id_sorted = !overflowed;
        self.copy_run(out, bucket_base, len);
        if !keep_scratch {
            self.store.truncate(out).expect("scratch truncate");
        }
        self.stored = self.stored + len - bucket_len;
        self.peak = self.peak.max(self.stored);
        self.levels[j].bucket_len = len;

        let next = j + 1;
        if next < self.levels.len() && self.levels[next].signal_len + max_incoming(next) > signal_capacity(next) {
            self.apply_signals(next);
        }
    }

    /// Appends `sig` to `S_{j+1}`.
    fn forward(&mut self, j: usize, sig: Signal) {
        let level = &mut self.levels[j + 1];
        debug_assert!(level.signal_len < signal_capacity(j + 1));
        self.store.set(level.signal_base + level.signal_len, sig.encode());
        level.signal_len += 1;
    }

    /// Applies pending signals and refills `B_1` until it holds the global
    /// minimum. Returns false when the heap is empty.
    fn surface_min(&mut self) -> bool {
        self.apply_signals(0);
        self.levels[0].bucket_len > 0 || self.refill(0)
    }

    /// `B_j` is empty and `S_j` applied: pull the smallest elements up from
    /// the shallowest non-empty deeper level.
    fn refill(&mut self, j: usize) -> bool {
        let next = j + 1;
        if next >= self.levels.len() {
            return false;
        }
        self.apply_signals(next);
        if self.levels[next].bucket_len == 0 && !self.refill(next) {
            return false;
        }
        let (base, len) = (self.levels[next].bucket_base, self.levels[next].bucket_len);
        sort_range(&mut self.store, base, len, |e| *e);
        let take = (bucket_capacity(j) / 2).min(len);
        self.levels[j].splitter = Some(self.store.get(base + take - 1));
        self.copy_run(base, self.levels[j].bucket_base, take);
        // Close the gap with the tail; bucket order does not matter.
        let rest = len - take;
        let moved = take.min(rest);
        self.copy_run(base + len - moved, base, moved);
        self.levels[next].bucket_len = rest;
        self.levels[next].id_sorted = false;
        self.levels[j].bucket_len = take;
        self.levels[j].id_sorted = false;
        true
    }

    fn min_in_first_bucket(&mut self) -> Option<(u64, Entry)> {
        let (base, len) = (self.levels[0].bucket_base, self.levels[0].bucket_len);
        (0..len).map(|k| (k, self.store.get(base + k))).min_by_key(|&(_, e)| e)
    }

    /// Applies every pending signal, shallowest level first.
    pub fn resolve_all(&mut self) {
        let mut j = 0;
        while j < self.levels.len() {
            self.apply_signals(j);
            j += 1;
        }
    }

    /// Checks capacities and splitter ordering. With `resolved`, also checks
    /// that every id sits in exactly one bucket (call [`Self::resolve_all`]
    /// first). Not counted as I/O.
    pub fn validate(&self, resolved: bool) -> Result<(), String> {
        let mut seen = HashMap::new();
        let mut prev_splitter: Option<Entry> = None;
        let mut total = 0;
        for (j, level) in self.levels.iter().enumerate() {
            if level.bucket_len > bucket_capacity(j) || level.signal_len > signal_capacity(j) {
                return Err(format!("level {j} over capacity"));
            }
            if resolved && level.signal_len > 0 {
                return Err(format!("level {j} has pending signals"));
            }
            if j + 1 < self.levels.len() && level.splitter.is_none() {
                return Err(format!("level {j} is not last but unbounded"));
            }
            if let (Some(p), Some(u)) = (prev_splitter, level.splitter) {
                if p > u {
                    return Err(format!("splitters decrease at level {j}"));
                }
            }
            for k in 0..level.bucket_len {
                let e = self.store.inspect(level.bucket_base + k);
                if level.splitter.is_some_and(|u| e > u) {
                    return Err(format!("{e:?} above splitter of level {j}"));
                }
                if prev_splitter.is_some_and(|p| e <= p) {
                    return Err(format!("{e:?} at level {j} not above previous splitter"));
                }
                if resolved && seen.insert(e.id, j).is_some() {
                    return Err(format!("id {} stored twice", e.id));
                }
            }
            total += level.bucket_len;
            prev_splitter = level.splitter.or(prev_splitter);
        }
        if total != self.stored {
            return Err(format!("stored count {} but buckets hold {total}", self.stored));
        }
        Ok(())
    }
}

/// Runs this short are insertion-sorted.
const SMALL_RUN: u64 = 16;

/// Stable merge sort of `store[start..start + len]` by `key`, with a scratch
/// copy appended past the end of the store for the duration of the sort.
fn sort_range<K: Ord>(store: &mut BlockVector<Entry>, start: u64, len: u64, key: impl Fn(&Entry) -> K + Copy) {
    if len < 2 {
        return;
    }
    let scratch = store.len();
    store.extend_zeroed(len);
    for k in 0..len {
        let e = store.get(start + k);
        store.set(scratch + k, e);
    }
    split_merge(store, scratch, start, 0, len, key);
    store.truncate(scratch).expect("scratch truncate");
}

/// Sorts `src[lo..hi]` into `dst[lo..hi]`; both hold the same records on entry
/// and `src` is clobbered.
fn split_merge<K: Ord>(store: &mut BlockVector<Entry>, src: u64, dst: u64, lo: u64, hi: u64, key: impl Fn(&Entry) -> K + Copy) {
    if hi - lo <= SMALL_RUN {
        for i in lo + 1..hi {
            let e = store.get(dst + i);
            let mut p = i;
            while p > lo {
                let prev = store.get(dst + p - 1);
                if key(&prev) <= key(&e) {
                    break;
                }
                store.set(dst + p, prev);
                p -= 1;
            }
            store.set(dst + p, e);
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    split_merge(store, dst, src, lo, mid, key);
    split_merge(store, dst, src, mid, hi, key);
    let (mut a, mut b) = (lo, mid);
    for out in lo..hi {
        let take_left = b == hi || (a < mid && key(&store.get(src + a)) <= key(&store.get(src + b)));
        let e = if take_left {
            a += 1;
            store.get(src + a - 1)
        } else {
            b += 1;
            store.get(src + b - 1)
        };
        store.set(dst + out, e);
    }
}

impl PriorityQueue for BucketHeap {
    fn insert(&mut self, e: Entry) {
        self.update(e.id, e.key);
    }
    fn delete_min(&mut self) -> Option<Entry> {
        BucketHeap::delete_min(self)
    }
    fn io_stats(&self) -> IoStats {
        self.store.stats()
    }
    fn reset_io_stats(&mut self) {
        self.store.reset_stats();
    }
    fn name(&self) -> &'static str {
        "bucket"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heap() -> BucketHeap {
        BucketHeap::new(64 * 1024, 4096).unwrap()
    }

    fn drain(h: &mut BucketHeap) -> Vec<Entry> {
        std::iter::from_fn(|| h.delete_min()).collect()
    }

    #[test]
    fn decrease_applies() {
        let mut h = heap();
        h.update(9, 5);
        h.update(9, 3);
        assert_eq!(drain(&mut h), vec![Entry::new(9, 3)]);
    }

    #[test]
    fn increase_ignored() {
        let mut h = heap();
        h.update(9, 3);
        h.update(9, 5);
        assert_eq!(drain(&mut h), vec![Entry::new(9, 3)]);
    }

    #[test]
    fn delete_removes() {
        let mut h = heap();
        h.update(4, 4);
        h.delete(4);
        assert_eq!(h.delete_min(), None);
    }

    #[test]
    fn delete_absent_then_insert() {
        let mut h = heap();
        h.delete(7);
        h.update(7, 2);
        assert_eq!(drain(&mut h), vec![Entry::new(7, 2)]);
    }

    #[test]
    fn min_and_ties() {
        let mut h = heap();
        h.update(1, 2);
        h.update(2, 1);
        assert_eq!(h.find_min(), Some(Entry::new(2, 1)));
        assert_eq!(h.delete_min(), Some(Entry::new(2, 1)));
        let mut h = heap();
        h.update(2, 1);
        h.update(1, 1);
        assert_eq!(h.delete_min(), Some(Entry::new(1, 1)));
    }

    #[test]
    fn signal_encoding() {
        for s in [Signal::Update { id: 5, key: 9 }, Signal::Delete { id: 5 }, Signal::Update { id: 0, key: 0 }] {
            assert_eq!(Signal::decode(s.encode()), s);
        }
    }

    #[test]
    fn first_signal_flush_fits_level_one() {
        let mut h = heap();
        for id in 0..=signal_capacity(0) {
            h.update(id, 100 - id);
        }
        assert_eq!(h.level_count(), 1);
        assert_eq!(h.stored_elements(), signal_capacity(0));
    }

    #[test]
    fn bucket_overflow_opens_level_two() {
        let mut h = heap();
        let n = bucket_capacity(0) + 1;
        for id in 0..n {
            h.update(id, id);
        }
        h.resolve_all();
        assert_eq!(h.level_count(), 2);
        assert_eq!(h.levels[0].bucket_len, bucket_capacity(0));
        assert_eq!(h.levels[1].bucket_len, 1);
        assert_eq!(h.store.inspect(h.levels[1].bucket_base), Entry::new(n - 1, n - 1));
        assert_eq!(h.levels[0].splitter, Some(Entry::new(n - 2, n - 2)));
        h.validate(true).unwrap();
    }

    #[test]
    fn deep_decrease_cancels_old_copy() {
        let mut h = heap();
        for id in 0..200 {
            h.update(id, 1000 + id);
        }
        h.resolve_all();
        assert!(h.level_count() >= 3);
        h.update(199, 1);
        h.resolve_all();
        h.validate(true).unwrap();
        assert_eq!(h.delete_min(), Some(Entry::new(199, 1)));
        let rest = drain(&mut h);
        assert_eq!(rest.len(), 199);
        assert!(rest.iter().all(|e| e.id != 199));
    }

    #[test]
    fn sort_range_is_stable_and_sorted() {
        let mut store = BlockVector::new(EmConfig::for_record::<Entry>(8192, 4096).unwrap()).unwrap();
        store.push(Entry::new(999, 999));
        let items: Vec<Entry> = (0..300u64).map(|i| Entry::new(i, (i * 37) % 11)).collect();
        for e in &items {
            store.push(*e);
        }
        sort_range(&mut store, 1, items.len() as u64, |e| e.key);
        let got: Vec<Entry> = (1..=items.len() as u64).map(|i| store.inspect(i)).collect();
        let mut want = items.clone();
        want.sort_by_key(|e| e.key);
        assert_eq!(got, want);
        assert_eq!(store.inspect(0), Entry::new(999, 999));
        assert_eq!(store.len(), items.len() as u64 + 1);
    }

    #[test]
    fn refill_splitter_is_largest_moved() {
        let mut h = heap();
        for id in 0..100 {
            h.update(id, 500 - id);
        }
        assert_eq!(h.delete_min(), Some(Entry::new(99, 401)));
        h.validate(false).unwrap();
        for k in 402..=500 {
            assert_eq!(h.delete_min().map(|e| e.key), Some(k));
            h.validate(false).unwrap();
        }
    }
}
