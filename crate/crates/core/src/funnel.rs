//! Funnel Heap: a cache-oblivious priority queue with Insert and DeleteMin.
//!
//! The heap is a small insertion buffer `I` followed by a chain of links.
//! Link `i` consists of
//!
//! ```text
//!   A_i  <- v_i <- A_{i+1}          (binary merger between links)
//!           ^
//!           B_i <- K_i <- S_{i,1..k_i}
//! ```
//!
//! where `K_i` is a `k_i`-merger: a complete binary tree of binary mergers
//! whose internal buffers are laid out recursively (van Emde Boas order) in a
//! contiguous region. Every buffer lives in the heap's single
//! [`BlockVector`]; only O(k) words of per-node metadata (cursors and
//! exhaustion flags) are kept in ordinary memory.
//!
//! When `I` is full, a sweep empties `I` and all links before the first link
//! `i` with a free leaf buffer into that leaf, while re-filling every buffer on
//! the path from `A_1` down to the leaf with the smallest elements so the
//! merge trees keep producing elements in order.
//!
//! There is no DecreaseKey; duplicate ids are stored independently.

use crate::em::{BlockVector, EmConfig, EmError, IoStats};
use crate::entry::{Entry, PriorityQueue};

/// Capacity of the insertion buffer, and of each leaf buffer of link 1.
pub const FIRST_LEAF_CAPACITY: u64 = 8;
/// Fan-in of link 1.
pub const FIRST_FAN_IN: usize = 2;

/// FIFO ring buffer over a fixed region of the store, holding a sorted run.
#[derive(Debug, Clone, Copy)]
struct Buffer {
    base: u64,
    cap: u64,
    head: u64,
    len: u64,
}

impl Buffer {
    fn new(base: u64, cap: u64) -> Self {
        Buffer { base, cap, head: 0, len: 0 }
    }

    fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn is_full(&self) -> bool {
        self.len == self.cap
    }

    fn peek(&self, store: &mut BlockVector<Entry>) -> Option<Entry> {
        (self.len > 0).then(|| store.get(self.base + self.head))
    }

    fn pop(&mut self, store: &mut BlockVector<Entry>) -> Entry {
        debug_assert!(self.len > 0);
        let e = store.get(self.base + self.head);
        self.head += 1;
        if self.head == self.cap {
            self.head = 0;
        }
        self.len -= 1;
        if self.len == 0 {
            self.head = 0;
        }
        e
    }

    fn push(&mut self, store: &mut BlockVector<Entry>, e: Entry) {
        debug_assert!(self.len < self.cap);
        let mut at = self.head + self.len;
        if at >= self.cap {
            at -= self.cap;
        }
        store.set(self.base + at, e);
        self.len += 1;
    }
}

/// Link geometry for link index `i` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkShape {
    /// Fan-in of the link's merger (power of two).
    pub fan_in: usize,
    /// Capacity of each leaf buffer.
    pub leaf_capacity: u64,
}

impl LinkShape {
    pub fn first() -> Self {
        LinkShape { fan_in: FIRST_FAN_IN, leaf_capacity: FIRST_LEAF_CAPACITY }
    }

    pub fn next(&self) -> Self {
        let s = self.leaf_capacity * (self.fan_in as u64 + 1);
        LinkShape { fan_in: (icbrt_ceil(s) as usize).next_power_of_two(), leaf_capacity: s }
    }

    /// Capacity of the merger output buffer B.
    pub fn merger_output_capacity(&self) -> u64 {
        (self.fan_in as u64).pow(3)
    }

    /// Capacity of the link output buffer A, one leaf of the next link.
    pub fn output_capacity(&self) -> u64 {
        self.next().leaf_capacity
    }

    /// Total elements all leaves of this link can hold.
    pub fn leaf_total(&self) -> u64 {
        self.fan_in as u64 * self.leaf_capacity
    }
}

/// Shapes of links 0, 1, 2, ...
pub fn link_shapes() -> impl Iterator<Item = LinkShape> {
    std::iter::successors(Some(LinkShape::first()), |s| Some(s.next()))
}

fn icbrt_ceil(s: u64) -> u64 {
    let mut c = (s as f64).cbrt().round() as u64;
    while c * c * c < s {
        c += 1;
    }
    while c > 1 && (c - 1).pow(3) >= s {
        c -= 1;
    }
    c
}

/// Size of a middle buffer produced by splitting a merger of height `h`.
fn middle_buffer_capacity(h: u32) -> u64 {
    ((1u64 << h) as f64).powf(1.5).ceil() as u64
}

struct Link {
    shape: LinkShape,
    a: Buffer,
    b: Buffer,
    /// Output buffer of each merge node; index 1 (root) unused, its output is `b`.
    mids: Vec<Buffer>,
    leaves: Vec<Buffer>,
    exhausted: Vec<bool>,
    /// Number of leaves used since the link was last emptied.
    used_leaves: usize,
}

impl Link {
    /// Lays out a link starting at `base`; returns the link and its region size.
    fn layout(shape: LinkShape, base: u64) -> (Link, u64) {
        let k = shape.fan_in;
        let height = k.trailing_zeros();
        let mut offset = base;
        let a = Buffer::new(offset, shape.output_capacity());
        offset += a.cap;
        let b = Buffer::new(offset, shape.merger_output_capacity());
        offset += b.cap;
        let mut mids = vec![Buffer::new(0, 0); k];
        layout_merger(1, height, &mut offset, &mut mids);
        let leaves = (0..k)
            .map(|_| {
                let buf = Buffer::new(offset, shape.leaf_capacity);
                offset += shape.leaf_capacity;
                buf
            })
            .collect();
        let link = Link { shape, a, b, mids, leaves, exhausted: vec![true; k], used_leaves: 0 };
        (link, offset - base)
    }

    fn fan_in(&self) -> usize {
        self.shape.fan_in
    }

    fn out_of(&self, node: usize) -> Buffer {
        if node == 1 {
            self.b
        } else {
            self.mids[node]
        }
    }

    fn out_of_mut(&mut self, node: usize) -> &mut Buffer {
        if node == 1 {
            &mut self.b
        } else {
            &mut self.mids[node]
        }
    }

    fn input_mut(&mut self, child: usize) -> &mut Buffer {
        let k = self.fan_in();
        if child < k {
            &mut self.mids[child]
        } else {
            &mut self.leaves[child - k]
        }
    }

    /// Merge nodes on the path from the root down to leaf `leaf`, root first.
    fn path_to_leaf(&self, leaf: usize) -> Vec<usize> {
        let mut nodes = Vec::new();
        let mut n = (self.fan_in() + leaf) / 2;
        while n >= 1 {
            nodes.push(n);
            n /= 2;
        }
        nodes.reverse();
        nodes
    }

    fn element_count(&self) -> u64 {
        self.a.len
            + self.b.len
            + self.mids.iter().skip(2).map(|m| m.len).sum::<u64>()
            + self.leaves.iter().map(|l| l.len).sum::<u64>()
    }
}

/// Recursive (van Emde Boas) placement of the internal buffers of the merger
/// rooted at `root` with height `h`.
fn layout_merger(root: usize, h: u32, offset: &mut u64, mids: &mut [Buffer]) {
    if h <= 1 {
        return;
    }
    let top = h / 2;
    let bottom = h - top;
    layout_merger(root, top, offset, mids);
    let cap = middle_buffer_capacity(h);
    for j in 0..(1usize << top) {
        let node = (root << top) + j;
        mids[node] = Buffer::new(*offset, cap);
        *offset += cap;
        layout_merger(node, bottom, offset, mids);
    }
}

pub struct FunnelHeap {
    store: BlockVector<Entry>,
    insert_buf: Buffer,
    links: Vec<Link>,
    count: u64,
    peak: u64,
    sweeps: u64,
}

impl FunnelHeap {
    pub fn new(cache_bytes: usize, block_bytes: usize) -> Result<Self, EmError> {
        let mut store = BlockVector::new(EmConfig::for_record::<Entry>(cache_bytes, block_bytes)?)?;
        store.extend_zeroed(FIRST_LEAF_CAPACITY);
        Ok(FunnelHeap {
            store,
            // Kept sorted descending so the minimum sits at the end.
            insert_buf: Buffer::new(0, FIRST_LEAF_CAPACITY),
            links: Vec::new(),
            count: 0,
            peak: 0,
            sweeps: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweeps
    }

    /// Largest number of elements held at once.
    pub fn peak_len(&self) -> u64 {
        self.peak
    }

    pub fn stats(&self) -> IoStats {
        self.store.stats()
    }

    /// Number of elements in leaf `leaf` of link `link`, for inspection.
    pub fn leaf_len(&self, link: usize, leaf: usize) -> u64 {
        self.links[link].leaves[leaf].len
    }

    /// Contents of leaf `leaf` of link `link`, in order. Not counted as I/O.
    pub fn leaf_contents(&self, link: usize, leaf: usize) -> Vec<Entry> {
        buffer_contents(&self.store, &self.links[link].leaves[leaf])
    }

    pub fn insert(&mut self, e: Entry) {
        if self.insert_buf.is_full() {
            self.sweep();
        }
        // Insertion sort into the descending insertion buffer.
        let mut pos = self.insert_buf.len;
        while pos > 0 {
            let prev = self.store.get(pos - 1);
            if prev >= e {
                break;
            }
            self.store.set(pos, prev);
            pos -= 1;
        }
        self.store.set(pos, e);
        self.insert_buf.len += 1;
        self.count += 1;
        self.peak = self.peak.max(self.count);
    }

    pub fn delete_min(&mut self) -> Option<Entry> {
        let limit = self.links.len();
        let e = self.pop_min(limit)?;
        self.count -= 1;
        Some(e)
    }

    /// Smallest element among `I` and links below `limit`.
    fn pop_min(&mut self, limit: usize) -> Option<Entry> {
        if limit > 0 && self.links[0].a.is_empty() {
            self.fill_link(0, limit);
        }
        let from_links = if limit > 0 { self.links[0].a.peek(&mut self.store) } else { None };
        let from_insert = if self.insert_buf.len > 0 { Some(self.store.get(self.insert_buf.len - 1)) } else { None };
        match (from_insert, from_links) {
            (None, None) => None,
            (Some(x), Some(y)) if y < x => Some(self.links[0].a.pop(&mut self.store)),
            (None, Some(_)) => Some(self.links[0].a.pop(&mut self.store)),
            (Some(x), _) => {
                self.insert_buf.len -= 1;
                Some(x)
            }
        }
    }

    /// Runs the binary merger of link `li` until `A_li` is full or its inputs
    /// are exhausted. Links at index `limit` and beyond are treated as empty.
    fn fill_link(&mut self, li: usize, limit: usize) {
        let has_next = li + 1 < limit;
        let mut next_dry = !has_next;
        loop {
            if self.links[li].a.is_full() {
                return;
            }
            if self.links[li].b.is_empty() && !self.links[li].exhausted[1] {
                self.fill_node(li, 1);
            }
            if !next_dry && self.links[li + 1].a.is_empty() {
                self.fill_link(li + 1, limit);
                next_dry = self.links[li + 1].a.is_empty();
            }
            let x = self.links[li].b.peek(&mut self.store);
            let y = if has_next { self.links[li + 1].a.peek(&mut self.store) } else { None };
            let e = match (x, y) {
                (None, None) => return,
                (Some(x), Some(y)) if y < x => self.links[li + 1].a.pop(&mut self.store),
                (None, Some(_)) => self.links[li + 1].a.pop(&mut self.store),
                (Some(_), _) => self.links[li].b.pop(&mut self.store),
            };
            self.links[li].a.push(&mut self.store, e);
        }
    }

    /// Fills the output buffer of merge node `node` in link `li`.
    fn fill_node(&mut self, li: usize, node: usize) {
        let k = self.links[li].fan_in();
        let (left, right) = (2 * node, 2 * node + 1);
        loop {
            if self.links[li].out_of(node).is_full() {
                return;
            }
            for child in [left, right] {
                if child < k && self.links[li].mids[child].is_empty() && !self.links[li].exhausted[child] {
                    self.fill_node(li, child);
                }
            }
            let x = self.input_of(li, left).peek(&mut self.store);
            let y = self.input_of(li, right).peek(&mut self.store);
            let from = match (x, y) {
                (None, None) => {
                    self.links[li].exhausted[node] = true;
                    return;
                }
                (Some(x), Some(y)) if y < x => right,
                (None, Some(_)) => right,
                (Some(_), _) => left,
            };
            let e = self.links[li].input_mut(from).pop(&mut self.store);
            self.links[li].out_of_mut(node).push(&mut self.store, e);
        }
    }

    fn input_of(&self, li: usize, child: usize) -> Buffer {
        let link = &self.links[li];
        let k = link.fan_in();
        if child < k {
            link.mids[child]
        } else {
            link.leaves[child - k]
        }
    }


    fn add_link(&mut self) {
        let shape = match self.links.last() {
            Some(l) => l.shape.next(),
            None => LinkShape::first(),
        };
        let base = self.store.len();
        let (link, size) = Link::layout(shape, base);
        self.store.extend_zeroed(size);
        self.links.push(link);
    }

    fn sweep(&mut self) {
        self.sweeps += 1;
        let target = match self.links.iter().position(|l| l.used_leaves < l.fan_in()) {
            Some(i) => i,
            None => {
                self.add_link();
                self.links.len() - 1
            }
        };
        let leaf = self.links[target].used_leaves;
        let path = self.links[target].path_to_leaf(leaf);

        // Occupancy of every buffer on the path A_1 .. A_target, B, K-path.
        let upper_counts: Vec<u64> = self.links[..target].iter().map(|l| l.a.len).collect();
        let mut path_counts = vec![self.links[target].a.len, self.links[target].b.len];
        path_counts.extend(path.iter().skip(1).map(|&n| self.links[target].mids[n].len));

        // Scratch run 1: the path below A_target, already in order top-down.
        let run1_start = self.store.len();
        while !self.links[target].a.is_empty() {
            let e = self.links[target].a.pop(&mut self.store);
            self.store.push(e);
        }
        while !self.links[target].b.is_empty() {
            let e = self.links[target].b.pop(&mut self.store);
            self.store.push(e);
        }
        for &n in path.iter().skip(1) {
            while !self.links[target].mids[n].is_empty() {
                let e = self.links[target].mids[n].pop(&mut self.store);
                self.store.push(e);
            }
        }
        let run2_start = self.store.len();
        // Scratch run 2: everything in I and links before `target`, in order.
        while let Some(e) = self.pop_min(target) {
            self.store.push(e);
        }
        let run_end = self.store.len();

        // Merge both runs, refilling the path top-down.
        let mut targets: Vec<(Option<usize>, u64)> = upper_counts.iter().enumerate().map(|(l, &c)| (Some(l), c)).collect();
        targets.push((None, path_counts[0]));
        let mut merged = MergeRuns { i: run1_start, i_end: run2_start, j: run2_start, j_end: run_end };
        for (slot, count) in targets {
            let li = slot.unwrap_or(target);
            for _ in 0..count {
                let e = merged.next(&mut self.store).expect("sweep ran out of elements");
                self.links[li].a.push(&mut self.store, e);
            }
        }
        for _ in 0..path_counts[1] {
            let e = merged.next(&mut self.store).expect("sweep ran out of elements");
            self.links[target].b.push(&mut self.store, e);
        }
        for (idx, &n) in path.iter().enumerate().skip(1) {
            for _ in 0..path_counts[idx + 1] {
                let e = merged.next(&mut self.store).expect("sweep ran out of elements");
                self.links[target].mids[n].push(&mut self.store, e);
            }
        }
        while let Some(e) = merged.next(&mut self.store) {
            let buf = &mut self.links[target].leaves[leaf];
            assert!(!buf.is_full(), "leaf buffer overflow during sweep");
            buf.push(&mut self.store, e);
        }
        self.store.truncate(run1_start).expect("scratch truncate");

        for link in &mut self.links[..target] {
            link.used_leaves = 0;
            link.exhausted.iter_mut().for_each(|x| *x = true);
        }
        let link = &mut self.links[target];
        for &n in &path {
            link.exhausted[n] = false;
        }
        link.used_leaves += 1;
    }

    /// Checks buffer sortedness and the element count. Not counted as I/O.
    pub fn validate(&self) -> Result<(), String> {
        let ins: Vec<Entry> = (0..self.insert_buf.len).map(|i| self.store.inspect(i)).collect();
        if ins.windows(2).any(|w| w[0] < w[1]) {
            return Err("insertion buffer not sorted".into());
        }
        let mut total = ins.len() as u64;
        for (li, link) in self.links.iter().enumerate() {
            let mut bufs = vec![("A", link.a), ("B", link.b)];
            bufs.extend(link.mids.iter().skip(2).map(|m| ("mid", *m)));
            bufs.extend(link.leaves.iter().map(|l| ("leaf", *l)));
            for (name, buf) in bufs {
                if buf.len > buf.cap {
                    return Err(format!("link {li} {name} buffer over capacity"));
                }
                let items = buffer_contents(&self.store, &buf);
                if items.windows(2).any(|w| w[0] > w[1]) {
                    return Err(format!("link {li} {name} buffer not sorted"));
                }
            }
            total += link.element_count();
        }
        if total != self.count {
            return Err(format!("element count {} but buffers hold {total}", self.count));
        }
        Ok(())
    }
}

struct MergeRuns {
    i: u64,
    i_end: u64,
    j: u64,
    j_end: u64,
}

impl MergeRuns {
    fn next(&mut self, store: &mut BlockVector<Entry>) -> Option<Entry> {
        let x = (self.i < self.i_end).then(|| store.get(self.i));
        let y = (self.j < self.j_end).then(|| store.get(self.j));
        match (x, y) {
            (None, None) => None,
            (Some(x), Some(y)) if y < x => {
                self.j += 1;
                Some(y)
            }
            (None, Some(y)) => {
                self.j += 1;
                Some(y)
            }
            (Some(x), _) => {
                self.i += 1;
                Some(x)
            }
        }
    }
}

fn buffer_contents(store: &BlockVector<Entry>, buf: &Buffer) -> Vec<Entry> {
    (0..buf.len).map(|k| store.inspect(buf.base + (buf.head + k) % buf.cap)).collect()
}

impl PriorityQueue for FunnelHeap {
    fn insert(&mut self, e: Entry) {
        FunnelHeap::insert(self, e)
    }
    fn delete_min(&mut self) -> Option<Entry> {
        FunnelHeap::delete_min(self)
    }
    fn io_stats(&self) -> IoStats {
        self.store.stats()
    }
    fn reset_io_stats(&mut self) {
        self.store.reset_stats();
    }
    fn name(&self) -> &'static str {
        "funnel"
    }
}
