//! Array-based binary heap with implicit pointers.
//!
//! Entries live in one [`BlockVector`] as an implicit complete binary tree
//! rooted at index 0. A second vector maps each id to its current heap slot,
//! which is what makes `decrease_key` possible; its transfers are counted too.

use thiserror::Error;

use crate::em::{BlockVector, EmConfig, EmError, IoStats};
use crate::entry::{Entry, PriorityQueue};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BinaryHeapError {
    #[error("id {0} is already in the heap")]
    DuplicateId(u64),
    #[error("id {0} is not in the heap")]
    AbsentId(u64),
    #[error("new key {new} for id {id} exceeds current key {current}")]
    KeyIncrease { id: u64, current: u64, new: u64 },
    #[error(transparent)]
    Em(#[from] EmError),
}

// Position encoding: 0 = never inserted, 1 = removed, p + 2 = heap slot p.
const NEVER: u64 = 0;
const REMOVED: u64 = 1;

/// What the position array knows about an id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Never,
    Removed,
    Live(u64),
}

pub struct BinaryHeap {
    heap: BlockVector<Entry>,
    positions: BlockVector<u64>,
    size: u64,
}

impl BinaryHeap {
    /// Both vectors get their own cache of `cache_bytes`.
    pub fn new(cache_bytes: usize, block_bytes: usize) -> Result<Self, EmError> {
        Ok(BinaryHeap {
            heap: BlockVector::new(EmConfig::for_record::<Entry>(cache_bytes, block_bytes)?)?,
            positions: BlockVector::new(EmConfig::for_record::<u64>(cache_bytes, block_bytes)?)?,
            size: 0,
        })
    }

    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn heap_stats(&self) -> IoStats {
        self.heap.stats()
    }

    pub fn position_stats(&self) -> IoStats {
        self.positions.stats()
    }

    pub fn slot(&mut self, id: u64) -> Slot {
        if id >= self.positions.len() {
            return Slot::Never;
        }
        match self.positions.get(id) {
            NEVER => Slot::Never,
            REMOVED => Slot::Removed,
            p => Slot::Live(p - 2),
        }
    }

    /// Current key of a live id.
    pub fn key_of(&mut self, id: u64) -> Option<u64> {
        match self.slot(id) {
            Slot::Live(p) => Some(self.heap.get(p).key),
            _ => None,
        }
    }

    pub fn insert(&mut self, e: Entry) -> Result<(), BinaryHeapError> {
        if let Slot::Live(_) = self.slot(e.id) {
            return Err(BinaryHeapError::DuplicateId(e.id));
        }
        if e.id >= self.positions.len() {
            self.positions.extend_zeroed(e.id + 1 - self.positions.len());
        }
        if self.size == self.heap.len() {
            self.heap.push(e);
        } else {
            self.heap.set(self.size, e);
        }
        self.size += 1;
        self.sift_up(self.size - 1, e);
        Ok(())
    }

    pub fn peek(&mut self) -> Option<Entry> {
        (self.size > 0).then(|| self.heap.get(0))
    }

    pub fn delete_min(&mut self) -> Option<Entry> {
        if self.size == 0 {
            return None;
        }
        let min = self.heap.get(0);
        self.positions.set(min.id, REMOVED);
        self.size -= 1;
        if self.size > 0 {
            let last = self.heap.get(self.size);
            self.sift_down(0, last);
        }
        Some(min)
    }

    pub fn decrease_key(&mut self, id: u64, new_key: u64) -> Result<(), BinaryHeapError> {
        let Slot::Live(pos) = self.slot(id) else {
            return Err(BinaryHeapError::AbsentId(id));
        };
        let current = self.heap.get(pos).key;
        if new_key > current {
            return Err(BinaryHeapError::KeyIncrease { id, current, new: new_key });
        }
        if new_key < current {
            self.sift_up(pos, Entry::new(id, new_key));
        }
        Ok(())
    }

    fn place(&mut self, pos: u64, e: Entry) {
        self.heap.set(pos, e);
        self.positions.set(e.id, pos + 2);
    }

    fn sift_up(&mut self, mut pos: u64, e: Entry) {
        while pos > 0 {
            let parent = (pos - 1) / 2;
            let p = self.heap.get(parent);
            if p <= e {
                break;
            }
            self.place(pos, p);
            pos = parent;
        }
        self.place(pos, e);
    }

    fn sift_down(&mut self, mut pos: u64, e: Entry) {
        loop {
            let left = 2 * pos + 1;
            if left >= self.size {
                break;
            }
            let mut child = left;
            let mut c = self.heap.get(left);
            if left + 1 < self.size {
                let r = self.heap.get(left + 1);
                if r < c {
                    child = left + 1;
                    c = r;
                }
            }
            if e <= c {
                break;
            }
            self.place(pos, c);
            pos = child;
        }
        self.place(pos, e);
    }

    /// Full scan of heap order and position consistency.
    pub fn validate(&mut self) -> Result<(), String> {
        for i in 0..self.size {
            let e = self.heap.get(i);
            if i > 0 {
                let p = self.heap.get((i - 1) / 2);
                if p > e {
                    return Err(format!("heap order violated at {i}: parent {p:?} > {e:?}"));
                }
            }
            if self.positions.get(e.id) != i + 2 {
                return Err(format!("position of id {} is stale", e.id));
            }
        }
        Ok(())
    }
}

impl PriorityQueue for BinaryHeap {
    fn insert(&mut self, e: Entry) {
        BinaryHeap::insert(self, e).expect("binary heap insert");
    }
    fn delete_min(&mut self) -> Option<Entry> {
        BinaryHeap::delete_min(self)
    }
    fn io_stats(&self) -> IoStats {
        self.heap.stats() + self.positions.stats()
    }
    fn reset_io_stats(&mut self) {
        self.heap.reset_stats();
        self.positions.reset_stats();
    }
    fn name(&self) -> &'static str {
        "binary"
    }
}
