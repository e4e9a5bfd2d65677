use std::cmp::Ordering;

use crate::em::{IoStats, Record};

/// An (element id, priority key) pair, ordered by key and then by id.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Entry {
    pub id: u64,
    pub key: u64,
}

impl Entry {
    pub const fn new(id: u64, key: u64) -> Self {
        Entry { id, key }
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.key, self.id).cmp(&(other.key, other.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Record for Entry {
    const BYTES: usize = 16;
    fn encode(&self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.id.to_le_bytes());
        out[8..16].copy_from_slice(&self.key.to_le_bytes());
    }
    fn decode(buf: &[u8]) -> Self {
        Entry {
            id: u64::from_le_bytes(buf[..8].try_into().unwrap()),
            key: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
        }
    }
}

/// Insert/DeleteMin interface shared by the three heaps.
///
/// For the bucket heap `insert` is an update, so inserting a live id keeps the
/// smaller key instead of adding a second copy.
pub trait PriorityQueue {
    fn insert(&mut self, e: Entry);
    fn delete_min(&mut self) -> Option<Entry>;
    /// Merged transfer counters of every vector the heap owns.
    fn io_stats(&self) -> IoStats;
    fn reset_io_stats(&mut self);
    fn name(&self) -> &'static str;
}
