//! Block-transfer-counting external-memory vector.
//!
//! [`BlockVector`] behaves like a growable array of fixed-size records, but
//! every access goes through a private LRU cache of `cache_bytes / block_bytes`
//! block frames. A miss reads one block from the backing store; evicting a
//! dirty frame writes one block back. Both events are counted exactly in
//! [`IoStats`], which is what the benchmarks report instead of I/O wait time.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const KB: usize = 1 << 10;
pub const MB: usize = 1 << 20;

/// Default block size (4096 bytes).
pub const DEFAULT_BLOCK_BYTES: usize = 4096;
/// Default per-vector cache size (16MB).
pub const DEFAULT_CACHE_BYTES: usize = 16 * MB;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmError {
    #[error("block size {block} is smaller than record size {record}")]
    BlockSmallerThanRecord { block: usize, record: usize },
    #[error("cache size {cache} is smaller than block size {block}")]
    CacheSmallerThanBlock { cache: usize, block: usize },
    #[error("record size must be positive")]
    ZeroRecord,
    #[error("config record size {config} does not match stored type size {actual}")]
    RecordSizeMismatch { config: usize, actual: usize },
    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: u64, len: u64 },
    #[error("cannot truncate to {requested}, length is {len}")]
    TruncateBeyondLength { requested: u64, len: u64 },
    #[error("backing file: {0}")]
    Io(String),
    #[error("bad header in {path}: {reason}")]
    BadHeader { path: String, reason: String },
}

impl From<std::io::Error> for EmError {
    fn from(e: std::io::Error) -> Self {
        EmError::Io(e.to_string())
    }
}

/// A fixed-size record that can be stored in a [`BlockVector`].
///
/// Encoding is little-endian and must occupy exactly `BYTES` bytes. The
/// all-zero encoding must decode to `Default::default()`.
pub trait Record: Copy + Default {
    const BYTES: usize;
    fn encode(&self, out: &mut [u8]);
    fn decode(buf: &[u8]) -> Self;
}

impl Record for u64 {
    const BYTES: usize = 8;
    fn encode(&self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.to_le_bytes());
    }
    fn decode(buf: &[u8]) -> Self {
        u64::from_le_bytes(buf[..8].try_into().unwrap())
    }
}

/// Cache and block geometry for one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmConfig {
    pub cache_bytes: usize,
    pub block_bytes: usize,
    pub record_bytes: usize,
}

impl EmConfig {
    pub fn new(cache_bytes: usize, block_bytes: usize, record_bytes: usize) -> Result<Self, EmError> {
        if record_bytes == 0 {
            return Err(EmError::ZeroRecord);
        }
        if block_bytes < record_bytes {
            return Err(EmError::BlockSmallerThanRecord { block: block_bytes, record: record_bytes });
        }
        if cache_bytes < block_bytes {
            return Err(EmError::CacheSmallerThanBlock { cache: cache_bytes, block: block_bytes });
        }
        Ok(EmConfig { cache_bytes, block_bytes, record_bytes })
    }

    /// Geometry for records of type `T`.
    pub fn for_record<T: Record>(cache_bytes: usize, block_bytes: usize) -> Result<Self, EmError> {
        Self::new(cache_bytes, block_bytes, T::BYTES)
    }

    pub fn records_per_block(&self) -> usize {
        self.block_bytes / self.record_bytes
    }

    pub fn frames(&self) -> usize {
        self.cache_bytes / self.block_bytes
    }
}

/// Exact transfer counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoStats {
    pub block_reads: u64,
    pub block_writes: u64,
    pub evictions: u64,
}

impl IoStats {
    /// Reads plus writes.
    pub fn transfers(&self) -> u64 {
        self.block_reads + self.block_writes
    }

    /// Counter deltas since an earlier snapshot.
    pub fn since(&self, earlier: &IoStats) -> IoStats {
        IoStats {
            block_reads: self.block_reads - earlier.block_reads,
            block_writes: self.block_writes - earlier.block_writes,
            evictions: self.evictions - earlier.evictions,
        }
    }
}

impl Add for IoStats {
    type Output = IoStats;
    fn add(self, rhs: IoStats) -> IoStats {
        IoStats {
            block_reads: self.block_reads + rhs.block_reads,
            block_writes: self.block_writes + rhs.block_writes,
            evictions: self.evictions + rhs.evictions,
        }
    }
}

impl AddAssign for IoStats {
    fn add_assign(&mut self, rhs: IoStats) {
        *self = *self + rhs;
    }
}

/// Where evicted blocks go.
pub enum Backing {
    /// Sparse in-memory arena. Blocks never written read back as zeros.
    Arena,
    /// Raw little-endian block dump at `path`, with a `<path>.hdr` sidecar.
    File(PathBuf),
}

enum Store<T> {
    Arena(Vec<Option<Box<[T]>>>),
    File { file: File, path: PathBuf, scratch: Vec<u8> },
}

impl<T: Record> Store<T> {
    fn read_block(&mut self, block: usize, out: &mut [T], block_bytes: usize) -> Result<(), EmError> {
        match self {
            Store::Arena(blocks) => match blocks.get(block).and_then(|b| b.as_ref()) {
                Some(data) => out.copy_from_slice(data),
                None => out.fill(T::default()),
            },
            Store::File { file, scratch, .. } => {
                scratch.clear();
                scratch.resize(block_bytes, 0);
                file.seek(SeekFrom::Start((block * block_bytes) as u64))?;
                // Reads past the end of the file leave zeros.
                let mut filled = 0;
                while filled < block_bytes {
                    let n = file.read(&mut scratch[filled..])?;
                    if n == 0 {
                        break;
                    }
                    filled += n;
                }
                for (k, rec) in out.iter_mut().enumerate() {
                    *rec = T::decode(&scratch[k * T::BYTES..]);
                }
            }
        }
        Ok(())
    }

    fn write_block(&mut self, block: usize, data: &[T], block_bytes: usize) -> Result<(), EmError> {
        match self {
            Store::Arena(blocks) => {
                if blocks.len() <= block {
                    blocks.resize_with(block + 1, || None);
                }
                match &mut blocks[block] {
                    Some(dst) => dst.copy_from_slice(data),
                    slot => *slot = Some(data.to_vec().into_boxed_slice()),
                }
            }
            Store::File { file, scratch, .. } => {
                scratch.clear();
                scratch.resize(block_bytes, 0);
                for (k, rec) in data.iter().enumerate() {
                    rec.encode(&mut scratch[k * T::BYTES..(k + 1) * T::BYTES]);
                }
                file.seek(SeekFrom::Start((block * block_bytes) as u64))?;
                file.write_all(scratch)?;
            }
        }
        Ok(())
    }
}

const NONE: u32 = u32::MAX;

struct Frame<T> {
    block: usize,
    data: Box<[T]>,
    dirty: bool,
    prev: u32,
    next: u32,
}

/// Fixed-record paged array with a private LRU block cache.
pub struct BlockVector<T: Record> {
    config: EmConfig,
    per_block: usize,
    len: u64,
    store: Store<T>,
    frames: Vec<Frame<T>>,
    max_frames: usize,
    // block id -> frame index, NONE when not resident
    resident: Vec<u32>,
    // MRU at head, LRU at tail
    head: u32,
    tail: u32,
    stats: IoStats,
}

impl<T: Record> BlockVector<T> {
    pub fn new(config: EmConfig) -> Result<Self, EmError> {
        Self::with_backing(config, Backing::Arena)
    }

    pub fn with_backing(config: EmConfig, backing: Backing) -> Result<Self, EmError> {
        let config = EmConfig::new(config.cache_bytes, config.block_bytes, config.record_bytes)?;
        if config.record_bytes != T::BYTES {
            return Err(EmError::RecordSizeMismatch { config: config.record_bytes, actual: T::BYTES });
        }
        let store = match backing {
            Backing::Arena => Store::Arena(Vec::new()),
            Backing::File(path) => {
                let file = OpenOptions::new().read(true).write(true).create(true).truncate(true).open(&path)?;
                Store::File { file, path, scratch: Vec::new() }
            }
        };
        Ok(BlockVector {
            config,
            per_block: config.records_per_block(),
            len: 0,
            store,
            frames: Vec::new(),
            max_frames: config.frames(),
            resident: Vec::new(),
            head: NONE,
            tail: NONE,
            stats: IoStats::default(),
        })
    }

    /// Reopens a file-backed vector written by [`BlockVector::flush`]. The cache starts cold.
    pub fn open_file(path: &Path, cache_bytes: usize) -> Result<Self, EmError> {
        let hdr_path = header_path(path);
        let text = std::fs::read_to_string(&hdr_path)?;
        let bad = |reason: &str| EmError::BadHeader { path: hdr_path.display().to_string(), reason: reason.into() };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "emvec" || fields[1] != "v1" {
            return Err(bad("expected `emvec v1 <record_bytes> <block_bytes> <length>`"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad("non-numeric field"));
        let (record, block, len) = (num(fields[2])? as usize, num(fields[3])? as usize, num(fields[4])?);
        let config = EmConfig::new(cache_bytes, block, record)?;
        if record != T::BYTES {
            return Err(EmError::RecordSizeMismatch { config: record, actual: T::BYTES });
        }
        let file = OpenOptions::new().read(true).write(true).open(path)?;
        let mut v = BlockVector {
            config,
            per_block: config.records_per_block(),
            len: 0,
            store: Store::File { file, path: path.to_path_buf(), scratch: Vec::new() },
            frames: Vec::new(),
            max_frames: config.frames(),
            resident: Vec::new(),
            head: NONE,
            tail: NONE,
            stats: IoStats::default(),
        };
        v.extend_zeroed(len);
        Ok(v)
    }

    pub fn config(&self) -> &EmConfig {
        &self.config
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stats(&self) -> IoStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = IoStats::default();
    }

    /// Number of blocks currently cached.
    pub fn resident_blocks(&self) -> usize {
        self.frames.len()
    }

    pub fn records_per_block(&self) -> usize {
        self.per_block
    }

    pub fn try_get(&mut self, i: u64) -> Result<T, EmError> {
        if i >= self.len {
            return Err(EmError::OutOfRange { index: i, len: self.len });
        }
        let (frame, off) = self.locate(i);
        Ok(self.frames[frame].data[off])
    }

    pub fn try_set(&mut self, i: u64, r: T) -> Result<(), EmError> {
        if i >= self.len {
            return Err(EmError::OutOfRange { index: i, len: self.len });
        }
        let (frame, off) = self.locate(i);
        let f = &mut self.frames[frame];
        f.data[off] = r;
        f.dirty = true;
        Ok(())
    }

    /// Reads record `i` without touching the cache order or the counters.
    /// For invariant checks only.
    pub fn inspect(&self, i: u64) -> T {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        let block = (i / self.per_block as u64) as usize;
        let off = (i % self.per_block as u64) as usize;
        match self.resident.get(block) {
            Some(&f) if f != NONE => self.frames[f as usize].data[off],
            _ => match &self.store {
                Store::Arena(blocks) => blocks.get(block).and_then(|b| b.as_ref()).map_or_else(T::default, |b| b[off]),
                Store::File { path, .. } => {
                    let bytes = std::fs::read(path).expect("backing file read");
                    let at = block * self.config.block_bytes + off * T::BYTES;
                    bytes.get(at..at + T::BYTES).map_or_else(T::default, T::decode)
                }
            },
        }
    }

    /// Panics if `i >= len()`.
    #[inline]
    pub fn get(&mut self, i: u64) -> T {
        match self.try_get(i) {
            Ok(r) => r,
            Err(e) => panic!("{e}"),
        }
    }

    /// Panics if `i >= len()`.
    #[inline]
    pub fn set(&mut self, i: u64, r: T) {
        if let Err(e) = self.try_set(i, r) {
            panic!("{e}");
        }
    }

    pub fn push(&mut self, r: T) {
        self.extend_zeroed(1);
        let i = self.len - 1;
        self.set(i, r);
    }

    /// Grows the logical length by `n` zero records. Costs no transfers.
    pub fn extend_zeroed(&mut self, n: u64) {
        self.len += n;
        let blocks = self.len.div_ceil(self.per_block as u64) as usize;
        if blocks > self.resident.len() {
            let target = blocks.max(self.resident.len() * 2);
            self.resident.resize(target, NONE);
        }
    }

    /// Shrinks the logical length. Costs no transfers.
    pub fn truncate(&mut self, n: u64) -> Result<(), EmError> {
        if n > self.len {
            return Err(EmError::TruncateBeyondLength { requested: n, len: self.len });
        }
        self.len = n;
        Ok(())
    }

    /// Writes back every dirty resident block.
    pub fn flush(&mut self) -> Result<(), EmError> {
        let block_bytes = self.config.block_bytes;
        for f in self.frames.iter_mut() {
            if f.dirty {
                self.store.write_block(f.block, &f.data, block_bytes)?;
                self.stats.block_writes += 1;
                f.dirty = false;
            }
        }
        if let Store::File { path, .. } = &self.store {
            let line = format!("emvec v1 {} {} {}\n", self.config.record_bytes, self.config.block_bytes, self.len);
            std::fs::write(header_path(path), line)?;
        }
        Ok(())
    }

    /// Writes back dirty blocks and empties the cache, so the next access to
    /// every block is a miss.
    pub fn drop_cache(&mut self) -> Result<(), EmError> {
        self.flush()?;
        for f in self.frames.drain(..) {
            self.resident[f.block] = NONE;
        }
        self.head = NONE;
        self.tail = NONE;
        Ok(())
    }

    /// Returns (frame index, offset in block) for record `i`, faulting the block in if needed.
    #[inline]
    fn locate(&mut self, i: u64) -> (usize, usize) {
        let block = (i / self.per_block as u64) as usize;
        let off = (i % self.per_block as u64) as usize;
        let frame = self.resident[block];
        if frame != NONE {
            if frame != self.head {
                self.unlink(frame);
                self.push_front(frame);
            }
            return (frame as usize, off);
        }
        (self.fault(block) as usize, off)
    }

    fn fault(&mut self, block: usize) -> u32 {
        let block_bytes = self.config.block_bytes;
        let frame = if self.frames.len() < self.max_frames {
            self.frames.push(Frame {
                block,
                data: vec![T::default(); self.per_block].into_boxed_slice(),
                dirty: false,
                prev: NONE,
                next: NONE,
            });
            (self.frames.len() - 1) as u32
        } else {
            let victim = self.tail;
            self.unlink(victim);
            let f = &mut self.frames[victim as usize];
            if f.dirty {
                self.store.write_block(f.block, &f.data, block_bytes).expect("backing store write failed");
                self.stats.block_writes += 1;
                f.dirty = false;
            }
            self.stats.evictions += 1;
            self.resident[f.block] = NONE;
            f.block = block;
            victim
        };
        let f = &mut self.frames[frame as usize];
        self.store.read_block(block, &mut f.data, block_bytes).expect("backing store read failed");
        self.stats.block_reads += 1;
        self.resident[block] = frame;
        self.push_front(frame);
        frame
    }

    fn unlink(&mut self, frame: u32) {
        let (prev, next) = {
            let f = &self.frames[frame as usize];
            (f.prev, f.next)
        };
        if prev != NONE {
            self.frames[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NONE {
            self.frames[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
    }

    fn push_front(&mut self, frame: u32) {
        let old = self.head;
        {
            let f = &mut self.frames[frame as usize];
            f.prev = NONE;
            f.next = old;
        }
        if old != NONE {
            self.frames[old as usize].prev = frame;
        } else {
            self.tail = frame;
        }
        self.head = frame;
    }
}

fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}
