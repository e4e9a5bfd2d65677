//! Experiment drivers: the insert/delete-min workload, SSSP runs, memory
//! sweeps, and the CSV record they produce.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::binary::BinaryHeap;
use crate::bucket::BucketHeap;
use crate::em::{EmError, IoStats};
use crate::entry::{Entry, PriorityQueue};
use crate::funnel::FunnelHeap;
use crate::graph::{load_csr, Graph};
use crate::sssp::{self, SsspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Structure {
    Binary,
    Funnel,
    Bucket,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::Binary, Structure::Funnel, Structure::Bucket];

    pub fn build(self, cache_bytes: usize, block_bytes: usize) -> Result<Box<dyn PriorityQueue>, EmError> {
        Ok(match self {
            Structure::Binary => Box::new(BinaryHeap::new(cache_bytes, block_bytes)?),
            Structure::Funnel => Box::new(FunnelHeap::new(cache_bytes, block_bytes)?),
            Structure::Bucket => Box::new(BucketHeap::new(cache_bytes, block_bytes)?),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Binary => "binary",
            Structure::Funnel => "funnel",
            Structure::Bucket => "bucket",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Structure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(Structure::Binary),
            "funnel" => Ok(Structure::Funnel),
            "bucket" => Ok(Structure::Bucket),
            _ => Err(format!("unknown heap `{s}` (expected binary, funnel or bucket)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("run exceeded its time limit")]
    Timeout,
    #[error("heap defect: {0}")]
    Defect(String),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error(transparent)]
    Sssp(#[from] SsspError),
    #[error("distance mismatch at vertex {vertex}: got {got:?}, reference {expected:?}")]
    Mismatch { vertex: u64, got: Option<u64>, expected: Option<u64> },
}

/// Default element counts for the priority-queue benchmark: 2^16 .. 2^25.
pub const PQ_SIZES: [u64; 10] = [
    1 << 16,
    1 << 17,
    1 << 18,
    1 << 19,
    1 << 20,
    1 << 21,
    1 << 22,
    1 << 23,
    1 << 24,
    1 << 25,
];

/// Default vertex counts for SSSP on random graphs.
pub const SSSP_SIZES: [u64; 6] = [65_536, 131_072, 262_144, 524_288, 750_000, 1_048_576];

/// Vertex counts of the road-network instances the DIMACS suite is sized after.
pub const DIMACS_SUITE_VERTICES: [u64; 10] =
    [264_346, 321_270, 435_666, 1_070_376, 1_207_945, 1_524_453, 1_890_815, 2_758_119, 3_598_623, 6_262_104];

/// Default cache sizes for the memory sweep, in MB: 2 .. 1024, doubling.
pub const SWEEP_CACHE_MB: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// Element count for the memory sweep.
pub const SWEEP_SIZE: u64 = 1_000_000;

/// Keys for the workload are drawn below this bound.
pub const KEY_RANGE: u64 = 1 << 40;

/// Order-sensitive FNV-1a fold over popped (id, key) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checksum(pub u64);

impl Default for Checksum {
    fn default() -> Self {
        Checksum(0xcbf2_9ce4_8422_2325)
    }
}

impl Checksum {
    pub fn add(&mut self, e: Entry) {
        for b in e.id.to_le_bytes().into_iter().chain(e.key.to_le_bytes()) {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadResult {
    pub checksum: Checksum,
    pub operations: u64,
}

/// The generated inserts of the workload: phase 1 ids `0..n`, phase 3 ids
/// `n..n + n/2`, keys uniform below [`KEY_RANGE`].
pub fn workload_entries(n: u64, seed: u64) -> (Vec<Entry>, Vec<Entry>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = (0..n).map(|id| Entry::new(id, rng.gen_range(0..KEY_RANGE))).collect();
    let second = (n..n + n / 2).map(|id| Entry::new(id, rng.gen_range(0..KEY_RANGE))).collect();
    (first, second)
}

/// Insert `n`, delete-min `n/2`, insert `n/2`, delete-min `n`; the heap must
/// then be empty.
pub fn pq_workload(h: &mut dyn PriorityQueue, n: u64, seed: u64, deadline: Option<Instant>) -> Result<WorkloadResult, BenchError> {
    let (first, second) = workload_entries(n, seed);
    let mut sum = Checksum::default();
    let mut ops = 0u64;
    let tick = |ops: &mut u64| -> Result<(), BenchError> {
        *ops += 1;
        if *ops % 4096 == 0 && deadline.is_some_and(|d| Instant::now() > d) {
            return Err(BenchError::Timeout);
        }
        Ok(())
    };
    let pop = |h: &mut dyn PriorityQueue, sum: &mut Checksum| -> Result<(), BenchError> {
        let e = h.delete_min().ok_or_else(|| BenchError::Defect(format!("{} heap ran dry early", h.name())))?;
        sum.add(e);
        Ok(())
    };
    for e in first {
        h.insert(e);
        tick(&mut ops)?;
    }
    for _ in 0..n / 2 {
        pop(h, &mut sum)?;
        tick(&mut ops)?;
    }
    for e in second {
        h.insert(e);
        tick(&mut ops)?;
    }
    for _ in 0..n {
        pop(h, &mut sum)?;
        tick(&mut ops)?;
    }
    if let Some(e) = h.delete_min() {
        return Err(BenchError::Defect(format!("{} heap not empty after workload: {e:?}", h.name())));
    }
    Ok(WorkloadResult { checksum: sum, operations: ops })
}

/// Checksum the workload must produce, computed with an in-memory heap.
pub fn oracle_checksum(n: u64, seed: u64) -> Checksum {
    use std::cmp::Reverse;
    let (first, second) = workload_entries(n, seed);
    let mut h: std::collections::BinaryHeap<Reverse<Entry>> = first.into_iter().map(Reverse).collect();
    let mut sum = Checksum::default();
    for _ in 0..n / 2 {
        sum.add(h.pop().unwrap().0);
    }
    h.extend(second.into_iter().map(Reverse));
    while let Some(Reverse(e)) = h.pop() {
        sum.add(e);
    }
    sum
}

/// Run parameters shared by every experiment.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub cache_bytes: usize,
    pub block_bytes: usize,
    pub seed: u64,
    pub reps: u32,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub wall_seconds: f64,
    pub pq_reads: f64,
    pub pq_writes: f64,
    pub graph_reads: f64,
    pub graph_writes: f64,
    pub peak_heap_entries: u64,
}

impl Measurement {
    pub fn pq_transfers(&self) -> f64 {
        self.pq_reads + self.pq_writes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Done(Measurement),
    Timeout,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub experiment: String,
    pub structure: Structure,
    pub size: u64,
    pub cache_bytes: usize,
    pub block_bytes: usize,
    pub seed: u64,
    pub outcome: Outcome,
}

pub const CSV_HEADER: [&str; 12] = [
    "experiment",
    "structure",
    "size",
    "cache_bytes",
    "block_bytes",
    "seed",
    "wall_seconds",
    "pq_reads",
    "pq_writes",
    "graph_reads",
    "graph_writes",
    "peak_heap_entries",
];

impl BenchRecord {
    pub fn measurement(&self) -> Option<&Measurement> {
        match &self.outcome {
            Outcome::Done(m) => Some(m),
            Outcome::Timeout => None,
        }
    }

    /// Fields in [`CSV_HEADER`] order. A timed-out run shows `timeout` in
    /// every measured column.
    pub fn csv_fields(&self) -> Vec<String> {
        let mut row = vec![
            self.experiment.clone(),
            self.structure.to_string(),
            self.size.to_string(),
            self.cache_bytes.to_string(),
            self.block_bytes.to_string(),
            self.seed.to_string(),
        ];
        match &self.outcome {
            Outcome::Done(m) => row.extend([
                format!("{:.6}", m.wall_seconds),
                fmt_count(m.pq_reads),
                fmt_count(m.pq_writes),
                fmt_count(m.graph_reads),
                fmt_count(m.graph_writes),
                m.peak_heap_entries.to_string(),
            ]),
            Outcome::Timeout => row.extend(std::iter::repeat_n("timeout".to_string(), 6)),
        }
        row
    }

    pub fn from_csv_fields(fields: &[&str]) -> Result<BenchRecord, String> {
        if fields.len() != CSV_HEADER.len() {
            return Err(format!("expected {} fields, got {}", CSV_HEADER.len(), fields.len()));
        }
        let int = |k: usize| fields[k].parse::<u64>().map_err(|_| format!("bad {} `{}`", CSV_HEADER[k], fields[k]));
        let float = |k: usize| fields[k].parse::<f64>().map_err(|_| format!("bad {} `{}`", CSV_HEADER[k], fields[k]));
        let outcome = if fields[6..].iter().all(|f| *f == "timeout") {
            Outcome::Timeout
        } else {
            Outcome::Done(Measurement {
                wall_seconds: float(6)?,
                pq_reads: float(7)?,
                pq_writes: float(8)?,
                graph_reads: float(9)?,
                graph_writes: float(10)?,
                peak_heap_entries: int(11)?,
            })
        };
        Ok(BenchRecord {
            experiment: fields[0].to_string(),
            structure: fields[1].parse()?,
            size: int(2)?,
            cache_bytes: int(3)? as usize,
            block_bytes: int(4)? as usize,
            seed: int(5)?,
            outcome,
        })
    }
}

fn fmt_count(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

fn average(runs: &[Measurement]) -> Measurement {
    let n = runs.len() as f64;
    let mean = |f: fn(&Measurement) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Measurement {
        wall_seconds: mean(|m| m.wall_seconds),
        pq_reads: mean(|m| m.pq_reads),
        pq_writes: mean(|m| m.pq_writes),
        graph_reads: mean(|m| m.graph_reads),
        graph_writes: mean(|m| m.graph_writes),
        peak_heap_entries: runs.iter().map(|m| m.peak_heap_entries).max().unwrap_or(0),
    }
}

/// One workload run; counters cover the workload only, not heap construction.
pub fn measure_pq(structure: Structure, n: u64, cfg: &RunConfig) -> Result<Measurement, BenchError> {
    let mut heap = structure.build(cfg.cache_bytes, cfg.block_bytes)?;
    heap.reset_io_stats();
    let start = Instant::now();
    let deadline = cfg.timeout.map(|t| start + t);
    let result = pq_workload(heap.as_mut(), n, cfg.seed, deadline)?;
    let wall = start.elapsed().as_secs_f64();
    let stats = heap.io_stats();
    let expected = oracle_checksum(n, cfg.seed);
    if result.checksum != expected {
        return Err(BenchError::Defect(format!("{structure} checksum {:#x} != oracle {:#x}", result.checksum.0, expected.0)));
    }
    Ok(Measurement {
        wall_seconds: wall,
        pq_reads: stats.block_reads as f64,
        pq_writes: stats.block_writes as f64,
        graph_reads: 0.0,
        graph_writes: 0.0,
        // Live count peaks at n, after phase 1 and again after phase 3.
        peak_heap_entries: n,
    })
}

fn repeat(cfg: &RunConfig, mut run: impl FnMut() -> Result<Measurement, BenchError>) -> Result<Outcome, BenchError> {
    let mut runs = Vec::new();
    for _ in 0..cfg.reps.max(1) {
        match run() {
            Ok(m) => runs.push(m),
            Err(BenchError::Timeout) => return Ok(Outcome::Timeout),
            Err(e) => return Err(e),
        }
    }
    Ok(Outcome::Done(average(&runs)))
}

/// Priority-queue workload for every size in `sizes`. After a timeout the
/// larger sizes are recorded as timeouts without running.
pub fn run_pq_bench(structure: Structure, sizes: &[u64], cfg: &RunConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let mut out = Vec::new();
    let mut timed_out = false;
    for &n in sizes {
        let outcome = if timed_out { Outcome::Timeout } else { repeat(cfg, || measure_pq(structure, n, cfg))? };
        timed_out |= outcome == Outcome::Timeout;
        out.push(record("pq", structure, n, cfg, cfg.cache_bytes, outcome));
    }
    Ok(out)
}

/// Fixed `n`, varying the cache size.
pub fn mem_sweep(structure: Structure, n: u64, caches: &[usize], cfg: &RunConfig) -> Result<Vec<BenchRecord>, BenchError> {
    let mut out = Vec::new();
    for &cache in caches {
        let run_cfg = RunConfig { cache_bytes: cache, ..*cfg };
        let outcome = repeat(&run_cfg, || measure_pq(structure, n, &run_cfg))?;
        out.push(record("mem-sweep", structure, n, &run_cfg, cache, outcome));
    }
    Ok(out)
}

fn record(experiment: &str, structure: Structure, size: u64, cfg: &RunConfig, cache: usize, outcome: Outcome) -> BenchRecord {
    BenchRecord {
        experiment: experiment.to_string(),
        structure,
        size,
        cache_bytes: cache,
        block_bytes: cfg.block_bytes,
        seed: cfg.seed,
        outcome,
    }
}

/// Start vertex for a seeded run.
pub fn random_source(vertex_count: u64, seed: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed).gen_range(0..vertex_count)
}

/// One SSSP run on `g` from a seeded random source. Distances are checked
/// against the in-memory reference when `V <= verify_cap`.
pub fn measure_sssp(structure: Structure, g: &Graph, cfg: &RunConfig, verify_cap: u64) -> Result<Measurement, BenchError> {
    let source = random_source(g.vertex_count(), cfg.seed);
    let mut eg = load_csr(g, cfg.cache_bytes, cfg.block_bytes)?;
    let deadline = cfg.timeout.map(|t| Instant::now() + t);
    let start = Instant::now();
    let opts = sssp::RunOptions { cache_bytes: cfg.cache_bytes, block_bytes: cfg.block_bytes, deadline };
    let result = match structure {
        Structure::Binary => sssp::sssp_binary(&mut eg, source, &opts),
        Structure::Funnel => sssp::sssp_funnel(&mut eg, source, &opts),
        Structure::Bucket => sssp::sssp_bucket_checked(g, &mut eg, source, &opts),
    };
    let result = match result {
        Err(SsspError::Timeout) => return Err(BenchError::Timeout),
        r => r?,
    };
    let wall = start.elapsed().as_secs_f64();
    if g.vertex_count() <= verify_cap {
        let reference = sssp::sssp_reference(g, source)?;
        if let Some(v) = (0..g.vertex_count()).find(|&v| reference.dist[v as usize] != result.dist[v as usize]) {
            return Err(BenchError::Mismatch { vertex: v, got: result.dist[v as usize], expected: reference.dist[v as usize] });
        }
    }
    Ok(Measurement {
        wall_seconds: wall,
        pq_reads: result.pq_stats.block_reads as f64,
        pq_writes: result.pq_stats.block_writes as f64,
        graph_reads: result.graph_stats.block_reads as f64,
        graph_writes: result.graph_stats.block_writes as f64,
        peak_heap_entries: result.peak_heap_entries,
    })
}

/// SSSP over a list of named graphs; `size` is the vertex count.
pub fn run_sssp_bench<'a>(
    structure: Structure,
    experiment: &str,
    graphs: impl IntoIterator<Item = &'a Graph>,
    cfg: &RunConfig,
    verify_cap: u64,
) -> Result<Vec<BenchRecord>, BenchError> {
    let mut out = Vec::new();
    for g in graphs {
        let outcome = repeat(cfg, || measure_sssp(structure, g, cfg, verify_cap))?;
        out.push(record(experiment, structure, g.vertex_count(), cfg, cfg.cache_bytes, outcome));
    }
    Ok(out)
}

/// Transfers recorded by an [`IoStats`] pair, as floats for averaging.
pub fn transfers(stats: &IoStats) -> f64 {
    stats.transfers() as f64
}
