//! Graphs: in-memory CSR, G(n,p) generation, DIMACS `.gr` text, and a CSR
//! copy stored in a [`BlockVector`] so adjacency scans are counted.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::em::{BlockVector, EmConfig, EmError, IoStats, Record};

/// One directed arc. In an [`ExternalGraph`] the same 16-byte record also
/// carries the offset table, with the offset in `target`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub target: u64,
    pub weight: u64,
}

impl Record for Arc {
    const BYTES: usize = 16;
    fn encode(&self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.target.to_le_bytes());
        out[8..16].copy_from_slice(&self.weight.to_le_bytes());
    }
    fn decode(buf: &[u8]) -> Self {
        Arc {
            target: u64::from_le_bytes(buf[..8].try_into().unwrap()),
            weight: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
        }
    }
}

/// Compressed sparse row adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<u64>,
    arcs: Vec<Arc>,
}

impl Graph {
    /// Builds a graph from directed arcs `(source, target, weight)`. Arcs of a
    /// vertex keep their input order.
    pub fn from_arcs(vertex_count: u64, arcs: &[(u64, u64, u64)]) -> Graph {
        let n = vertex_count as usize;
        let mut offsets = vec![0u64; n + 1];
        for &(u, _, _) in arcs {
            offsets[u as usize + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut cursor = offsets.clone();
        let mut out = vec![Arc::default(); arcs.len()];
        for &(u, v, w) in arcs {
            let at = &mut cursor[u as usize];
            out[*at as usize] = Arc { target: v, weight: w };
            *at += 1;
        }
        Graph { offsets, arcs: out }
    }

    /// Builds an undirected graph: each edge becomes two arcs.
    pub fn from_edges(vertex_count: u64, edges: &[(u64, u64, u64)]) -> Graph {
        let arcs: Vec<_> = edges.iter().flat_map(|&(u, v, w)| [(u, v, w), (v, u, w)]).collect();
        Graph::from_arcs(vertex_count, &arcs)
    }

    pub fn vertex_count(&self) -> u64 {
        (self.offsets.len() - 1) as u64
    }

    /// Directed arc count.
    pub fn arc_count(&self) -> u64 {
        self.arcs.len() as u64
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn neighbors(&self, v: u64) -> &[Arc] {
        let v = v as usize;
        &self.arcs[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn max_degree(&self) -> u64 {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// All arcs as `(source, target, weight)`.
    pub fn arc_list(&self) -> Vec<(u64, u64, u64)> {
        (0..self.vertex_count())
            .flat_map(|u| self.neighbors(u).iter().map(move |a| (u, a.target, a.weight)))
            .collect()
    }

    /// True when every arc `(u,v,w)` is matched by an arc `(v,u,w)`, counting multiplicity.
    pub fn is_symmetric(&self) -> bool {
        self.first_unmatched_arc().is_none()
    }

    /// Index (in [`Graph::arc_list`] order) of an arc without a reverse twin.
    fn first_unmatched_arc(&self) -> Option<usize> {
        let list = self.arc_list();
        let mut forward: Vec<(u64, u64, u64, usize)> = list.iter().enumerate().map(|(k, &(u, v, w))| (u, v, w, k)).collect();
        let mut backward: Vec<(u64, u64, u64)> = list.iter().map(|&(u, v, w)| (v, u, w)).collect();
        forward.sort_unstable();
        backward.sort_unstable();
        forward.iter().zip(backward.iter()).find(|(f, b)| (f.0, f.1, f.2) != **b).map(|(f, _)| f.3)
    }
}

/// Parameters of an Erdős–Rényi G(n,p) graph with uniform integer weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnpSpec {
    pub n: u64,
    pub p: f64,
    pub weight_max: u64,
    pub seed: u64,
}

pub const DEFAULT_WEIGHT_MAX: u64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum GnpSpecError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    BadValue { key: String, value: String },
    #[error("expected key=value, got `{0}`")]
    Syntax(String),
    #[error("missing n")]
    MissingN,
    #[error("invalid spec: {0}")]
    Invalid(String),
}

impl GnpSpec {
    /// `p = 16/(n-1)`, an expected 8n undirected edges.
    pub fn sparse(n: u64, seed: u64) -> GnpSpec {
        let p = if n > 1 { (16.0 / (n - 1) as f64).min(1.0) } else { 0.0 };
        GnpSpec { n, p, weight_max: DEFAULT_WEIGHT_MAX, seed }
    }

    pub fn validate(&self) -> Result<(), GnpSpecError> {
        if self.n < 1 {
            return Err(GnpSpecError::Invalid("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(GnpSpecError::Invalid(format!("p = {} outside [0,1]", self.p)));
        }
        if self.weight_max < 1 {
            return Err(GnpSpecError::Invalid("wmax must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses `n=…, p=…, wmax=…, seed=…`, separated by commas or newlines.
    /// Only `n` is required; the rest default as in [`GnpSpec::sparse`].
    pub fn parse(text: &str) -> Result<GnpSpec, GnpSpecError> {
        let mut n = None;
        let mut p = None;
        let mut wmax = DEFAULT_WEIGHT_MAX;
        let mut seed = 0;
        for item in text.split([',', '\n']).map(str::trim).filter(|s| !s.is_empty() && !s.starts_with('#')) {
            let (key, value) = item.split_once('=').ok_or_else(|| GnpSpecError::Syntax(item.into()))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || GnpSpecError::BadValue { key: key.into(), value: value.into() };
            match key {
                "n" => n = Some(value.parse().map_err(|_| bad())?),
                "p" => p = Some(value.parse().map_err(|_| bad())?),
                "wmax" => wmax = value.parse().map_err(|_| bad())?,
                "seed" => seed = value.parse().map_err(|_| bad())?,
                _ => return Err(GnpSpecError::UnknownKey(key.into())),
            }
        }
        let mut spec = GnpSpec::sparse(n.ok_or(GnpSpecError::MissingN)?, seed);
        spec.weight_max = wmax;
        if let Some(p) = p {
            spec.p = p;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Samples an undirected G(n,p) graph. Uses ChaCha8 seeded from
/// `spec.seed` and geometric skipping over the pairs `w < v`, so expected
/// time is linear in the output. No self-loops, no parallel edges.
pub fn gen_gnp(spec: &GnpSpec) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let mut edges = Vec::new();
    if spec.p >= 1.0 {
        for v in 1..n {
            for w in 0..v {
                edges.push((v, w, rng.gen_range(1..=spec.weight_max)));
            }
        }
    } else if spec.p > 0.0 {
        let log_q = (1.0 - spec.p).ln();
        let (mut v, mut w): (u64, i64) = (1, -1);
        while v < n {
            let r: f64 = rng.gen();
            let skip = ((1.0 - r).ln() / log_q).floor();
            w = w.saturating_add(1).saturating_add(if skip >= i64::MAX as f64 { i64::MAX } else { skip as i64 });
            while v < n && w >= v as i64 {
                w -= v as i64;
                v += 1;
            }
            if v < n {
                edges.push((v, w as u64, rng.gen_range(1..=spec.weight_max)));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("line {line}: no problem line `p sp <n> <m>` before end of input")]
    MissingProblemLine { line: usize },
    #[error("line {line}: second problem line")]
    DuplicateProblemLine { line: usize },
    #[error("line {line}: arc before problem line")]
    ArcBeforeProblemLine { line: usize },
    #[error("line {line}: vertex {id} outside 1..={n}")]
    VertexOutOfRange { line: usize, id: u64, n: u64 },
    #[error("line {line}: weight {weight} is not positive")]
    NonPositiveWeight { line: usize, weight: i64 },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: problem line declares {declared} arcs, found {found}")]
    ArcCountMismatch { line: usize, declared: u64, found: u64 },
    #[error("line {line}: arc has no reverse twin but the graph must be undirected")]
    NotSymmetric { line: usize },
    #[error("read error: {0}")]
    Io(String),
}

impl DimacsError {
    pub fn line(&self) -> Option<usize> {
        match self {
            DimacsError::MissingProblemLine { line }
            | DimacsError::DuplicateProblemLine { line }
            | DimacsError::ArcBeforeProblemLine { line }
            | DimacsError::VertexOutOfRange { line, .. }
            | DimacsError::NonPositiveWeight { line, .. }
            | DimacsError::Malformed { line, .. }
            | DimacsError::ArcCountMismatch { line, .. }
            | DimacsError::NotSymmetric { line } => Some(*line),
            DimacsError::Io(_) => None,
        }
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, DimacsError> {
    let tok = tok.ok_or_else(|| DimacsError::Malformed { line, reason: format!("missing {what}") })?;
    tok.parse().map_err(|_| DimacsError::Malformed { line, reason: format!("bad {what} `{tok}`") })
}

/// Reads a DIMACS shortest-path `.gr` file. Vertex ids become 0-based.
/// With `undirected`, every arc must have a reverse twin of equal weight.
pub fn parse_dimacs<R: BufRead>(input: R, undirected: bool) -> Result<Graph, DimacsError> {
    let mut problem: Option<(u64, u64)> = None;
    let mut arcs = Vec::new();
    let mut arc_lines = Vec::new();
    let mut line_no = 0;
    for line in input.lines() {
        line_no += 1;
        let line = line.map_err(|e| DimacsError::Io(e.to_string()))?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            None | Some("c") => continue,
            Some("p") => {
                if problem.is_some() {
                    return Err(DimacsError::DuplicateProblemLine { line: line_no });
                }
                let kind: String = field(toks.next(), line_no, "problem kind")?;
                if kind != "sp" {
                    return Err(DimacsError::Malformed { line: line_no, reason: format!("problem kind `{kind}`, expected `sp`") });
                }
                let n = field(toks.next(), line_no, "vertex count")?;
                let m = field(toks.next(), line_no, "arc count")?;
                problem = Some((n, m));
            }
            Some("a") => {
                let Some((n, _)) = problem else {
                    return Err(DimacsError::ArcBeforeProblemLine { line: line_no });
                };
                let u: u64 = field(toks.next(), line_no, "source")?;
                let v: u64 = field(toks.next(), line_no, "target")?;
                let w: i64 = field(toks.next(), line_no, "weight")?;
                for id in [u, v] {
                    if id < 1 || id > n {
                        return Err(DimacsError::VertexOutOfRange { line: line_no, id, n });
                    }
                }
                if w <= 0 {
                    return Err(DimacsError::NonPositiveWeight { line: line_no, weight: w });
                }
                arcs.push((u - 1, v - 1, w as u64));
                arc_lines.push(line_no);
            }
            Some(other) => {
                return Err(DimacsError::Malformed { line: line_no, reason: format!("unknown line type `{other}`") });
            }
        }
        if toks.next().is_some() {
            return Err(DimacsError::Malformed { line: line_no, reason: "trailing tokens".into() });
        }
    }
    let (n, m) = problem.ok_or(DimacsError::MissingProblemLine { line: line_no })?;
    if arcs.len() as u64 != m {
        return Err(DimacsError::ArcCountMismatch { line: line_no, declared: m, found: arcs.len() as u64 });
    }
    if undirected {
        // Stable CSR build: arc_list order is input order grouped by source.
        let mut by_source: Vec<usize> = (0..arcs.len()).collect();
        by_source.sort_by_key(|&k| arcs[k].0);
        let g = Graph::from_arcs(n, &arcs);
        if let Some(k) = g.first_unmatched_arc() {
            return Err(DimacsError::NotSymmetric { line: arc_lines[by_source[k]] });
        }
        return Ok(g);
    }
    Ok(Graph::from_arcs(n, &arcs))
}

/// Writes `p sp V E` followed by one `a` line per arc, 1-based.
pub fn write_dimacs<W: Write>(g: &Graph, mut out: W) -> std::io::Result<()> {
    writeln!(out, "p sp {} {}", g.vertex_count(), g.arc_count())?;
    for u in 0..g.vertex_count() {
        for a in g.neighbors(u) {
            writeln!(out, "a {} {} {}", u + 1, a.target + 1, a.weight)?;
        }
    }
    Ok(())
}

/// CSR stored in one [`BlockVector`]: `V+1` offset records, then the arcs.
pub struct ExternalGraph {
    store: BlockVector<Arc>,
    vertex_count: u64,
    arc_count: u64,
    max_degree: u64,
}

impl ExternalGraph {
    pub fn vertex_count(&self) -> u64 {
        self.vertex_count
    }

    pub fn arc_count(&self) -> u64 {
        self.arc_count
    }

    pub fn max_degree(&self) -> u64 {
        self.max_degree
    }

    /// Arc indices of `v`'s neighborhood.
    pub fn arc_range(&mut self, v: u64) -> std::ops::Range<u64> {
        let start = self.store.get(v).target;
        let end = self.store.get(v + 1).target;
        start..end
    }

    pub fn arc(&mut self, index: u64) -> Arc {
        self.store.get(self.vertex_count + 1 + index)
    }

    /// Neighborhood of `v`, read through the cache.
    pub fn neighbors(&mut self, v: u64) -> Vec<Arc> {
        self.arc_range(v).map(|i| self.arc(i)).collect()
    }

    pub fn stats(&self) -> IoStats {
        self.store.stats()
    }

    pub fn reset_stats(&mut self) {
        self.store.reset_stats();
    }

    pub fn config(&self) -> &EmConfig {
        self.store.config()
    }

    /// Empties the cache so the next run starts cold.
    pub fn drop_cache(&mut self) -> Result<(), EmError> {
        self.store.drop_cache()
    }
}

/// Copies `g` into a fresh [`BlockVector`] with its own cache. The copy is
/// flushed and its counters reset, so the returned graph starts with a cold
/// cache and zero stats.
pub fn load_csr(g: &Graph, cache_bytes: usize, block_bytes: usize) -> Result<ExternalGraph, EmError> {
    let config = EmConfig::for_record::<Arc>(cache_bytes, block_bytes)?;
    let mut staging = BlockVector::<Arc>::new(config)?;
    for &o in g.offsets() {
        staging.push(Arc { target: o, weight: 0 });
    }
    for u in 0..g.vertex_count() {
        for a in g.neighbors(u) {
            staging.push(*a);
        }
    }
    staging.drop_cache()?;
    staging.reset_stats();
    let store = staging;
    Ok(ExternalGraph { store, vertex_count: g.vertex_count(), arc_count: g.arc_count(), max_degree: g.max_degree() })
}
