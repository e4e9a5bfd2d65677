use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use copq::bench::{
    self, BenchRecord, RunConfig, Structure, CSV_HEADER, PQ_SIZES, SSSP_SIZES, SWEEP_CACHE_MB, SWEEP_SIZE,
};
use copq::em::MB;
use copq::graph::{gen_gnp, parse_dimacs, write_dimacs, Graph, GnpSpec};
use copq::sssp::{self, RunOptions};

#[derive(Parser)]
#[command(name = "copq-bench", version, about = "Priority-queue and SSSP experiments on a simulated block device")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Insert/delete-min workload for each size.
    PqBench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated element counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
    },
    /// Dijkstra from a random source on G(n, 16/(n-1)) graphs or DIMACS files.
    SsspBench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated vertex counts for random graphs.
        #[arg(long, value_delimiter = ',', conflicts_with = "dimacs")]
        sizes: Option<Vec<u64>>,
        /// DIMACS `.gr` files to run instead of random graphs.
        #[arg(long, num_args = 1..)]
        dimacs: Vec<PathBuf>,
        /// Check distances against the in-memory reference up to this many vertices.
        #[arg(long, default_value_t = 1 << 20)]
        verify_cap: u64,
    },
    /// Fixed element count, varying cache size.
    MemSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = SWEEP_SIZE)]
        size: u64,
        /// Comma-separated cache sizes in MB (fractions allowed).
        #[arg(long, value_delimiter = ',')]
        caches_mb: Option<Vec<f64>>,
    },
    /// Write a random G(n,p) graph in DIMACS format.
    GenGraph {
        /// Spec such as `n=1024, p=0.01, wmax=1000, seed=7`; overrides the flags below.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long, default_value_t = 1024)]
        n: u64,
        /// Edge probability; defaults to 16/(n-1).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = copq::graph::DEFAULT_WEIGHT_MAX)]
        wmax: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick self-check of every heap against the oracles.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1 << 12)]
        size: u64,
        /// Check this DIMACS file as well (read as undirected).
        #[arg(long)]
        dimacs: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// binary, funnel, bucket or all.
    #[arg(long, default_value = "all", value_parser = parse_heaps)]
    heap: HeapChoice,
    #[arg(long, default_value_t = 16.0)]
    cache_mb: f64,
    #[arg(long, default_value_t = copq::em::DEFAULT_BLOCK_BYTES)]
    block_bytes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    reps: u32,
    /// Per-run limit; 0 disables it.
    #[arg(long, default_value_t = 6 * 3600)]
    timeout_secs: u64,
    /// Write rows here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone)]
struct HeapChoice(Vec<Structure>);

fn parse_heaps(s: &str) -> Result<HeapChoice, String> {
    if s == "all" {
        return Ok(HeapChoice(Structure::ALL.to_vec()));
    }
    s.split(',').map(str::parse).collect::<Result<_, _>>().map(HeapChoice)
}

fn mb_to_bytes(mb: f64) -> Result<usize> {
    if !(mb > 0.0 && mb.is_finite()) {
        bail!("cache size must be positive, got {mb} MB");
    }
    Ok((mb * MB as f64).round() as usize)
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            cache_bytes: mb_to_bytes(self.cache_mb)?,
            block_bytes: self.block_bytes,
            seed: self.seed,
            reps: self.reps,
            timeout: (self.timeout_secs > 0).then(|| Duration::from_secs(self.timeout_secs)),
        })
    }
}

struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
}

impl CsvOut {
    fn open(path: Option<&PathBuf>) -> Result<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
            None => Box::new(io::stdout()),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(CSV_HEADER)?;
        Ok(CsvOut { writer })
    }

    fn write(&mut self, rows: &[BenchRecord]) -> Result<()> {
        for r in rows {
            self.writer.write_record(r.csv_fields())?;
        }
        self.writer.flush()?;
        Ok(())
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::PqBench { common, sizes } => {
            let cfg = common.run_config()?;
            let sizes = sizes.unwrap_or_else(|| PQ_SIZES.to_vec());
            let mut out = CsvOut::open(common.csv.as_ref())?;
            for &s in &common.heap.0 {
                out.write(&bench::run_pq_bench(s, &sizes, &cfg)?)?;
            }
        }
        Command::SsspBench { common, sizes, dimacs, verify_cap } => {
            let cfg = common.run_config()?;
            let (experiment, graphs) = if dimacs.is_empty() {
                let sizes = sizes.unwrap_or_else(|| SSSP_SIZES.to_vec());
                let graphs: Vec<Graph> = sizes.iter().map(|&n| gen_gnp(&GnpSpec::sparse(n, common.seed))).collect();
                ("sssp-random", graphs)
            } else {
                ("sssp-dimacs", dimacs.iter().map(|p| read_dimacs(p)).collect::<Result<_>>()?)
            };
            let mut out = CsvOut::open(common.csv.as_ref())?;
            for &s in &common.heap.0 {
                out.write(&bench::run_sssp_bench(s, experiment, &graphs, &cfg, verify_cap)?)?;
            }
        }
        Command::MemSweep { common, size, caches_mb } => {
            let cfg = common.run_config()?;
            let caches = match caches_mb {
                Some(list) => list.into_iter().map(mb_to_bytes).collect::<Result<Vec<_>>>()?,
                None => SWEEP_CACHE_MB.iter().map(|&m| m * MB).collect(),
            };
            let mut out = CsvOut::open(common.csv.as_ref())?;
            for &s in &common.heap.0 {
                out.write(&bench::mem_sweep(s, size, &caches, &cfg)?)?;
            }
        }
        Command::GenGraph { spec, n, p, wmax, seed, out } => {
            let spec = match spec {
                Some(text) => GnpSpec::parse(&text)?,
                None => {
                    let mut s = GnpSpec::sparse(n, seed);
                    s.weight_max = wmax;
                    if let Some(p) = p {
                        s.p = p;
                    }
                    s.validate()?;
                    s
                }
            };
            let g = gen_gnp(&spec);
            match out {
                Some(path) => {
                    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(f);
                    write_dimacs(&g, &mut w)?;
                    w.flush()?;
                }
                None => write_dimacs(&g, io::stdout().lock())?,
            }
            eprintln!("{} vertices, {} arcs", g.vertex_count(), g.arc_count());
        }
        Command::Verify { common, size, dimacs } => verify(&common, size, dimacs.as_ref())?,
    }
    Ok(())
}

fn read_dimacs(path: &PathBuf) -> Result<Graph> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_dimacs(BufReader::new(f), true).with_context(|| format!("parsing {}", path.display()))
}

fn verify(common: &Common, size: u64, dimacs: Option<&PathBuf>) -> Result<()> {
    let cfg = RunConfig { reps: 1, ..common.run_config()? };
    let mut graphs = vec![(format!("gnp n={size}"), gen_gnp(&GnpSpec::sparse(size, common.seed)))];
    if let Some(p) = dimacs {
        graphs.push((p.display().to_string(), read_dimacs(p)?));
    }
    let opts = RunOptions { cache_bytes: cfg.cache_bytes, block_bytes: cfg.block_bytes, deadline: None };
    for &s in &common.heap.0 {
        let m = bench::measure_pq(s, size, &cfg)?;
        println!("{s}: workload n={size} matches oracle ({} transfers)", m.pq_transfers());
        for (name, g) in &graphs {
            let source = bench::random_source(g.vertex_count(), common.seed);
            let reference = sssp::sssp_reference(g, source)?;
            let mut eg = copq::graph::load_csr(g, cfg.cache_bytes, cfg.block_bytes)?;
            let r = match s {
                Structure::Binary => sssp::sssp_binary(&mut eg, source, &opts)?,
                Structure::Funnel => sssp::sssp_funnel(&mut eg, source, &opts)?,
                Structure::Bucket => sssp::sssp_bucket_checked(g, &mut eg, source, &opts)?,
            };
            if r.dist != reference.dist {
                bail!("{s}: distances on {name} differ from the reference");
            }
            println!("{s}: sssp on {name} matches reference");
        }
    }
    Ok(())
}
