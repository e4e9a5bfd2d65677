//! Cache-oblivious priority queues measured on a simulated two-level memory.
//!
//! - [`em`]: the block-transfer-counting vector every structure is stored in.
//! - [`binary`], [`funnel`], [`bucket`]: the three heaps.
//! - [`graph`]: CSR graphs, G(n,p) generation, DIMACS `.gr` I/O.
//! - [`sssp`]: Dijkstra on each heap, plus an in-memory reference.
//! - [`bench`]: the priority-queue workload and result records.

pub mod bench;
pub mod binary;
pub mod bucket;
pub mod em;
pub mod entry;
pub mod funnel;
pub mod graph;
pub mod sssp;

pub use em::{Backing, BlockVector, EmConfig, EmError, IoStats, Record};
pub use entry::{Entry, PriorityQueue};
