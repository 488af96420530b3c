//! Cache-aided coded multicast over correlated content libraries.
//!
//! The crate models a library of `m` files split into `B` packets each, with a
//! packet-level correlation structure. Receivers fill their caches with random
//! fractional placement (`caching`), requests are reduced to packet demand with
//! local substitution (`demand`), and delivery is planned by coloring a
//! clustered conflict graph (`graph`, `coloring`). The `bound` module evaluates
//! the analytical upper bound on the expected rate and searches for a caching
//! distribution minimizing it; `baselines` holds the correlation-unaware
//! reference schemes and `harness` ties everything into reproducible sweeps.
//!
//! Indices are zero-based in the Rust API. Human-facing text formats
//! (scenario files, traces) use one-based `(file,packet)` pairs.

pub mod baselines;
pub mod bound;
pub mod caching;
pub mod coloring;
pub mod demand;
pub mod error;
pub mod graph;
pub mod harness;
pub mod library;
pub mod packet;
pub mod seed;

pub use error::{Error, Result};
pub use packet::{PacketId, PacketSet, ReceiverSet};

/// Version string recorded in result files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
