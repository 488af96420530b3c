//! Correlation-unaware reference schemes.
//!
//! LC/U and LC/NM cache the `M` most popular files whole and serve misses by
//! unicast or by one multicast per distinct missed file. Their expected rates
//! have closed forms. RAP/CM is the full random-placement pipeline without
//! correlation and lives in the harness.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::caching::CacheConfiguration;
use crate::coloring::conventional::{gcc, ConflictGraph};
use crate::demand::{sample_demand, DemandDistribution, DemandRealization};
use crate::packet::PacketId;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "LC_U")]
    LcU,
    #[serde(rename = "LC_NM")]
    LcNm,
    #[serde(rename = "RAP_CM")]
    RapCm,
    #[serde(rename = "CA_RAP_CM")]
    CaRapCm,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::LcU, SchemeId::LcNm, SchemeId::RapCm, SchemeId::CaRapCm];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::LcU => "LC_U",
            SchemeId::LcNm => "LC_NM",
            SchemeId::RapCm => "RAP_CM",
            SchemeId::CaRapCm => "CA_RAP_CM",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::scenario("scheme", format!("unknown scheme {s:?}")))
    }
}

fn uncached(q: &DemandDistribution, cache_size: usize) -> impl Iterator<Item = f64> + '_ {
    let order = q.popularity_order();
    let skip = cache_size.min(order.len());
    order.into_iter().skip(skip).map(|f| q.probs()[f])
}

/// `n Σ q_f` over files outside the `M` most popular.
pub fn lc_u_expected_rate(q: &DemandDistribution, n: usize, cache_size: usize) -> f64 {
    n as f64 * uncached(q, cache_size).fold(0.0, |acc, qf| acc + qf)
}

/// `Σ 1 - (1-q_f)^n` over files outside the `M` most popular.
pub fn lc_nm_expected_rate(q: &DemandDistribution, n: usize, cache_size: usize) -> f64 {
    uncached(q, cache_size)
        .fold(0.0, |acc, qf| acc + 1.0 - (1.0 - qf).powi(n as i32))
}

/// Sample means of the LC/U and LC/NM rates over `draws` demand realizations.
pub fn simulate_local_caching<R: Rng + ?Sized>(
    q: &DemandDistribution,
    n: usize,
    cache_size: usize,
    draws: usize,
    rng: &mut R,
) -> (f64, f64) {
    let order = q.popularity_order();
    let mut cached = vec![false; q.files()];
    for &f in order.iter().take(cache_size) {
        cached[f] = true;
    }
    let (mut unicast, mut multicast) = (0usize, 0usize);
    let mut seen = vec![false; q.files()];
    for _ in 0..draws {
        seen.fill(false);
        for f in sample_demand(q, n, rng).0 {
            if !cached[f] {
                unicast += 1;
                if !seen[f] {
                    seen[f] = true;
                    multicast += 1;
                }
            }
        }
    }
    let d = draws.max(1) as f64;
    (unicast as f64 / d, multicast as f64 / d)
}

/// Rate of correlation-unaware coded delivery after an uncoded prefetch that
/// splits every file into `m / M` packets and gives receiver `u` packet `u` of
/// each file.
pub fn prefetch_reference_rate(files: usize, cache_size: usize, demand: &DemandRealization) -> Result<f64> {
    if cache_size == 0 || !files.is_multiple_of(cache_size) {
        return Err(Error::CacheConfig(format!(
            "prefetch needs M dividing m, got M={cache_size}, m={files}"
        )));
    }
    let b = files / cache_size;
    let n = demand.receivers();
    if n > b {
        return Err(Error::CacheConfig(format!("{n} receivers but only {b} packets per file")));
    }
    let lists: Vec<Vec<PacketId>> = (0..n)
        .map(|u| (0..files).map(|f| PacketId::new(f, u)).collect())
        .collect();
    let caches = CacheConfiguration::from_lists(files, b, &lists)?;
    let graph = ConflictGraph::build(&caches, &demand.0)?;
    Ok(gcc(&graph).count as f64 / b as f64)
}
