//! Demand distributions, demand sampling and packet-level demand.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::caching::CacheConfiguration;
use crate::library::CorrelationModel;
use crate::packet::PacketId;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandDistribution(Vec<f64>);

impl DemandDistribution {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Demand("empty distribution".into()));
        }
        if let Some(i) = q.iter().position(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::Demand(format!("q[{}] = {} is not a probability", i + 1, q[i])));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Demand(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(DemandDistribution(q))
    }

    pub fn uniform(m: usize) -> Self {
        DemandDistribution(vec![1.0 / m as f64; m])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn files(&self) -> usize {
        self.0.len()
    }

    /// File indices ordered by decreasing probability, ties by index.
    pub fn popularity_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx
    }
}

/// `q_f = f^-alpha / sum_j j^-alpha`.
pub fn zipf(m: usize, alpha: f64) -> Result<DemandDistribution> {
    if m == 0 {
        return Err(Error::Demand("zipf needs m >= 1".into()));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Demand(format!("zipf exponent {alpha} is negative")));
    }
    let weights: Vec<f64> = (1..=m).map(|f| (f as f64).powf(-alpha)).collect();
    let total: f64 = weights.iter().sum();
    Ok(DemandDistribution(weights.into_iter().map(|w| w / total).collect()))
}

/// Receiver `u` requests file `files[u]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandRealization(pub Vec<usize>);

impl DemandRealization {
    pub fn receivers(&self) -> usize {
        self.0.len()
    }

    pub fn distinct_files(&self) -> usize {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

pub fn sample_demand<R: Rng + ?Sized>(
    q: &DemandDistribution,
    n: usize,
    rng: &mut R,
) -> DemandRealization {
    let dist = WeightedIndex::new(q.probs()).expect("validated distribution");
    DemandRealization((0..n).map(|_| dist.sample(rng)).collect())
}

/// A requested packet served from the requester's own cache through a
/// δ-correlated substitute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub wanted: PacketId,
    pub substitute: PacketId,
    /// `H(wanted | substitute)`, file-units.
    pub refinement: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketDemand {
    /// Requested file per receiver.
    pub files: Vec<usize>,
    pub packets_per_file: usize,
    /// `Q_u`: requested, not cached and not locally substituted, ascending.
    pub requested: Vec<Vec<PacketId>>,
    pub substitutions: Vec<Vec<Substitution>>,
}

impl PacketDemand {
    pub fn receivers(&self) -> usize {
        self.files.len()
    }

    pub fn total_requested(&self) -> usize {
        self.requested.iter().map(Vec::len).sum()
    }

    pub fn local_refinement(&self, u: usize) -> f64 {
        self.substitutions[u].iter().map(|s| s.refinement).sum()
    }
}

/// Splits each receiver's requested file into cached, locally substituted and
/// still-requested packets. A substitute is the cached δ-correlated packet with
/// the smallest conditional entropy, ties broken by lowest packet id.
pub fn packet_demand(
    demand: &DemandRealization,
    caches: &CacheConfiguration,
    model: &CorrelationModel,
) -> Result<PacketDemand> {
    if caches.receivers() != demand.receivers() {
        return Err(Error::CacheConfig(format!(
            "{} caches for {} receivers",
            caches.receivers(),
            demand.receivers()
        )));
    }
    if caches.files() != model.files() || caches.packets() != model.packets() {
        return Err(Error::CacheConfig(
            "cache dimensions do not match the library".into(),
        ));
    }
    let b = model.packets();
    let mut requested = Vec::with_capacity(demand.receivers());
    let mut substitutions = Vec::with_capacity(demand.receivers());
    for (u, &f) in demand.0.iter().enumerate() {
        if f >= model.files() {
            return Err(Error::Demand(format!("receiver {} requests unknown file {}", u + 1, f + 1)));
        }
        let cache = caches.cache(u);
        let mut q_u = Vec::new();
        let mut subs = Vec::new();
        for packet in 0..b {
            let p = PacketId::new(f, packet);
            if cache.contains(p) {
                continue;
            }
            let best = model
                .partners(p)
                .iter()
                .filter(|c| cache.contains(c.packet))
                .map(|c| (model.conditional_entropy(p, c.packet), c.packet))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match best {
                Some((refinement, substitute)) => subs.push(Substitution {
                    wanted: p,
                    substitute,
                    refinement,
                }),
                None => q_u.push(p),
            }
        }
        requested.push(q_u);
        substitutions.push(subs);
    }
    Ok(PacketDemand {
        files: demand.0.clone(),
        packets_per_file: b,
        requested,
        substitutions,
    })
}
