//! Caching distributions, random fractional placement and LFU placement.

use std::fmt::{self, Write as _};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand::DemandDistribution;
use crate::packet::{PacketId, PacketSet};
use crate::seed::SeedTree;
use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-file caching fractions `p` for caches holding `cache_size` files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachingDistribution {
    pub p: Vec<f64>,
    pub cache_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Negative { file: usize, value: f64 },
    AboveCap { file: usize, value: f64, cap: f64 },
    Sum { total: f64 },
    Empty,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Negative { file, value } => write!(f, "p[{}] = {value} < 0", file + 1),
            Violation::AboveCap { file, value, cap } => {
                write!(f, "p[{}] = {value} exceeds 1/M = {cap}", file + 1)
            }
            Violation::Sum { total } => write!(f, "sum of p is {total}, expected 1"),
            Violation::Empty => write!(f, "empty distribution"),
        }
    }
}

impl CachingDistribution {
    pub fn new(p: Vec<f64>, cache_size: f64) -> Result<Self> {
        let dist = CachingDistribution { p, cache_size };
        let violations = dist.validate();
        if let Some(v) = violations.first() {
            return Err(Error::Caching(v.to_string()));
        }
        Ok(dist)
    }

    pub fn uniform(m: usize, cache_size: f64) -> Self {
        CachingDistribution {
            p: vec![1.0 / m as f64; m],
            cache_size,
        }
    }

    /// Every constraint `0 <= p_f <= 1/M`, `sum p = 1` that fails.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.p.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        let cap = if self.cache_size > 0.0 {
            1.0 / self.cache_size
        } else {
            f64::INFINITY
        };
        for (file, &value) in self.p.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                out.push(Violation::Negative { file, value });
            } else if value > cap + SUM_TOLERANCE {
                out.push(Violation::AboveCap { file, value, cap });
            }
        }
        let total: f64 = self.p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            out.push(Violation::Sum { total });
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Per-packet caching probability `p_f * M`, clamped to `[0, 1]`.
    pub fn packet_probability(&self, f: usize) -> f64 {
        (self.p[f] * self.cache_size).clamp(0.0, 1.0)
    }

    /// Short content digest, for result records.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.cache_size.to_le_bytes());
        for x in &self.p {
            h.update(x.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Packet-level cache contents `C_u` for every receiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheConfiguration {
    files: usize,
    packets: usize,
    caches: Vec<PacketSet>,
}

impl CacheConfiguration {
    pub fn new(caches: Vec<PacketSet>, files: usize, packets: usize) -> Result<Self> {
        let universe = files * packets;
        for (u, c) in caches.iter().enumerate() {
            if c.universe() < universe || c.universe() >= universe + 64 {
                return Err(Error::CacheConfig(format!(
                    "cache {} was built for a different library size",
                    u + 1
                )));
            }
        }
        if caches.len() > crate::packet::ReceiverSet::CAPACITY {
            return Err(Error::TooManyReceivers(caches.len()));
        }
        Ok(CacheConfiguration {
            files,
            packets,
            caches,
        })
    }

    pub fn empty(receivers: usize, files: usize, packets: usize) -> Self {
        CacheConfiguration {
            files,
            packets,
            caches: vec![PacketSet::new(files, packets); receivers],
        }
    }

    pub fn from_lists(files: usize, packets: usize, lists: &[Vec<PacketId>]) -> Result<Self> {
        let mut caches = Vec::with_capacity(lists.len());
        for (u, list) in lists.iter().enumerate() {
            let mut set = PacketSet::new(files, packets);
            for &p in list {
                if p.file >= files || p.packet >= packets {
                    return Err(Error::CacheConfig(format!(
                        "receiver {} caches out-of-range packet {p}",
                        u + 1
                    )));
                }
                if !set.insert(p) {
                    return Err(Error::CacheConfig(format!(
                        "receiver {} caches {p} twice",
                        u + 1
                    )));
                }
            }
            caches.push(set);
        }
        CacheConfiguration::new(caches, files, packets)
    }

    pub fn receivers(&self) -> usize {
        self.caches.len()
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn cache(&self, u: usize) -> &PacketSet {
        &self.caches[u]
    }

    /// Union of every receiver's cache.
    pub fn union(&self) -> PacketSet {
        let mut all = PacketSet::new(self.files, self.packets);
        for c in &self.caches {
            all.union_with(c);
        }
        all
    }

    /// Cache occupancy of receiver `u` in file-units.
    pub fn occupancy(&self, u: usize) -> f64 {
        self.caches[u].len() as f64 / self.packets as f64
    }

    /// One line per receiver, one-based packet ids.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (u, c) in self.caches.iter().enumerate() {
            let _ = write!(s, "C{} =", u + 1);
            for p in c.iter() {
                let _ = write!(s, " {p}");
            }
            s.push('\n');
        }
        s
    }
}

/// Number of packets cached per file: dependent (systematic) rounding of
/// `p_f * M * B` with a single uniform offset, so every `k_f` is the floor or
/// ceiling of its target, the expectation is exact and `sum k_f <= M*B + 1`.
pub fn packet_counts<R: Rng + ?Sized>(dist: &CachingDistribution, packets: usize, rng: &mut R) -> Vec<usize> {
    let offset: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut prev = offset.floor();
    dist.p
        .iter()
        .map(|&pf| {
            cumulative += (pf * dist.cache_size * packets as f64).max(0.0);
            // absorb summation error so integral targets round exactly
            if (cumulative - cumulative.round()).abs() < 1e-9 {
                cumulative = cumulative.round();
            }
            let next = (cumulative + offset).floor();
            let k = (next - prev).max(0.0) as usize;
            prev = next;
            k.min(packets)
        })
        .collect()
}

/// Random fractional placement: every receiver independently caches `k_f`
/// distinct uniformly chosen packets of each file. Receiver `u` draws from the
/// stream `seed / u`.
pub fn rap_place(
    dist: &CachingDistribution,
    packets: usize,
    receivers: usize,
    seed: SeedTree,
) -> Result<CacheConfiguration> {
    if let Some(v) = dist.validate().first() {
        return Err(Error::Caching(v.to_string()));
    }
    let files = dist.p.len();
    let caches = (0..receivers)
        .map(|u| {
            let mut rng = seed.child(u as u64).rng();
            let counts = packet_counts(dist, packets, &mut rng);
            let mut set = PacketSet::new(files, packets);
            for (f, &k) in counts.iter().enumerate() {
                for b in index::sample(&mut rng, packets, k) {
                    set.insert(PacketId::new(f, b));
                }
            }
            set
        })
        .collect();
    CacheConfiguration::new(caches, files, packets)
}

/// Every receiver caches all packets of the `cache_size` most popular files.
pub fn lfu_place(
    q: &DemandDistribution,
    cache_size: usize,
    packets: usize,
    receivers: usize,
) -> Result<CacheConfiguration> {
    let files = q.files();
    if cache_size > files {
        return Err(Error::Caching(format!(
            "LFU cache of {cache_size} files exceeds library of {files}"
        )));
    }
    let mut set = PacketSet::new(files, packets);
    for &f in q.popularity_order().iter().take(cache_size) {
        for b in 0..packets {
            set.insert(PacketId::new(f, b));
        }
    }
    CacheConfiguration::new(vec![set; receivers], files, packets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::zipf;

    fn p(f: usize, b: usize) -> PacketId {
        PacketId::from_one_based(f, b).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(CachingDistribution::uniform(5, 3.0).is_valid());
        let v = CachingDistribution { p: vec![1.0, 0.0], cache_size: 2.0 }.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::AboveCap { file: 0, .. }));
        assert!(CachingDistribution::new(vec![0.0, 0.5, 0.0, 0.5], 1.0).is_ok());
        let v = CachingDistribution { p: vec![-0.1, 0.3], cache_size: 1.0 }.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::Negative { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::Sum { .. })));
    }

    #[test]
    fn example1_placement_is_reachable() {
        let dist = CachingDistribution::new(vec![0.0, 0.5, 0.0, 0.5], 1.0).unwrap();
        let target = CacheConfiguration::from_lists(
            4,
            2,
            &[vec![p(2, 1), p(4, 1)], vec![p(2, 2), p(4, 2)]],
        )
        .unwrap();
        // every receiver caches exactly one packet of files 2 and 4
        let found = (0..200u64).any(|s| {
            let c = rap_place(&dist, 2, 2, SeedTree::new(s)).unwrap();
            for u in 0..2 {
                assert_eq!(c.cache(u).count_in_file(1), 1);
                assert_eq!(c.cache(u).count_in_file(3), 1);
                assert_eq!(c.cache(u).len(), 2);
            }
            c == target
        });
        assert!(found);
    }

    #[test]
    fn full_cache_when_m_equals_m() {
        let dist = CachingDistribution::uniform(6, 6.0);
        let c = rap_place(&dist, 4, 3, SeedTree::new(2)).unwrap();
        for u in 0..3 {
            assert_eq!(c.cache(u).len(), 24);
        }
    }

    #[test]
    fn capacity_holds_with_fractional_targets() {
        let dist = CachingDistribution::new(vec![0.3, 0.3, 0.2, 0.2], 1.7).unwrap();
        for s in 0..500 {
            let c = rap_place(&dist, 7, 2, SeedTree::new(s)).unwrap();
            for u in 0..2 {
                assert!(c.occupancy(u) <= 1.7 + 1.0 / 7.0 + 1e-12);
            }
        }
    }

    #[test]
    fn per_packet_probability_matches_p_times_m() {
        let dist = CachingDistribution::new(vec![0.45, 0.35, 0.2], 2.0).unwrap();
        let b = 5;
        let seeds = 10_000;
        let mut hits = [0usize; 3];
        for s in 0..seeds {
            let c = rap_place(&dist, b, 1, SeedTree::new(s)).unwrap();
            for (f, h) in hits.iter_mut().enumerate() {
                if c.cache(0).contains(PacketId::new(f, 0)) {
                    *h += 1;
                }
            }
        }
        for f in 0..3 {
            let target = dist.p[f] * 2.0;
            let sigma = (target * (1.0 - target) / seeds as f64).sqrt();
            let freq = hits[f] as f64 / seeds as f64;
            assert!((freq - target).abs() <= 3.0 * sigma, "file {f}: {freq} vs {target}");
        }
    }

    #[test]
    fn lfu_examples() {
        let q = zipf(100, 0.8).unwrap();
        let none = lfu_place(&q, 0, 3, 2).unwrap();
        assert!(none.cache(0).is_empty());
        let all = lfu_place(&q, 100, 3, 2).unwrap();
        assert_eq!(all.cache(1).len(), 300);
        let top = lfu_place(&q, 10, 3, 2).unwrap();
        for f in 0..100 {
            assert_eq!(top.cache(0).count_in_file(f), if f < 10 { 3 } else { 0 });
        }
        assert!(lfu_place(&q, 101, 3, 2).is_err());
    }

    #[test]
    fn duplicate_packets_rejected() {
        assert!(CacheConfiguration::from_lists(2, 2, &[vec![p(1, 1), p(1, 1)]]).is_err());
        assert!(CacheConfiguration::from_lists(2, 2, &[vec![p(3, 1)]]).is_err());
    }

    #[test]
    fn text_form() {
        let c = CacheConfiguration::from_lists(4, 2, &[vec![p(2, 1), p(4, 1)], vec![]]).unwrap();
        assert_eq!(c.to_text(), "C1 = (2,1) (4,1)\nC2 =\n");
    }
}
