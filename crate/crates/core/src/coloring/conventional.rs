//! Correlation-unaware delivery: the index-coding conflict graph over
//! requested packets and its greedy coloring.
//!
//! This path is built straight from caches and requested files with a dense
//! adjacency matrix. It shares no code with the clustered graph, so the two
//! can be checked against each other when there is no correlation.

use std::collections::{BTreeSet, HashMap};

use crate::caching::CacheConfiguration;
use crate::packet::{PacketId, ReceiverSet};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ConflictGraph {
    /// `(receiver, packet)` per vertex, ordered by receiver then packet.
    pub nodes: Vec<(usize, PacketId)>,
    /// Requesting receiver plus every receiver caching the packet.
    pub labels: Vec<ReceiverSet>,
    pub adjacency: Vec<Vec<bool>>,
}

impl ConflictGraph {
    /// One vertex per uncached packet of each receiver's requested file.
    /// Distinct packets conflict unless each is cached at the other's
    /// requester.
    pub fn build(caches: &CacheConfiguration, files: &[usize]) -> Result<Self> {
        if files.len() != caches.receivers() {
            return Err(Error::CacheConfig(format!(
                "{} caches for {} receivers",
                caches.receivers(),
                files.len()
            )));
        }
        if caches.receivers() > ReceiverSet::CAPACITY {
            return Err(Error::TooManyReceivers(caches.receivers()));
        }
        let mut nodes = Vec::new();
        for (u, &f) in files.iter().enumerate() {
            if f >= caches.files() {
                return Err(Error::Demand(format!("receiver {} requests unknown file {}", u + 1, f + 1)));
            }
            for b in 0..caches.packets() {
                let p = PacketId::new(f, b);
                if !caches.cache(u).contains(p) {
                    nodes.push((u, p));
                }
            }
        }
        let labels: Vec<ReceiverSet> = nodes
            .iter()
            .map(|&(u, p)| {
                let mut s = ReceiverSet::singleton(u);
                for w in 0..caches.receivers() {
                    if caches.cache(w).contains(p) {
                        s.insert(w);
                    }
                }
                s
            })
            .collect();
        let k = nodes.len();
        let mut adjacency = vec![vec![false; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let ((ui, pi), (uj, pj)) = (nodes[i], nodes[j]);
                let edge = pi != pj && (!caches.cache(uj).contains(pi) || !caches.cache(ui).contains(pj));
                adjacency[i][j] = edge;
                adjacency[j][i] = edge;
            }
        }
        Ok(ConflictGraph {
            nodes,
            labels,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks that colors are proper on the graph.
    pub fn is_proper(&self, colors: &[usize]) -> bool {
        colors.len() == self.len()
            && (0..self.len()).all(|i| {
                ((i + 1)..self.len()).all(|j| !self.adjacency[i][j] || colors[i] != colors[j])
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GccScheme {
    LabelSets,
    NaiveMulticast,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GccColoring {
    /// Color per vertex.
    pub colors: Vec<usize>,
    pub count: usize,
    pub scheme: GccScheme,
}

/// Visits uncolored vertices in order; each one seeds a color class filled
/// with later uncolored vertices of the same label that conflict with no
/// member of the class.
pub fn gcc_label_sets(g: &ConflictGraph) -> GccColoring {
    let k = g.len();
    let mut colors = vec![usize::MAX; k];
    let mut count = 0;
    for v in 0..k {
        if colors[v] != usize::MAX {
            continue;
        }
        let mut class = vec![v];
        for w in (v + 1)..k {
            if colors[w] == usize::MAX
                && g.labels[w] == g.labels[v]
                && class.iter().all(|&x| !g.adjacency[x][w])
            {
                class.push(w);
            }
        }
        for &x in &class {
            colors[x] = count;
        }
        count += 1;
    }
    GccColoring {
        colors,
        count,
        scheme: GccScheme::LabelSets,
    }
}

/// Every distinct requested packet is sent once, uncoded.
pub fn gcc_naive_multicast(g: &ConflictGraph) -> GccColoring {
    let mut index: HashMap<PacketId, usize> = HashMap::new();
    let colors = g
        .nodes
        .iter()
        .map(|&(_, p)| {
            let next = index.len();
            *index.entry(p).or_insert(next)
        })
        .collect();
    GccColoring {
        colors,
        count: index.len(),
        scheme: GccScheme::NaiveMulticast,
    }
}

/// The smaller of the two colorings, label sets on ties.
pub fn gcc(g: &ConflictGraph) -> GccColoring {
    let a = gcc_label_sets(g);
    let b = gcc_naive_multicast(g);
    if b.count < a.count {
        b
    } else {
        a
    }
}

/// Number of distinct packets requested and not cached by their requester.
pub fn distinct_requested(g: &ConflictGraph) -> usize {
    g.nodes.iter().map(|&(_, p)| p).collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(f: usize, b: usize) -> PacketId {
        PacketId::from_one_based(f, b).unwrap()
    }

    #[test]
    fn two_receivers_swap_cached_halves() {
        // u1 wants file 1 and caches (2,1); u2 wants file 2 and caches (1,2)
        let caches = CacheConfiguration::from_lists(2, 2, &[vec![p(2, 1)], vec![p(1, 2)]]).unwrap();
        let g = ConflictGraph::build(&caches, &[0, 1]).unwrap();
        assert_eq!(g.len(), 4);
        let c = gcc(&g);
        assert!(g.is_proper(&c.colors));
        // (1,2)@u1 and (2,1)@u2 share an XOR; the other two go alone
        assert_eq!(c.count, 3);
        assert_eq!(c.scheme, GccScheme::LabelSets);
    }

    #[test]
    fn same_file_prefers_naive_multicast() {
        let caches = CacheConfiguration::empty(3, 2, 4);
        let g = ConflictGraph::build(&caches, &[1, 1, 1]).unwrap();
        let a = gcc_label_sets(&g);
        let b = gcc_naive_multicast(&g);
        assert!(g.is_proper(&a.colors) && g.is_proper(&b.colors));
        assert_eq!(b.count, 4);
        assert_eq!(gcc(&g).count, 4);
        assert_eq!(distinct_requested(&g), 4);
    }

    #[test]
    fn fully_cached_is_empty() {
        let caches = CacheConfiguration::from_lists(1, 1, &[vec![p(1, 1)]]).unwrap();
        let g = ConflictGraph::build(&caches, &[0]).unwrap();
        assert!(g.is_empty());
        assert_eq!(gcc(&g).count, 0);
    }
}
