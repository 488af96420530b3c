//! Clustered conflict graph.
//!
//! One root vertex per `(receiver, requested packet)`; every other member of
//! the requested packet's δ-ensemble becomes a virtual vertex in the root's
//! cluster. Two vertices are adjacent when they share a cluster, or when their
//! packets differ and at least one of them is missing from the other vertex's
//! requester cache. Edges are never materialized: adjacency is decided from
//! vertex metadata in constant time.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use crate::caching::CacheConfiguration;
use crate::demand::PacketDemand;
use crate::library::CorrelationModel;
use crate::packet::{PacketId, PacketSet, ReceiverSet};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    /// Packet identity.
    pub packet: PacketId,
    /// Receiver requesting the cluster's root packet.
    pub receiver: usize,
    pub cluster: usize,
    pub is_root: bool,
    /// Receivers caching `packet`.
    pub cached_at: ReceiverSet,
    /// `H(root packet | packet)`, file-units.
    pub refinement: f64,
}

impl Vertex {
    /// `{receiver} ∪ cached_at`.
    #[inline]
    pub fn receiver_label(&self) -> ReceiverSet {
        self.cached_at.with(self.receiver)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub receiver: usize,
    pub root_packet: PacketId,
    /// Vertex indices; the root comes first.
    pub members: Range<usize>,
}

impl Cluster {
    pub fn root(&self) -> usize {
        self.members.start
    }
}

#[derive(Clone, Debug)]
pub struct ClusteredConflictGraph {
    receivers: usize,
    vertices: Vec<Vertex>,
    clusters: Vec<Cluster>,
}

impl ClusteredConflictGraph {
    /// Builds the graph. Clusters are ordered by `(receiver, root packet)` and
    /// members inside a cluster by packet after the root; vertex indices follow
    /// that canonical order.
    pub fn build(
        caches: &CacheConfiguration,
        demand: &PacketDemand,
        model: &CorrelationModel,
    ) -> Result<Self> {
        let n = caches.receivers();
        if n > ReceiverSet::CAPACITY {
            return Err(Error::TooManyReceivers(n));
        }
        if demand.receivers() != n {
            return Err(Error::CacheConfig(format!(
                "packet demand covers {} receivers, caches {n}",
                demand.receivers()
            )));
        }
        let cached = caches.union();
        let mut requested = PacketSet::new(model.files(), model.packets());
        for q in &demand.requested {
            for &p in q {
                requested.insert(p);
            }
        }
        let mut eta_memo: HashMap<PacketId, ReceiverSet> = HashMap::new();
        let mut eta = |p: PacketId| {
            *eta_memo.entry(p).or_insert_with(|| {
                (0..n).filter(|&u| caches.cache(u).contains(p)).collect()
            })
        };

        let mut vertices = Vec::new();
        let mut clusters = Vec::new();
        for (u, q_u) in demand.requested.iter().enumerate() {
            for &root in q_u {
                let start = vertices.len();
                let cluster = clusters.len();
                for packet in model.delta_ensemble(root, &cached, &requested) {
                    vertices.push(Vertex {
                        packet,
                        receiver: u,
                        cluster,
                        is_root: packet == root,
                        cached_at: eta(packet),
                        refinement: model.conditional_entropy(root, packet),
                    });
                }
                clusters.push(Cluster {
                    receiver: u,
                    root_packet: root,
                    members: start..vertices.len(),
                });
            }
        }
        Ok(ClusteredConflictGraph {
            receivers: n,
            vertices,
            clusters,
        })
    }

    /// Graph from explicit parts; used by tests and oracles.
    pub fn from_parts(receivers: usize, vertices: Vec<Vertex>, clusters: Vec<Cluster>) -> Self {
        ClusteredConflictGraph {
            receivers,
            vertices,
            clusters,
        }
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.clusters.iter().map(Cluster::root)
    }

    pub fn virtual_count(&self) -> usize {
        self.vertices.len() - self.clusters.len()
    }

    pub fn receiver_label(&self, v: usize) -> ReceiverSet {
        self.vertices[v].receiver_label()
    }

    #[inline]
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        vertices_adjacent(&self.vertices[a], &self.vertices[b])
    }

    /// Root-only subgraph: the conventional index-coding conflict graph.
    pub fn root_graph(&self) -> Self {
        let mut vertices = Vec::with_capacity(self.clusters.len());
        let mut clusters = Vec::with_capacity(self.clusters.len());
        for (i, c) in self.clusters.iter().enumerate() {
            let mut v = self.vertices[c.root()];
            v.cluster = i;
            vertices.push(v);
            clusters.push(Cluster {
                receiver: c.receiver,
                root_packet: c.root_packet,
                members: i..i + 1,
            });
        }
        ClusteredConflictGraph {
            receivers: self.receivers,
            vertices,
            clusters,
        }
    }

    /// Dense adjacency matrix. Intended for small instances only.
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.vertices.len();
        (0..n)
            .map(|a| (0..n).map(|b| self.adjacent(a, b)).collect())
            .collect()
    }

    /// Edge list text: a vertex table followed by `a b` lines, `a < b`.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vertices {} clusters {}", self.vertices.len(), self.clusters.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(
                s,
                "v {i} packet {} receiver {} cluster {} {}",
                v.packet,
                v.receiver + 1,
                v.cluster,
                if v.is_root { "root" } else { "virtual" }
            );
        }
        for a in 0..self.vertices.len() {
            for b in (a + 1)..self.vertices.len() {
                if self.adjacent(a, b) {
                    let _ = writeln!(s, "{a} {b}");
                }
            }
        }
        s
    }
}

#[inline]
pub fn vertices_adjacent(a: &Vertex, b: &Vertex) -> bool {
    if a.cluster == b.cluster {
        return true;
    }
    a.packet != b.packet && (!a.cached_at.contains(b.receiver) || !b.cached_at.contains(a.receiver))
}
