use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClusterColor, ClusterColoring};
use crate::graph::ClusteredConflictGraph;
use crate::packet::{PacketId, ReceiverSet};
use crate::seed::SeedTree;

/// Order in which the first greedy scheme visits uncolored roots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RootOrder {
    #[default]
    Canonical,
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GreedyScheme {
    /// Same-label independent sets grown from the best cluster member.
    LabelSets,
    /// Generalized naive multicast of the most shared packet.
    MostShared,
}

fn assignments(pending: Vec<Option<ClusterColor>>, colors: usize) -> ClusterColoring {
    ClusterColoring {
        assignment: pending
            .into_iter()
            .map(|a| a.expect("greedy coloring leaves no cluster uncolored"))
            .collect(),
        colors,
    }
}

pub fn gclc1(h: &ClusteredConflictGraph) -> ClusterColoring {
    gclc1_with_order(h, RootOrder::Canonical)
}

/// Greedy cluster coloring built from same-label independent sets.
///
/// For the next uncolored root, cluster members are tried in decreasing
/// receiver-label size (ties: smaller refinement to the root, then vertex
/// index). Each candidate grows an independent set of uncolored vertices
/// outside the cluster that carry exactly its receiver label. The search stops
/// at the first candidate whose best set so far is at least as large as the
/// candidate's label, or when the cluster is exhausted. The best set gets a
/// fresh color; its clusters, and every other cluster of the same receiver
/// whose δ-ensemble contains a colored packet, are then done.
pub fn gclc1_with_order(h: &ClusteredConflictGraph, order: RootOrder) -> ClusterColoring {
    let vertices = h.vertices();
    let clusters = h.clusters();
    let mut by_label: HashMap<ReceiverSet, Vec<usize>> = HashMap::new();
    let mut by_owner: HashMap<(usize, PacketId), Vec<usize>> = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        by_label.entry(v.receiver_label()).or_default().push(i);
        by_owner.entry((v.receiver, v.packet)).or_default().push(i);
    }

    let mut visit: Vec<usize> = (0..clusters.len()).collect();
    if let RootOrder::Seeded(seed) = order {
        visit.shuffle(&mut SeedTree::new(seed).child(crate::seed::STREAM_ORDER).rng());
    }

    let mut active = vec![true; clusters.len()];
    let mut pending: Vec<Option<ClusterColor>> = vec![None; clusters.len()];
    let mut colors = 0;
    let mut candidates = Vec::new();
    let mut newly = Vec::new();
    for c in visit {
        if !active[c] {
            continue;
        }
        candidates.clear();
        candidates.extend(clusters[c].members.clone());
        candidates.sort_by(|&a, &b| {
            let (va, vb) = (&vertices[a], &vertices[b]);
            vb.receiver_label()
                .len()
                .cmp(&va.receiver_label().len())
                .then(va.refinement.total_cmp(&vb.refinement))
                .then(a.cmp(&b))
        });

        let mut best: Vec<usize> = Vec::new();
        for (t, &vt) in candidates.iter().enumerate() {
            let label = vertices[vt].receiver_label();
            let mut set = vec![vt];
            for &v in &by_label[&label] {
                let cl = vertices[v].cluster;
                if cl == c || !active[cl] {
                    continue;
                }
                if set.iter().all(|&w| !h.adjacent(v, w)) {
                    set.push(v);
                }
            }
            if set.len() > best.len() {
                best = set;
            }
            if best.len() >= label.len() || t + 1 == candidates.len() {
                break;
            }
        }

        let color = colors;
        colors += 1;
        newly.clear();
        for &v in &best {
            let cl = vertices[v].cluster;
            pending[cl] = Some(ClusterColor { vertex: v, color });
            newly.push(cl);
        }
        for &v in &best {
            let key = (vertices[v].receiver, vertices[v].packet);
            for &w in &by_owner[&key] {
                let cl = vertices[w].cluster;
                if active[cl] && pending[cl].is_none() {
                    pending[cl] = Some(ClusterColor { vertex: w, color });
                    newly.push(cl);
                }
            }
        }
        for &cl in &newly {
            active[cl] = false;
        }
    }
    assignments(pending, colors)
}

/// Greedy cluster coloring by naive multicast of shared packets.
///
/// Clusters are visited in canonical order. In an uncolored cluster the
/// member whose packet occurs in the most uncolored clusters is chosen (ties:
/// smaller refinement to the root, then vertex index); it is sent uncoded and
/// colors every uncolored cluster containing that packet.
pub fn gclc2(h: &ClusteredConflictGraph) -> ClusterColoring {
    let vertices = h.vertices();
    let clusters = h.clusters();
    let mut holders: HashMap<PacketId, Vec<usize>> = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        holders.entry(v.packet).or_default().push(i);
    }
    let mut active = vec![true; clusters.len()];
    let mut pending: Vec<Option<ClusterColor>> = vec![None; clusters.len()];
    let mut colors = 0;
    for c in 0..clusters.len() {
        if !active[c] {
            continue;
        }
        let shared = |v: usize| {
            holders[&vertices[v].packet]
                .iter()
                .filter(|&&w| active[vertices[w].cluster])
                .count()
        };
        let chosen = clusters[c]
            .members
            .clone()
            .map(|v| (v, shared(v)))
            .min_by(|&(a, sa), &(b, sb)| {
                sb.cmp(&sa)
                    .then(vertices[a].refinement.total_cmp(&vertices[b].refinement))
                    .then(a.cmp(&b))
            })
            .map(|(v, _)| v)
            .expect("clusters are never empty");
        let color = colors;
        colors += 1;
        for &w in &holders[&vertices[chosen].packet] {
            let cl = vertices[w].cluster;
            if active[cl] {
                active[cl] = false;
                pending[cl] = Some(ClusterColor { vertex: w, color });
            }
        }
    }
    assignments(pending, colors)
}

/// The coloring with fewer colors among the two greedy schemes, preferring
/// the label-set scheme on ties.
pub fn choose_min(h: &ClusteredConflictGraph) -> (ClusterColoring, GreedyScheme) {
    let first = gclc1(h);
    let second = gclc2(h);
    if second.colors < first.colors {
        (second, GreedyScheme::MostShared)
    } else {
        (first, GreedyScheme::LabelSets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caching::CacheConfiguration;
    use crate::demand::{packet_demand, DemandRealization};
    use crate::library::{build_synthetic_library, CorrelationModel, LibraryConfig, MatchMatrix};

    fn p(f: usize, b: usize) -> PacketId {
        PacketId::from_one_based(f, b).unwrap()
    }

    fn example1_graph() -> ClusteredConflictGraph {
        let mut g = MatchMatrix::identity(4);
        for (r, c) in [(1, 0), (0, 1), (3, 2), (2, 3)] {
            g.set(r, c, 1.0);
        }
        let model = build_synthetic_library(&LibraryConfig::new(4, 2, 0.25, g).unwrap(), 0).unwrap();
        let caches = CacheConfiguration::from_lists(
            4,
            2,
            &[vec![p(2, 1), p(4, 1)], vec![p(2, 2), p(4, 2)]],
        )
        .unwrap();
        let d = packet_demand(&DemandRealization(vec![2, 0]), &caches, &model).unwrap();
        ClusteredConflictGraph::build(&caches, &d, &model).unwrap()
    }

    #[test]
    fn example1_first_scheme_uses_one_color() {
        let h = example1_graph();
        let c = gclc1(&h);
        c.validate(&h).unwrap();
        assert_eq!(c.colors, 1);
        let colored: Vec<_> = c.assignment.iter().map(|a| h.vertex(a.vertex).packet).collect();
        assert_eq!(colored, vec![p(4, 2), p(2, 1)]);
    }

    #[test]
    fn example1_second_scheme_uses_two_colors() {
        let h = example1_graph();
        let c = gclc2(&h);
        c.validate(&h).unwrap();
        assert_eq!(c.colors, 2);
        let (best, scheme) = choose_min(&h);
        assert_eq!(best.colors, 1);
        assert_eq!(scheme, GreedyScheme::LabelSets);
    }

    #[test]
    fn same_label_independent_roots_share_one_color() {
        // k receivers each want a different file; every receiver caches all
        // the other files, so all roots carry the full label and are pairwise
        // non-adjacent.
        let k = 4;
        let model = CorrelationModel::uncorrelated(k, 1, 0.0).unwrap();
        let lists: Vec<Vec<PacketId>> = (0..k)
            .map(|u| (0..k).filter(|&f| f != u).map(|f| PacketId::new(f, 0)).collect())
            .collect();
        let caches = CacheConfiguration::from_lists(k, 1, &lists).unwrap();
        let d = packet_demand(&DemandRealization((0..k).collect()), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        let c = gclc1(&h);
        c.validate(&h).unwrap();
        assert_eq!(c.colors, 1);
    }

    #[test]
    fn same_file_everywhere_is_naive_multicast() {
        let b = 5;
        let model = CorrelationModel::uncorrelated(3, b, 0.0).unwrap();
        let caches = CacheConfiguration::empty(4, 3, b);
        let d = packet_demand(&DemandRealization(vec![1; 4]), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        let second = gclc2(&h);
        second.validate(&h).unwrap();
        assert_eq!(second.colors, b);
        // every root has its own singleton label, so label sets never merge
        let first = gclc1(&h);
        first.validate(&h).unwrap();
        assert_eq!(first.colors, 4 * b);
        assert_eq!(choose_min(&h).0.colors, b);
    }

    #[test]
    fn universal_partner_collapses_to_one_color() {
        // single-packet files; (1,1) is correlated with every other packet,
        // requested by the last receiver and cached nowhere
        let m = 4;
        let mut g = MatchMatrix::identity(m);
        for f in 1..m {
            g.set(0, f, 1.0);
            g.set(f, 0, 1.0);
        }
        let cfg = LibraryConfig::new(m, 1, 0.5, g).unwrap();
        let pairs: Vec<_> = (1..m).map(|f| (p(1, 1), PacketId::new(f, 0), 1.25)).collect();
        let model = CorrelationModel::from_pairs(cfg, &pairs).unwrap();
        let caches = CacheConfiguration::empty(4, m, 1);
        let d = packet_demand(&DemandRealization(vec![1, 2, 3, 0]), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        let c = gclc2(&h);
        c.validate(&h).unwrap();
        assert_eq!(c.colors, 1);
    }

    #[test]
    fn seeded_order_is_valid_and_reproducible() {
        let h = example1_graph();
        let a = gclc1_with_order(&h, RootOrder::Seeded(3));
        let b = gclc1_with_order(&h, RootOrder::Seeded(3));
        a.validate(&h).unwrap();
        assert_eq!(a, b);
    }
}
