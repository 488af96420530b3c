use super::{choose_min, ClusterColor, ClusterColoring};
use crate::graph::ClusteredConflictGraph;
use crate::{Error, Result};

pub const MAX_EXACT_CLUSTERS: usize = 12;
pub const MAX_EXACT_VERTICES: usize = 40;

/// Minimum-color cluster coloring by exhaustive search over representative
/// and color choices, pruned against the greedy upper bound.
pub fn brute_force_min_cluster_coloring(h: &ClusteredConflictGraph) -> Result<ClusterColoring> {
    let k = h.clusters().len();
    if k > MAX_EXACT_CLUSTERS || h.vertices().len() > MAX_EXACT_VERTICES {
        return Err(Error::SizeGuard(format!(
            "{k} clusters and {} vertices (limits {MAX_EXACT_CLUSTERS} and {MAX_EXACT_VERTICES})",
            h.vertices().len()
        )));
    }
    let best = choose_min(h).0;
    if best.colors <= 1 {
        return Ok(best);
    }
    let mut search = Search {
        h,
        current: Vec::with_capacity(k),
        classes: Vec::new(),
        best,
    };
    search.descend(0);
    Ok(search.best)
}

/// Chromatic number of the root-only conflict graph.
pub fn brute_force_chromatic_number(h: &ClusteredConflictGraph) -> Result<usize> {
    Ok(brute_force_min_cluster_coloring(&h.root_graph())?.colors)
}

struct Search<'a> {
    h: &'a ClusteredConflictGraph,
    current: Vec<ClusterColor>,
    classes: Vec<Vec<usize>>,
    best: ClusterColoring,
}

impl Search<'_> {
    fn descend(&mut self, c: usize) {
        let used = self.classes.len();
        if used >= self.best.colors {
            return;
        }
        let clusters = self.h.clusters();
        if c == clusters.len() {
            self.best = ClusterColoring {
                assignment: self.current.clone(),
                colors: used,
            };
            return;
        }
        for v in clusters[c].members.clone() {
            for color in 0..used {
                if self.classes[color].iter().all(|&w| !self.h.adjacent(v, w)) {
                    self.place(c, v, color);
                    if self.best.colors == 1 {
                        return;
                    }
                }
            }
            if used + 1 < self.best.colors {
                self.classes.push(Vec::new());
                self.place(c, v, used);
                self.classes.pop();
            }
        }
    }

    fn place(&mut self, c: usize, v: usize, color: usize) {
        self.classes[color].push(v);
        self.current.push(ClusterColor { vertex: v, color });
        self.descend(c + 1);
        self.current.pop();
        self.classes[color].pop();
    }
}
