//! Cluster colorings of the clustered conflict graph and the codewords they
//! induce.
//!
//! A cluster coloring picks, for every cluster, one representative vertex and
//! a color such that same-colored representatives are pairwise non-adjacent.
//! Each color becomes one XOR transmission of one packet length.

mod codeword;
pub mod conventional;
mod exact;
mod greedy;

pub use codeword::{
    build_codeword, build_codeword_unchecked, simulate_decoding, CodewordPlan, DecodeFailure,
    DecodeReport, Delivery, ReceiverOutcome,
};
pub use exact::{
    brute_force_chromatic_number, brute_force_min_cluster_coloring, MAX_EXACT_CLUSTERS,
    MAX_EXACT_VERTICES,
};
pub use greedy::{choose_min, gclc1, gclc1_with_order, gclc2, GreedyScheme, RootOrder};

use serde::{Deserialize, Serialize};

use crate::graph::ClusteredConflictGraph;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterColor {
    /// Colored vertex inside the cluster.
    pub vertex: usize,
    pub color: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterColoring {
    /// Indexed by cluster.
    pub assignment: Vec<ClusterColor>,
    pub colors: usize,
}

impl ClusterColoring {
    /// Clusters grouped by color.
    pub fn color_classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.colors];
        for (c, a) in self.assignment.iter().enumerate() {
            if a.color < self.colors {
                classes[a.color].push(c);
            }
        }
        classes
    }

    /// Checks that every cluster has exactly one color taken from a vertex
    /// inside it, that colors are `0..colors` without gaps, and that
    /// same-colored representatives are never adjacent.
    pub fn validate(&self, h: &ClusteredConflictGraph) -> Result<()> {
        let clusters = h.clusters();
        if self.assignment.len() != clusters.len() {
            return Err(Error::InvalidColoring(format!(
                "{} assignments for {} clusters",
                self.assignment.len(),
                clusters.len()
            )));
        }
        for (c, a) in self.assignment.iter().enumerate() {
            if !clusters[c].members.contains(&a.vertex) {
                return Err(Error::InvalidColoring(format!(
                    "cluster {c} is colored through vertex {} outside it",
                    a.vertex
                )));
            }
            if a.color >= self.colors {
                return Err(Error::InvalidColoring(format!(
                    "cluster {c} has color {} but only {} colors exist",
                    a.color, self.colors
                )));
            }
        }
        for (color, class) in self.color_classes().iter().enumerate() {
            if class.is_empty() {
                return Err(Error::InvalidColoring(format!("color {color} is unused")));
            }
            for (i, &a) in class.iter().enumerate() {
                for &b in &class[i + 1..] {
                    let (va, vb) = (self.assignment[a].vertex, self.assignment[b].vertex);
                    if h.adjacent(va, vb) {
                        return Err(Error::InvalidColoring(format!(
                            "adjacent vertices {va} and {vb} share color {color}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
