//! The four-file, two-receiver worked example.
//!
//! Files 1/2 and 3/4 are pairwise correlated packet by packet with joint
//! entropy `1.25 / B`, `B = 2`. Receiver 1 caches `(2,1), (4,1)` and receiver 2
//! caches `(2,2), (4,2)`; they request files 3 and 1. One XOR `(2,1) ^ (4,2)`
//! plus two refinements of `0.25` gives rate `1.0`; the correlation-unaware
//! reference needs `1.25`.

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::baselines::prefetch_reference_rate;
use crate::caching::CacheConfiguration;
use crate::coloring::{build_codeword, choose_min, simulate_decoding};
use crate::demand::{packet_demand, DemandRealization};
use crate::graph::ClusteredConflictGraph;
use crate::library::{build_synthetic_library, CorrelationModel, LibraryConfig, MatchMatrix};
use crate::packet::PacketId;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example1Report {
    pub rate: f64,
    pub xor_rate: f64,
    pub refinement_rate: f64,
    pub colors: usize,
    pub reference_rate: f64,
    pub decoded: bool,
    pub trace: String,
}

const TOML: &str = r#"schema_version = 1
name = "example1"

[library]
files = 4
packets = 2
delta = 0.25
matrix = { kind = "rows", rows = [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]] }

[demand]
receivers = 2
q = [0.25, 0.25, 0.25, 0.25]

[sweep]
cache_sizes = [1]
schemes = ["CA_RAP_CM"]

[sampling]
cache_draws = 1
demand_draws = 1

[pinned]
caches = [["(2,1)", "(4,1)"], ["(2,2)", "(4,2)"]]
demand = [3, 1]

[output]
traces = true
"#;

/// The example as a pinned scenario.
pub fn example1_scenario() -> Scenario {
    Scenario::from_toml(TOML).expect("built-in scenario parses")
}

fn parts() -> Result<(CorrelationModel, CacheConfiguration, DemandRealization)> {
    let mut g = MatchMatrix::identity(4);
    for (r, c) in [(1, 0), (0, 1), (3, 2), (2, 3)] {
        g.set(r, c, 1.0);
    }
    let model = build_synthetic_library(&LibraryConfig::new(4, 2, 0.25, g)?, 0)?;
    let p = |f, b| PacketId::from_one_based(f, b).expect("in range");
    let caches = CacheConfiguration::from_lists(4, 2, &[vec![p(2, 1), p(4, 1)], vec![p(2, 2), p(4, 2)]])?;
    Ok((model, caches, DemandRealization(vec![2, 0])))
}

pub fn example1() -> Result<Example1Report> {
    let (model, caches, demand) = parts()?;
    let packets = packet_demand(&demand, &caches, &model)?;
    let graph = ClusteredConflictGraph::build(&caches, &packets, &model)?;
    let (coloring, _) = choose_min(&graph);
    let plan = build_codeword(&coloring, &graph, &packets)?;
    let report = simulate_decoding(&plan, &caches, &packets, &model);
    Ok(Example1Report {
        rate: plan.rate,
        xor_rate: plan.xor_rate(),
        refinement_rate: plan.refinement_rate(),
        colors: plan.colors(),
        reference_rate: prefetch_reference_rate(4, 1, &demand)?,
        decoded: report.all_succeeded(),
        trace: plan.to_trace(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::SchemeId;

    #[test]
    fn rates() {
        let r = example1().unwrap();
        assert_eq!(r.rate, 1.0);
        assert_eq!(r.colors, 1);
        assert_eq!(r.reference_rate, 1.25);
        assert!(r.decoded);
    }

    #[test]
    fn scenario_reproduces_the_example() {
        let record = super::super::run(&example1_scenario()).unwrap();
        let point = record.point(SchemeId::CaRapCm, 1.0).unwrap();
        assert_eq!(point.mean_rate, 1.0);
        assert_eq!(point.decode_failures, 0);
        assert_eq!(point.realizations[0].files, vec![2, 0]);
    }
}
