use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::ClusterColoring;
use crate::caching::CacheConfiguration;
use crate::demand::{PacketDemand, Substitution};
use crate::graph::ClusteredConflictGraph;
use crate::library::CorrelationModel;
use crate::packet::PacketId;
use crate::Result;

const TOL: f64 = 1e-12;

/// How one cluster is served.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub cluster: usize,
    pub receiver: usize,
    pub wanted: PacketId,
    pub delivered: PacketId,
    pub transmission: usize,
    /// `H(wanted | delivered)`, file-units.
    pub refinement: f64,
}

/// Multicast codeword: XOR transmissions (one per color) followed by uncoded
/// refinement segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodewordPlan {
    pub packets_per_file: usize,
    /// Distinct packets XORed in each transmission, ascending.
    pub transmissions: Vec<Vec<PacketId>>,
    pub deliveries: Vec<Delivery>,
    /// Substitutions made from the receiver's own cache, per receiver.
    pub local: Vec<Vec<Substitution>>,
    /// Total refinement per receiver (deliveries plus local), file-units.
    pub refinements: Vec<f64>,
    /// Codeword length, file-units.
    pub rate: f64,
}

impl CodewordPlan {
    pub fn colors(&self) -> usize {
        self.transmissions.len()
    }

    pub fn xor_rate(&self) -> f64 {
        self.transmissions.len() as f64 / self.packets_per_file as f64
    }

    pub fn refinement_rate(&self) -> f64 {
        self.refinements.iter().sum()
    }

    /// Text trace: one line per transmission, then per-receiver refinements.
    pub fn to_trace(&self) -> String {
        let mut s = String::new();
        for (i, tx) in self.transmissions.iter().enumerate() {
            let parts: Vec<String> = tx.iter().map(PacketId::to_string).collect();
            let _ = writeln!(s, "tx {} = {}", i + 1, parts.join(" ^ "));
        }
        for d in &self.deliveries {
            let _ = writeln!(
                s,
                "u{} wants {} gets {} from tx {} refine {}",
                d.receiver + 1,
                d.wanted,
                d.delivered,
                d.transmission + 1,
                d.refinement
            );
        }
        for (u, subs) in self.local.iter().enumerate() {
            for sub in subs {
                let _ = writeln!(
                    s,
                    "u{} wants {} uses cached {} refine {}",
                    u + 1,
                    sub.wanted,
                    sub.substitute,
                    sub.refinement
                );
            }
        }
        for (u, r) in self.refinements.iter().enumerate() {
            let _ = writeln!(s, "refinement u{} = {r}", u + 1);
        }
        let _ = writeln!(s, "rate = {}", self.rate);
        s
    }
}

pub fn build_codeword(
    coloring: &ClusterColoring,
    h: &ClusteredConflictGraph,
    demand: &PacketDemand,
) -> Result<CodewordPlan> {
    coloring.validate(h)?;
    Ok(build_codeword_unchecked(coloring, h, demand))
}

/// Builds the plan without validating the coloring. Used for fault injection;
/// the decoder is expected to reject plans from invalid colorings.
pub fn build_codeword_unchecked(
    coloring: &ClusterColoring,
    h: &ClusteredConflictGraph,
    demand: &PacketDemand,
) -> CodewordPlan {
    let b = demand.packets_per_file;
    let mut transmissions: Vec<Vec<PacketId>> = vec![Vec::new(); coloring.colors];
    let mut deliveries = Vec::with_capacity(h.clusters().len());
    let mut refinements: Vec<f64> = (0..demand.receivers()).map(|u| demand.local_refinement(u)).collect();
    for (c, a) in coloring.assignment.iter().enumerate() {
        let v = h.vertex(a.vertex);
        if let Some(tx) = transmissions.get_mut(a.color) {
            tx.push(v.packet);
        }
        let cluster = &h.clusters()[c];
        deliveries.push(Delivery {
            cluster: c,
            receiver: cluster.receiver,
            wanted: cluster.root_packet,
            delivered: v.packet,
            transmission: a.color,
            refinement: v.refinement,
        });
        refinements[cluster.receiver] += v.refinement;
    }
    for tx in &mut transmissions {
        tx.sort_unstable();
        tx.dedup();
    }
    let rate = transmissions.len() as f64 / b as f64 + refinements.iter().sum::<f64>();
    CodewordPlan {
        packets_per_file: b,
        transmissions,
        deliveries,
        local: demand.substitutions.clone(),
        refinements,
        rate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DecodeFailure {
    /// A transmission mixes in a packet the receiver does not hold.
    Unpeelable { transmission: usize, missing: PacketId },
    /// The delivered packet is not part of the transmission it points at.
    NotTransmitted { transmission: usize, packet: PacketId },
    /// The delivered packet is neither the wanted one nor correlated with it.
    Uncorrelated { wanted: PacketId, delivered: PacketId },
    /// Refinement accounting disagrees with the entropy model.
    Refinement { wanted: PacketId, claimed: f64, expected: f64 },
    /// A substitute is not cached or not correlated.
    BadSubstitute { wanted: PacketId, substitute: PacketId },
    /// A packet of the requested file is never reconstructed.
    Missing { packet: PacketId },
}

impl fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeFailure::Unpeelable { transmission, missing } => {
                write!(f, "tx {} cannot be peeled: {missing} not cached", transmission + 1)
            }
            DecodeFailure::NotTransmitted { transmission, packet } => {
                write!(f, "{packet} is not part of tx {}", transmission + 1)
            }
            DecodeFailure::Uncorrelated { wanted, delivered } => {
                write!(f, "{delivered} is not correlated with wanted {wanted}")
            }
            DecodeFailure::Refinement { wanted, claimed, expected } => {
                write!(f, "refinement for {wanted} is {claimed}, expected {expected}")
            }
            DecodeFailure::BadSubstitute { wanted, substitute } => {
                write!(f, "substitute {substitute} for {wanted} is unusable")
            }
            DecodeFailure::Missing { packet } => write!(f, "{packet} is never reconstructed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReceiverOutcome {
    pub success: bool,
    /// Refinement recomputed from the entropy model, file-units.
    pub refinement: f64,
    pub failure: Option<DecodeFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub receivers: Vec<ReceiverOutcome>,
    /// Codeword length recounted from transmissions and recomputed refinements.
    pub rate: f64,
    /// Largest single refinement seen, file-units.
    pub max_refinement: f64,
}

impl DecodeReport {
    pub fn all_succeeded(&self) -> bool {
        self.receivers.iter().all(|r| r.success)
    }

    pub fn first_failure(&self) -> Option<(usize, &DecodeFailure)> {
        self.receivers
            .iter()
            .enumerate()
            .find_map(|(u, r)| r.failure.as_ref().map(|f| (u, f)))
    }
}

/// Replays the codeword symbolically at every receiver: each transmission is
/// peeled with the cache, the recovered packet stands in for the wanted one
/// (plus a refinement), and the whole requested file must be accounted for.
pub fn simulate_decoding(
    plan: &CodewordPlan,
    caches: &CacheConfiguration,
    demand: &PacketDemand,
    model: &CorrelationModel,
) -> DecodeReport {
    let n = demand.receivers();
    let b = model.packets();
    let mut outcomes: Vec<ReceiverOutcome> = (0..n)
        .map(|_| ReceiverOutcome {
            success: true,
            refinement: 0.0,
            failure: None,
        })
        .collect();
    let mut reconstructed: Vec<Vec<bool>> = vec![vec![false; b]; n];
    let mut max_refinement: f64 = 0.0;
    let fail = |o: &mut ReceiverOutcome, f: DecodeFailure| {
        if o.success {
            o.success = false;
            o.failure = Some(f);
        }
    };

    for d in &plan.deliveries {
        let u = d.receiver;
        let cache = caches.cache(u);
        let Some(tx) = plan.transmissions.get(d.transmission) else {
            fail(
                &mut outcomes[u],
                DecodeFailure::NotTransmitted { transmission: d.transmission, packet: d.delivered },
            );
            continue;
        };
        if !tx.contains(&d.delivered) {
            fail(
                &mut outcomes[u],
                DecodeFailure::NotTransmitted { transmission: d.transmission, packet: d.delivered },
            );
            continue;
        }
        if let Some(&missing) = tx.iter().find(|&&q| q != d.delivered && !cache.contains(q)) {
            fail(
                &mut outcomes[u],
                DecodeFailure::Unpeelable { transmission: d.transmission, missing },
            );
            continue;
        }
        if d.delivered != d.wanted && !model.are_correlated(d.wanted, d.delivered) {
            fail(
                &mut outcomes[u],
                DecodeFailure::Uncorrelated { wanted: d.wanted, delivered: d.delivered },
            );
            continue;
        }
        let expected = model.conditional_entropy(d.wanted, d.delivered);
        if (expected - d.refinement).abs() > TOL {
            fail(
                &mut outcomes[u],
                DecodeFailure::Refinement { wanted: d.wanted, claimed: d.refinement, expected },
            );
            continue;
        }
        max_refinement = max_refinement.max(expected);
        outcomes[u].refinement += expected;
        if d.wanted.file == demand.files[u] {
            reconstructed[u][d.wanted.packet] = true;
        }
    }

    for (u, subs) in plan.local.iter().enumerate().take(n) {
        let cache = caches.cache(u);
        for s in subs {
            let usable = cache.contains(s.substitute) && model.are_correlated(s.wanted, s.substitute);
            let expected = model.conditional_entropy(s.wanted, s.substitute);
            if !usable {
                fail(
                    &mut outcomes[u],
                    DecodeFailure::BadSubstitute { wanted: s.wanted, substitute: s.substitute },
                );
                continue;
            }
            if (expected - s.refinement).abs() > TOL {
                fail(
                    &mut outcomes[u],
                    DecodeFailure::Refinement { wanted: s.wanted, claimed: s.refinement, expected },
                );
                continue;
            }
            max_refinement = max_refinement.max(expected);
            outcomes[u].refinement += expected;
            if s.wanted.file == demand.files[u] {
                reconstructed[u][s.wanted.packet] = true;
            }
        }
    }

    for u in 0..n {
        let f = demand.files[u];
        for packet in 0..b {
            let p = PacketId::new(f, packet);
            if !reconstructed[u][packet] && !caches.cache(u).contains(p) {
                fail(&mut outcomes[u], DecodeFailure::Missing { packet: p });
                break;
            }
        }
    }

    let rate = plan.transmissions.len() as f64 / b as f64
        + outcomes.iter().map(|o| o.refinement).sum::<f64>();
    DecodeReport {
        receivers: outcomes,
        rate,
        max_refinement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::{choose_min, ClusterColor};
    use crate::demand::{packet_demand, DemandRealization};
    use crate::library::{build_synthetic_library, LibraryConfig, MatchMatrix};

    fn p(f: usize, b: usize) -> PacketId {
        PacketId::from_one_based(f, b).unwrap()
    }

    fn example1() -> (CorrelationModel, CacheConfiguration, PacketDemand, ClusteredConflictGraph) {
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
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        (model, caches, d, h)
    }

    #[test]
    fn example1_rate_is_one() {
        let (model, caches, d, h) = example1();
        let (coloring, _) = choose_min(&h);
        let plan = build_codeword(&coloring, &h, &d).unwrap();
        assert_eq!(plan.transmissions, vec![vec![p(2, 1), p(4, 2)]]);
        assert_eq!(plan.xor_rate(), 0.5);
        assert_eq!(plan.refinements, vec![0.25, 0.25]);
        assert_eq!(plan.rate, 1.0);
        let report = simulate_decoding(&plan, &caches, &d, &model);
        assert!(report.all_succeeded());
        assert_eq!(report.rate, 1.0);
        assert_eq!(report.receivers[0].refinement, 0.25);
        assert_eq!(report.receivers[1].refinement, 0.25);
        assert!(report.max_refinement <= 0.25 / 2.0 + 1e-15);
        assert!(plan.to_trace().contains("tx 1 = (2,1) ^ (4,2)"));
    }

    #[test]
    fn identity_library_has_no_refinement() {
        let model = CorrelationModel::uncorrelated(3, 2, 0.0).unwrap();
        let caches = CacheConfiguration::from_lists(3, 2, &[vec![p(2, 1)], vec![p(1, 2)]]).unwrap();
        let d = packet_demand(&DemandRealization(vec![0, 1]), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        let plan = build_codeword(&choose_min(&h).0, &h, &d).unwrap();
        assert_eq!(plan.refinement_rate(), 0.0);
        assert!(simulate_decoding(&plan, &caches, &d, &model).all_succeeded());
    }

    #[test]
    fn empty_demand_is_vacuous() {
        let model = CorrelationModel::uncorrelated(2, 2, 0.0).unwrap();
        let caches = CacheConfiguration::from_lists(
            2,
            2,
            &[vec![p(1, 1), p(1, 2)], vec![p(1, 1), p(1, 2)]],
        )
        .unwrap();
        let d = packet_demand(&DemandRealization(vec![0, 0]), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        let plan = build_codeword(&choose_min(&h).0, &h, &d).unwrap();
        assert!(plan.transmissions.is_empty());
        assert_eq!(plan.rate, 0.0);
        assert!(simulate_decoding(&plan, &caches, &d, &model).all_succeeded());
    }

    #[test]
    fn invalid_coloring_is_rejected_and_detected() {
        let model = CorrelationModel::uncorrelated(3, 1, 0.0).unwrap();
        let caches = CacheConfiguration::empty(2, 3, 1);
        let d = packet_demand(&DemandRealization(vec![0, 1]), &caches, &model).unwrap();
        let h = ClusteredConflictGraph::build(&caches, &d, &model).unwrap();
        // both roots in one color although nobody caches anything
        let bad = ClusterColoring {
            assignment: vec![
                ClusterColor { vertex: 0, color: 0 },
                ClusterColor { vertex: 1, color: 0 },
            ],
            colors: 1,
        };
        assert!(build_codeword(&bad, &h, &d).is_err());
        let plan = build_codeword_unchecked(&bad, &h, &d);
        let report = simulate_decoding(&plan, &caches, &d, &model);
        assert!(!report.all_succeeded());
        assert!(matches!(
            report.first_failure(),
            Some((0, DecodeFailure::Unpeelable { .. }))
        ));
    }

    #[test]
    fn dropped_transmission_is_missing() {
        let (model, caches, d, h) = example1();
        let mut plan = build_codeword(&choose_min(&h).0, &h, &d).unwrap();
        plan.deliveries.pop();
        let report = simulate_decoding(&plan, &caches, &d, &model);
        assert!(matches!(report.first_failure(), Some((1, DecodeFailure::Missing { .. }))));
    }
}
