//! Consistency checks over the realizations a scenario generates.
//!
//! Each check reports how many instances it examined and the first
//! counterexample it met.

use serde::{Deserialize, Serialize};

use super::{deliver_correlation_aware, deliver_conventional, RunContext, Scenario};
use crate::baselines::SchemeId;
use crate::caching::CacheConfiguration;
use crate::coloring::{
    brute_force_chromatic_number, brute_force_min_cluster_coloring, build_codeword_unchecked, choose_min,
    simulate_decoding, MAX_EXACT_CLUSTERS, MAX_EXACT_VERTICES,
};
use crate::demand::{packet_demand, DemandRealization};
use crate::graph::ClusteredConflictGraph;
use crate::library::CorrelationModel;
use crate::Result;

const REFINEMENT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    /// First counterexample, if any.
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Tally {
    name: &'static str,
    instances: usize,
    detail: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            instances: 0,
            detail: None,
        }
    }

    fn record(&mut self, failure: Option<String>) {
        self.instances += 1;
        if self.detail.is_none() {
            self.detail = failure;
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.detail.is_none(),
            instances: self.instances,
            detail: self.detail,
        }
    }
}

/// Delivers one realization and replays it; `None` when the coloring is
/// valid, every receiver decodes and no cluster refinement exceeds `δ/B`.
pub fn check_delivery(
    caches: &CacheConfiguration,
    demand: &DemandRealization,
    model: &CorrelationModel,
) -> Result<Option<String>> {
    let delivery = match deliver_correlation_aware(caches, demand, model, true) {
        Ok(d) => d,
        Err(e) => return Ok(Some(format!("delivery failed: {e}"))),
    };
    let report = delivery.decode.expect("decoding requested");
    if let Some((u, failure)) = report.first_failure() {
        return Ok(Some(format!("receiver {} failed to decode: {failure}", u + 1)));
    }
    let limit = model.delta() / model.packets() as f64 + REFINEMENT_EPS;
    if report.max_refinement > limit {
        return Ok(Some(format!(
            "refinement {} exceeds delta/B = {}",
            report.max_refinement,
            model.delta() / model.packets() as f64
        )));
    }
    if (report.rate - delivery.plan.rate).abs() > 1e-9 {
        return Ok(Some(format!(
            "decoder recounts rate {} but the plan claims {}",
            report.rate, delivery.plan.rate
        )));
    }
    Ok(None)
}

/// Colors and rate of the correlation-aware pipeline run on an uncorrelated
/// library must equal those of the conventional pipeline.
pub fn check_identity_equivalence(caches: &CacheConfiguration, demand: &DemandRealization) -> Result<Option<String>> {
    let model = CorrelationModel::uncorrelated(caches.files(), caches.packets(), 0.0)?;
    let ca = deliver_correlation_aware(caches, demand, &model, false)?;
    let (colors, rate) = deliver_conventional(caches, demand)?;
    if ca.plan.colors() != colors || ca.plan.rate != rate {
        return Ok(Some(format!(
            "demand {:?}: clustered pipeline {} colors / rate {}, conventional {} colors / rate {}",
            demand.0,
            ca.plan.colors(),
            ca.plan.rate,
            colors,
            rate
        )));
    }
    Ok(None)
}

/// Exhaustive minimum cluster coloring against the greedy result and the
/// root-only chromatic number. `None` inside `Ok` means the instance passed;
/// `Ok(None)` is also returned for instances above the size guard, which the
/// caller can detect with [`fits_oracle`].
pub fn check_oracle(h: &ClusteredConflictGraph) -> Result<Option<String>> {
    if !fits_oracle(h) {
        return Ok(None);
    }
    let best = brute_force_min_cluster_coloring(h)?;
    if let Err(e) = best.validate(h) {
        return Ok(Some(format!("exhaustive coloring is invalid: {e}")));
    }
    let greedy = choose_min(h).0.colors;
    let chromatic = brute_force_chromatic_number(h)?;
    if best.colors > greedy || best.colors > chromatic {
        return Ok(Some(format!(
            "exhaustive {} colors, greedy {greedy}, root chromatic number {chromatic}",
            best.colors
        )));
    }
    Ok(None)
}

pub fn fits_oracle(h: &ClusteredConflictGraph) -> bool {
    h.clusters().len() <= MAX_EXACT_CLUSTERS && h.vertices().len() <= MAX_EXACT_VERTICES
}

/// Merges the colors of two conflicting representatives and expects the
/// decoder to notice. `Ok(None)` when no conflicting pair exists or the fault
/// was caught.
pub fn check_fault_injection(
    caches: &CacheConfiguration,
    demand: &DemandRealization,
    model: &CorrelationModel,
) -> Result<Option<String>> {
    let packets = packet_demand(demand, caches, model)?;
    let h = ClusteredConflictGraph::build(caches, &packets, model)?;
    let (mut coloring, _) = choose_min(&h);
    let k = coloring.assignment.len();
    let pair = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .find(|&(i, j)| {
            let (a, b) = (coloring.assignment[i], coloring.assignment[j]);
            a.color != b.color && h.adjacent(a.vertex, b.vertex)
        });
    let Some((i, j)) = pair else {
        return Ok(None);
    };
    coloring.assignment[j].color = coloring.assignment[i].color;
    let plan = build_codeword_unchecked(&coloring, &h, &packets);
    let report = simulate_decoding(&plan, caches, &packets, model);
    if report.all_succeeded() {
        return Ok(Some(format!(
            "merging the colors of clusters {i} and {j} went unnoticed for demand {:?}",
            demand.0
        )));
    }
    Ok(None)
}

/// Runs every check over the realizations the scenario would simulate for the
/// correlation-aware scheme.
pub fn verify(scenario: &Scenario) -> Result<VerifyReport> {
    let ctx = RunContext::new(scenario)?;
    let sampling = &scenario.sampling;
    let mut delivery = Tally::new("decoding");
    let mut identity = Tally::new("identity_equivalence");
    let mut fault = Tally::new("fault_injection");
    let mut oracle = Tally::new("oracle");
    let mut dominance = Tally::new("bound_dominance");
    for &m in &scenario.sweep.cache_sizes {
        let plan = ctx.plan_scheme(SchemeId::CaRapCm, m)?;
        let mut rates = Vec::new();
        for c in 0..sampling.cache_draws {
            let caches = ctx.caches(&plan.distribution, m, c)?;
            for d in 0..sampling.demand_draws {
                let demand = ctx.demand(m, c, d);
                delivery.record(check_delivery(&caches, &demand, &plan.model)?);
                identity.record(check_identity_equivalence(&caches, &demand)?);
                fault.record(check_fault_injection(&caches, &demand, &plan.model)?);
                let packets = packet_demand(&demand, &caches, &plan.model)?;
                let h = ClusteredConflictGraph::build(&caches, &packets, &plan.model)?;
                if fits_oracle(&h) {
                    oracle.record(check_oracle(&h)?);
                }
                rates.push(deliver_correlation_aware(&caches, &demand, &plan.model, false)?.plan.rate);
            }
        }
        if !rates.is_empty() {
            let n = rates.len() as f64;
            let mean = rates.iter().sum::<f64>() / n;
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let se = (var / n).sqrt();
            let limit = 1.1 * plan.bound + 3.0 * se;
            dominance.record((mean > limit).then(|| {
                format!("M = {m}: simulated {mean:.4} (stderr {se:.4}) above bound {:.4}", plan.bound)
            }));
        }
    }
    Ok(VerifyReport {
        checks: vec![
            delivery.finish(),
            identity.finish(),
            fault.finish(),
            oracle.finish(),
            dominance.finish(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scenario_passes() {
        let s = Scenario::from_toml(
            r#"
schema_version = 1
[library]
files = 5
packets = 3
delta = 0.3
matrix = { kind = "partners", per_packet = 1.0 }
[demand]
receivers = 3
zipf_alpha = 0.5
[sweep]
cache_sizes = [1, 2]
[sampling]
cache_draws = 3
demand_draws = 5
seed = 2
"#,
        )
        .unwrap();
        let report = verify(&s).unwrap();
        for c in &report.checks[..4] {
            assert!(c.passed, "{c:?}");
            assert!(c.instances > 0, "{c:?}");
        }
    }
}
