//! Seeded Monte Carlo sweeps over cache sizes and schemes.
//!
//! Every random stream hangs off the scenario seed: the library from
//! `seed / LIBRARY`, the caches of draw `c` at cache size `M` from
//! `seed / CACHE / M / c`, and its `d`-th demand from
//! `seed / DEMAND / M / c / d`. The scheme is not part of any path, so two
//! schemes with the same caching distribution see identical realizations.

mod emit;
mod example1;
pub mod scenario;
mod verify;

pub use emit::{emit, write_csv, write_plot_data, OutputFiles};
pub use example1::{example1, example1_scenario, Example1Report};
pub use scenario::Scenario;
pub use verify::{
    check_delivery, check_fault_injection, check_identity_equivalence, check_oracle, fits_oracle, verify, CheckResult,
    VerifyReport,
};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lc_nm_expected_rate, lc_u_expected_rate, SchemeId};
use crate::bound::{optimize_delta, optimize_p, BoundProblem};
use crate::caching::{rap_place, CacheConfiguration, CachingDistribution};
use crate::coloring::conventional::{gcc, ConflictGraph};
use crate::coloring::{build_codeword, choose_min, simulate_decoding, CodewordPlan, DecodeReport};
use crate::demand::{packet_demand, sample_demand, DemandDistribution, DemandRealization};
use crate::graph::ClusteredConflictGraph;
use crate::library::{build_synthetic_library, CorrelationModel, MatchMatrix};
use crate::seed::{SeedTree, STREAM_CACHE, STREAM_DEMAND, STREAM_LIBRARY, STREAM_RHO};
use crate::{Result, VERSION};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "CACM_THREADS";

/// Sizes the global worker pool from `CACM_THREADS` when set. Later calls,
/// or calls after the pool is in use, leave it unchanged.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Correlation-aware delivery of one realization.
#[derive(Clone, Debug)]
pub struct CaDelivery {
    pub graph: ClusteredConflictGraph,
    pub plan: CodewordPlan,
    pub decode: Option<DecodeReport>,
}

/// Packet demand, clustered graph, greedy coloring and codeword for one
/// realization; the codeword is replayed through the decoder when `check`.
pub fn deliver_correlation_aware(
    caches: &CacheConfiguration,
    demand: &DemandRealization,
    model: &CorrelationModel,
    check: bool,
) -> Result<CaDelivery> {
    let packets = packet_demand(demand, caches, model)?;
    let graph = ClusteredConflictGraph::build(caches, &packets, model)?;
    let (coloring, _) = choose_min(&graph);
    let plan = build_codeword(&coloring, &graph, &packets)?;
    let decode = check.then(|| simulate_decoding(&plan, caches, &packets, model));
    Ok(CaDelivery { graph, plan, decode })
}

/// Correlation-unaware delivery: conventional conflict graph and greedy
/// coloring. Returns `(colors, rate)`.
pub fn deliver_conventional(caches: &CacheConfiguration, demand: &DemandRealization) -> Result<(usize, f64)> {
    let graph = ConflictGraph::build(caches, &demand.0)?;
    let colors = gcc(&graph).count;
    Ok((colors, colors as f64 / caches.packets() as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub cache_draw: usize,
    pub demand_draw: usize,
    pub files: Vec<usize>,
    pub colors: usize,
    pub rate: f64,
    /// Refinement part of the rate, file-units.
    pub refinement: f64,
    /// `None` when decoding was not replayed.
    pub decoded: Option<bool>,
    /// Largest single refinement seen by the decoder.
    pub max_refinement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub scheme: SchemeId,
    pub cache_size: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Analytical bound at the caching distribution used.
    pub bound: Option<f64>,
    pub delta: Option<f64>,
    pub p_digest: Option<String>,
    pub mean_colors: Option<f64>,
    pub decode_failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realizations: Vec<RealizationOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub elapsed_seconds: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub tool_version: String,
    pub scenario_name: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub points: Vec<PointResult>,
    pub runtime: RuntimeInfo,
}

impl ResultRecord {
    pub fn point(&self, scheme: SchemeId, cache_size: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.scheme == scheme && p.cache_size == cache_size)
    }

    pub fn series(&self, scheme: SchemeId) -> Vec<&PointResult> {
        let mut s: Vec<&PointResult> = self.points.iter().filter(|p| p.scheme == scheme).collect();
        s.sort_by(|a, b| a.cache_size.total_cmp(&b.cache_size));
        s
    }
}

/// Shared state of one run.
pub struct RunContext {
    pub scenario: Scenario,
    pub q: DemandDistribution,
    pub model: CorrelationModel,
    pub root: SeedTree,
    pinned_caches: Option<CacheConfiguration>,
    pinned_demand: Option<DemandRealization>,
}

impl RunContext {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let root = SeedTree::new(scenario.sampling.seed);
        let config = scenario.library_config()?;
        let model = build_synthetic_library(&config, root.child(STREAM_LIBRARY).value())?;
        let pinned_caches = match scenario.pinned_caches()? {
            Some(lists) => Some(CacheConfiguration::from_lists(
                scenario.library.files,
                scenario.library.packets,
                &lists,
            )?),
            None => None,
        };
        Ok(RunContext {
            q: scenario.demand_distribution()?,
            model,
            root,
            pinned_caches,
            pinned_demand: scenario.pinned_demand().map(DemandRealization),
            scenario: scenario.clone(),
        })
    }

    /// Bound inputs at one cache size with the scenario's demand and estimator.
    pub fn bound_problem(&self, cache_size: f64, delta: f64, matrix: MatchMatrix) -> BoundProblem {
        let mut rho = self.scenario.optimizer.rho;
        if let crate::bound::RhoMethod::MonteCarlo { seed, .. } = &mut rho {
            *seed = self.root.child(STREAM_RHO).child(*seed).value();
        }
        BoundProblem {
            receivers: self.scenario.demand.receivers,
            cache_size,
            q: self.q.probs().to_vec(),
            delta,
            matrix,
            rho,
        }
    }

    /// Caches of draw `c` at cache size `m`.
    pub fn caches(&self, dist: &CachingDistribution, m: f64, c: usize) -> Result<CacheConfiguration> {
        if let Some(pinned) = &self.pinned_caches {
            return Ok(pinned.clone());
        }
        let seed = self.root.child(STREAM_CACHE).child(m.to_bits()).child(c as u64);
        rap_place(dist, self.scenario.library.packets, self.scenario.demand.receivers, seed)
    }

    /// Demand `d` of cache draw `c` at cache size `m`.
    pub fn demand(&self, m: f64, c: usize, d: usize) -> DemandRealization {
        if let Some(pinned) = &self.pinned_demand {
            return pinned.clone();
        }
        let mut rng = self
            .root
            .child(STREAM_DEMAND)
            .child(m.to_bits())
            .child(c as u64)
            .child(d as u64)
            .rng();
        sample_demand(&self.q, self.scenario.demand.receivers, &mut rng)
    }

    /// Caching distribution, bound and threshold chosen for a scheme at
    /// cache size `m`; the model is the library seen at that threshold.
    pub fn plan_scheme(&self, scheme: SchemeId, m: f64) -> Result<SchemePlan> {
        let files = self.scenario.library.files;
        match scheme {
            SchemeId::RapCm => {
                let pr = self.bound_problem(m, 0.0, MatchMatrix::identity(files));
                let opt = optimize_p(&pr, self.scenario.optimizer.strategy)?;
                Ok(SchemePlan {
                    distribution: opt.distribution,
                    bound: opt.bound,
                    delta: 0.0,
                    model: CorrelationModel::uncorrelated(files, self.scenario.library.packets, 0.0)?,
                })
            }
            SchemeId::CaRapCm => {
                let grid = self.scenario.delta_grid();
                let mut matrices = Vec::with_capacity(grid.len());
                for &d in &grid {
                    matrices.push((d, self.model.at_threshold(d)?.config().matrix.clone()));
                }
                let pick = |d: f64| {
                    matrices
                        .iter()
                        .find(|(x, _)| *x == d)
                        .map(|(_, g)| g.clone())
                        .expect("grid matrices are precomputed")
                };
                let pr = self.bound_problem(m, self.scenario.library.delta, self.model.config().matrix.clone());
                let choice = optimize_delta(&pr, &grid, pick, self.scenario.optimizer.strategy)?;
                Ok(SchemePlan {
                    distribution: choice.optimized.distribution,
                    bound: choice.optimized.bound,
                    delta: choice.delta,
                    model: self.model.at_threshold(choice.delta)?,
                })
            }
            SchemeId::LcU | SchemeId::LcNm => Err(crate::Error::Bound(format!(
                "{scheme} has no random placement"
            ))),
        }
    }
}

/// What a randomized scheme uses at one cache size.
#[derive(Clone, Debug)]
pub struct SchemePlan {
    pub distribution: CachingDistribution,
    pub bound: f64,
    pub delta: f64,
    pub model: CorrelationModel,
}

fn local_caching_size(m: f64) -> usize {
    m.floor() as usize
}

/// Mean and standard error from per-cache-draw means; with one cache draw the
/// spread of individual realizations is used instead.
fn summarize(rates: &[Vec<f64>]) -> (f64, f64, usize) {
    let flat: Vec<f64> = rates.iter().flatten().copied().collect();
    let count = flat.len();
    let mean_of = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let stderr_of = |xs: &[f64]| {
        if xs.len() < 2 {
            return 0.0;
        }
        let mu = mean_of(xs);
        let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (var / xs.len() as f64).sqrt()
    };
    if rates.len() >= 2 {
        let means: Vec<f64> = rates.iter().map(|r| mean_of(r)).collect();
        (mean_of(&means), stderr_of(&means), count)
    } else {
        (mean_of(&flat), stderr_of(&flat), count)
    }
}

/// Simulates one randomized scheme at one cache size.
pub fn run_point(ctx: &RunContext, scheme: SchemeId, m: f64) -> Result<PointResult> {
    let sampling = &ctx.scenario.sampling;
    match scheme {
        SchemeId::LcU | SchemeId::LcNm => {
            let n = ctx.scenario.demand.receivers;
            let k = local_caching_size(m);
            let rate = if scheme == SchemeId::LcU {
                lc_u_expected_rate(&ctx.q, n, k)
            } else {
                lc_nm_expected_rate(&ctx.q, n, k)
            };
            return Ok(PointResult {
                scheme,
                cache_size: m,
                mean_rate: rate,
                stderr: 0.0,
                samples: 0,
                bound: None,
                delta: None,
                p_digest: None,
                mean_colors: None,
                decode_failures: 0,
                realizations: Vec::new(),
            });
        }
        SchemeId::RapCm | SchemeId::CaRapCm => {}
    }
    let plan = ctx.plan_scheme(scheme, m)?;
    let draws: Vec<Result<Vec<RealizationOutcome>>> = (0..sampling.cache_draws)
        .into_par_iter()
        .map(|c| {
            let caches = ctx.caches(&plan.distribution, m, c)?;
            (0..sampling.demand_draws)
                .map(|d| {
                    let demand = ctx.demand(m, c, d);
                    realize(scheme, &caches, &demand, &plan.model, sampling.check_decoding, c, d)
                })
                .collect()
        })
        .collect();
    let draws: Vec<Vec<RealizationOutcome>> = draws.into_iter().collect::<Result<_>>()?;
    let rates: Vec<Vec<f64>> = draws.iter().map(|r| r.iter().map(|x| x.rate).collect()).collect();
    let (mean_rate, stderr, samples) = summarize(&rates);
    let all: Vec<RealizationOutcome> = draws.into_iter().flatten().collect();
    let mean_colors = all.iter().map(|r| r.colors as f64).sum::<f64>() / all.len() as f64;
    let decode_failures = all.iter().filter(|r| r.decoded == Some(false)).count();
    Ok(PointResult {
        scheme,
        cache_size: m,
        mean_rate,
        stderr,
        samples,
        bound: Some(plan.bound),
        delta: Some(plan.delta),
        p_digest: Some(plan.distribution.digest()),
        mean_colors: Some(mean_colors),
        decode_failures,
        realizations: if ctx.scenario.output.traces { all } else { Vec::new() },
    })
}

fn realize(
    scheme: SchemeId,
    caches: &CacheConfiguration,
    demand: &DemandRealization,
    model: &CorrelationModel,
    check: bool,
    c: usize,
    d: usize,
) -> Result<RealizationOutcome> {
    let mut out = RealizationOutcome {
        cache_draw: c,
        demand_draw: d,
        files: demand.0.clone(),
        colors: 0,
        rate: 0.0,
        refinement: 0.0,
        decoded: None,
        max_refinement: 0.0,
    };
    if scheme == SchemeId::RapCm {
        let (colors, rate) = deliver_conventional(caches, demand)?;
        out.colors = colors;
        out.rate = rate;
    } else {
        let delivery = deliver_correlation_aware(caches, demand, model, check)?;
        out.colors = delivery.plan.colors();
        out.rate = delivery.plan.rate;
        out.refinement = delivery.plan.refinement_rate();
        if let Some(report) = &delivery.decode {
            out.decoded = Some(report.all_succeeded());
            out.max_refinement = report.max_refinement;
        }
    }
    Ok(out)
}

/// Runs the whole sweep. Identical scenarios give identical points.
pub fn run(scenario: &Scenario) -> Result<ResultRecord> {
    init_thread_pool();
    let start = Instant::now();
    let ctx = RunContext::new(scenario)?;
    let mut schemes = scenario.sweep.schemes.clone();
    schemes.sort();
    let mut points = Vec::new();
    for &m in &scenario.sweep.cache_sizes {
        for &scheme in &schemes {
            points.push(run_point(&ctx, scheme, m)?);
        }
    }
    Ok(ResultRecord {
        tool_version: VERSION.to_string(),
        scenario_name: scenario.name.clone(),
        scenario_digest: scenario.digest(),
        seed: scenario.sampling.seed,
        points,
        runtime: RuntimeInfo {
            elapsed_seconds: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schemes: &str, matrix: &str) -> Scenario {
        Scenario::from_toml(&format!(
            r#"
schema_version = 1
[library]
files = 8
packets = 6
delta = 0.2
matrix = {matrix}
[demand]
receivers = 3
zipf_alpha = 0.8
[sweep]
cache_sizes = [0, 2, 8]
schemes = {schemes}
[sampling]
cache_draws = 3
demand_draws = 4
seed = 11
"#
        ))
        .unwrap()
    }

    #[test]
    fn deterministic_and_decodable() {
        let s = small(r#"["CA_RAP_CM", "RAP_CM", "LC_U", "LC_NM"]"#, r#"{ kind = "partners", per_packet = 2.0 }"#);
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 12);
        for p in &a.points {
            assert_eq!(p.decode_failures, 0);
            assert!(p.mean_rate >= 0.0);
        }
        for scheme in SchemeId::ALL {
            assert_eq!(a.point(scheme, 8.0).unwrap().mean_rate, 0.0, "{scheme}");
        }
    }

    #[test]
    fn identity_library_makes_schemes_agree() {
        let mut s = small(r#"["CA_RAP_CM", "RAP_CM"]"#, r#"{ kind = "identity" }"#);
        s.output.traces = true;
        let r = run(&s).unwrap();
        for m in [0.0, 2.0, 8.0] {
            let ca = r.point(SchemeId::CaRapCm, m).unwrap();
            let rap = r.point(SchemeId::RapCm, m).unwrap();
            assert_eq!(ca.p_digest, rap.p_digest);
            for (x, y) in ca.realizations.iter().zip(&rap.realizations) {
                assert_eq!(x.files, y.files);
                assert_eq!(x.colors, y.colors);
                assert_eq!(x.rate, y.rate);
            }
        }
    }

    #[test]
    fn summary_uses_cache_draw_means() {
        let (mean, se, n) = summarize(&[vec![1.0, 3.0], vec![2.0, 2.0], vec![5.0, 5.0]]);
        assert_eq!(n, 6);
        assert!((mean - 3.0).abs() < 1e-15);
        // cache means 2, 2, 5: sd = sqrt(3), stderr = 1
        assert!((se - 1.0).abs() < 1e-12);
        let (mean, se, _) = summarize(&[vec![1.0, 3.0]]);
        assert_eq!(mean, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
