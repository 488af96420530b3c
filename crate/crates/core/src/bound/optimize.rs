use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_parts, BoundProblem};
use crate::caching::CachingDistribution;
use crate::library::MatchMatrix;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const STALL_WINDOW: usize = 10;
const STALL_IMPROVEMENT: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const FD_STEP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ProjectedGradient,
    TruncatedUniform,
    /// Both, keeping the lower bound.
    #[default]
    Best,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizedCaching {
    pub distribution: CachingDistribution,
    /// `min(ψ + ΔR, m̄)` at the returned distribution.
    pub bound: f64,
    /// `ψ + ΔR`, the quantity minimized.
    pub objective: f64,
    /// Strategy that produced the distribution.
    pub strategy: Strategy,
    /// Gradient iterations, or the number of files for truncated-uniform.
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    pub optimized: OptimizedCaching,
}

fn objective(pr: &BoundProblem, p: &[f64]) -> f64 {
    let (psi, dr, _) = evaluate_parts(pr, p);
    psi + dr
}

fn finish(pr: &BoundProblem, p: Vec<f64>, strategy: Strategy, iterations: usize) -> OptimizedCaching {
    let (psi, dr, m_bar) = evaluate_parts(pr, &p);
    OptimizedCaching {
        distribution: CachingDistribution {
            p,
            cache_size: pr.cache_size,
        },
        bound: (psi + dr).min(m_bar),
        objective: psi + dr,
        strategy,
        iterations,
    }
}

/// Caching distribution minimizing the bound for `problem`.
pub fn optimize_p(problem: &BoundProblem, strategy: Strategy) -> Result<OptimizedCaching> {
    problem.validate()?;
    let m = problem.files();
    let uniform = vec![1.0 / m as f64; m];
    if problem.cache_size >= m as f64 {
        // everything fits in every cache
        return Ok(OptimizedCaching {
            distribution: CachingDistribution {
                p: uniform,
                cache_size: problem.cache_size,
            },
            bound: 0.0,
            objective: 0.0,
            strategy,
            iterations: 0,
        });
    }
    if problem.cache_size == 0.0 {
        return Ok(finish(problem, uniform, strategy, 0));
    }
    Ok(match strategy {
        Strategy::ProjectedGradient => projected_gradient(problem),
        Strategy::TruncatedUniform => truncated_uniform(problem),
        Strategy::Best => {
            let (a, b) = rayon::join(|| projected_gradient(problem), || truncated_uniform(problem));
            if a.objective < b.objective {
                a
            } else {
                b
            }
        }
    })
}

/// Uniform caching over the `k` top-ranked files for every feasible `k`;
/// files are ranked by `q_f Σ_f' G[f][f']`.
fn truncated_uniform(pr: &BoundProblem) -> OptimizedCaching {
    let m = pr.files();
    let rows = pr.matrix.row_sums();
    let mut rank: Vec<usize> = (0..m).collect();
    rank.sort_by(|&a, &b| (pr.q[b] * rows[b]).total_cmp(&(pr.q[a] * rows[a])).then(a.cmp(&b)));
    let smallest = ((pr.cache_size - 1e-9).ceil() as usize).clamp(1, m);
    let candidate = |k: usize| {
        let mut p = vec![0.0; m];
        for &f in &rank[..k] {
            p[f] = 1.0 / k as f64;
        }
        p
    };
    let scores: Vec<(usize, f64)> = (smallest..=m)
        .into_par_iter()
        .map(|k| (k, objective(pr, &candidate(k))))
        .collect();
    let (k, _) = scores
        .into_iter()
        .fold((m, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
    finish(pr, candidate(k), Strategy::TruncatedUniform, k)
}

fn projected_gradient(pr: &BoundProblem) -> OptimizedCaching {
    let m = pr.files();
    let cap = 1.0 / pr.cache_size;
    let mut p = vec![1.0 / m as f64; m];
    let mut value = objective(pr, &p);
    let mut history = vec![value];
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let grad = gradient(pr, &p, cap);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let trial = project_capped_simplex(&trial, cap);
            let decrease: f64 = grad.iter().zip(p.iter().zip(&trial)).map(|(g, (a, b))| g * (a - b)).sum();
            if decrease <= 0.0 {
                step *= 0.5;
                continue;
            }
            let v = objective(pr, &trial);
            if v <= value - ARMIJO * decrease {
                accepted = Some((trial, v));
                break;
            }
            step *= 0.5;
        }
        let Some((next, v)) = accepted else { break };
        p = next;
        value = v;
        step = (step * 2.0).min(1e6);
        history.push(value);
        let k = history.len() - 1;
        if k >= STALL_WINDOW && history[k - STALL_WINDOW] - history[k] < STALL_IMPROVEMENT {
            break;
        }
    }
    finish(pr, p, Strategy::ProjectedGradient, iterations)
}

/// Finite-difference gradient; central where both neighbours are feasible.
fn gradient(pr: &BoundProblem, p: &[f64], cap: f64) -> Vec<f64> {
    (0..p.len())
        .into_par_iter()
        .map(|i| {
            let up = p[i] + FD_STEP <= cap;
            let down = p[i] - FD_STEP >= 0.0;
            let at = |x: f64| {
                let mut y = p.to_vec();
                y[i] = x;
                objective(pr, &y)
            };
            match (up, down) {
                (true, true) => (at(p[i] + FD_STEP) - at(p[i] - FD_STEP)) / (2.0 * FD_STEP),
                (true, false) => (at(p[i] + FD_STEP) - objective(pr, p)) / FD_STEP,
                (false, true) => (objective(pr, p) - at(p[i] - FD_STEP)) / FD_STEP,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// Euclidean projection onto `{0 <= p_f <= cap, Σ p_f = 1}`: clamps `y - τ`
/// with the shift `τ` found by bisection.
pub(crate) fn project_capped_simplex(y: &[f64], cap: f64) -> Vec<f64> {
    let mass = |tau: f64| y.iter().map(|&v| (v - tau).clamp(0.0, cap)).sum::<f64>();
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - cap;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut p: Vec<f64> = y.iter().map(|&v| (v - tau).clamp(0.0, cap)).collect();
    // spread the remaining rounding error over the free coordinates
    let total: f64 = p.iter().sum();
    let free: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0 && p[i] < cap).collect();
    if !free.is_empty() {
        let fix = (1.0 - total) / free.len() as f64;
        for i in free {
            p[i] = (p[i] + fix).clamp(0.0, cap);
        }
    }
    p
}

/// Grid search over `δ`; `matrix_for(δ)` supplies the match matrix that holds
/// at that threshold. The first minimizer wins.
pub fn optimize_delta(
    problem: &BoundProblem,
    grid: &[f64],
    matrix_for: impl Fn(f64) -> MatchMatrix + Sync,
    strategy: Strategy,
) -> Result<DeltaChoice> {
    if grid.is_empty() {
        return Err(Error::Bound("empty delta grid".into()));
    }
    if let Some(d) = grid.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(Error::Bound(format!("delta {d} outside [0, 1]")));
    }
    let results: Vec<Result<DeltaChoice>> = grid
        .par_iter()
        .map(|&delta| {
            let pr = BoundProblem {
                delta,
                matrix: matrix_for(delta),
                ..problem.clone()
            };
            Ok(DeltaChoice {
                delta,
                optimized: optimize_p(&pr, strategy)?,
            })
        })
        .collect();
    let mut best: Option<DeltaChoice> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.optimized.bound < b.optimized.bound) {
            best = Some(r);
        }
    }
    Ok(best.expect("grid is not empty"))
}
