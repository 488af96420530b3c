//! Upper bound on the expected delivery rate under random fractional
//! placement, and caching distributions that minimize it.
//!
//! With `x_f = p_f M` the per-packet caching probability of file `f`,
//!
//! ```text
//! λ(ℓ,f)  = Π_f' (1-x_f')^((n-ℓ+1) G[f'][f]) · (1 - Π_f' (1-x_f'^(ℓ-1))^G[f'][f])
//! λ*(ℓ,f) = Π_f' (1-x_f')^((n-ℓ+1) G[f'][f]) · (1-x_f^(ℓ-1)) · (1 - Π_f'≠f (1-x_f'^(ℓ-1))^G[f'][f])
//! ψ       = Σ_ℓ C(n,ℓ) Σ_f ρ(ℓ,f) λ(ℓ,f)
//! ΔR      = δ [ Σ_ℓ ℓ C(n,ℓ) Σ_f ρ*(ℓ,f) λ*(ℓ,f) + n Σ_f q_f (1-x_f) (1 - Π_f'≠f (1-x_f')^G[f'][f]) ]
//! m̄       = Σ_f 1 - (1-q_f)^n
//! bound   = min(ψ + ΔR, m̄)
//! ```
//!
//! `ρ(ℓ,f)` is the probability that `f` attains the largest `λ(ℓ,·)` among
//! `ℓ` files drawn i.i.d. from `q`, ties split evenly among the distinct tied
//! files drawn; `ρ*` is the same for `λ*`.

mod lambda;
mod optimize;
mod rho;

pub use lambda::{lambda, lambda_star, LambdaTables};
pub use optimize::{optimize_delta, optimize_p, DeltaChoice, OptimizedCaching, Strategy};
pub use rho::{expected_max, rho_table, RhoEstimate, RhoMethod, ENUMERATION_LIMIT};

use serde::{Deserialize, Serialize};

use crate::caching::CachingDistribution;
use crate::library::MatchMatrix;
use crate::{Error, Result};

/// Everything the bound depends on except the caching distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundProblem {
    pub receivers: usize,
    pub cache_size: f64,
    pub q: Vec<f64>,
    pub delta: f64,
    pub matrix: MatchMatrix,
    pub rho: RhoMethod,
}

/// A problem together with a caching distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub problem: BoundProblem,
    pub p: Vec<f64>,
}

impl BoundProblem {
    pub fn files(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.q.len();
        if m == 0 {
            return Err(Error::Bound("empty library".into()));
        }
        if self.receivers == 0 {
            return Err(Error::Bound("at least one receiver is needed".into()));
        }
        if !self.cache_size.is_finite() || self.cache_size < 0.0 {
            return Err(Error::Bound(format!("cache size {} is invalid", self.cache_size)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Bound(format!("delta {} outside [0, 1]", self.delta)));
        }
        if self.matrix.files() != m {
            return Err(Error::Bound(format!(
                "match matrix is {0}x{0} for {m} files",
                self.matrix.files()
            )));
        }
        for f in 0..m {
            if self.matrix.get(f, f) != 1.0 {
                return Err(Error::Bound(format!("G[{0}][{0}] must be 1", f + 1)));
            }
        }
        if let Some(i) = self.q.iter().position(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::Bound(format!("q[{}] is negative", i + 1)));
        }
        let total: f64 = self.q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Bound(format!("q sums to {total}")));
        }
        Ok(())
    }

    pub fn with_p(&self, p: Vec<f64>) -> BoundInputs {
        BoundInputs {
            problem: self.clone(),
            p,
        }
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.p.len() != self.problem.files() {
            return Err(Error::Bound(format!(
                "caching distribution has {} entries for {} files",
                self.p.len(),
                self.problem.files()
            )));
        }
        let dist = CachingDistribution {
            p: self.p.clone(),
            cache_size: self.problem.cache_size,
        };
        if let Some(v) = dist.validate().first() {
            return Err(Error::Bound(v.to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub psi: f64,
    pub delta_r: f64,
    pub m_bar: f64,
    pub bound: f64,
    /// Indexed `[ℓ-1][f]`.
    pub lambda: Vec<Vec<f64>>,
    pub lambda_star: Vec<Vec<f64>>,
    pub rho: Vec<Vec<RhoEstimate>>,
    pub rho_star: Vec<Vec<RhoEstimate>>,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expected number of distinct files requested by `n` receivers.
pub fn m_bar(q: &[f64], n: usize) -> f64 {
    q.iter().map(|&qf| 1.0 - (1.0 - qf).powi(n as i32)).sum()
}

/// `ψ` alone.
pub fn psi(inputs: &BoundInputs) -> Result<f64> {
    Ok(rate_upper_bound(inputs)?.psi)
}

/// `ΔR` alone.
pub fn delta_r(inputs: &BoundInputs) -> Result<f64> {
    Ok(rate_upper_bound(inputs)?.delta_r)
}

/// Full bound with every intermediate table.
pub fn rate_upper_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let pr = &inputs.problem;
    let n = pr.receivers;
    let tables = LambdaTables::new(pr, &inputs.p);
    let mut psi = 0.0;
    let mut spread = 0.0;
    let mut rho = Vec::with_capacity(n);
    let mut rho_star = Vec::with_capacity(n);
    for l in 1..=n {
        let r = rho_table(&tables.lambda[l - 1], &pr.q, l, pr.rho, 2 * l as u64);
        let rs = rho_table(&tables.lambda_star[l - 1], &pr.q, l, pr.rho, 2 * l as u64 + 1);
        let c = binomial(n, l);
        psi += c * dot(&r, &tables.lambda[l - 1]);
        spread += l as f64 * c * dot(&rs, &tables.lambda_star[l - 1]);
        rho.push(r);
        rho_star.push(rs);
    }
    let delta_r = pr.delta * (spread + tables.unicast_spread(pr));
    let m_bar = m_bar(&pr.q, n);
    Ok(BoundReport {
        psi,
        delta_r,
        m_bar,
        bound: (psi + delta_r).min(m_bar),
        lambda: tables.lambda,
        lambda_star: tables.lambda_star,
        rho,
        rho_star,
    })
}

fn dot(rho: &[RhoEstimate], values: &[f64]) -> f64 {
    rho.iter().zip(values).map(|(r, v)| r.value * v).sum()
}

/// `(ψ, ΔR, m̄)` without per-file tables; exact and enumeration methods use
/// the expected maximum directly.
pub(crate) fn evaluate_parts(pr: &BoundProblem, p: &[f64]) -> (f64, f64, f64) {
    let n = pr.receivers;
    let tables = LambdaTables::new(pr, p);
    let mut psi = 0.0;
    let mut spread = 0.0;
    for l in 1..=n {
        let c = binomial(n, l);
        psi += c * expected_max(&tables.lambda[l - 1], &pr.q, l, pr.rho, 2 * l as u64);
        if pr.delta > 0.0 {
            spread += l as f64
                * c
                * expected_max(&tables.lambda_star[l - 1], &pr.q, l, pr.rho, 2 * l as u64 + 1);
        }
    }
    let delta_r = if pr.delta > 0.0 {
        pr.delta * (spread + tables.unicast_spread(pr))
    } else {
        0.0
    };
    (psi, delta_r, m_bar(&pr.q, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::zipf;

    fn problem(n: usize, m: usize, cache: f64, delta: f64, off: f64) -> BoundProblem {
        BoundProblem {
            receivers: n,
            cache_size: cache,
            q: zipf(m, 0.8).unwrap().probs().to_vec(),
            delta,
            matrix: MatchMatrix::uniform(m, off),
            rho: RhoMethod::Auto,
        }
    }

    #[test]
    fn m_bar_cases() {
        assert!((m_bar(&[0.2, 0.3, 0.5], 1) - 1.0).abs() < 1e-15);
        assert!((m_bar(&[0.5, 0.5], 2) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(10, 10), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
    }

    #[test]
    fn delta_zero_or_identity_removes_spread() {
        let pr = problem(4, 8, 2.0, 0.0, 0.3);
        let p = vec![1.0 / 8.0; 8];
        assert_eq!(rate_upper_bound(&pr.with_p(p.clone())).unwrap().delta_r, 0.0);
        let mut pr = problem(4, 8, 2.0, 0.4, 0.0);
        pr.matrix = MatchMatrix::identity(8);
        let r = rate_upper_bound(&pr.with_p(p)).unwrap();
        assert!(r.delta_r.abs() < 1e-15, "{}", r.delta_r);
    }

    #[test]
    fn full_cache_is_free() {
        let pr = problem(5, 6, 6.0, 0.2, 0.5);
        let r = rate_upper_bound(&pr.with_p(vec![1.0 / 6.0; 6])).unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(r.lambda.iter().flatten().all(|&x| x == 0.0));
        assert!(r.lambda_star.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn no_cache_hits_the_cap() {
        let pr = problem(3, 5, 0.0, 0.0, 0.0);
        let r = rate_upper_bound(&pr.with_p(vec![0.2; 5])).unwrap();
        // ψ = Σ_ℓ C(n,ℓ) E[max λ] with λ(1,·) = 1 and λ(ℓ>1,·) = 0
        assert!((r.psi - 3.0).abs() < 1e-12);
        assert_eq!(r.bound, r.m_bar);
    }

    #[test]
    fn parts_match_report() {
        let pr = problem(4, 9, 2.0, 0.2, 0.2);
        let p: Vec<f64> = (0..9).map(|f| if f < 4 { 0.16 } else { 0.072 }).collect();
        let r = rate_upper_bound(&pr.with_p(p.clone())).unwrap();
        let (psi, dr, mb) = evaluate_parts(&pr, &p);
        assert!((psi - r.psi).abs() < 1e-12);
        assert!((dr - r.delta_r).abs() < 1e-12);
        assert_eq!(mb, r.m_bar);
    }

    #[test]
    fn rejects_bad_inputs() {
        let pr = problem(2, 4, 2.0, 0.2, 0.2);
        assert!(rate_upper_bound(&pr.with_p(vec![0.7, 0.1, 0.1, 0.1])).is_err());
        assert!(rate_upper_bound(&pr.with_p(vec![0.5, 0.5])).is_err());
        let mut bad = pr.clone();
        bad.delta = 1.5;
        assert!(rate_upper_bound(&bad.with_p(vec![0.25; 4])).is_err());
    }
}
