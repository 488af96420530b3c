use super::{BoundInputs, BoundProblem};

/// `x^e` with `x^0 = 1` for every `x`, including 0.
fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

fn caching_probabilities(pr: &BoundProblem, p: &[f64]) -> Vec<f64> {
    p.iter().map(|&pf| (pf * pr.cache_size).clamp(0.0, 1.0)).collect()
}

/// Direct evaluation of `λ(ℓ,f)` by explicit products.
pub fn lambda(l: usize, f: usize, inputs: &BoundInputs) -> f64 {
    let pr = &inputs.problem;
    let x = caching_probabilities(pr, &inputs.p);
    let g = &pr.matrix;
    let n = pr.receivers as f64;
    let mut missed = 1.0;
    let mut covered = 1.0;
    for (fp, &xf) in x.iter().enumerate() {
        missed *= pow(1.0 - xf, (n - l as f64 + 1.0) * g.get(fp, f));
        covered *= pow(1.0 - pow(xf, (l - 1) as f64), g.get(fp, f));
    }
    missed * (1.0 - covered)
}

/// Direct evaluation of `λ*(ℓ,f)` by explicit products.
pub fn lambda_star(l: usize, f: usize, inputs: &BoundInputs) -> f64 {
    let pr = &inputs.problem;
    let x = caching_probabilities(pr, &inputs.p);
    let g = &pr.matrix;
    let n = pr.receivers as f64;
    let mut missed = 1.0;
    let mut covered = 1.0;
    for (fp, &xf) in x.iter().enumerate() {
        missed *= pow(1.0 - xf, (n - l as f64 + 1.0) * g.get(fp, f));
        let off = g.get(fp, f) - if fp == f { 1.0 } else { 0.0 };
        covered *= pow(1.0 - pow(xf, (l - 1) as f64), off);
    }
    missed * (1.0 - pow(x[f], (l - 1) as f64)) * (1.0 - covered)
}

/// All `λ` and `λ*` values, computed in the log domain.
#[derive(Clone, Debug)]
pub struct LambdaTables {
    /// Indexed `[ℓ-1][f]`.
    pub lambda: Vec<Vec<f64>>,
    pub lambda_star: Vec<Vec<f64>>,
    /// `Σ_f'≠f G[f'][f] ln(1-x_f')`.
    log_missed_off: Vec<f64>,
    x: Vec<f64>,
}

/// `e * ln(x)` with `0 * ln(0) = 0`.
fn weighted_ln(e: f64, ln_x: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * ln_x
    }
}

impl LambdaTables {
    pub fn new(pr: &BoundProblem, p: &[f64]) -> Self {
        let m = pr.files();
        let n = pr.receivers;
        let g = &pr.matrix;
        let x = caching_probabilities(pr, p);
        let ln_free: Vec<f64> = x.iter().map(|&xf| (1.0 - xf).ln()).collect();
        // nonzero entries per column
        let columns: Vec<Vec<(usize, f64)>> = (0..m)
            .map(|f| {
                (0..m)
                    .filter_map(|fp| {
                        let e = g.get(fp, f);
                        (e != 0.0).then_some((fp, e))
                    })
                    .collect()
            })
            .collect();
        let mut log_missed = vec![0.0; m];
        let mut log_missed_off = vec![0.0; m];
        for f in 0..m {
            for &(fp, e) in &columns[f] {
                let t = weighted_ln(e, ln_free[fp]);
                log_missed[f] += t;
                if fp != f {
                    log_missed_off[f] += t;
                }
            }
        }

        let mut lambda = Vec::with_capacity(n);
        let mut lambda_star = Vec::with_capacity(n);
        let mut ln_uncovered = vec![0.0; m];
        for l in 1..=n {
            for (fp, &xf) in x.iter().enumerate() {
                ln_uncovered[fp] = (1.0 - pow(xf, (l - 1) as f64)).ln();
            }
            let scale = (n - l + 1) as f64;
            let mut row = vec![0.0; m];
            let mut row_star = vec![0.0; m];
            for f in 0..m {
                let missed = (scale * log_missed[f]).exp();
                if missed == 0.0 {
                    continue;
                }
                let mut cov = 0.0;
                let mut cov_off = 0.0;
                for &(fp, e) in &columns[f] {
                    let t = weighted_ln(e, ln_uncovered[fp]);
                    cov += t;
                    if fp != f {
                        cov_off += t;
                    }
                }
                row[f] = missed * (1.0 - cov.exp());
                row_star[f] = missed * ln_uncovered[f].exp() * (1.0 - cov_off.exp());
            }
            lambda.push(row);
            lambda_star.push(row_star);
        }
        LambdaTables {
            lambda,
            lambda_star,
            log_missed_off,
            x,
        }
    }

    /// `n Σ_f q_f (1-x_f) (1 - Π_f'≠f (1-x_f')^G[f'][f])`.
    pub fn unicast_spread(&self, pr: &BoundProblem) -> f64 {
        pr.receivers as f64
            * pr.q
                .iter()
                .zip(&self.x)
                .zip(&self.log_missed_off)
                .map(|((&qf, &xf), &lm)| qf * (1.0 - xf) * (1.0 - lm.exp()))
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::RhoMethod;
    use crate::library::MatchMatrix;

    fn inputs(p: Vec<f64>, cache: f64, n: usize, matrix: MatchMatrix) -> BoundInputs {
        let m = p.len();
        BoundProblem {
            receivers: n,
            cache_size: cache,
            q: vec![1.0 / m as f64; m],
            delta: 0.2,
            matrix,
            rho: RhoMethod::Auto,
        }
        .with_p(p)
    }

    #[test]
    fn identity_collapses() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let inp = inputs(p.clone(), 2.0, 5, MatchMatrix::identity(4));
        let t = LambdaTables::new(&inp.problem, &inp.p);
        for l in 1..=5 {
            for f in 0..4 {
                let x: f64 = p[f] * 2.0;
                let closed = (1.0 - x).powi((5 - l + 1) as i32) * x.powi(l as i32 - 1);
                assert!((lambda(l, f, &inp) - closed).abs() < 1e-12);
                assert!((t.lambda[l - 1][f] - closed).abs() < 1e-12);
                assert!(t.lambda_star[l - 1][f].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tables_match_direct_products() {
        let mut g = MatchMatrix::uniform(4, 0.3);
        g.set(0, 2, 0.0);
        g.set(3, 1, 1.5);
        let inp = inputs(vec![0.05, 0.25, 0.3, 0.4], 2.5, 4, g);
        let t = LambdaTables::new(&inp.problem, &inp.p);
        for l in 1..=4 {
            for f in 0..4 {
                assert!((t.lambda[l - 1][f] - lambda(l, f, &inp)).abs() < 1e-13);
                assert!((t.lambda_star[l - 1][f] - lambda_star(l, f, &inp)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fully_cached_file_zeroes_its_column() {
        let inp = inputs(vec![0.5, 0.25, 0.25], 2.0, 3, MatchMatrix::uniform(3, 0.5));
        let t = LambdaTables::new(&inp.problem, &inp.p);
        for l in 1..=3 {
            for f in 0..3 {
                assert_eq!(t.lambda[l - 1][f], 0.0);
                assert_eq!(lambda(l, f, &inp), 0.0);
            }
        }
    }
}
