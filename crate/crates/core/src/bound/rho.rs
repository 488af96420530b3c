use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::seed::{SeedTree, STREAM_RHO};

/// Largest `m^ℓ` for which draws are enumerated outright.
pub const ENUMERATION_LIMIT: f64 = 1e6;

const TIE_TOLERANCE: f64 = 1e-12;

/// How `ρ` and the expected maximum are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    /// Enumeration when `m^ℓ <= ENUMERATION_LIMIT`, order statistics otherwise.
    #[default]
    Auto,
    /// Sum over all `m^ℓ` ordered draws.
    Enumerate,
    /// Closed form from the sorted values; tied groups are split exactly.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl RhoMethod {
    pub const DEFAULT_SAMPLES: usize = 100_000;

    pub fn monte_carlo(seed: u64) -> Self {
        RhoMethod::MonteCarlo {
            samples: Self::DEFAULT_SAMPLES,
            seed,
        }
    }

    fn resolve(self, m: usize, l: usize) -> Self {
        match self {
            RhoMethod::Auto if (m as f64).powi(l as i32) <= ENUMERATION_LIMIT => RhoMethod::Enumerate,
            RhoMethod::Auto => RhoMethod::Exact,
            other => other,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub value: f64,
    /// Zero for exact methods.
    pub stderr: f64,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Probability that each file attains the largest value among `l` files drawn
/// i.i.d. from `q`, with ties shared evenly among the distinct tied files
/// drawn. `stream` selects an independent random stream for Monte Carlo.
pub fn rho_table(values: &[f64], q: &[f64], l: usize, method: RhoMethod, stream: u64) -> Vec<RhoEstimate> {
    debug_assert_eq!(values.len(), q.len());
    match method.resolve(q.len(), l) {
        RhoMethod::Enumerate => enumerate(values, q, l, |_, _| {}),
        RhoMethod::MonteCarlo { samples, seed } => monte_carlo(values, q, l, samples, seed, stream).0,
        _ => order_statistics(values, q, l),
    }
}

/// `E[max_{f∈D} values[f]]` for `l` i.i.d. draws `D` from `q`; equals
/// `Σ_f ρ(f) values[f]`. Ties do not matter here, so `Auto` always takes the
/// sorted closed form.
pub fn expected_max(values: &[f64], q: &[f64], l: usize, method: RhoMethod, stream: u64) -> f64 {
    match method {
        RhoMethod::Enumerate => {
            let mut total = 0.0;
            enumerate(values, q, l, |prob, max| total += prob * max);
            total
        }
        RhoMethod::MonteCarlo { samples, seed } => monte_carlo(values, q, l, samples, seed, stream).1,
        _ => {
            let order = ascending(values);
            let mut below = 0.0f64;
            let mut total = 0.0;
            for &f in &order {
                let upto = below + q[f];
                total += values[f] * (upto.powi(l as i32) - below.powi(l as i32));
                below = upto;
            }
            total
        }
    }
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Walks every ordered draw; `visit(probability, max value)` sees each one.
fn enumerate(
    values: &[f64],
    q: &[f64],
    l: usize,
    mut visit: impl FnMut(f64, f64),
) -> Vec<RhoEstimate> {
    let m = q.len();
    let mut rho = vec![RhoEstimate::default(); m];
    if l == 0 || m == 0 {
        return rho;
    }
    let mut idx = vec![0usize; l];
    let mut winners: Vec<usize> = Vec::with_capacity(l);
    loop {
        let prob: f64 = idx.iter().map(|&f| q[f]).product();
        if prob > 0.0 {
            let max = idx.iter().map(|&f| values[f]).fold(f64::NEG_INFINITY, f64::max);
            winners.clear();
            for &f in &idx {
                if tied(values[f], max) && !winners.contains(&f) {
                    winners.push(f);
                }
            }
            let share = prob / winners.len() as f64;
            for &f in &winners {
                rho[f].value += share;
            }
            visit(prob, max);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            idx[pos] += 1;
            if idx[pos] < m {
                break;
            }
            idx[pos] = 0;
            pos += 1;
            if pos == l {
                return rho;
            }
        }
    }
}

fn monte_carlo(
    values: &[f64],
    q: &[f64],
    l: usize,
    samples: usize,
    seed: u64,
    stream: u64,
) -> (Vec<RhoEstimate>, f64) {
    let m = q.len();
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let Ok(dist) = WeightedIndex::new(q) else {
        return (vec![RhoEstimate::default(); m], 0.0);
    };
    let mut rng = SeedTree::new(seed).child(STREAM_RHO).child(stream).rng();
    let mut drawn = Vec::with_capacity(l);
    let mut winners = Vec::with_capacity(l);
    let mut max_sum = 0.0;
    for _ in 0..samples {
        drawn.clear();
        drawn.extend((0..l).map(|_| dist.sample(&mut rng)));
        let max = drawn.iter().map(|&f| values[f]).fold(f64::NEG_INFINITY, f64::max);
        max_sum += max;
        winners.clear();
        for &f in &drawn {
            if tied(values[f], max) && !winners.contains(&f) {
                winners.push(f);
            }
        }
        let share = 1.0 / winners.len() as f64;
        for &f in &winners {
            sum[f] += share;
            sum_sq[f] += share * share;
        }
    }
    let n = samples as f64;
    let rho = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &s2)| {
            let mean = s / n;
            let var = if samples > 1 {
                ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            RhoEstimate {
                value: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect();
    (rho, if samples > 0 { max_sum / n } else { 0.0 })
}

/// Exact ρ from sorted values. A file in a tie-free position wins with
/// probability `(a + q_f)^ℓ - a^ℓ`, `a` being the mass strictly below it. For a
/// tied group `T`, `1/K = ∫_0^1 x^(K-1) dx` turns the even split into
///
/// ```text
/// ρ_f = ℓ! [z^ℓ] ∫_0^1 e^(az) (e^(q_f z) - 1) Π_{i∈T, i≠f} (1 + x (e^(q_i z) - 1)) dx
/// ```
///
/// whose integrand is a polynomial of degree `|T|-1` in `x`, integrated
/// exactly by Gauss-Legendre quadrature.
fn order_statistics(values: &[f64], q: &[f64], l: usize) -> Vec<RhoEstimate> {
    let m = q.len();
    let mut rho = vec![RhoEstimate::default(); m];
    let order = ascending(values);
    let li = l as i32;
    let mut below = 0.0f64;
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && tied(values[order[start]], values[order[end]]) {
            end += 1;
        }
        let group: Vec<usize> = order[start..end].iter().copied().filter(|&f| q[f] > 0.0).collect();
        match group.len() {
            0 => {}
            1 => {
                let f = group[0];
                rho[f].value = (below + q[f]).powi(li) - below.powi(li);
            }
            _ => {
                for (f, value) in split_tie(&group, q, below, l) {
                    rho[f].value = value;
                }
            }
        }
        below += order[start..end].iter().map(|&f| q[f]).sum::<f64>();
        start = end;
    }
    rho
}

fn split_tie(group: &[usize], q: &[f64], below: f64, l: usize) -> Vec<(usize, f64)> {
    let k = group.len();
    let deg = l + 1;
    let mut factorial = vec![1.0f64; deg];
    for j in 1..deg {
        factorial[j] = factorial[j - 1] * j as f64;
    }
    let mut out: Vec<(usize, f64)> = group.iter().map(|&f| (f, 0.0)).collect();
    let mut prefix = vec![vec![0.0; deg]; k + 1];
    let mut suffix = vec![vec![0.0; deg]; k + 1];
    let mut factors = vec![vec![0.0; deg]; k];
    let mut scratch = vec![0.0; deg];
    for (x, w) in gauss_legendre_unit(k.div_ceil(2).max(1)) {
        for (i, &f) in group.iter().enumerate() {
            let fac = &mut factors[i];
            fac[0] = 1.0;
            let mut pw = 1.0;
            for j in 1..deg {
                pw *= q[f];
                fac[j] = x * pw / factorial[j];
            }
        }
        prefix[0].fill(0.0);
        prefix[0][0] = 1.0;
        for i in 0..k {
            let (done, rest) = prefix.split_at_mut(i + 1);
            truncated_product(&done[i], &factors[i], &mut rest[0]);
        }
        suffix[k].fill(0.0);
        suffix[k][0] = 1.0;
        for i in (0..k).rev() {
            let (head, tail) = suffix.split_at_mut(i + 1);
            truncated_product(&tail[0], &factors[i], &mut head[i]);
        }
        for (i, &f) in group.iter().enumerate() {
            truncated_product(&prefix[i], &suffix[i + 1], &mut scratch);
            // coefficient of z^ℓ in scratch(z) (e^((a+q_f)z) - e^(az))
            let mut coef = 0.0;
            for j in 0..deg {
                let r = l - j;
                let e = ((below + q[f]).powi(r as i32) - below.powi(r as i32)) / factorial[r];
                coef += scratch[j] * e;
            }
            out[i].1 += w * factorial[l] * coef;
        }
    }
    out
}

fn truncated_product(a: &[f64], b: &[f64], out: &mut [f64]) {
    let deg = out.len();
    for k in 0..deg {
        out[k] = (0..=k).map(|j| a[j] * b[k - j]).sum();
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`; exact for polynomials of
/// degree below `2 * points`.
fn gauss_legendre_unit(points: usize) -> Vec<(f64, f64)> {
    let n = points;
    let mut out = Vec::with_capacity(n);
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 1.0 / ((1.0 - z * z) * dp * dp);
        out.push(((1.0 + z) / 2.0, w));
        if 2 * i + 1 != n {
            out.push(((1.0 - z) / 2.0, w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(r: &[RhoEstimate]) -> Vec<f64> {
        r.iter().map(|e| e.value).collect()
    }

    #[test]
    fn single_draw_is_q() {
        let q = [0.1, 0.2, 0.3, 0.4];
        let v = [3.0, 1.0, 2.0, 2.0];
        for method in [RhoMethod::Enumerate, RhoMethod::Exact] {
            let r = values(&rho_table(&v, &q, 1, method, 0));
            for f in 0..4 {
                assert!((r[f] - q[f]).abs() < 1e-15, "{method:?}");
            }
        }
    }

    #[test]
    fn all_equal_uniform_is_symmetric() {
        let q = [0.25; 4];
        let v = [0.7; 4];
        for method in [RhoMethod::Enumerate, RhoMethod::Exact] {
            let r = values(&rho_table(&v, &q, 3, method, 0));
            for x in r {
                assert!((x - 0.25).abs() < 1e-14, "{method:?} {x}");
            }
        }
    }

    #[test]
    fn hand_enumeration_m3_l2() {
        // values order file 1 < file 0 < file 2; nine ordered draws
        let q = [0.5, 0.3, 0.2];
        let v = [2.0, 1.0, 3.0];
        let mut oracle = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                let w = if v[a] >= v[b] { a } else { b };
                oracle[w] += q[a] * q[b];
            }
        }
        for method in [RhoMethod::Enumerate, RhoMethod::Exact] {
            let r = values(&rho_table(&v, &q, 2, method, 0));
            for f in 0..3 {
                assert!((r[f] - oracle[f]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let q = [0.05, 0.1, 0.15, 0.2, 0.25, 0.25];
        let v = [1.0, 2.0, 2.0, 0.5, 2.0, 0.5];
        for l in 1..=5 {
            let a = values(&rho_table(&v, &q, l, RhoMethod::Enumerate, 0));
            let b = values(&rho_table(&v, &q, l, RhoMethod::Exact, 0));
            for f in 0..6 {
                assert!((a[f] - b[f]).abs() < 1e-13, "l={l} f={f}: {} vs {}", a[f], b[f]);
            }
            let total: f64 = b.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            let ea = expected_max(&v, &q, l, RhoMethod::Enumerate, 0);
            let eb = expected_max(&v, &q, l, RhoMethod::Exact, 0);
            assert!((ea - eb).abs() < 1e-13);
        }
    }

    #[test]
    fn monte_carlo_agrees_within_three_sigma() {
        let q = [0.4, 0.3, 0.2, 0.1];
        let v = [0.2, 0.9, 0.9, 0.1];
        let exact = values(&rho_table(&v, &q, 3, RhoMethod::Enumerate, 0));
        let mc = rho_table(&v, &q, 3, RhoMethod::MonteCarlo { samples: 50_000, seed: 9 }, 1);
        for f in 0..4 {
            assert!((mc[f].value - exact[f]).abs() <= 3.0 * mc[f].stderr + 1e-12);
        }
        let again = rho_table(&v, &q, 3, RhoMethod::MonteCarlo { samples: 50_000, seed: 9 }, 1);
        assert_eq!(mc, again);
    }

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        for n in 1..8 {
            let nodes = gauss_legendre_unit(n);
            assert_eq!(nodes.len(), n);
            for k in 0..2 * n {
                let integral: f64 = nodes.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
                assert!((integral - 1.0 / (k + 1) as f64).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn zero_probability_files_never_win() {
        let q = [0.0, 0.5, 0.5];
        let v = [9.0, 1.0, 1.0];
        let r = values(&rho_table(&v, &q, 2, RhoMethod::Exact, 0));
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 0.5).abs() < 1e-14);
    }
}
