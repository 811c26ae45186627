//! Quadrature rules, special functions and deterministic summation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// A one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Maps a rule on `[-1, 1]` to `[a, b]` (weights rescaled).
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|t| mid + half * t).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .collect();
        pairwise_sum(&terms)
    }
}

/// Gauss rule on `[-1, 1]` for the weight `(1 - t^2)^a`, `a > -1`, via Golub-Welsch.
pub fn gauss_jacobi_symmetric(n: usize, a: f64) -> GaussRule {
    assert!(n >= 1, "rule needs at least one node");
    assert!(a > -1.0, "weight exponent must exceed -1");
    if (a + 0.5).abs() < 1e-15 {
        // Chebyshev, closed form.
        let nodes = (1..=n)
            .map(|j| ((2 * j - 1) as f64 * PI / (2 * n) as f64).cos())
            .rev()
            .collect();
        return GaussRule {
            nodes,
            weights: vec![PI / n as f64; n],
        };
    }
    let mu0 = (PI.sqrt().ln() + ln_gamma(a + 1.0) - ln_gamma(a + 1.5)).exp();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b2 = if k == 1 {
            1.0 / (2.0 * a + 3.0)
        } else {
            kf * (kf + 2.0 * a) / ((2.0 * kf + 2.0 * a).powi(2) - 1.0)
        };
        let b = b2.sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Symmetrize: the exact rule is symmetric about 0.
    let m = pairs.len();
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let t = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-t, w);
        pairs[j] = (t, w);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule on `[-1, 1]`, cached by order.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(gauss_jacobi_symmetric(n, 0.0)))
        .clone()
}

/// Gauss rule on `[0, π/2]` for the weight `sin(φ)^power`, cached. Built by
/// Lanczos on a fine Gauss-Legendre discretization of the measure.
pub fn gauss_sine_power(n: usize, power: u32) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry((n, power))
        .or_insert_with(|| Arc::new(sine_power_rule(n, power)))
        .clone()
}

fn sine_power_rule(n: usize, power: u32) -> GaussRule {
    assert!(n >= 1, "rule needs at least one node");
    if power == 0 {
        return gauss_legendre(n).mapped(0.0, 0.5 * PI);
    }
    let fine = gauss_jacobi_symmetric((4 * n).max(160), 0.0).mapped(0.0, 0.5 * PI);
    let m = fine.len();
    let x = &fine.nodes;
    let w: Vec<f64> = fine
        .weights
        .iter()
        .zip(x)
        .map(|(w, &t)| w * t.sin().powi(power as i32))
        .collect();
    let mu0: f64 = pairwise_sum(&w);
    // Lanczos with full reorthogonalization on diag(x), started at sqrt(w).
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut q: Vec<f64> = w.iter().map(|v| (v / mu0).sqrt()).collect();
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for j in 0..n {
        let mut v: Vec<f64> = q.iter().zip(x).map(|(a, b)| a * b).collect();
        let a: f64 = v.iter().zip(&q).map(|(p, r)| p * r).sum();
        alpha.push(a);
        basis.push(q.clone());
        if j + 1 == n {
            break;
        }
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).map(|(p, r)| p * r).sum();
                v.iter_mut().zip(b).for_each(|(p, r)| *p -= c * r);
            }
        }
        let nb = v.iter().map(|p| p * p).sum::<f64>().sqrt();
        beta.push(nb);
        q = v.into_iter().map(|p| p / nb).collect();
    }
    debug_assert!(m > n);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = alpha[i];
        if i + 1 < n {
            jac[(i, i + 1)] = beta[i];
            jac[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Pairwise summation; the result does not depend on how the caller parallelized
/// the production of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sums `f(i)` for `i in 0..len` in parallel with a fixed chunking, so the
/// floating-point result is independent of the number of worker threads.
pub fn par_indexed_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const CHUNK: usize = 2048;
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let vals: Vec<f64> = (lo..hi).map(&f).collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&partial)
}

/// `ln |B_2^n|` for real `n > 0`.
pub fn ln_ball_volume(n: f64) -> f64 {
    0.5 * n * PI.ln() - ln_gamma(0.5 * n + 1.0)
}

/// Volume of the Euclidean unit ball in dimension `n` (`|B_2^0| = 1`).
pub fn ball_volume(n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    ln_ball_volume(n as f64).exp()
}

/// Surface area `|S^{d-1}|` of the unit sphere in `R^d` (`|S^0| = 2`).
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1);
    let df = d as f64;
    (2.0f64.ln() + 0.5 * df * PI.ln() - ln_gamma(0.5 * df)).exp()
}

/// `∫_0^rho r^(m-1) exp(-c r^2) dr` for `m > 0`, `c >= 0`.
pub fn gauss_radial_moment(m: f64, c: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if c <= 0.0 {
        return rho.powf(m) / m;
    }
    let a = 0.5 * m;
    let x = c * rho * rho;
    if x < a + 30.0 {
        // gamma(a, x) = x^a e^{-x} sum_j x^j / (a (a+1) ... (a+j))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut j = 1.0;
        while term > sum * 1e-17 {
            term *= x / (a + j);
            sum += term;
            j += 1.0;
            if j > 10_000.0 {
                break;
            }
        }
        0.5 * rho.powf(m) * (-x).exp() * sum
    } else {
        let upper = statrs::function::gamma::gamma_ur(a, x);
        0.5 * (ln_gamma(a) - a * c.ln()).exp() * (1.0 - upper)
    }
}

/// Numerically stable `sqrt(sum x_i^2)`.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normalized(x: &[f64]) -> Vec<f64> {
    let r = norm2(x);
    x.iter().map(|v| v / r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        // degree 15 is the limit for 8 nodes
        let v = rule.integrate(|t| t.powi(14) + 3.0 * t.powi(15));
        assert_relative_eq!(v, 2.0 / 15.0, max_relative = 1e-13);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn jacobi_weight_moments() {
        // ∫ (1-t^2)^a t^2 dt = B(3/2, a+1)
        for &a in &[-0.5, 0.0, 0.5, 1.0, 1.5, 2.5] {
            let rule = gauss_jacobi_symmetric(12, a);
            let v = rule.integrate(|t| t * t);
            let exact = (ln_gamma(1.5) + ln_gamma(a + 1.0) - ln_gamma(a + 2.5)).exp();
            assert_relative_eq!(v, exact, max_relative = 1e-12);
            let odd = rule.integrate(|t| t.powi(3));
            assert!(odd.abs() < 1e-15);
        }
    }

    #[test]
    fn ball_and_sphere_constants() {
        assert_relative_eq!(ball_volume(2), PI, max_relative = 1e-14);
        assert_relative_eq!(ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(1), 2.0, max_relative = 1e-14);
        for d in 2..20 {
            assert_relative_eq!(sphere_area(d), d as f64 * ball_volume(d), max_relative = 1e-12);
        }
    }

    #[test]
    fn radial_moment_matches_quadrature() {
        let rule = gauss_legendre(80);
        for &(m, c, rho) in &[(3.0, 0.5, 2.0), (5.0, 2.0, 1.5), (7.0, 0.0, 1.2), (4.0, 40.0, 3.0)] {
            let r = rule.mapped(0.0, rho);
            let q = r.integrate(|x: f64| x.powf(m - 1.0) * (-c * x * x).exp());
            assert_relative_eq!(gauss_radial_moment(m, c, rho), q, max_relative = 1e-11);
        }
    }

    #[test]
    fn sine_power_rule_is_exact_on_polynomials() {
        for power in [1u32, 2, 3, 5, 7] {
            for n in [1usize, 2, 4, 9] {
                let rule = gauss_sine_power(n, power);
                let exact_mass = 0.5 * PI.sqrt() * gamma(0.5 * (power as f64 + 1.0)) / gamma(0.5 * power as f64 + 1.0);
                assert_relative_eq!(rule.weights.iter().sum::<f64>(), exact_mass, max_relative = 1e-13);
                // degree 2n-1 in φ against an independent fine Legendre rule
                let deg = (2 * n - 1) as i32;
                let reference = gauss_legendre(200)
                    .mapped(0.0, 0.5 * PI)
                    .integrate(|t| t.powi(deg) * t.sin().powi(power as i32));
                let q = rule.integrate(|t| t.powi(deg));
                assert_relative_eq!(q, reference, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn parallel_sum_is_deterministic() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = par_indexed_sum(100_003, f);
        let b = par_indexed_sum(100_003, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
