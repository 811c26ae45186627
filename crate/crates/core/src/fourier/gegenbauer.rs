//! Axially symmetric functions on `S^{n-1}` in the Gegenbauer basis `C_m^{(n-2)/2}(t)`,
//! `t = <theta, axis>`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gauss_jacobi_symmetric, ln_gamma, pairwise_sum, sphere_area, GaussRule};

/// Default expansion degree.
pub const DEFAULT_DEGREE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GegenbauerSeries {
    n: usize,
    coeffs: Vec<f64>,
}

/// Index `(n-2)/2` of the basis for the sphere `S^{n-1}`.
pub fn gegenbauer_index(n: usize) -> f64 {
    0.5 * (n as f64 - 2.0)
}

/// Values `C_0(t), ..., C_M(t)` of the Gegenbauer polynomials of index `lambda`.
pub fn gegenbauer_basis(lambda: f64, degree_max: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree_max == 0 {
        return;
    }
    out.push(2.0 * lambda * t);
    for m in 2..=degree_max {
        let mf = m as f64;
        let next = (2.0 * t * (mf + lambda - 1.0) * out[m - 1] - (mf + 2.0 * lambda - 2.0) * out[m - 2]) / mf;
        out.push(next);
    }
}

/// `C_m^lambda(1) = Gamma(m + 2 lambda) / (m! Gamma(2 lambda))`.
pub fn gegenbauer_at_one(lambda: f64, m: usize) -> f64 {
    let mf = m as f64;
    (ln_gamma(mf + 2.0 * lambda) - ln_gamma(mf + 1.0) - ln_gamma(2.0 * lambda)).exp()
}

/// `∫_{-1}^{1} C_m(t)^2 (1 - t^2)^(lambda - 1/2) dt`.
pub fn gegenbauer_norm_sq(lambda: f64, m: usize) -> f64 {
    let mf = m as f64;
    let ln = std::f64::consts::PI.ln() + (1.0 - 2.0 * lambda) * 2f64.ln() + ln_gamma(mf + 2.0 * lambda)
        - ln_gamma(mf + 1.0)
        - (mf + lambda).ln()
        - 2.0 * ln_gamma(lambda);
    ln.exp()
}

/// Gauss rule for the weight `(1 - t^2)^((n-3)/2)` with `nodes` points, cached.
pub fn sphere_weight_rule(n: usize, nodes: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard
        .entry((n, nodes))
        .or_insert_with(|| Arc::new(gauss_jacobi_symmetric(nodes, 0.5 * (n as f64 - 3.0))))
        .clone()
}

impl GegenbauerSeries {
    pub fn new(n: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(Error::OutOfRange(format!(
                "Gegenbauer expansions need ambient dimension n >= 3, got {n}"
            )));
        }
        if coeffs.is_empty() {
            return Err(Error::OutOfRange("empty coefficient list".into()));
        }
        Ok(Self { n, coeffs })
    }

    pub fn zero(n: usize, degree_max: usize) -> Result<Self> {
        Self::new(n, vec![0.0; degree_max + 1])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        gegenbauer_index(self.n)
    }

    pub fn degree_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        let lambda = self.lambda();
        let mut c_prev = 1.0;
        let mut acc = self.coeffs[0];
        if self.coeffs.len() == 1 {
            return acc;
        }
        let mut c_cur = 2.0 * lambda * t;
        acc += self.coeffs[1] * c_cur;
        for m in 2..self.coeffs.len() {
            let mf = m as f64;
            let next = (2.0 * t * (mf + lambda - 1.0) * c_cur - (mf + 2.0 * lambda - 2.0) * c_prev) / mf;
            acc += self.coeffs[m] * next;
            c_prev = c_cur;
            c_cur = next;
        }
        acc
    }

    /// True when every odd-degree coefficient is within `tol` of zero.
    pub fn is_even(&self, tol: f64) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|c| c.abs() <= tol)
    }

    pub fn max_odd_coefficient(&self) -> f64 {
        self.coeffs
            .iter()
            .skip(1)
            .step_by(2)
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Sup-norm bound of the last `count` terms, `sum |c_m| C_m(1)`.
    pub fn tail_bound(&self, count: usize) -> f64 {
        let lambda = self.lambda();
        let m_max = self.degree_max();
        let start = (m_max + 1).saturating_sub(count);
        (start..=m_max)
            .map(|m| self.coeffs[m].abs() * gegenbauer_at_one(lambda, m))
            .sum()
    }

    /// Coefficient-wise product with a diagonal multiplier sequence.
    pub fn apply_multipliers(&self, multipliers: &[f64]) -> Result<Self> {
        if multipliers.len() < self.coeffs.len() {
            return Err(Error::OutOfRange(format!(
                "need {} multipliers, got {}",
                self.coeffs.len(),
                multipliers.len()
            )));
        }
        let coeffs = self.coeffs.iter().zip(multipliers).map(|(c, l)| c * l).collect();
        Self::new(self.n, coeffs)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `∫_{S^{n-1}} f(<theta, axis>) dtheta`; only the constant term contributes.
    pub fn sphere_integral(&self) -> f64 {
        let lambda = self.lambda();
        sphere_area(self.n - 1) * self.coeffs[0] * gegenbauer_norm_sq(lambda, 0)
    }

    /// `∫_{S^{n-1}} f g`, both axially symmetric about the same axis.
    pub fn sphere_inner(&self, other: &Self) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let lambda = self.lambda();
        let terms: Vec<f64> = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(m, (a, b))| a * b * gegenbauer_norm_sq(lambda, m))
            .collect();
        Ok(sphere_area(self.n - 1) * pairwise_sum(&terms))
    }
}

/// Projects `f: [-1, 1] -> R` onto `C_0, ..., C_M` by Gauss quadrature against
/// `(1 - t^2)^((n-3)/2)`.
pub fn gegenbauer_expand(f: impl Fn(f64) -> f64, n: usize, degree_max: usize) -> Result<GegenbauerSeries> {
    if n < 3 {
        return Err(Error::OutOfRange(format!("n = {n} < 3")));
    }
    let rule = sphere_weight_rule(n, 2 * degree_max + 2);
    let lambda = gegenbauer_index(n);
    let values: Vec<f64> = rule.nodes.iter().map(|&t| f(t)).collect();
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Quadrature(format!("integrand is not finite ({bad})")));
    }
    let mut acc = vec![Vec::with_capacity(rule.len()); degree_max + 1];
    let mut basis = Vec::with_capacity(degree_max + 1);
    for ((&t, &w), &v) in rule.nodes.iter().zip(&rule.weights).zip(&values) {
        gegenbauer_basis(lambda, degree_max, t, &mut basis);
        for (m, c) in basis.iter().enumerate() {
            acc[m].push(w * v * c);
        }
    }
    let coeffs = acc
        .iter()
        .enumerate()
        .map(|(m, terms)| pairwise_sum(terms) / gegenbauer_norm_sq(lambda, m))
        .collect();
    GegenbauerSeries::new(n, coeffs)
}

/// Expansion of the even part of `f`; odd coefficients are exactly zero.
pub fn gegenbauer_expand_even(f: impl Fn(f64) -> f64, n: usize, degree_max: usize) -> Result<GegenbauerSeries> {
    let mut series = gegenbauer_expand(|t| 0.5 * (f(t) + f(-t)), n, degree_max)?;
    for c in series.coeffs.iter_mut().skip(1).step_by(2) {
        *c = 0.0;
    }
    Ok(series)
}
