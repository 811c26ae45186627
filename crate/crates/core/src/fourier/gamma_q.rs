//! The one-dimensional kernel `γ_q(s) = 2 ∫_0^∞ cos(su) exp(-u^q) du`, the
//! Fourier transform of `exp(-|x|^q)` on the line.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{gamma, gauss_legendre};

/// `exp(-u^q)` is dropped beyond `u* = 36.84^(1/q)` (where it is below `1e-16`).
const CUTOFF_EXPONENT: f64 = 36.84;
const TABLE_STEP: f64 = 0.02;
/// Tabulated range; beyond it the leading asymptotic term is used.
pub const TABLE_END: f64 = 100.0;
const PANEL_NODES: usize = 20;
const ASYMPTOTIC_TERMS: usize = 6;

pub const Q_MIN: f64 = 1.0;
pub const Q_MAX: f64 = 12.0;

fn is_even_integer(q: f64) -> bool {
    q.fract() == 0.0 && (q as i64) % 2 == 0
}

/// Evaluator for one exponent `q`; closed forms for `q = 1, 2`, otherwise a
/// quintic Hermite table of direct quadrature values and two derivatives.
#[derive(Debug)]
pub struct GammaQ {
    q: f64,
    table: Option<Vec<[f64; 3]>>,
    asymptotic_coef: f64,
}

impl GammaQ {
    pub fn new(q: f64) -> Result<Self> {
        if !(Q_MIN..=Q_MAX).contains(&q) {
            return Err(Error::OutOfRange(format!("exponent q = {q} outside [1, 12]")));
        }
        let asymptotic_coef = if is_even_integer(q) {
            0.0
        } else {
            2.0 * gamma(q + 1.0) * (0.5 * PI * q).sin()
        };
        let table = if q == 1.0 || q == 2.0 {
            None
        } else {
            let count = (TABLE_END / TABLE_STEP).round() as usize + 1;
            Some(
                (0..count)
                    .into_par_iter()
                    .map(|i| direct_derivatives(q, i as f64 * TABLE_STEP))
                    .collect(),
            )
        };
        Ok(Self {
            q,
            table,
            asymptotic_coef,
        })
    }

    /// Shared evaluator for `q`, built once.
    pub fn shared(q: f64) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<GammaQ>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(g) = cache.lock().expect("gamma cache poisoned").get(&q.to_bits()) {
            return Ok(g.clone());
        }
        let built = Arc::new(Self::new(q)?);
        Ok(cache
            .lock()
            .expect("gamma cache poisoned")
            .entry(q.to_bits())
            .or_insert(built)
            .clone())
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `γ_q(0) = 2 Γ(1 + 1/q)`.
    pub fn at_zero(&self) -> f64 {
        2.0 * gamma(1.0 + 1.0 / self.q)
    }

    /// Leading term `A / s^(q+1)` with `A = 2 Γ(q+1) sin(πq/2)`; zero for even `q`.
    pub fn asymptotic_coef(&self) -> f64 {
        self.asymptotic_coef
    }

    /// `2 Σ_k (-1)^(k+1) Γ(kq+1) sin(πkq/2) / (k! s^(kq+1))`, truncated after
    /// `ASYMPTOTIC_TERMS` terms; accurate for `s ≥ TABLE_END`.
    pub fn asymptotic_series(&self, s: f64) -> f64 {
        let q = self.q;
        let mut total = 0.0;
        let mut factorial = 1.0;
        for k in 1..=ASYMPTOTIC_TERMS {
            factorial *= k as f64;
            let kq = k as f64 * q;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * gamma(kq + 1.0) * (0.5 * PI * kq).sin() / (factorial * s.powf(kq + 1.0));
        }
        2.0 * total
    }

    /// Bound on `|γ_q(s) - A/s^(q+1)| / |A/s^(q+1)|`, ignoring the sine factors of
    /// the higher terms. Infinite for even `q` (where `A = 0`).
    pub fn leading_term_relative_error(&self, s: f64) -> f64 {
        if self.asymptotic_coef == 0.0 {
            return f64::INFINITY;
        }
        let q = self.q;
        let lead = self.asymptotic_coef.abs() / 2.0;
        let mut bound = 0.0;
        let mut factorial = 1.0;
        for k in 2..=ASYMPTOTIC_TERMS + 1 {
            factorial *= k as f64;
            let kq = k as f64 * q;
            bound += gamma(kq + 1.0) / (factorial * s.powf((k - 1) as f64 * q));
        }
        bound / lead
    }

    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        if self.q == 1.0 {
            return 2.0 / (1.0 + s * s);
        }
        if self.q == 2.0 {
            return PI.sqrt() * (-0.25 * s * s).exp();
        }
        if s >= TABLE_END {
            return self.asymptotic_series(s);
        }
        let table = self.table.as_ref().expect("table built for q outside {1, 2}");
        let x = s / TABLE_STEP;
        let i = (x.floor() as usize).min(table.len() - 2);
        let t = x - i as f64;
        let [y0, d0, e0] = table[i];
        let [y1, d1, e1] = table[i + 1];
        let h = TABLE_STEP;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5) * y0
            + (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5) * h * d0
            + 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5) * h * h * e0
            + (10.0 * t3 - 15.0 * t4 + 6.0 * t5) * y1
            + (-4.0 * t3 + 7.0 * t4 - 3.0 * t5) * h * d1
            + 0.5 * (t3 - 2.0 * t4 + t5) * h * h * e1
    }
}

/// Direct quadrature of `γ_q(s)`, `γ_q'(s)` and `γ_q''(s)`: Gauss-Legendre on half-period
/// panels of `cos(su)`, graded geometrically towards `u = 0` when `q` is not an
/// integer (where `u^q` is not smooth).
pub fn direct_derivatives(q: f64, s: f64) -> [f64; 3] {
    let s = s.abs();
    let u_end = CUTOFF_EXPONENT.powf(1.0 / q);
    let mut edges = vec![0.0];
    let graded_end = if q.fract() != 0.0 { u_end.min(1.0) } else { 0.0 };
    if graded_end > 0.0 {
        for j in (0..40).rev() {
            edges.push(graded_end * 0.5f64.powi(j));
        }
    }
    let width = if s > 0.0 { (PI / s).min(0.25) } else { 0.25 };
    let mut u = *edges.last().expect("non-empty");
    while u < u_end {
        u = (u + width).min(u_end);
        edges.push(u);
    }
    let edges = refine(&edges, width);
    let rule = gauss_legendre(PANEL_NODES);
    let mut value = 0.0;
    let mut deriv = 0.0;
    let mut second = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut pv = 0.0;
        let mut pd = 0.0;
        let mut pe = 0.0;
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let x = mid + half * t;
            let e = (-x.powf(q)).exp();
            let (sn, cs) = (s * x).sin_cos();
            pv += wt * cs * e;
            pd -= wt * x * sn * e;
            pe -= wt * x * x * cs * e;
        }
        value += half * pv;
        deriv += half * pd;
        second += half * pe;
    }
    [2.0 * value, 2.0 * deriv, 2.0 * second]
}

/// Value and first derivative from [`direct_derivatives`].
pub fn direct_with_derivative(q: f64, s: f64) -> (f64, f64) {
    let [v, d, _] = direct_derivatives(q, s);
    (v, d)
}

/// Splits every interval of `edges` into pieces no wider than `width`.
fn refine(edges: &[f64], width: f64) -> Vec<f64> {
    let mut out = vec![edges[0]];
    for w in edges.windows(2) {
        let pieces = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            out.push(w[0] + (w[1] - w[0]) * j as f64 / pieces as f64);
        }
    }
    out
}

/// `γ_q(s)` through the shared table.
pub fn gamma_q(q: f64, s: f64) -> Result<f64> {
    Ok(GammaQ::shared(q)?.eval(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_closed_form() {
        assert_relative_eq!(gamma_q(2.0, 0.0).unwrap(), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_q(2.0, 0.0).unwrap(), 1.7724538509, max_relative = 1e-10);
        // direct quadrature reproduces the closed form
        for s in [0.0, 0.7, 3.0, 9.5] {
            let (v, d) = direct_with_derivative(2.0, s);
            assert!((v - PI.sqrt() * (-s * s / 4.0).exp()).abs() < 1e-13);
            assert!((d + 0.5 * s * PI.sqrt() * (-s * s / 4.0).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn value_at_zero() {
        for q in [1.0, 1.5, 2.0, 3.0, 4.0, 7.3, 12.0] {
            let g = GammaQ::new(q).unwrap();
            assert_relative_eq!(g.eval(0.0), 2.0 * gamma(1.0 + 1.0 / q), max_relative = 1e-12);
        }
    }

    #[test]
    fn even_in_s() {
        let g = GammaQ::new(3.0).unwrap();
        for s in [0.3, 2.2, 41.0, 150.0] {
            assert_eq!(g.eval(-s), g.eval(s));
        }
    }

    #[test]
    fn interpolation_matches_direct_quadrature() {
        for q in [1.5, 3.0, 4.0, 6.5] {
            let g = GammaQ::new(q).unwrap();
            for i in 0..200 {
                let s = 0.013 + i as f64 * 0.4937;
                let direct = direct_with_derivative(q, s).0;
                assert!((g.eval(s) - direct).abs() < 1e-9, "q={q} s={s} {} {direct}", g.eval(s));
            }
        }
    }

    #[test]
    fn laplace_closed_form_for_q_one() {
        for s in [0.0, 1.0, 5.0, 30.0] {
            let (v, _) = direct_with_derivative(1.0, s);
            assert!((v - 2.0 / (1.0 + s * s)).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_tail_matches_direct_values() {
        for q in [1.5, 3.0] {
            let g = GammaQ::new(q).unwrap();
            let s = TABLE_END;
            let direct = direct_with_derivative(q, s).0;
            let lead = g.asymptotic_coef() / s.powf(q + 1.0);
            assert!((direct - lead).abs() <= g.leading_term_relative_error(s) * lead.abs(), "q={q}");
            assert!((direct - g.eval(s)).abs() <= 1e-9 * lead.abs() + 1e-14, "q={q} {direct} {}", g.eval(s));
        }
        assert_eq!(GammaQ::new(4.0).unwrap().asymptotic_coef(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_exponent() {
        assert!(GammaQ::new(0.5).is_err());
        assert!(GammaQ::new(13.0).is_err());
    }
}
