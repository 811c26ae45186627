//! Diagonal actions on axially symmetric functions: the spherical Radon
//! transform (computed by direct quadrature) and the Fourier transform of the
//! homogeneous extension `f(x/|x|) |x|^{-p}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use super::gegenbauer::{gegenbauer_basis, gegenbauer_index, gegenbauer_norm_sq, sphere_weight_rule, GegenbauerSeries};
use super::lq::ft_lq_norm_power;
use crate::error::{Error, Result};
use crate::numeric::{ball_volume, gauss_jacobi_symmetric, ln_gamma, norm2, sphere_area, GaussRule};

/// Relative tolerance for the multiplier validation.
pub const VALIDATION_TOL: f64 = 1e-6;

/// Heights `s = <ξ, axis>` at which the Radon transform of each basis
/// function is sampled.
const RADON_HEIGHTS: [f64; 5] = [1.0, 0.9, 0.7, 0.5, 0.3];

/// Classical Gamma-ratio multiplier: the transform of `Y_m(x/|x|) |x|^{-p}` is
/// `λ_m Y_m(ξ/|ξ|) |ξ|^{-n+p}` for a spherical harmonic `Y_m` of even degree `m`.
pub fn fourier_multiplier(n: usize, p: f64, m: usize) -> Result<f64> {
    check_degree(n, p)?;
    if m % 2 == 1 {
        return Err(Error::OddSeries(format!("degree {m} has an imaginary multiplier")));
    }
    let nf = n as f64;
    let mf = m as f64;
    let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let ln = (nf - p) * 2f64.ln() + 0.5 * nf * PI.ln() + ln_gamma(0.5 * (mf + nf - p)) - ln_gamma(0.5 * (mf + p));
    Ok(sign * ln.exp())
}

fn check_degree(n: usize, p: f64) -> Result<()> {
    if !(p > 0.0 && p < n as f64) {
        return Err(Error::OutOfRange(format!("degree p = {p} outside (0, {n})")));
    }
    Ok(())
}

fn radon_rule(n: usize, nodes: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard
        .entry((n, nodes))
        .or_insert_with(|| Arc::new(gauss_jacobi_symmetric(nodes, 0.5 * (n as f64 - 4.0))))
        .clone()
}

/// `Rf(ξ) = ∫_{S^{n-1} ∩ ξ^⊥} f(<θ, axis>) dθ` for `s = <ξ, axis>`, by direct
/// quadrature over the great subsphere:
/// `|S^{n-3}| ∫_{-1}^{1} f(sqrt(1-s^2) v) (1-v^2)^{(n-4)/2} dv`.
pub fn radon_direct(f: impl Fn(f64) -> f64, n: usize, s: f64, nodes: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::OutOfRange(format!("Radon transform needs n >= 3, got {n}")));
    }
    let rule = radon_rule(n, nodes.max(1));
    let c = (1.0 - s * s).max(0.0).sqrt();
    Ok(sphere_area(n - 2) * rule.integrate(|v| f(c * v)))
}

/// Radon eigenvalues `r_0, ..., r_M` read off from [`radon_direct`] applied to each
/// basis function, by least squares over a few heights. Odd entries are zero.
pub fn radon_multipliers(n: usize, degree_max: usize) -> Result<Vec<f64>> {
    let lambda = gegenbauer_index(n);
    let nodes = degree_max / 2 + 8;
    let mut basis_at = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(RADON_HEIGHTS.len());
    for &s in &RADON_HEIGHTS {
        gegenbauer_basis(lambda, degree_max, s, &mut basis_at);
        samples.push(basis_at.clone());
    }
    let mut out = vec![0.0; degree_max + 1];
    for (m, slot) in out.iter_mut().enumerate().step_by(2) {
        let basis_m = |t: f64| {
            let mut b = Vec::with_capacity(m + 1);
            gegenbauer_basis(lambda, m, t, &mut b);
            b[m]
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &s) in RADON_HEIGHTS.iter().enumerate() {
            let c = samples[k][m];
            num += radon_direct(basis_m, n, s, nodes)? * c;
            den += c * c;
        }
        *slot = num / den;
    }
    Ok(out)
}

/// Spherical Radon transform of an even axially symmetric function.
pub fn radon_sphere(series: &GegenbauerSeries) -> Result<GegenbauerSeries> {
    require_even(series)?;
    let r = radon_multipliers(series.n(), series.degree_max())?;
    series.apply_multipliers(&r)
}

fn require_even(series: &GegenbauerSeries) -> Result<()> {
    let scale = series.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if series.max_odd_coefficient() > 1e-12 * scale.max(1e-300) {
        return Err(Error::OddSeries(format!(
            "odd coefficient of size {:.3e}",
            series.max_odd_coefficient()
        )));
    }
    Ok(())
}

/// Worst relative discrepancies found by [`validate_multipliers`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplierValidation {
    /// `max_m |λ_m(n, n-1) - π r_m| / |λ_m(n, n-1)|`.
    pub radon: f64,
    /// `|λ_0(n, n-1) - π (n-1) |B^{n-1}|| / (π (n-1) |B^{n-1}|)`.
    pub euclidean: f64,
    /// `max_m` relative defect of `∫ (λ_m(p) C_m)(λ_m(n-p) C_m) = (2π)^n ∫ C_m^2`.
    pub parseval: f64,
}

impl MultiplierValidation {
    pub fn worst(&self) -> f64 {
        self.radon.max(self.euclidean).max(self.parseval)
    }
}

/// Checks the multipliers for `(n, p)` up to degree `M` against the numerical
/// Radon transform, the Euclidean constant and the spherical Parseval identity.
pub fn validate_multipliers(n: usize, p: f64, degree_max: usize) -> Result<MultiplierValidation> {
    check_degree(n, p)?;
    let nf = n as f64;
    let radon = radon_multipliers(n, degree_max)?;
    let mut radon_defect = 0.0f64;
    for m in (0..=degree_max).step_by(2) {
        let lam = fourier_multiplier(n, nf - 1.0, m)?;
        radon_defect = radon_defect.max((lam - PI * radon[m]).abs() / lam.abs());
    }
    let eucl = PI * (nf - 1.0) * ball_volume(n - 1);
    let euclidean = (fourier_multiplier(n, nf - 1.0, 0)? - eucl).abs() / eucl;

    let lambda = gegenbauer_index(n);
    let rule = sphere_weight_rule(n, degree_max + 2);
    let area = sphere_area(n - 1);
    let target = (2.0 * PI).powf(nf);
    let mut basis = Vec::new();
    let mut parseval = 0.0f64;
    for m in (0..=degree_max).step_by(2) {
        let mut sq = 0.0;
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            gegenbauer_basis(lambda, m, t, &mut basis);
            sq += w * basis[m] * basis[m];
        }
        let sq = area * sq;
        let lhs = fourier_multiplier(n, p, m)? * fourier_multiplier(n, nf - p, m)? * sq;
        let rhs = target * area * gegenbauer_norm_sq(lambda, m);
        parseval = parseval.max((lhs - rhs).abs() / rhs.abs());
    }
    Ok(MultiplierValidation {
        radon: radon_defect,
        euclidean,
        parseval,
    })
}

/// Validated multipliers `λ_0, ..., λ_M` for degree `p` (odd entries zero), cached.
pub fn validated_multipliers(n: usize, p: f64, degree_max: usize) -> Result<Arc<Vec<f64>>> {
    type Key = (usize, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, p.to_bits(), degree_max);
    if let Some(v) = cache.lock().expect("multiplier cache poisoned").get(&key) {
        return Ok(v.clone());
    }
    let report = validate_multipliers(n, p, degree_max)?;
    if report.worst() > VALIDATION_TOL {
        return Err(Error::ValidationFailed(format!(
            "n = {n}, p = {p}, M = {degree_max}: radon {:.2e}, euclidean {:.2e}, parseval {:.2e}",
            report.radon, report.euclidean, report.parseval
        )));
    }
    let mut values = vec![0.0; degree_max + 1];
    for m in (0..=degree_max).step_by(2) {
        values[m] = fourier_multiplier(n, p, m)?;
    }
    let values = Arc::new(values);
    cache.lock().expect("multiplier cache poisoned").insert(key, values.clone());
    Ok(values)
}

/// Series of `g` in `(f r^{-p})^ = g r^{-n+p}`, for an even series `f`.
pub fn ft_homogeneous_revolution(series: &GegenbauerSeries, p: f64) -> Result<GegenbauerSeries> {
    check_degree(series.n(), p)?;
    require_even(series)?;
    let lam = validated_multipliers(series.n(), p, series.degree_max())?;
    series.apply_multipliers(&lam)
}

/// Angular part of a homogeneous function.
#[derive(Debug, Clone, PartialEq)]
pub enum HomogeneousBase {
    /// `f(θ) = series(<θ, axis>)`.
    Axial { series: GegenbauerSeries, axis: Vec<f64> },
    /// `f(θ) = ||θ||_q^{-p}` with the same `p` as the degree.
    LqPower { n: usize, q: f64 },
}

/// `x ↦ f(x/|x|) |x|^{-p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousFn {
    pub base: HomogeneousBase,
    pub degree: f64,
}

impl HomogeneousFn {
    pub fn axial(series: GegenbauerSeries, axis: Vec<f64>, degree: f64) -> Result<Self> {
        if axis.len() != series.n() {
            return Err(Error::DimensionMismatch {
                expected: series.n(),
                got: axis.len(),
            });
        }
        let len = norm2(&axis);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitVector { length: len });
        }
        check_degree(series.n(), degree)?;
        Ok(Self {
            base: HomogeneousBase::Axial { series, axis },
            degree,
        })
    }

    pub fn lq_power(n: usize, q: f64, degree: f64) -> Result<Self> {
        check_degree(n, degree)?;
        if !(1.0..=12.0).contains(&q) {
            return Err(Error::OutOfRange(format!("exponent q = {q} outside [1, 12]")));
        }
        Ok(Self {
            base: HomogeneousBase::LqPower { n, q },
            degree,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.base {
            HomogeneousBase::Axial { series, .. } => series.n(),
            HomogeneousBase::LqPower { n, .. } => *n,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let r = norm2(x);
        if r == 0.0 {
            return Err(Error::OutOfRange("homogeneous function evaluated at the origin".into()));
        }
        Ok(r)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = self.check_point(x)?;
        let angular = match &self.base {
            HomogeneousBase::Axial { series, axis } => series.eval(crate::numeric::dot(x, axis) / r),
            HomogeneousBase::LqPower { q, .. } => {
                let nq = x.iter().map(|v| (v.abs() / r).powf(*q)).sum::<f64>().powf(1.0 / q);
                nq.powf(-self.degree)
            }
        };
        Ok(angular * r.powf(-self.degree))
    }

    /// Fourier transform at any `ξ ≠ 0`: the sphere value times `|ξ|^{-n+p}`.
    pub fn transform_at(&self, xi: &[f64]) -> Result<f64> {
        let r = self.check_point(xi)?;
        let theta: Vec<f64> = xi.iter().map(|v| v / r).collect();
        let n = self.dim() as f64;
        let angular = match &self.base {
            HomogeneousBase::Axial { series, axis } => {
                ft_homogeneous_revolution(series, self.degree)?.eval(crate::numeric::dot(&theta, axis))
            }
            HomogeneousBase::LqPower { n, q } => ft_lq_norm_power(*n, *q, self.degree, &theta)?.value,
        };
        Ok(angular * r.powf(-n + self.degree))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::gegenbauer::gegenbauer_expand_even;
    use crate::numeric::{gamma, gauss_legendre, normalized};
    use approx::assert_relative_eq;

    /// Independent transform of `C_m(x_n/|x|) |x|^{-p}` at the pole through
    /// Gaussian damping: `|x|^{-p-m} = Γ((p+m)/2)^{-1} ∫ t^{(p+m)/2-1} e^{-t|x|^2} dt`
    /// and the Hecke-Bochner formula for `P_m(x) e^{-t|x|^2}`.
    fn gaussian_damping_multiplier(n: usize, p: f64, m: usize) -> f64 {
        let nf = n as f64;
        let a = 0.5 * (p + m as f64);
        // t = e^y; the integrand decays doubly exponentially as y → -∞ and like
        // e^{-(n-p+m) y / 2} as y → ∞, so the trapezoid rule converges geometrically
        let h = 0.005;
        let mf = m as f64;
        let integral: f64 = (0..=21_200)
            .map(|i| {
                let y = -6.0 + i as f64 * h;
                let ln = (a - 0.5 * nf - mf) * y + 0.5 * nf * PI.ln() - mf * 2f64.ln() - 0.25 * (-y).exp();
                h * ln.exp()
            })
            .sum();
        // (-i)^m for even m
        let sign = if (m / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sign * integral / gamma(a)
    }

    #[test]
    fn multipliers_match_gaussian_damping() {
        for &(n, p) in &[(5usize, 1.0), (4, 3.0), (3, 1.5), (6, 2.5)] {
            for m in [0usize, 2, 4, 6] {
                let oracle = gaussian_damping_multiplier(n, p, m);
                assert_relative_eq!(fourier_multiplier(n, p, m).unwrap(), oracle, max_relative = 1e-8);
            }
        }
        // degree-two sign flip relative to the constant term
        assert!(fourier_multiplier(5, 1.0, 0).unwrap() > 0.0);
        assert!(fourier_multiplier(5, 1.0, 2).unwrap() < 0.0);
    }

    #[test]
    fn radon_of_constant_is_great_sphere_area() {
        for n in [3usize, 4, 5, 7] {
            for s in [0.0, 0.4, 1.0] {
                assert_relative_eq!(radon_direct(|_| 1.0, n, s, 4).unwrap(), sphere_area(n - 1), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn radon_annihilates_odd_functions() {
        for n in [3usize, 5] {
            for s in [0.1, 0.6] {
                let v = radon_direct(|t| t * t * t + 0.3 * t, n, s, 10).unwrap();
                assert!(v.abs() < 1e-10, "{v}");
            }
        }
    }

    #[test]
    fn radon_equator_circle_in_three_dimensions() {
        // at the pole, R f is the integral over the equator where <θ, axis> = 0
        let f = |t: f64| (1.0 + t * t).recip();
        let v = radon_direct(f, 3, 1.0, 8).unwrap();
        assert_relative_eq!(v, 2.0 * PI, max_relative = 1e-14);
        // at height s the circle is parameterized by an angle φ with t = sqrt(1-s^2) cos φ
        let s: f64 = 0.35;
        let rule = gauss_legendre(200).mapped(0.0, 2.0 * PI);
        let oracle = rule.integrate(|phi| f((1.0 - s * s).sqrt() * phi.cos()));
        assert_relative_eq!(radon_direct(f, 3, s, 60).unwrap(), oracle, max_relative = 1e-8);
    }

    #[test]
    fn validation_passes_for_used_degrees() {
        for n in [3usize, 4, 5, 6] {
            for p in [1.0, n as f64 - 1.0, 0.5 * n as f64] {
                let v = validate_multipliers(n, p, 64).unwrap();
                assert!(v.worst() < VALIDATION_TOL, "n={n} p={p} {v:?}");
            }
        }
    }

    #[test]
    fn double_transform_returns_scaled_input() {
        let n = 5;
        let f = gegenbauer_expand_even(|t| (1.0 + 0.5 * t * t).powf(-1.5), n, 32).unwrap();
        let once = ft_homogeneous_revolution(&f, 1.5).unwrap();
        let twice = ft_homogeneous_revolution(&once, n as f64 - 1.5).unwrap();
        let scale = (2.0 * PI).powi(n as i32);
        for t in [0.0, 0.3, 0.8, 1.0] {
            assert_relative_eq!(twice.eval(t), scale * f.eval(t), max_relative = 1e-10);
        }
    }

    #[test]
    fn ball_section_constant() {
        for n in [3usize, 4, 6] {
            let one = GegenbauerSeries::new(n, vec![1.0, 0.0, 0.0]).unwrap();
            let r = radon_sphere(&one).unwrap();
            assert_relative_eq!(r.eval(0.2), (n as f64 - 1.0) * ball_volume(n - 1), max_relative = 1e-12);
        }
    }

    #[test]
    fn odd_series_rejected() {
        let s = GegenbauerSeries::new(4, vec![1.0, 0.5]).unwrap();
        assert!(matches!(radon_sphere(&s), Err(Error::OddSeries(_))));
        assert!(matches!(ft_homogeneous_revolution(&s, 1.0), Err(Error::OddSeries(_))));
        assert!(ft_homogeneous_revolution(&GegenbauerSeries::new(4, vec![1.0]).unwrap(), 4.0).is_err());
    }

    #[test]
    fn separable_backend_agrees_with_multipliers_for_the_ball() {
        for n in [3usize, 5] {
            for p in [1.0, n as f64 - 1.0] {
                let xi = normalized(&(0..n).map(|i| (i as f64 + 0.5).sin()).collect::<Vec<_>>());
                let sep = ft_lq_norm_power(n, 2.0, p, &xi).unwrap().value;
                let one = GegenbauerSeries::new(n, vec![1.0]).unwrap();
                let mult = ft_homogeneous_revolution(&one, p).unwrap().eval(0.3);
                assert_relative_eq!(sep, mult, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn homogeneity_bookkeeping() {
        let n = 4;
        let series = gegenbauer_expand_even(|t| 1.0 + t * t, n, 8).unwrap();
        let axis = vec![0.0, 0.0, 0.0, 1.0];
        let h = HomogeneousFn::axial(series, axis, 1.0).unwrap();
        let xi = normalized(&[0.3, 0.1, -0.4, 0.8]);
        let twice: Vec<f64> = xi.iter().map(|v| 2.0 * v).collect();
        let base = h.transform_at(&xi).unwrap();
        assert_eq!(h.transform_at(&twice).unwrap(), base * 2f64.powf(-(n as f64) + 1.0));
        let x = [0.5, 0.5, 0.5, 0.5];
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        assert_relative_eq!(h.eval(&x3).unwrap(), h.eval(&x).unwrap() / 3.0, max_relative = 1e-14);
        let lq = HomogeneousFn::lq_power(5, 4.0, 1.0).unwrap();
        let e1 = [1.0, 0.0, 0.0, 0.0, 0.0];
        let e1x2 = [2.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(lq.transform_at(&e1x2).unwrap(), lq.transform_at(&e1).unwrap() * 2f64.powf(-4.0));
    }
}
