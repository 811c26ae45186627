//! Section volumes from Fourier transforms, the positive-definiteness test for
//! intersection bodies, and the spherical Parseval check.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::gegenbauer::{gegenbauer_expand_even, sphere_weight_rule, GegenbauerSeries, DEFAULT_DEGREE};
use super::lq::ft_lq_norm_power;
use super::multiplier::ft_homogeneous_revolution;
use crate::bodies::StarBody;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm2, pairwise_sum, sphere_area};

/// Number of trailing coefficients used for tail estimates.
const TAIL_TERMS: usize = 8;
/// Tail estimates above this trigger an accuracy warning.
pub const TAIL_WARNING: f64 = 1e-6;

/// Axis of symmetry used for Gegenbauer expansions of `body`: its revolution
/// axis, or `e_n` for a Euclidean ball.
pub fn symmetry_axis(body: &StarBody) -> Result<Vec<f64>> {
    if let Some(axis) = &body.flags().revolution_axis {
        return Ok(axis.clone());
    }
    if body.is_euclidean_ball() {
        let mut e = vec![0.0; body.dim()];
        e[body.dim() - 1] = 1.0;
        return Ok(e);
    }
    Err(Error::UnsupportedBody(format!(
        "{} has no axis of revolution",
        body.label()
    )))
}

/// A unit vector orthogonal to `axis`.
pub fn orthogonal_unit(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let pivot = (0..n)
        .min_by(|&i, &j| axis[i].abs().total_cmp(&axis[j].abs()))
        .expect("non-empty axis");
    let mut v = vec![0.0; n];
    v[pivot] = 1.0;
    let c = dot(&v, axis);
    for (vi, ai) in v.iter_mut().zip(axis) {
        *vi -= c * ai;
    }
    let len = norm2(&v);
    v.iter().map(|x| x / len).collect()
}

/// Direction at height `t` on the meridian spanned by `axis` and `perp`.
pub fn meridian_point(axis: &[f64], perp: &[f64], t: f64) -> Vec<f64> {
    let c = (1.0 - t * t).max(0.0).sqrt();
    axis.iter().zip(perp).map(|(a, b)| t * a + c * b).collect()
}

/// Even Gegenbauer expansion of `t ↦ ρ_K(θ(t))^power` along the meridian about `axis`.
pub fn radial_power_series(body: &StarBody, axis: &[f64], power: f64, degree_max: usize) -> Result<GegenbauerSeries> {
    let perp = orthogonal_unit(axis);
    let failure = std::cell::RefCell::new(None);
    let series = gegenbauer_expand_even(
        |t| match body.radial(&meridian_point(axis, &perp, t)) {
            Ok(r) => r.powf(power),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        body.dim(),
        degree_max,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => series,
    }
}

/// Section volume from the Fourier formula
/// `|K ∩ ξ^⊥| = (π(n-1))^{-1} (||·||_K^{-n+1})^(ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourierSection {
    pub value: f64,
    /// Sup-norm bound of the last few transformed terms, in volume units.
    pub tail_bound: f64,
    /// False when `tail_bound` exceeds [`TAIL_WARNING`] relative to `value`.
    pub accurate: bool,
}

pub fn section_volume_fourier(body: &StarBody, xi: &[f64], degree_max: usize) -> Result<FourierSection> {
    let n = body.dim();
    check_direction(n, xi)?;
    let axis = symmetry_axis(body)?;
    let nf = n as f64;
    let series = radial_power_series(body, &axis, nf - 1.0, degree_max)?;
    let transformed = ft_homogeneous_revolution(&series, nf - 1.0)?;
    let scale = PI * (nf - 1.0);
    let value = transformed.eval(dot(xi, &axis)) / scale;
    let tail_bound = transformed.tail_bound(TAIL_TERMS) / scale;
    Ok(FourierSection {
        value,
        tail_bound,
        accurate: tail_bound <= TAIL_WARNING * value.abs().max(1.0),
    })
}

fn check_direction(n: usize, xi: &[f64]) -> Result<()> {
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: xi.len(),
        });
    }
    let len = norm2(xi);
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnitVector { length: len });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// The transform of `||·||^{-1}` is negative somewhere: not an intersection body.
    NegativeFound,
    /// No negative value found on the grid.
    InconclusiveNonnegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformBackend {
    Separable,
    Multiplier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionTest {
    pub min_value: f64,
    pub argmin: Vec<f64>,
    pub max_abs: f64,
    /// `1e-6 · max_abs`; values below `-tolerance` count as negative.
    pub tolerance: f64,
    pub verdict: Verdict,
    pub evaluated: usize,
    /// Grid points whose transform could not be computed reliably.
    pub skipped: usize,
    pub backend: TransformBackend,
}

pub const SIGN_TOL: f64 = 1e-6;

/// `θ ↦ (||·||_K^{-1})^(θ)` on the sphere through whichever backend applies.
#[derive(Debug, Clone)]
pub enum InverseNormTransform {
    Separable { n: usize, q: f64 },
    Axial { axis: Vec<f64>, series: GegenbauerSeries },
}

impl InverseNormTransform {
    pub fn new(body: &StarBody, degree_max: usize) -> Result<Self> {
        let n = body.dim();
        if n < 3 {
            return Err(Error::UnsupportedBody("dimension below 3".into()));
        }
        match body.lq_exponent() {
            Some(q) if (1.0..=12.0).contains(&q) => Ok(Self::Separable { n, q }),
            Some(q) => Err(Error::UnsupportedBody(format!(
                "l_q ball with q = {q} is outside the separable range [1, 12]"
            ))),
            None => {
                let axis = symmetry_axis(body)?;
                let series = radial_power_series(body, &axis, 1.0, degree_max)?;
                let series = ft_homogeneous_revolution(&series, 1.0)?;
                Ok(Self::Axial { axis, series })
            }
        }
    }

    pub fn backend(&self) -> TransformBackend {
        match self {
            Self::Separable { .. } => TransformBackend::Separable,
            Self::Axial { .. } => TransformBackend::Multiplier,
        }
    }

    /// Value at a unit vector; `None` where the separable integral is unreliable.
    pub fn eval(&self, theta: &[f64]) -> Result<Option<f64>> {
        match self {
            Self::Separable { n, q } => {
                let v = ft_lq_norm_power(*n, *q, 1.0, theta)?;
                Ok(v.is_reliable().then_some(v.value))
            }
            Self::Axial { axis, series } => Ok(Some(series.eval(dot(theta, axis)))),
        }
    }
}

/// Directions `c / |c|` for nonincreasing `c ∈ {0, 1/R, ..., 1}^n` with `c_1 = 1`.
/// Up to signed permutations this covers the sphere for `l_q` balls and always
/// contains the coordinate axes and the main diagonal.
pub fn sorted_orthant_grid(n: usize, resolution: usize) -> Vec<Vec<f64>> {
    let r = resolution.max(1);
    let mut out = Vec::new();
    let mut current = vec![r; 1];
    fn extend(n: usize, r: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if current.len() == n {
            let c: Vec<f64> = current.iter().map(|&j| j as f64 / r as f64).collect();
            out.push(crate::numeric::normalized(&c));
            return;
        }
        let last = *current.last().expect("starts non-empty");
        for j in (0..=last).rev() {
            current.push(j);
            extend(n, r, current, out);
            current.pop();
        }
    }
    extend(n, r, &mut current, &mut out);
    out
}

/// Sign test of `(||·||_K^{-1})^` on the sphere: separable backend for `l_q`
/// balls with `q ∈ [1, 12]`, multiplier backend for bodies of revolution.
pub fn intersection_body_test(body: &StarBody, resolution: usize) -> Result<IntersectionTest> {
    let n = body.dim();
    if n < 3 {
        return Err(Error::UnsupportedBody("dimension below 3".into()));
    }
    let transform = InverseNormTransform::new(body, DEFAULT_DEGREE)?;
    let backend = transform.backend();
    let grid = match &transform {
        InverseNormTransform::Separable { .. } => sorted_orthant_grid(n, resolution),
        InverseNormTransform::Axial { axis, .. } => {
            let perp = orthogonal_unit(axis);
            let count = 8 * resolution.max(1) + 1;
            (0..count)
                .map(|i| meridian_point(axis, &perp, i as f64 / (count - 1) as f64))
                .collect()
        }
    };
    let results: Vec<Result<Option<f64>>> = grid.par_iter().map(|xi| transform.eval(xi)).collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut skipped = 0;
    for (r, xi) in results.into_iter().zip(grid) {
        match r? {
            Some(v) => values.push((v, xi)),
            None => skipped += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::Quadrature("no grid direction gave a reliable transform".into()));
    }
    let (min_value, argmin) = values
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(v, x)| (*v, x.clone()))
        .expect("non-empty");
    let max_abs = values.iter().fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let tolerance = SIGN_TOL * max_abs;
    Ok(IntersectionTest {
        min_value,
        argmin,
        max_abs,
        tolerance,
        verdict: if min_value < -tolerance {
            Verdict::NegativeFound
        } else {
            Verdict::InconclusiveNonnegative
        },
        evaluated: values.len(),
        skipped,
        backend,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalReport {
    /// `∫_{S^{n-1}} (||·||_K^{-a})^ (||·||_L^{-n+a})^`.
    pub lhs: f64,
    /// `(2π)^n ∫_{S^{n-1}} ||θ||_K^{-a} ||θ||_L^{-n+a}`.
    pub rhs: f64,
    pub rel_gap: f64,
    /// Largest tail estimate of the two expansions.
    pub tail_bound: f64,
}

const PARSEVAL_NODES: usize = 400;

/// Spherical Parseval identity for the exponent pair `(-a, -n+a)`, `0 < a < n`.
/// The left side goes through the multiplier backend; the right side is a
/// direct quadrature of the norms.
pub fn parseval_check(k: &StarBody, l: &StarBody, a: f64, degree_max: usize) -> Result<ParsevalReport> {
    let n = k.dim();
    if l.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.dim(),
        });
    }
    let nf = n as f64;
    if !(a > 0.0 && a < nf) {
        return Err(Error::OutOfRange(format!("exponent a = {a} outside (0, {n})")));
    }
    let axis = common_axis(k, l)?;
    let perp = orthogonal_unit(&axis);
    let f = radial_power_series(k, &axis, a, degree_max)?;
    let g = radial_power_series(l, &axis, nf - a, degree_max)?;
    let tail_bound = f.tail_bound(TAIL_TERMS).max(g.tail_bound(TAIL_TERMS));
    let f_hat = ft_homogeneous_revolution(&f, a)?;
    let g_hat = ft_homogeneous_revolution(&g, nf - a)?;
    let lhs = f_hat.sphere_inner(&g_hat)?;

    let rule = sphere_weight_rule(n, PARSEVAL_NODES);
    let mut terms = Vec::with_capacity(rule.len());
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let theta = meridian_point(&axis, &perp, t);
        terms.push(w * k.radial(&theta)?.powf(a) * l.radial(&theta)?.powf(nf - a));
    }
    let rhs = (2.0 * PI).powf(nf) * sphere_area(n - 1) * pairwise_sum(&terms);
    Ok(ParsevalReport {
        lhs,
        rhs,
        rel_gap: (lhs - rhs).abs() / rhs.abs(),
        tail_bound,
    })
}

fn common_axis(k: &StarBody, l: &StarBody) -> Result<Vec<f64>> {
    match (&k.flags().revolution_axis, &l.flags().revolution_axis) {
        (Some(a), Some(b)) => {
            if dot(a, b).abs() < 1.0 - 1e-12 {
                return Err(Error::UnsupportedBody("bodies of revolution about different axes".into()));
            }
            Ok(a.clone())
        }
        (Some(a), None) if l.is_euclidean_ball() => Ok(a.clone()),
        (None, Some(b)) if k.is_euclidean_ball() => Ok(b.clone()),
        _ => {
            symmetry_axis(k)?;
            symmetry_axis(l)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Density, RevolutionProfile};
    use crate::grassmann::Subspace;
    use crate::numeric::{ball_volume, normalized};
    use crate::quadrature::section_measure;
    use approx::assert_relative_eq;

    #[test]
    fn ball_sections() {
        let ball = StarBody::euclidean_ball(4).unwrap();
        for xi in [vec![1.0, 0.0, 0.0, 0.0], normalized(&[1.0, -2.0, 0.5, 3.0])] {
            let s = section_volume_fourier(&ball, &xi, 16).unwrap();
            assert!(s.accurate);
            assert_relative_eq!(s.value, ball_volume(3), max_relative = 1e-12);
        }
    }

    #[test]
    fn revolution_sections_match_quadrature() {
        let body = StarBody::revolution(4, RevolutionProfile::q_sum(4.0)).unwrap();
        let mu = Density::uniform(4);
        for xi in [vec![0.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 0.0]] {
            let f = section_volume_fourier(&body, &xi, DEFAULT_DEGREE).unwrap();
            assert!(f.accurate, "{f:?}");
            let h = Subspace::hyperplane(&xi).unwrap();
            let q = section_measure(&mu, &body, &h, 60).unwrap();
            assert_relative_eq!(f.value, q.value, max_relative = 1e-3);
        }
    }

    #[test]
    fn orthant_grid_contains_axes_and_diagonal() {
        let g = sorted_orthant_grid(5, 4);
        assert!(g.iter().any(|x| (x[0] - 1.0).abs() < 1e-15));
        let d = 1.0 / 5f64.sqrt();
        assert!(g.iter().any(|x| x.iter().all(|v| (v - d).abs() < 1e-15)));
        // multisets of size 4 drawn from 5 levels
        assert_eq!(g.len(), 70);
    }

    #[test]
    fn ball_is_nonnegative() {
        let t = intersection_body_test(&StarBody::euclidean_ball(5).unwrap(), 4).unwrap();
        assert_eq!(t.verdict, Verdict::InconclusiveNonnegative);
        assert!(t.min_value > 0.0);
        assert_relative_eq!(t.min_value, t.max_abs, max_relative = 1e-9);
    }

    #[test]
    fn l4_ball_in_five_dimensions_is_not_an_intersection_body() {
        let t = intersection_body_test(&StarBody::lq_ball(5, 4.0).unwrap(), 6).unwrap();
        assert_eq!(t.verdict, Verdict::NegativeFound);
        assert!(t.min_value < 0.0);
    }

    #[test]
    fn l4_ball_in_three_dimensions_is_nonnegative() {
        let t = intersection_body_test(&StarBody::lq_ball(3, 4.0).unwrap(), 10).unwrap();
        assert_eq!(t.verdict, Verdict::InconclusiveNonnegative, "{t:?}");
    }

    #[test]
    fn unsupported_body_is_reported() {
        let body = StarBody::ellipsoid_axes(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(intersection_body_test(&body, 4), Err(Error::UnsupportedBody(_))));
    }

    #[test]
    fn parseval_for_balls_and_revolution_bodies() {
        let ball = StarBody::euclidean_ball(4).unwrap();
        let r = parseval_check(&ball, &ball, 1.0, 16).unwrap();
        assert!(r.rel_gap < 1e-8, "{r:?}");
        let rev = StarBody::revolution(4, RevolutionProfile::q_sum(4.0)).unwrap();
        let r = parseval_check(&ball, &rev, 1.0, DEFAULT_DEGREE).unwrap();
        assert!(r.rel_gap < 1e-3, "{r:?}");
        let r = parseval_check(&rev, &rev, 1.0, DEFAULT_DEGREE).unwrap();
        assert!(r.rel_gap < 1e-3, "{r:?}");
        let r = parseval_check(&rev, &rev, 2.5, DEFAULT_DEGREE).unwrap();
        assert!(r.rel_gap < 1e-3, "{r:?}");
    }
}
