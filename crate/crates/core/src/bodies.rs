//! Origin-symmetric star bodies, given by their Minkowski functionals, and even
//! non-negative densities.
//!
//! Bodies and densities are immutable after construction and cheap to clone
//! (shared `Arc` internals), so evaluators can be called from parallel workers.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::GegenbauerSeries;
use crate::numeric::{ball_volume, dot, gamma, gauss_legendre, gauss_radial_moment, ln_gamma, norm2};
use crate::rng::{stream_rng, unit_vector};

/// Invertible linear operator with cached inverse and `|det|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det_abs: f64,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::SingularMap(format!(
                "matrix is {}x{}, not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let det_abs = matrix.clone().lu().determinant().abs();
        if !(det_abs > 0.0) || !det_abs.is_finite() {
            return Err(Error::SingularMap(format!("|det| = {det_abs}")));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMap("inverse does not exist".into()))?;
        let residual = (&matrix * &inverse - DMatrix::<f64>::identity(n, n)).amax();
        if residual > 1e-10 {
            return Err(Error::SingularMap(format!("|T T^-1 - I| = {residual:.3e}")));
        }
        Ok(Self {
            matrix,
            inverse,
            det_abs,
        })
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
    }

    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det_abs(&self) -> f64 {
        self.det_abs
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)] == 0.0))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.inverse, x)
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// Symmetric two-dimensional profile `N(r, z)` of a body of revolution, applied to
/// `r = |x'|_2` and `z = |x_n|`:
/// `N = ((r/a)^q + (z/b)^q + kappa ((r/a)^2 + (z/b)^2)^(q/2))^(1/q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RevolutionProfile {
    pub q: f64,
    pub radial_scale: f64,
    pub axial_scale: f64,
    pub kappa: f64,
}

impl RevolutionProfile {
    pub fn q_sum(q: f64) -> Self {
        Self {
            q,
            radial_scale: 1.0,
            axial_scale: 1.0,
            kappa: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(Error::NonConvexExponent { q: self.q });
        }
        if !(self.radial_scale > 0.0 && self.axial_scale > 0.0) || !self.radial_scale.is_finite() || !self.axial_scale.is_finite() {
            return Err(Error::InvalidBody("profile scales must be positive and finite".into()));
        }
        if !(self.kappa >= 0.0) || (self.q.is_infinite() && self.kappa > 0.0) {
            return Err(Error::InvalidBody(format!("invalid smoothing weight kappa = {}", self.kappa)));
        }
        Ok(())
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        let u = r.abs() / self.radial_scale;
        let v = z.abs() / self.axial_scale;
        if self.q.is_infinite() {
            return u.max(v);
        }
        let m = u.max(v);
        if m == 0.0 {
            return 0.0;
        }
        let (u, v) = (u / m, v / m);
        let mut s = u.powf(self.q) + v.powf(self.q);
        if self.kappa > 0.0 {
            s += self.kappa * (u * u + v * v).powf(0.5 * self.q);
        }
        m * s.powf(1.0 / self.q)
    }
}

type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Geometric description behind a [`StarBody`].
#[derive(Clone)]
pub enum Shape {
    /// Unit ball of `l_q^n`, `q` in `[1, inf]`.
    LqBall { q: f64 },
    /// `{x : x^T A^{-1} x <= 1}`.
    Ellipsoid { matrix: DMatrix<f64>, inverse: DMatrix<f64> },
    WeightedBox { half_widths: Vec<f64> },
    /// Body of revolution about `e_n`.
    Revolution { profile: RevolutionProfile },
    /// Polar of `conv(±v_j)`: `||x|| = max_j |<x, v_j>|`.
    PolarPolytope { vertices: Vec<Vec<f64>> },
    LinearImage { base: StarBody, map: LinearMap },
    Intersection { parts: Vec<StarBody> },
    Dilate { base: StarBody, factor: f64 },
    /// `rho^(n-1) = rho_base^(n-1) - delta psi(<theta, axis>) - shift`.
    RadialPerturbation {
        base: StarBody,
        axis: Vec<f64>,
        psi: GegenbauerSeries,
        delta: f64,
        shift: f64,
    },
    /// Raw Minkowski functional, no structural guarantees.
    Custom { norm: Arc<NormFn> },
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::LqBall { q } => write!(f, "LqBall(q={q})"),
            Shape::Ellipsoid { matrix, .. } => write!(f, "Ellipsoid({matrix:?})"),
            Shape::WeightedBox { half_widths } => write!(f, "WeightedBox({half_widths:?})"),
            Shape::Revolution { profile } => write!(f, "Revolution({profile:?})"),
            Shape::PolarPolytope { vertices } => write!(f, "PolarPolytope({} vertices)", vertices.len()),
            Shape::LinearImage { base, .. } => write!(f, "LinearImage({})", base.label),
            Shape::Intersection { parts } => write!(f, "Intersection({} parts)", parts.len()),
            Shape::Dilate { base, factor } => write!(f, "Dilate({}, {factor})", base.label),
            Shape::RadialPerturbation { base, delta, shift, .. } => {
                write!(f, "RadialPerturbation({}, delta={delta}, shift={shift})", base.label)
            }
            Shape::Custom { .. } => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BodyFlags {
    pub origin_symmetric: bool,
    pub unconditional: bool,
    pub revolution_axis: Option<Vec<f64>>,
    pub convex_hint: bool,
}

/// An origin-symmetric star body in `R^n` described by its Minkowski functional.
#[derive(Debug, Clone)]
pub struct StarBody {
    dim: usize,
    shape: Arc<Shape>,
    flags: BodyFlags,
    label: String,
}

fn axis_vector(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[n - 1] = 1.0;
    e
}

impl StarBody {
    fn build(dim: usize, shape: Shape, flags: BodyFlags, label: String) -> Self {
        Self {
            dim,
            shape: Arc::new(shape),
            flags,
            label,
        }
    }

    /// Unit ball of `l_q^n`; `q = f64::INFINITY` gives the cube `[-1, 1]^n`.
    pub fn lq_ball(n: usize, q: f64) -> Result<Self> {
        check_dim(n)?;
        if !(q >= 1.0) {
            return Err(Error::NonConvexExponent { q });
        }
        let label = if q.is_infinite() {
            format!("B_inf^{n}")
        } else {
            format!("B_{q}^{n}")
        };
        Ok(Self::build(
            n,
            Shape::LqBall { q },
            BodyFlags {
                origin_symmetric: true,
                unconditional: true,
                revolution_axis: None,
                convex_hint: true,
            },
            label,
        ))
    }

    pub fn euclidean_ball(n: usize) -> Result<Self> {
        Self::lq_ball(n, 2.0)
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::lq_ball(n, f64::INFINITY)
    }

    pub fn cross_polytope(n: usize) -> Result<Self> {
        Self::lq_ball(n, 1.0)
    }

    /// Ellipsoid `{x : x^T A^{-1} x <= 1}` for a symmetric positive-definite `A`.
    pub fn ellipsoid(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        check_dim(n)?;
        if !matrix.is_square() {
            return Err(Error::NotPositiveDefinite);
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = nalgebra::Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        let inverse = chol.inverse();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || matrix[(i, j)] == 0.0));
        Ok(Self::build(
            n,
            Shape::Ellipsoid { matrix, inverse },
            BodyFlags {
                origin_symmetric: true,
                unconditional: diagonal,
                revolution_axis: None,
                convex_hint: true,
            },
            format!("ellipsoid^{n}"),
        ))
    }

    /// Axis-parallel ellipsoid with the given semi-axes.
    pub fn ellipsoid_axes(semi_axes: &[f64]) -> Result<Self> {
        if semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let diag: Vec<f64> = semi_axes.iter().map(|a| a * a).collect();
        Self::ellipsoid(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    pub fn weighted_box(half_widths: &[f64]) -> Result<Self> {
        check_dim(half_widths.len())?;
        if half_widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidBody("box half-widths must be positive".into()));
        }
        let n = half_widths.len();
        Ok(Self::build(
            n,
            Shape::WeightedBox {
                half_widths: half_widths.to_vec(),
            },
            BodyFlags {
                origin_symmetric: true,
                unconditional: true,
                revolution_axis: None,
                convex_hint: true,
            },
            format!("box^{n}"),
        ))
    }

    /// Body of revolution about `e_n` with the given meridian profile.
    pub fn revolution(n: usize, profile: RevolutionProfile) -> Result<Self> {
        check_dim(n)?;
        profile.validate()?;
        Ok(Self::build(
            n,
            Shape::Revolution { profile },
            BodyFlags {
                origin_symmetric: true,
                unconditional: true,
                revolution_axis: Some(axis_vector(n)),
                convex_hint: true,
            },
            format!("rev_q{}_k{}^{n}", profile.q, profile.kappa),
        ))
    }

    /// Polar body of the polytope `conv(±v_1, ..., ±v_m)`; the vertices must span `R^n`.
    pub fn polar_polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.first().map(|v| v.len()).unwrap_or(0);
        check_dim(n)?;
        if vertices.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidBody("vertices of unequal length".into()));
        }
        let m = DMatrix::from_fn(n, vertices.len(), |i, j| vertices[j][i]);
        let rank = m.rank(1e-10);
        if rank < n {
            return Err(Error::InvalidBody(format!(
                "vertices span a {rank}-dimensional space; polar body is unbounded"
            )));
        }
        let count = vertices.len();
        Ok(Self::build(
            n,
            Shape::PolarPolytope { vertices },
            BodyFlags {
                origin_symmetric: true,
                unconditional: false,
                revolution_axis: None,
                convex_hint: true,
            },
            format!("polar_polytope({count})^{n}"),
        ))
    }

    /// Image `T(K)`: `||x||_{T(K)} = ||T^{-1} x||_K`.
    pub fn linear_image(base: &StarBody, map: LinearMap) -> Result<Self> {
        if map.dim() != base.dim {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                got: map.dim(),
            });
        }
        let unconditional = base.flags.unconditional && map.is_diagonal();
        let label = format!("T({})", base.label);
        Ok(Self::build(
            base.dim,
            Shape::LinearImage {
                base: base.clone(),
                map,
            },
            BodyFlags {
                origin_symmetric: base.flags.origin_symmetric,
                unconditional,
                revolution_axis: None,
                convex_hint: base.flags.convex_hint,
            },
            label,
        ))
    }

    pub fn intersection(parts: Vec<StarBody>) -> Result<Self> {
        let n = parts.first().map(|p| p.dim).ok_or_else(|| Error::InvalidBody("empty intersection".into()))?;
        if let Some(p) = parts.iter().find(|p| p.dim != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.dim,
            });
        }
        let flags = BodyFlags {
            origin_symmetric: parts.iter().all(|p| p.flags.origin_symmetric),
            unconditional: parts.iter().all(|p| p.flags.unconditional),
            revolution_axis: None,
            convex_hint: parts.iter().all(|p| p.flags.convex_hint),
        };
        let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join("∩");
        Ok(Self::build(n, Shape::Intersection { parts }, flags, label))
    }

    /// `a K` for `a >= 0`; `a = 0` is the degenerate point body of measure zero.
    pub fn dilate(base: &StarBody, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::InvalidBody(format!("dilation factor {factor}")));
        }
        Ok(Self::build(
            base.dim,
            Shape::Dilate {
                base: base.clone(),
                factor,
            },
            base.flags.clone(),
            format!("{}·{}", factor, base.label),
        ))
    }

    /// Radial perturbation `rho^(n-1) = rho_base^(n-1) - delta psi(<theta, axis>) - shift`.
    /// Positivity of the right-hand side is the caller's responsibility; it is
    /// checked by [`StarBody::validate_radial_positive`].
    pub fn radial_perturbation(
        base: &StarBody,
        axis: &[f64],
        psi: GegenbauerSeries,
        delta: f64,
        shift: f64,
    ) -> Result<Self> {
        let n = base.dim;
        if axis.len() != n || psi.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: axis.len().min(psi.n()),
            });
        }
        let len = norm2(axis);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitVector { length: len });
        }
        let revolution_axis = base
            .flags
            .revolution_axis
            .clone()
            .or_else(|| base.is_euclidean_ball().then(|| axis.to_vec()))
            .filter(|a| (dot(a, axis).abs() - 1.0).abs() < 1e-12);
        let flags = BodyFlags {
            origin_symmetric: base.flags.origin_symmetric,
            unconditional: base.flags.unconditional
                && revolution_axis.is_some()
                && axis.iter().filter(|v| v.abs() > 0.0).count() == 1,
            revolution_axis: revolution_axis.map(|_| axis.to_vec()),
            convex_hint: false,
        };
        Ok(Self::build(
            n,
            Shape::RadialPerturbation {
                base: base.clone(),
                axis: axis.to_vec(),
                psi,
                delta,
                shift,
            },
            flags,
            format!("perturbed({})", base.label),
        ))
    }

    /// Wraps an arbitrary functional. No convexity or symmetry is implied.
    pub fn from_norm_fn(
        dim: usize,
        label: impl Into<String>,
        norm: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::build(
            dim,
            Shape::Custom { norm: Arc::new(norm) },
            BodyFlags {
                origin_symmetric: false,
                unconditional: false,
                revolution_axis: None,
                convex_hint: false,
            },
            label.into(),
        ))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn flags(&self) -> &BodyFlags {
        &self.flags
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_euclidean_ball(&self) -> bool {
        matches!(*self.shape, Shape::LqBall { q } if q == 2.0)
    }

    /// `Some(q)` when the body is the unit ball of `l_q^n`.
    pub fn lq_exponent(&self) -> Option<f64> {
        match *self.shape {
            Shape::LqBall { q } => Some(q),
            _ => None,
        }
    }

    /// Bodies known to be intersection bodies (hence generalized k-intersection
    /// bodies for every k) by construction: Euclidean balls, ellipsoids and
    /// linear images (or dilates) of the cross-polytope.
    pub fn is_intersection_body_by_construction(&self) -> bool {
        match &*self.shape {
            Shape::LqBall { q } => *q == 1.0 || *q == 2.0,
            Shape::Ellipsoid { .. } => true,
            Shape::LinearImage { base, .. } => base.is_intersection_body_by_construction(),
            Shape::Dilate { base, factor } => *factor > 0.0 && base.is_intersection_body_by_construction(),
            _ => false,
        }
    }

    /// `|K|` when a closed form is known (l_q balls, ellipsoids, boxes and their
    /// linear images and dilates).
    pub fn closed_form_volume(&self) -> Option<f64> {
        let n = self.dim as f64;
        match &*self.shape {
            Shape::LqBall { q } if q.is_infinite() => Some(2f64.powf(n)),
            Shape::LqBall { q } => {
                Some((n * (2.0 * gamma(1.0 + 1.0 / q)).ln() - ln_gamma(1.0 + n / q)).exp())
            }
            Shape::Ellipsoid { matrix, .. } => Some(ball_volume(self.dim) * matrix.determinant().sqrt()),
            Shape::WeightedBox { half_widths } => Some(half_widths.iter().map(|w| 2.0 * w).product()),
            Shape::LinearImage { base, map } => base.closed_form_volume().map(|v| v * map.det_abs()),
            Shape::Dilate { base, factor } => base.closed_form_volume().map(|v| v * factor.powf(n)),
            _ => None,
        }
    }

    /// Minkowski functional `||x||_K`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &*self.shape {
            Shape::LqBall { q } => lq_norm(x, *q),
            Shape::Ellipsoid { inverse, .. } => {
                let n = self.dim;
                let mut s = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += inverse[(i, j)] * x[j];
                    }
                    s += x[i] * row;
                }
                s.max(0.0).sqrt()
            }
            Shape::WeightedBox { half_widths } => x
                .iter()
                .zip(half_widths)
                .fold(0.0f64, |m, (v, w)| m.max(v.abs() / w)),
            Shape::Revolution { profile } => {
                let n = self.dim;
                let r = norm2(&x[..n - 1]);
                profile.eval(r, x[n - 1])
            }
            Shape::PolarPolytope { vertices } => vertices.iter().fold(0.0f64, |m, v| m.max(dot(x, v).abs())),
            Shape::LinearImage { base, map } => base.norm(&map.apply_inverse(x)),
            Shape::Intersection { parts } => parts.iter().fold(0.0f64, |m, p| m.max(p.norm(x))),
            Shape::Dilate { base, factor } => {
                let b = base.norm(x);
                if *factor == 0.0 {
                    if b == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    b / factor
                }
            }
            Shape::RadialPerturbation {
                base,
                axis,
                psi,
                delta,
                shift,
            } => {
                let r = norm2(x);
                if r == 0.0 {
                    return 0.0;
                }
                let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
                let rho_pow = perturbed_radial_power(base, axis, psi, *delta, *shift, &theta);
                if rho_pow <= 0.0 {
                    return f64::INFINITY;
                }
                r * rho_pow.powf(-1.0 / (self.dim as f64 - 1.0))
            }
            Shape::Custom { norm } => norm(x),
        }
    }

    /// Radius `rho_K(theta) = ||theta||_K^{-1}` for a unit vector `theta`.
    pub fn radial(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: theta.len(),
            });
        }
        let len = norm2(theta);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitVector { length: len });
        }
        let v = self.norm(theta);
        if !(v > 0.0) {
            return Err(Error::DegenerateBody {
                norm: v,
                direction: theta.to_vec(),
            });
        }
        Ok(1.0 / v)
    }

    /// Radius without the unit-vector check; `0` for unbounded functionals
    /// (norm `inf`) and `inf` for a vanishing norm.
    pub(crate) fn radial_unchecked(&self, theta: &[f64]) -> f64 {
        1.0 / self.norm(theta)
    }

    /// For radial perturbations: checks `rho^(n-1) > 0` on the given directions.
    pub fn validate_radial_positive<'a>(&self, directions: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        for theta in directions {
            let v = self.norm(theta);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::DegenerateBody {
                    norm: v,
                    direction: theta.to_vec(),
                });
            }
        }
        Ok(())
    }
}

fn perturbed_radial_power(
    base: &StarBody,
    axis: &[f64],
    psi: &GegenbauerSeries,
    delta: f64,
    shift: f64,
    theta: &[f64],
) -> f64 {
    let n = base.dim as f64;
    let rho = 1.0 / base.norm(theta);
    rho.powf(n - 1.0) - delta * psi.eval(dot(theta, axis)) - shift
}

fn check_dim(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidBody("dimension must be positive".into()));
    }
    Ok(())
}

pub(crate) fn lq_norm(x: &[f64], q: f64) -> f64 {
    if q == 2.0 {
        return norm2(x);
    }
    if q == 1.0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if q.is_infinite() || m == 0.0 {
        return m;
    }
    if q == 4.0 {
        let s: f64 = x.iter().map(|v| (v / m).powi(4)).sum();
        return m * s.sqrt().sqrt();
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(q)).sum();
    m * s.powf(1.0 / q)
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

/// Monomial `coef * prod x_i^{e_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monomial {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coef, |acc, (&e, &v)| if e == 0 { acc } else { acc * v.powi(e as i32) })
    }
}

#[derive(Debug, Clone)]
pub enum DensityKind {
    Uniform,
    /// `exp(-|x|^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// `exp(-<x, u>^2 / (2 sigma^2))`, concentrated near the hyperplane `u^⊥`.
    GaussianSlab { normal: Vec<f64>, sigma: f64 },
    /// `|x|^alpha`, with `max(|x|, r0)^alpha` for negative `alpha`.
    RadialPower { alpha: f64, r0: f64 },
    EvenPolynomial { terms: Vec<Monomial> },
    Product(Vec<Density>),
    /// Smoothed indicator of `outer \ inner`: a C^inf ramp from 0 on `∂inner` to 1
    /// over the fraction `smoothing` of each radial gap.
    Shell {
        inner: StarBody,
        outer: StarBody,
        smoothing: f64,
    },
}

/// `P(x) exp(-q(x))` with `q(x) = iso |x|^2 + sum_j c_j <x, u_j>^2`; radial
/// integrals of this family have closed forms.
#[derive(Debug, Clone)]
struct GaussPoly {
    terms: Vec<Monomial>,
    iso: f64,
    slabs: Vec<(Vec<f64>, f64)>,
}

impl GaussPoly {
    fn constant(n: usize) -> Self {
        Self {
            terms: vec![Monomial {
                coef: 1.0,
                exponents: vec![0; n],
            }],
            iso: 0.0,
            slabs: Vec::new(),
        }
    }

    fn times(&self, other: &GaussPoly) -> GaussPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Monomial {
                    coef: a.coef * b.coef,
                    exponents: a.exponents.iter().zip(&b.exponents).map(|(x, y)| x + y).collect(),
                });
            }
        }
        let mut slabs = self.slabs.clone();
        slabs.extend(other.slabs.iter().cloned());
        GaussPoly {
            terms,
            iso: self.iso + other.iso,
            slabs,
        }
    }

    fn exponent_rate(&self, theta: &[f64]) -> f64 {
        self.iso + self.slabs.iter().map(|(u, c)| c * dot(theta, u).powi(2)).sum::<f64>()
    }

    fn radial_integral(&self, theta: &[f64], rho: f64, d: usize) -> f64 {
        let c = self.exponent_rate(theta);
        self.terms
            .iter()
            .map(|t| t.eval(theta) * gauss_radial_moment((d as u32 + t.degree()) as f64, c, rho))
            .sum()
    }
}

/// Even, continuous, non-negative density on `R^n`.
#[derive(Debug, Clone)]
pub struct Density {
    dim: usize,
    kind: Arc<DensityKind>,
    closed: Option<Arc<GaussPoly>>,
    label: String,
}

/// Default Gauss-Legendre order for radial integrals without a closed form.
pub const DEFAULT_RADIAL_ORDER: usize = 64;

/// Truncation radius for negative radial powers.
pub const RADIAL_POWER_R0: f64 = 1e-3;

impl Density {
    fn build(dim: usize, kind: DensityKind, label: String) -> Self {
        let closed = closed_form(dim, &kind).map(Arc::new);
        Self {
            dim,
            kind: Arc::new(kind),
            closed,
            label,
        }
    }

    pub fn uniform(n: usize) -> Self {
        Self::build(n, DensityKind::Uniform, "uniform".into())
    }

    pub fn zero(n: usize) -> Self {
        Self::build(n, DensityKind::EvenPolynomial { terms: Vec::new() }, "zero".into())
    }

    pub fn gaussian(n: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidDensity(format!("sigma = {sigma}")));
        }
        Ok(Self::build(n, DensityKind::Gaussian { sigma }, format!("gaussian({sigma})")))
    }

    pub fn gaussian_slab(normal: &[f64], sigma: f64) -> Result<Self> {
        let len = norm2(normal);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::NotUnitVector { length: len });
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidDensity(format!("sigma = {sigma}")));
        }
        Ok(Self::build(
            normal.len(),
            DensityKind::GaussianSlab {
                normal: normal.to_vec(),
                sigma,
            },
            format!("slab({sigma})"),
        ))
    }

    /// `|x|^alpha` for `alpha > -n`; negative powers are clipped at `r0 = 1e-3`.
    pub fn radial_power(n: usize, alpha: f64) -> Result<Self> {
        if !(alpha > -(n as f64)) {
            return Err(Error::InvalidDensity(format!("alpha = {alpha} must exceed -n")));
        }
        Ok(Self::build(
            n,
            DensityKind::RadialPower {
                alpha,
                r0: RADIAL_POWER_R0,
            },
            format!("radial_power({alpha})"),
        ))
    }

    /// Polynomial with even exponents and non-negative coefficients. Terms of odd
    /// total degree are rejected (the density must be even); terms with an odd
    /// individual exponent or a negative coefficient are rejected because they
    /// can make the density negative.
    pub fn even_polynomial(n: usize, terms: Vec<Monomial>) -> Result<Self> {
        for (i, t) in terms.iter().enumerate() {
            if t.exponents.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.exponents.len(),
                });
            }
            if t.degree() % 2 == 1 {
                return Err(Error::OddDensityTerm(i));
            }
            if t.exponents.iter().any(|e| e % 2 == 1) || !(t.coef >= 0.0) {
                return Err(Error::InvalidDensity(format!(
                    "term {i} is not non-negative (odd exponent or negative coefficient)"
                )));
            }
        }
        Ok(Self::build(n, DensityKind::EvenPolynomial { terms }, "even_poly".into()))
    }

    pub fn product(parts: Vec<Density>) -> Result<Self> {
        let n = parts.first().map(|p| p.dim).ok_or_else(|| Error::InvalidDensity("empty product".into()))?;
        if let Some(p) = parts.iter().find(|p| p.dim != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.dim,
            });
        }
        let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join("*");
        Ok(Self::build(n, DensityKind::Product(parts), label))
    }

    /// Continuous approximation of the indicator of `outer \ inner`.
    pub fn shell(inner: &StarBody, outer: &StarBody, smoothing: f64) -> Result<Self> {
        if inner.dim != outer.dim {
            return Err(Error::DimensionMismatch {
                expected: outer.dim,
                got: inner.dim,
            });
        }
        if !(smoothing > 0.0 && smoothing <= 1.0) {
            return Err(Error::InvalidDensity(format!("smoothing {smoothing} outside (0, 1]")));
        }
        Ok(Self::build(
            inner.dim,
            DensityKind::Shell {
                inner: inner.clone(),
                outer: outer.clone(),
                smoothing,
            },
            format!("shell({})", smoothing),
        ))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn is_even(&self) -> bool {
        true
    }

    pub fn is_uniform(&self) -> bool {
        matches!(*self.kind, DensityKind::Uniform)
    }

    pub fn has_closed_radial_form(&self) -> bool {
        self.closed.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &*self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::Gaussian { sigma } => (-dot(x, x) / (2.0 * sigma * sigma)).exp(),
            DensityKind::GaussianSlab { normal, sigma } => (-dot(x, normal).powi(2) / (2.0 * sigma * sigma)).exp(),
            DensityKind::RadialPower { alpha, r0 } => {
                let r = norm2(x);
                if *alpha < 0.0 {
                    r.max(*r0).powf(*alpha)
                } else if *alpha == 0.0 {
                    1.0
                } else {
                    r.powf(*alpha)
                }
            }
            DensityKind::EvenPolynomial { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            DensityKind::Product(parts) => parts.iter().map(|p| p.eval(x)).product(),
            DensityKind::Shell {
                inner,
                outer,
                smoothing,
            } => {
                let r = norm2(x);
                if r == 0.0 {
                    return 0.0;
                }
                let theta: Vec<f64> = x.iter().map(|v| v / r).collect();
                let rin = inner.radial_unchecked(&theta);
                let rout = outer.radial_unchecked(&theta);
                let width = smoothing * (rout - rin).max(0.0);
                if r <= rin {
                    0.0
                } else if width <= 0.0 || r >= rin + width {
                    1.0
                } else {
                    smooth_step((r - rin) / width)
                }
            }
        }
    }

    /// Points in `(0, rho)` where the radial profile along `theta` is not smooth.
    fn radial_breaks(&self, theta: &[f64], out: &mut Vec<f64>) {
        match &*self.kind {
            DensityKind::RadialPower { alpha, r0 } if *alpha < 0.0 => out.push(*r0),
            DensityKind::Product(parts) => parts.iter().for_each(|p| p.radial_breaks(theta, out)),
            DensityKind::Shell {
                inner,
                outer,
                smoothing,
            } => {
                let rin = inner.radial_unchecked(theta);
                let rout = outer.radial_unchecked(theta);
                out.push(rin);
                out.push(rin + smoothing * (rout - rin).max(0.0));
            }
            _ => {}
        }
    }

    /// `∫_0^rho r^(d-1) f(r theta) dr`, closed form when available and
    /// Gauss-Legendre of the given order (split at breakpoints) otherwise.
    pub fn radial_integral(&self, theta: &[f64], rho: f64, d: usize, order: usize) -> f64 {
        if !(rho > 0.0) {
            return 0.0;
        }
        if let Some(gp) = &self.closed {
            return gp.radial_integral(theta, rho, d);
        }
        if let DensityKind::Shell {
            inner,
            outer,
            smoothing,
        } = &*self.kind
        {
            return shell_radial_integral(
                inner.radial_unchecked(theta),
                outer.radial_unchecked(theta),
                *smoothing,
                rho,
                d,
                order,
            );
        }
        let mut breaks = Vec::new();
        self.radial_breaks(theta, &mut breaks);
        breaks.retain(|b| *b > 0.0 && *b < rho);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = gauss_legendre(order);
        let mut edges = Vec::with_capacity(breaks.len() + 2);
        edges.push(0.0);
        edges.extend(breaks);
        edges.push(rho);
        let mut x = vec![0.0; theta.len()];
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut s = 0.0;
            for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                let r = mid + half * t;
                for (xi, th) in x.iter_mut().zip(theta) {
                    *xi = r * th;
                }
                s += wt * r.powi(d as i32 - 1) * self.eval(&x);
            }
            total += half * s;
        }
        total
    }
}

/// `∫_0^rho r^(d-1) g(r) dr` for the shell profile: zero up to `rin`, a smooth
/// ramp over `[rin, rin + width]`, one beyond.
fn shell_radial_integral(rin: f64, rout: f64, smoothing: f64, rho: f64, d: usize, order: usize) -> f64 {
    let width = smoothing * (rout - rin).max(0.0);
    if rho <= rin {
        return 0.0;
    }
    let ramp_end = (rin + width).min(rho);
    let df = d as f64;
    let mut total = 0.0;
    if ramp_end > rin {
        let rule = gauss_legendre(order);
        let half = 0.5 * (ramp_end - rin);
        let mid = 0.5 * (ramp_end + rin);
        let mut s = 0.0;
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + half * t;
            s += wt * r.powi(d as i32 - 1) * smooth_step((r - rin) / width);
        }
        total += half * s;
    }
    let flat_start = if width > 0.0 { rin + width } else { rin };
    if rho > flat_start {
        total += (rho.powf(df) - flat_start.powf(df)) / df;
    }
    total
}

fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

fn closed_form(n: usize, kind: &DensityKind) -> Option<GaussPoly> {
    match kind {
        DensityKind::Uniform => Some(GaussPoly::constant(n)),
        DensityKind::Gaussian { sigma } => Some(GaussPoly {
            iso: 1.0 / (2.0 * sigma * sigma),
            ..GaussPoly::constant(n)
        }),
        DensityKind::GaussianSlab { normal, sigma } => Some(GaussPoly {
            slabs: vec![(normal.clone(), 1.0 / (2.0 * sigma * sigma))],
            ..GaussPoly::constant(n)
        }),
        DensityKind::RadialPower { alpha, .. } if *alpha == 0.0 => Some(GaussPoly::constant(n)),
        DensityKind::RadialPower { .. } => None,
        DensityKind::EvenPolynomial { terms } => Some(GaussPoly {
            terms: terms.clone(),
            iso: 0.0,
            slabs: Vec::new(),
        }),
        DensityKind::Product(parts) => parts.iter().try_fold(GaussPoly::constant(n), |acc, p| {
            p.closed.as_ref().map(|gp| acc.times(gp))
        }),
        DensityKind::Shell { .. } => None,
    }
}

// ---------------------------------------------------------------------------
// Convexity certification (statistical)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `||(x + y)/2|| - 1` observed over sampled boundary pairs.
    pub worst_gap: f64,
    pub tolerance: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub seed: u64,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const CONVEXITY_TOL: f64 = 1e-9;

/// Midpoint test on pairs of boundary points: half of the pairs are independent
/// uniform directions, half are close pairs at log-uniform angular separations
/// in `[1e-3, 0.5]` to probe local curvature.
pub fn check_convexity(body: &StarBody, trials: usize, seed: u64) -> ConvexityReport {
    check_convexity_with_tol(body, trials, seed, CONVEXITY_TOL)
}

pub fn check_convexity_with_tol(body: &StarBody, trials: usize, seed: u64, tol: f64) -> ConvexityReport {
    const CHUNK: usize = 1024;
    let n = body.dim;
    let trials = trials.max(1);
    let chunks = trials.div_ceil(CHUNK);
    let results: Vec<(usize, f64, Option<(Vec<f64>, Vec<f64>)>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut violations = 0;
            let mut worst = f64::NEG_INFINITY;
            let mut witness = None;
            for i in 0..count {
                let a = unit_vector(&mut rng, n);
                let b = if i % 2 == 0 {
                    unit_vector(&mut rng, n)
                } else {
                    let h = 10f64.powf(crate::rng::uniform(&mut rng, -3.0, (0.5f64).log10()));
                    let g = unit_vector(&mut rng, n);
                    let v: Vec<f64> = a.iter().zip(&g).map(|(x, y)| x + h * y).collect();
                    crate::numeric::normalized(&v)
                };
                let ra = body.radial_unchecked(&a);
                let rb = body.radial_unchecked(&b);
                if !(ra.is_finite() && rb.is_finite()) {
                    continue;
                }
                let x: Vec<f64> = a.iter().map(|v| v * ra).collect();
                let y: Vec<f64> = b.iter().map(|v| v * rb).collect();
                let mid: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
                let gap = body.norm(&mid) - 1.0;
                if gap > worst {
                    worst = gap;
                }
                if gap > tol {
                    violations += 1;
                    if witness.is_none() {
                        witness = Some((x, y));
                    }
                }
            }
            (violations, worst, witness)
        })
        .collect();
    let mut report = ConvexityReport {
        trials,
        violations: 0,
        worst_gap: f64::NEG_INFINITY,
        tolerance: tol,
        witness: None,
        seed,
    };
    for (v, w, wit) in results {
        report.violations += v;
        report.worst_gap = report.worst_gap.max(w);
        if report.witness.is_none() {
            report.witness = wit;
        }
    }
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileConvexity {
    pub samples: usize,
    /// Minimum of the discrete `u + u''` along the meridian, `u = 1/rho`.
    pub min_curvature_indicator: f64,
    pub tolerance: f64,
    pub worst_angle: f64,
}

impl ProfileConvexity {
    pub fn passed(&self) -> bool {
        self.min_curvature_indicator >= -self.tolerance
    }
}

/// Second-difference test on the meridian curve of a body of revolution: the
/// planar star curve `r = 1/u(phi)` bounds a convex region iff `u + u'' >= 0`.
pub fn check_revolution_profile(body: &StarBody, samples: usize) -> Result<ProfileConvexity> {
    let axis = body
        .flags
        .revolution_axis
        .clone()
        .ok_or_else(|| Error::UnsupportedBody(format!("{} is not a body of revolution", body.label)))?;
    let n = body.dim;
    if n < 2 {
        return Err(Error::UnsupportedBody("dimension 1".into()));
    }
    // a unit vector orthogonal to the axis
    let mut perp = vec![0.0; n];
    let j = axis
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    perp[j] = 1.0;
    let c = dot(&perp, &axis);
    for (p, a) in perp.iter_mut().zip(&axis) {
        *p -= c * a;
    }
    let perp = crate::numeric::normalized(&perp);
    let samples = samples.max(16);
    let h = std::f64::consts::PI / samples as f64;
    let u = |phi: f64| -> f64 {
        let x: Vec<f64> = perp
            .iter()
            .zip(&axis)
            .map(|(p, a)| phi.sin() * p + phi.cos() * a)
            .collect();
        body.norm(&x)
    };
    let values: Vec<f64> = (0..=samples + 1).map(|i| u((i as f64 - 0.5) * h)).collect();
    let mut min = f64::INFINITY;
    let mut worst = 0.0;
    for i in 1..=samples {
        let second = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        let ind = values[i] + second;
        if ind < min {
            min = ind;
            worst = (i as f64 - 0.5) * h;
        }
    }
    Ok(ProfileConvexity {
        samples,
        min_curvature_indicator: min,
        tolerance: 1e-6,
        worst_angle: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constructor_examples() {
        let b = StarBody::lq_ball(3, 2.0).unwrap();
        assert_eq!(b.norm(&[1.0, 0.0, 0.0]), 1.0);
        let c = StarBody::lq_ball(4, 1.0).unwrap();
        assert_eq!(c.norm(&[1.0, 1.0, 1.0, 1.0]), 4.0);
        let t = LinearMap::diagonal(&[2.0, 3.0]).unwrap();
        let e = StarBody::linear_image(&StarBody::euclidean_ball(2).unwrap(), t).unwrap();
        assert_relative_eq!(e.norm(&[2.0, 0.0]), 1.0, max_relative = 1e-15);
        assert!(e.flags().unconditional);
    }

    #[test]
    fn rejects_invalid_bodies() {
        assert!(matches!(StarBody::lq_ball(5, 0.8), Err(Error::NonConvexExponent { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(StarBody::ellipsoid(m).unwrap_err(), Error::NotPositiveDefinite);
        assert!(StarBody::polar_polytope(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).is_err());
    }

    #[test]
    fn radial_examples() {
        let b = StarBody::euclidean_ball(3).unwrap();
        let th = [0.6, 0.0, 0.8];
        assert_relative_eq!(b.radial(&th).unwrap(), 1.0);
        let l1 = StarBody::cross_polytope(3).unwrap();
        let d = 1.0 / 3f64.sqrt();
        assert_relative_eq!(l1.radial(&[d, d, d]).unwrap(), 1.0 / 3f64.sqrt(), max_relative = 1e-15);
        let e = StarBody::ellipsoid_axes(&[2.5, 1.0, 0.5]).unwrap();
        assert_relative_eq!(e.radial(&[1.0, 0.0, 0.0]).unwrap(), 2.5, max_relative = 1e-15);
        assert!(matches!(b.radial(&[1.0, 1.0, 0.0]), Err(Error::NotUnitVector { .. })));
        let zero = StarBody::from_norm_fn(2, "zero", |_| 0.0).unwrap();
        assert!(matches!(zero.radial(&[1.0, 0.0]), Err(Error::DegenerateBody { .. })));
    }

    #[test]
    fn density_examples() {
        let u = Density::uniform(3);
        assert_eq!(u.eval(&[0.3, -2.0, 5.0]), 1.0);
        let g = Density::gaussian(3, 1.0).unwrap();
        assert_eq!(g.eval(&[0.0, 0.0, 0.0]), 1.0);
        let p = Density::even_polynomial(
            2,
            vec![
                Monomial { coef: 1.0, exponents: vec![2, 0] },
                Monomial { coef: 1.0, exponents: vec![0, 2] },
            ],
        )
        .unwrap();
        assert_eq!(p.eval(&[1.0, 1.0]), 2.0);
        let odd = Density::even_polynomial(2, vec![Monomial { coef: 1.0, exponents: vec![1, 0] }]);
        assert_eq!(odd.unwrap_err(), Error::OddDensityTerm(0));
        let mixed = Density::even_polynomial(2, vec![Monomial { coef: 1.0, exponents: vec![1, 1] }]);
        assert!(matches!(mixed, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn radial_power_is_clipped_near_origin() {
        let d = Density::radial_power(3, -2.0).unwrap();
        assert_relative_eq!(d.eval(&[0.0, 0.0, 0.0]), 1e6, max_relative = 1e-12);
        assert_relative_eq!(d.eval(&[0.5, 0.0, 0.0]), 4.0, max_relative = 1e-12);
        assert!(Density::radial_power(3, -3.0).is_err());
    }

    #[test]
    fn closed_and_numeric_radial_integrals_agree() {
        let n = 4;
        let theta = crate::numeric::normalized(&[0.3, -0.2, 0.9, 0.1]);
        let slab_normal = crate::numeric::normalized(&[1.0, 1.0, 0.0, 0.0]);
        let poly = Density::even_polynomial(
            n,
            vec![
                Monomial { coef: 0.5, exponents: vec![2, 0, 0, 0] },
                Monomial { coef: 2.0, exponents: vec![0, 2, 2, 0] },
                Monomial { coef: 1.0, exponents: vec![0, 0, 0, 0] },
            ],
        )
        .unwrap();
        let densities = vec![
            Density::uniform(n),
            Density::gaussian(n, 0.7).unwrap(),
            Density::gaussian_slab(&slab_normal, 0.3).unwrap(),
            poly.clone(),
            Density::product(vec![poly, Density::gaussian(n, 1.3).unwrap()]).unwrap(),
        ];
        for dens in densities {
            assert!(dens.has_closed_radial_form());
            for d in [2usize, 3, 4] {
                let closed = dens.radial_integral(&theta, 1.7, d, 64);
                // independent route: plain Gauss-Legendre on the pointwise evaluator
                let rule = gauss_legendre(96).mapped(0.0, 1.7);
                let numeric = rule.integrate(|r| {
                    let x: Vec<f64> = theta.iter().map(|t| r * t).collect();
                    r.powi(d as i32 - 1) * dens.eval(&x)
                });
                assert_relative_eq!(closed, numeric, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn shell_density_vanishes_inside_inner_body() {
        let inner = StarBody::dilate(&StarBody::euclidean_ball(3).unwrap(), 0.9).unwrap();
        let outer = StarBody::euclidean_ball(3).unwrap();
        let g = Density::shell(&inner, &outer, 0.25).unwrap();
        assert_eq!(g.eval(&[0.5, 0.0, 0.0]), 0.0);
        assert_eq!(g.eval(&[0.0, 0.99, 0.0]), 1.0);
        let mid = g.eval(&[0.0, 0.0, 0.9125]);
        assert!(mid > 0.0 && mid < 1.0);
        // exact: ∫_{0.9+0.025}^{1} r^2 dr plus the ramp part, bracketed
        let v = g.radial_integral(&[1.0, 0.0, 0.0], 1.0, 3, 64);
        let full = (1.0 - 0.9f64.powi(3)) / 3.0;
        let core = (1.0 - 0.925f64.powi(3)) / 3.0;
        assert!(v < full && v > core);
    }

    #[test]
    fn shell_radial_integral_matches_brute_force() {
        let inner = StarBody::dilate(&StarBody::lq_ball(4, 4.0).unwrap(), 0.8).unwrap();
        let outer = StarBody::lq_ball(4, 4.0).unwrap();
        let g = Density::shell(&inner, &outer, 0.3).unwrap();
        let theta = crate::numeric::normalized(&[0.3, -0.2, 0.9, 0.1]);
        let rho = outer.radial(&theta).unwrap();
        let panels = 2000;
        let brute: f64 = (0..panels)
            .map(|j| {
                let (a, b) = (rho * j as f64 / panels as f64, rho * (j + 1) as f64 / panels as f64);
                gauss_legendre(12).mapped(a, b).integrate(|r| {
                    let x: Vec<f64> = theta.iter().map(|t| r * t).collect();
                    r.powi(3) * g.eval(&x)
                })
            })
            .sum();
        assert_relative_eq!(g.radial_integral(&theta, rho, 4, 32), brute, max_relative = 1e-6);
    }

    #[test]
    fn convexity_examples() {
        let ball = StarBody::euclidean_ball(5).unwrap();
        let rep = check_convexity(&ball, 10_000, 7);
        assert_eq!(rep.violations, 0);
        let raw = StarBody::from_norm_fn(5, "l_0.8", |x| {
            x.iter().map(|v| v.abs().powf(0.8)).sum::<f64>().powf(1.0 / 0.8)
        })
        .unwrap();
        let rep = check_convexity(&raw, 10_000, 7);
        assert!(rep.violations > 0);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn revolution_profile_check() {
        let good = StarBody::revolution(4, RevolutionProfile { q: 4.0, radial_scale: 1.0, axial_scale: 0.7, kappa: 0.3 }).unwrap();
        assert!(check_revolution_profile(&good, 2000).unwrap().passed());
        let bad = StarBody::from_norm_fn(3, "star", |x| {
            let r = norm2(x);
            // radius 1 + 0.3 cos(4 phi) in the meridian is not convex
            let z = x[2] / r.max(1e-300);
            r / (1.0 + 0.3 * (4.0 * z.clamp(-1.0, 1.0).acos()).cos())
        })
        .unwrap();
        let mut flags_bad = bad.clone();
        flags_bad.flags.revolution_axis = Some(vec![0.0, 0.0, 1.0]);
        assert!(!check_revolution_profile(&flags_bad, 2000).unwrap().passed());
        assert!(check_revolution_profile(&StarBody::cube(3).unwrap(), 100).is_err());
    }

    #[test]
    fn bp_class_membership() {
        assert!(StarBody::euclidean_ball(4).unwrap().is_intersection_body_by_construction());
        assert!(StarBody::cross_polytope(4).unwrap().is_intersection_body_by_construction());
        let t = LinearMap::diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let img = StarBody::linear_image(&StarBody::cross_polytope(4).unwrap(), t).unwrap();
        assert!(img.is_intersection_body_by_construction());
        assert!(!StarBody::cube(4).unwrap().is_intersection_body_by_construction());
        assert!(!StarBody::lq_ball(5, 4.0).unwrap().is_intersection_body_by_construction());
    }
}
