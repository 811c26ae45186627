//! Volumes and (section) measures in polar coordinates:
//! `|K| = (1/n) ∫ ||θ||^{-n}`, `μ(K) = ∫ ∫_0^{ρ(θ)} r^{n-1} f(rθ) dr dθ`, and the
//! same inside a subspace with `r^{n-k-1}`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{Density, Shape, StarBody, DEFAULT_RADIAL_ORDER};
use crate::error::{Error, Result};
use crate::grassmann::Subspace;
use crate::numeric::{gauss_legendre, gauss_sine_power, pairwise_sum, par_indexed_sum, sphere_area};
use crate::rng::{stream_rng, uniform, unit_vector};

/// Largest dimension handled by the product-angle rule; beyond it a seeded
/// symmetric design is used.
pub const MAX_PRODUCT_DIM: usize = 8;

/// Seed of the randomized designs used for `d > MAX_PRODUCT_DIM`.
pub const DESIGN_SEED: u64 = 0x5EED_0F_5EC7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Cubature,
    MonteCarlo,
}

/// A quadrature result with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error; `0` for deterministic cubature.
    pub stderr: f64,
    /// Deterministic error indicator `|Q(L) - Q(ceil(L/2))|`; `0` for Monte Carlo.
    pub abs_err: f64,
    pub backend: Backend,
    pub level: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            abs_err: 0.0,
            backend: Backend::Cubature,
            level: 0,
            n_samples: 0,
            seed: 0,
        }
    }

    /// `3σ + abs_err`, the tolerance used when comparing against other values.
    pub fn tolerance(&self) -> f64 {
        3.0 * self.stderr + self.abs_err
    }
}

#[derive(Debug, Clone)]
enum Layout {
    /// `{±1}` on `S^0`.
    Antipodal,
    /// `count` equally spaced angles on the circle, offset by half a step;
    /// `weight_factor` folds in the sign symmetries of an orthant rule.
    Circle { count: usize, period: f64, weight_factor: f64 },
    /// Hyperspherical angles: `polar[j]` holds `(cos φ, sin φ, w)` for the
    /// polar angle `φ_{j+1}`, `azimuth` the same for the last angle.
    Product {
        polar: Vec<Vec<(f64, f64, f64)>>,
        azimuth: Vec<(f64, f64, f64)>,
    },
    /// Explicit nodes with a common weight.
    Design { points: Arc<Vec<Vec<f64>>>, weight: f64 },
}

/// Node set on `S^{d-1}` with positive weights summing to `|S^{d-1}|`.
/// Product rules are evaluated lazily by index and never stored.
#[derive(Debug, Clone)]
pub struct SphereCubature {
    dim: usize,
    level: usize,
    len: usize,
    layout: Layout,
}

fn half_range_rule(level: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(level).mapped(lo, hi);
    rule.nodes.into_iter().zip(rule.weights).collect()
}

impl SphereCubature {
    /// Full rule on `S^{d-1}`. `d = 1` gives `{±1}`; `d = 2` the trapezoid rule
    /// with `2L` angles; `3 <= d <= 8` a product rule in hyperspherical angles,
    /// split at the coordinate hyperplanes, with Gauss rules for the weights
    /// `sin^k` in the polar angles and Gauss-Legendre in the azimuth; larger `d` a
    /// seeded design closed under cyclic coordinate shifts and antipodes.
    pub fn new(d: usize, level: usize) -> Result<Self> {
        Self::build(d, level, false)
    }

    /// Rule on the closed positive orthant with weights multiplied by `2^d`;
    /// exact replacement of [`SphereCubature::new`] for integrands that are even
    /// in every coordinate.
    pub fn orthant(d: usize, level: usize) -> Result<Self> {
        Self::build(d, level, true)
    }

    fn build(d: usize, level: usize, orthant: bool) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("sphere dimension must be positive".into()));
        }
        if level == 0 {
            return Err(Error::OutOfRange("cubature level must be at least 1".into()));
        }
        let layout = match d {
            1 => Layout::Antipodal,
            2 if orthant => Layout::Circle {
                count: level,
                period: 0.5 * PI,
                weight_factor: 4.0,
            },
            2 => Layout::Circle {
                count: 2 * level,
                period: 2.0 * PI,
                weight_factor: 1.0,
            },
            d if d <= MAX_PRODUCT_DIM => {
                let fold = if orthant { 2.0 } else { 1.0 };
                let polar = (1..=d - 2)
                    .map(|j| {
                        let power = (d - 1 - j) as u32;
                        let rule = gauss_sine_power(level, power);
                        let mut nodes: Vec<(f64, f64, f64)> = rule
                            .nodes
                            .iter()
                            .zip(&rule.weights)
                            .map(|(&phi, &w)| (phi.cos(), phi.sin(), fold * w))
                            .collect();
                        if !orthant {
                            // mirror φ -> π - φ flips the sign of the cosine only
                            let mirrored: Vec<_> = nodes.iter().rev().map(|&(c, s, w)| (-c, s, w)).collect();
                            nodes.extend(mirrored);
                        }
                        nodes
                    })
                    .collect();
                let quarters = if orthant { 1 } else { 4 };
                let azimuth = (0..quarters)
                    .flat_map(|q| half_range_rule(level, 0.5 * PI * q as f64, 0.5 * PI * (q + 1) as f64))
                    .map(|(phi, w)| (phi.cos(), phi.sin(), if orthant { 4.0 * w } else { w }))
                    .collect();
                Layout::Product { polar, azimuth }
            }
            _ => {
                let base = 16 * level;
                let mut rng = stream_rng(DESIGN_SEED, d as u64);
                let mut points = Vec::with_capacity(2 * d * base);
                for _ in 0..base {
                    let mut x = unit_vector(&mut rng, d);
                    if orthant {
                        x.iter_mut().for_each(|v| *v = v.abs());
                    }
                    for _ in 0..d {
                        points.push(x.clone());
                        if !orthant {
                            points.push(x.iter().map(|v| -v).collect());
                        }
                        x.rotate_right(1);
                    }
                }
                let weight = sphere_area(d) / points.len() as f64;
                Layout::Design {
                    points: Arc::new(points),
                    weight,
                }
            }
        };
        let len = match &layout {
            Layout::Antipodal => 2,
            Layout::Circle { count, .. } => *count,
            Layout::Product { polar, azimuth } => polar.iter().map(|p| p.len()).product::<usize>() * azimuth.len(),
            Layout::Design { points, .. } => points.len(),
        };
        Ok(Self {
            dim: d,
            level,
            len,
            layout,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Writes node `i` into `out` and returns its weight.
    pub fn node(&self, i: usize, out: &mut [f64]) -> f64 {
        debug_assert_eq!(out.len(), self.dim);
        match &self.layout {
            Layout::Antipodal => {
                out[0] = if i == 0 { 1.0 } else { -1.0 };
                1.0
            }
            Layout::Circle {
                count,
                period,
                weight_factor,
            } => {
                let step = period / *count as f64;
                let phi = step * (i as f64 + 0.5);
                out[0] = phi.cos();
                out[1] = phi.sin();
                weight_factor * step
            }
            Layout::Product { polar, azimuth } => {
                let mut rem = i;
                let az = &azimuth[rem % azimuth.len()];
                rem /= azimuth.len();
                let mut w = az.2;
                let mut sin_prod = 1.0;
                for (j, rule) in polar.iter().enumerate() {
                    let (c, s, wj) = rule[rem % rule.len()];
                    rem /= rule.len();
                    out[j] = sin_prod * c;
                    sin_prod *= s;
                    w *= wj;
                }
                let d = self.dim;
                out[d - 2] = sin_prod * az.0;
                out[d - 1] = sin_prod * az.1;
                w
            }
            Layout::Design { points, weight } => {
                out.copy_from_slice(&points[i]);
                *weight
            }
        }
    }

    /// `Σ w_i f(θ_i)` with deterministic parallel pairwise summation.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let d = self.dim;
        par_indexed_sum(self.len, |i| {
            let mut x = vec![0.0; d];
            let w = self.node(i, &mut x);
            w * f(&x)
        })
    }

    pub fn weight_sum(&self) -> f64 {
        self.integrate(|_| 1.0)
    }
}

/// A level giving roughly `target` nodes for the full rule on `S^{d-1}`.
pub fn level_for_budget(d: usize, target: usize) -> usize {
    let t = target as f64;
    let l = match d {
        0 | 1 => 1.0,
        2 => t / 2.0,
        d if d <= MAX_PRODUCT_DIM => (t / (2f64.powi(d as i32 - 2) * 4.0)).powf(1.0 / (d as f64 - 1.0)),
        d => t / (32.0 * d as f64),
    };
    (l.floor() as usize).max(1)
}

fn coarse_level(level: usize) -> usize {
    level.div_ceil(2)
}

fn check_density_dim(mu: &Density, body: &StarBody) -> Result<()> {
    if mu.dim() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: mu.dim(),
        });
    }
    Ok(())
}

/// Radius with the degenerate-body checks used by the integrators.
fn radius_checked(body: &StarBody, theta: &[f64]) -> Option<f64> {
    let v = body.norm(theta);
    if v.is_nan() || v < 1e-12 {
        None
    } else {
        Some(1.0 / v)
    }
}

fn degenerate_error(body: &StarBody, rule: &SphereCubature, map: impl Fn(&[f64]) -> Vec<f64>) -> Error {
    let mut x = vec![0.0; rule.dim()];
    for i in 0..rule.len() {
        rule.node(i, &mut x);
        let theta = map(&x);
        if radius_checked(body, &theta).is_none() {
            return Error::DegenerateBody {
                norm: body.norm(&theta),
                direction: theta,
            };
        }
    }
    Error::Quadrature("non-finite quadrature sum".into())
}

fn is_unconditional_pair(body: &StarBody, mu: Option<&Density>) -> bool {
    body.flags().unconditional
        && mu.is_none_or(|m| {
            use crate::bodies::DensityKind;
            match m.kind() {
                DensityKind::Uniform | DensityKind::Gaussian { .. } | DensityKind::EvenPolynomial { .. } => true,
                DensityKind::RadialPower { .. } => true,
                DensityKind::Product(parts) => parts.iter().all(|p| is_unconditional_pair(body, Some(p))),
                _ => false,
            }
        })
}

fn sphere_rule(d: usize, level: usize, orthant: bool) -> Result<SphereCubature> {
    if orthant {
        SphereCubature::orthant(d, level)
    } else {
        SphereCubature::new(d, level)
    }
}

fn volume_at(body: &StarBody, level: usize, orthant: bool) -> Result<f64> {
    let n = body.dim();
    let rule = sphere_rule(n, level, orthant)?;
    let s = rule.integrate(|theta| match radius_checked(body, theta) {
        Some(r) => r.powi(n as i32),
        None => f64::NAN,
    });
    if !s.is_finite() {
        return Err(degenerate_error(body, &rule, |x| x.to_vec()));
    }
    Ok(s / n as f64)
}

fn cubature_estimate(level: usize, nodes: usize, fine: f64, coarse: f64) -> Estimate {
    Estimate {
        value: fine,
        stderr: 0.0,
        abs_err: (fine - coarse).abs(),
        backend: Backend::Cubature,
        level,
        n_samples: nodes,
        seed: DESIGN_SEED,
    }
}

/// `|K| = (1/n) ∫_{S^{n-1}} ||θ||_K^{-n} dθ`.
pub fn volume(body: &StarBody, level: usize) -> Result<Estimate> {
    let orthant = is_unconditional_pair(body, None);
    let fine = volume_at(body, level, orthant)?;
    let coarse = volume_at(body, coarse_level(level), orthant)?;
    let nodes = sphere_rule(body.dim(), level, orthant)?.len();
    Ok(cubature_estimate(level, nodes, fine, coarse))
}

/// Cubature value only (no error indicator); the inner loop of searches.
pub fn volume_value(body: &StarBody, level: usize) -> Result<f64> {
    volume_at(body, level, is_unconditional_pair(body, None))
}

fn measure_at(mu: &Density, body: &StarBody, level: usize, order: usize, orthant: bool) -> Result<f64> {
    let n = body.dim();
    let rule = sphere_rule(n, level, orthant)?;
    let s = rule.integrate(|theta| match radius_checked(body, theta) {
        Some(r) => mu.radial_integral(theta, r, n, order),
        None => f64::NAN,
    });
    if !s.is_finite() {
        return Err(degenerate_error(body, &rule, |x| x.to_vec()));
    }
    Ok(s)
}

/// Boxes are measured in Cartesian coordinates up to this dimension.
pub const MAX_CARTESIAN_DIM: usize = 6;

const CARTESIAN_NODES: f64 = 4_194_304.0;

fn box_half_widths(body: &StarBody) -> Option<Vec<f64>> {
    match body.shape() {
        Shape::LqBall { q } if q.is_infinite() => Some(vec![1.0; body.dim()]),
        Shape::WeightedBox { half_widths } => Some(half_widths.clone()),
        Shape::Dilate { base, factor } => box_half_widths(base).map(|h| h.iter().map(|v| v * factor).collect()),
        _ => None,
    }
}

/// Points per axis: the level, at least 16, capped near 4M nodes when that allows more than 16.
fn cartesian_points(n: usize, level: usize) -> usize {
    let cap = CARTESIAN_NODES.powf(1.0 / n as f64).floor() as usize;
    level.clamp(16, cap.max(16))
}

/// Tensor Gauss-Legendre rule with `m` points per axis over `∏ [-h_i, h_i]`.
fn box_measure_at(mu: &Density, half_widths: &[f64], m: usize) -> f64 {
    let n = half_widths.len();
    let rules: Vec<_> = half_widths.iter().map(|&h| gauss_legendre(m).mapped(-h, h)).collect();
    par_indexed_sum(m.pow(n as u32), |mut i| {
        let mut x = vec![0.0; n];
        let mut w = 1.0;
        for (xj, rule) in x.iter_mut().zip(&rules) {
            *xj = rule.nodes[i % m];
            w *= rule.weights[i % m];
            i /= m;
        }
        w * mu.eval(&x)
    })
}

/// `μ(K) = ∫_{S^{n-1}} ∫_0^{ρ_K(θ)} r^{n-1} f(rθ) dr dθ`.
pub fn measure_body(mu: &Density, body: &StarBody, level: usize) -> Result<Estimate> {
    measure_body_with_order(mu, body, level, DEFAULT_RADIAL_ORDER)
}

pub fn measure_body_with_order(mu: &Density, body: &StarBody, level: usize, order: usize) -> Result<Estimate> {
    check_density_dim(mu, body)?;
    if let Some(half_widths) = box_half_widths(body).filter(|h| h.len() <= MAX_CARTESIAN_DIM) {
        let per_axis = cartesian_points(half_widths.len(), level);
        let fine = box_measure_at(mu, &half_widths, per_axis);
        let coarse = box_measure_at(mu, &half_widths, per_axis.div_ceil(2));
        return Ok(cubature_estimate(level, per_axis.pow(half_widths.len() as u32), fine, coarse));
    }
    let orthant = is_unconditional_pair(body, Some(mu));
    let fine = measure_at(mu, body, level, order, orthant)?;
    let coarse = measure_at(mu, body, coarse_level(level), order, orthant)?;
    let nodes = sphere_rule(body.dim(), level, orthant)?.len();
    Ok(cubature_estimate(level, nodes, fine, coarse))
}

fn section_at(mu: &Density, body: &StarBody, h: &Subspace, level: usize, order: usize) -> Result<f64> {
    let m = h.dim();
    let rule = SphereCubature::new(m, level)?;
    let s = rule.integrate(|u| {
        let theta = h.embed(u);
        match radius_checked(body, &theta) {
            Some(r) => mu.radial_integral(&theta, r, m, order),
            None => f64::NAN,
        }
    });
    if !s.is_finite() {
        return Err(degenerate_error(body, &rule, |u| h.embed(u)));
    }
    Ok(s)
}

fn check_section_inputs(mu: &Density, body: &StarBody, h: &Subspace) -> Result<()> {
    check_density_dim(mu, body)?;
    if h.n() != body.dim() {
        return Err(Error::DimensionMismatch {
            expected: body.dim(),
            got: h.n(),
        });
    }
    h.check_orthonormal(1e-8)
}

/// `μ(K ∩ H) = ∫_{S^{n-1} ∩ H} ∫_0^{ρ_K(θ)} r^{n-k-1} f(rθ) dr dθ`.
pub fn section_measure(mu: &Density, body: &StarBody, h: &Subspace, level: usize) -> Result<Estimate> {
    section_measure_with_order(mu, body, h, level, DEFAULT_RADIAL_ORDER)
}

pub fn section_measure_with_order(
    mu: &Density,
    body: &StarBody,
    h: &Subspace,
    level: usize,
    order: usize,
) -> Result<Estimate> {
    check_section_inputs(mu, body, h)?;
    let fine = section_at(mu, body, h, level, order)?;
    let coarse = section_at(mu, body, h, coarse_level(level), order)?;
    let nodes = SphereCubature::new(h.dim(), level)?.len();
    Ok(cubature_estimate(level, nodes, fine, coarse))
}

/// Cubature value only, for search inner loops.
pub fn section_value(mu: &Density, body: &StarBody, h: &Subspace, level: usize) -> Result<f64> {
    check_section_inputs(mu, body, h)?;
    section_at(mu, body, h, level, DEFAULT_RADIAL_ORDER)
}

/// Half-widths of a box containing the body: 1.1 times the largest coordinate
/// extent over a coarse direction grid.
pub fn bounding_half_widths(body: &StarBody) -> Result<Vec<f64>> {
    let n = body.dim();
    let level = level_for_budget(n, 20_000).max(2);
    let rule = SphereCubature::new(n, level)?;
    let chunks: Vec<Vec<f64>> = (0..rule.len())
        .into_par_iter()
        .fold(
            || vec![0.0f64; n],
            |mut acc, i| {
                let mut x = vec![0.0; n];
                rule.node(i, &mut x);
                let r = 1.0 / body.norm(&x);
                if r.is_finite() {
                    for (a, v) in acc.iter_mut().zip(&x) {
                        *a = (*a).max((r * v).abs());
                    }
                }
                acc
            },
        )
        .collect();
    let mut widths = vec![0.0f64; n];
    for c in chunks {
        for (w, v) in widths.iter_mut().zip(c) {
            *w = (*w).max(v);
        }
    }
    // coordinate axes are extreme points for many bodies; include them
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let r = 1.0 / body.norm(&e);
        if r.is_finite() {
            widths[i] = widths[i].max(r);
        }
    }
    Ok(widths.into_iter().map(|w| 1.1 * w).collect())
}

/// Rejection sampling in a bounding box.
pub fn mc_measure(mu: &Density, body: &StarBody, n_samples: usize, seed: u64) -> Result<Estimate> {
    check_density_dim(mu, body)?;
    const CHUNK: usize = 1 << 15;
    let n = body.dim();
    let widths = bounding_half_widths(body)?;
    let box_volume: f64 = widths.iter().map(|w| 2.0 * w).product();
    let mc = |value, stderr| Estimate {
        value,
        stderr,
        abs_err: 0.0,
        backend: Backend::MonteCarlo,
        level: 0,
        n_samples,
        seed,
    };
    if box_volume == 0.0 || n_samples == 0 {
        return Ok(mc(0.0, 0.0));
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut x = vec![0.0; n];
            let mut vals = Vec::with_capacity(count);
            let mut accepted = 0usize;
            for _ in 0..count {
                for (xi, w) in x.iter_mut().zip(&widths) {
                    *xi = uniform(&mut rng, -w, *w);
                }
                if body.norm(&x) <= 1.0 {
                    accepted += 1;
                    vals.push(mu.eval(&x));
                }
            }
            let s = pairwise_sum(&vals);
            let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
            (s, pairwise_sum(&sq), accepted)
        })
        .collect();
    let sum = pairwise_sum(&partial.iter().map(|p| p.0).collect::<Vec<_>>());
    let sum_sq = pairwise_sum(&partial.iter().map(|p| p.1).collect::<Vec<_>>());
    let accepted: usize = partial.iter().map(|p| p.2).sum();
    let rate = accepted as f64 / n_samples as f64;
    if rate < 1e-6 {
        return Err(Error::InfeasibleSampling { rate });
    }
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0);
    Ok(mc(box_volume * mean, box_volume * (var / nf).sqrt()))
}
