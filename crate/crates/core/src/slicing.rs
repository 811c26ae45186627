//! Slicing constants, positions and end-to-end verification of slicing inequalities.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{Density, LinearMap, Monomial, StarBody};
use crate::error::{Error, Result};
use crate::grassmann::{haar_rotation, max_section, SearchBudget, SearchTrace};
use crate::numeric::ln_ball_volume;
use crate::quadrature::{level_for_budget, measure_body, volume, Estimate, SphereCubature};
use crate::rng::{stream_rng, uniform, unit_vector};

/// `c_{n,k} = |B_2^n|^{(n-k)/n} / |B_2^{n-k}|`, in log-Gamma arithmetic.
pub fn c_nk(n: usize, k: usize) -> Result<f64> {
    if n < 2 || k == 0 || k >= n {
        return Err(Error::InvalidCodimension {
            k,
            max: n.saturating_sub(1),
        });
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(((nf - kf) / nf * ln_ball_volume(nf) - ln_ball_volume(nf - kf)).exp())
}

/// `(n/(n-k)) c_{n,k}`, the constant of the slicing inequality for generalized
/// k-intersection bodies.
pub fn stability_constant(n: usize, k: usize) -> Result<f64> {
    Ok(n as f64 / (n - k) as f64 * c_nk(n, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaTag {
    Stability,
    Unconditional,
    Ellipsoid,
    General,
}

/// Search budget and cubature sizes; the sizes are node counts, converted to
/// levels per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicingConfig {
    pub budget: SearchBudget,
    /// Nodes per section evaluation inside the search.
    pub search_nodes: usize,
    /// Nodes for re-evaluating the best section.
    pub report_nodes: usize,
    /// Nodes for `μ(L)` and `|L|`.
    pub volume_nodes: usize,
    pub seed: u64,
}

impl Default for SlicingConfig {
    fn default() -> Self {
        Self {
            budget: SearchBudget::new(6, 50),
            search_nodes: 5_000,
            report_nodes: 500_000,
            volume_nodes: 4_000_000,
            seed: 7,
        }
    }
}

impl SlicingConfig {
    pub fn search_level(&self, n: usize, k: usize) -> usize {
        level_for_budget(n - k, self.search_nodes).max(2)
    }

    pub fn report_level(&self, n: usize, k: usize) -> usize {
        level_for_budget(n - k, self.report_nodes).max(4)
    }

    pub fn volume_level(&self, n: usize) -> usize {
        level_for_budget(n, self.volume_nodes).max(4)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlicingReport {
    pub n: usize,
    pub k: usize,
    pub body: String,
    pub measure: String,
    pub mu_l: Estimate,
    pub max_section: SearchTrace,
    pub vol_l: Estimate,
    pub formula: FormulaTag,
    /// Full constant in front of `max_section · |L|^{k/n}`.
    pub bound_constant: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `3σ + abs_err` of both sides plus `1e-6` relative.
    pub tolerance: f64,
    pub passed: bool,
    /// `rhs` with `e^k` replaced by `ovr_upper^k` of a position certificate.
    pub certificate_rhs: Option<f64>,
    pub search_level: usize,
    pub report_level: usize,
    pub volume_level: usize,
    pub config: SlicingConfig,
}

impl SlicingReport {
    /// `lhs / rhs`.
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs
    }
}

/// Measures `μ(L)`, `|L|` and the heuristic maximal section, then compares
/// `μ(L)` with `constant · max_H μ(L ∩ H) · |L|^{k/n}`.
pub fn slicing_report(
    mu: &Density,
    l: &StarBody,
    k: usize,
    formula: FormulaTag,
    bound_constant: f64,
    config: &SlicingConfig,
) -> Result<SlicingReport> {
    let n = l.dim();
    c_nk(n, k)?;
    let (search_level, report_level, volume_level) =
        (config.search_level(n, k), config.report_level(n, k), config.volume_level(n));
    let vol_l = body_volume(l, volume_level)?;
    let mu_l = if mu.is_uniform() {
        vol_l.clone()
    } else {
        measure_body(mu, l, volume_level)?
    };
    let max_section = max_section(mu, l, k, &config.budget, search_level, report_level, config.seed)?;
    let power = k as f64 / n as f64;
    let section = max_section.estimate.value.max(max_section.best_value);
    let lhs = mu_l.value;
    let rhs = bound_constant * section * vol_l.value.powf(power);
    let rhs_err = bound_constant
        * (vol_l.value.powf(power) * max_section.estimate.tolerance()
            + section * power * vol_l.value.powf(power - 1.0) * vol_l.tolerance());
    let tolerance = mu_l.tolerance() + rhs_err + 1e-6 * lhs.abs().max(rhs.abs());
    let slack = rhs - lhs;
    Ok(SlicingReport {
        n,
        k,
        body: l.label().to_string(),
        measure: mu.label().to_string(),
        mu_l,
        max_section,
        vol_l,
        formula,
        bound_constant,
        lhs,
        rhs,
        slack,
        tolerance,
        passed: slack >= -tolerance,
        certificate_rhs: None,
        search_level,
        report_level,
        volume_level,
        config: config.clone(),
    })
}

/// `∫_K f ≤ (n/(n-k)) c_{n,k} |K|^{k/n} max_H ∫_{K∩H} f` for bodies known to be
/// intersection bodies.
pub fn stability_check(mu: &Density, k_body: &StarBody, k: usize, config: &SlicingConfig) -> Result<SlicingReport> {
    if !k_body.is_intersection_body_by_construction() {
        return Err(Error::HypothesisNotMet(format!(
            "{} is not known to be an intersection body",
            k_body.label()
        )));
    }
    if !mu.is_even() {
        return Err(Error::HypothesisNotMet(format!("density {} is not even", mu.label())));
    }
    let constant = stability_constant(k_body.dim(), k)?;
    slicing_report(mu, k_body, k, FormulaTag::Stability, constant, config)
}

// ---------------------------------------------------------------------------
// Position certificates
// ---------------------------------------------------------------------------

/// Sampled containment `inner ⊂ outer`: `ρ_inner ≤ (1 + 1e-9) ρ_outer` on every
/// tested direction. Passing means "not falsified".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub directions: usize,
    pub failures: usize,
    /// `max ρ_inner / ρ_outer`.
    pub worst_ratio: f64,
    pub witness: Option<Vec<f64>>,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Cubature nodes (about 20000), `10^4` Haar directions, the normalized sign
/// vectors and the coordinate axes.
pub fn containment_directions(n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let rule = SphereCubature::new(n, level_for_budget(n, 20_000))?;
    let mut out = Vec::with_capacity(rule.len() + 10_000 + (1 << n.min(12)) + n);
    for i in 0..rule.len() {
        let mut x = vec![0.0; n];
        rule.node(i, &mut x);
        out.push(x);
    }
    let mut rng = stream_rng(seed, 0);
    for _ in 0..10_000 {
        out.push(unit_vector(&mut rng, n));
    }
    if n <= 12 {
        let scale = 1.0 / (n as f64).sqrt();
        for mask in 0..(1usize << n) {
            out.push((0..n).map(|i| if mask >> i & 1 == 1 { -scale } else { scale }).collect());
        }
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
    }
    Ok(out)
}

pub fn check_containment(inner: &StarBody, outer: &StarBody, directions: &[Vec<f64>]) -> ContainmentReport {
    let ratios: Vec<f64> = directions
        .par_iter()
        .map(|theta| outer.norm(theta) / inner.norm(theta))
        .collect();
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for (theta, &r) in directions.iter().zip(&ratios) {
        if !(r <= 1.0 + CONTAINMENT_TOL) {
            failures += 1;
        }
        if r > worst || r.is_nan() {
            worst = r;
            witness = Some(theta.clone());
        }
    }
    ContainmentReport {
        directions: directions.len(),
        failures,
        worst_ratio: worst,
        witness: if failures > 0 { witness } else { None },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionKind {
    Lozanovskii,
    Mvee,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositionCertificate {
    pub kind: PositionKind,
    /// Row-major `n × n` matrix: `T` for the Lozanovskii position, the map
    /// `B_2^n → E` for an enclosing ellipsoid `E`.
    pub matrix: Vec<f64>,
    /// The certified superset of `L` (`n T(B_1^n)` or `E`).
    #[serde(skip)]
    pub superset: StarBody,
    /// `T(B_∞^n) ⊂ L`; absent for ellipsoids.
    pub inner: Option<ContainmentReport>,
    /// `L ⊂ superset`.
    pub outer: ContainmentReport,
    pub superset_volume: f64,
    pub body_volume: Estimate,
    /// `(|superset| / |L|)^{1/n}`.
    pub ovr_upper: f64,
    pub iterations: usize,
    /// Objective after each sweep (Lozanovskii) or final duality gap (ellipsoid).
    pub history: Vec<f64>,
    pub converged: bool,
}

impl PositionCertificate {
    pub fn passed(&self) -> bool {
        self.outer.passed() && self.inner.as_ref().is_none_or(|r| r.passed())
    }
}

/// Closed-form volume when known, cubature otherwise.
fn body_volume(l: &StarBody, level: usize) -> Result<Estimate> {
    match l.closed_form_volume() {
        Some(v) => Ok(Estimate::exact(v)),
        None => volume(l, level),
    }
}

const LOZANOVSKII_SWEEPS: usize = 200;

/// `Σ log t_i - n log ||t||_L`, invariant under scaling of `t`.
fn lozanovskii_objective(l: &StarBody, u: &[f64]) -> f64 {
    let t: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    u.iter().sum::<f64>() - l.dim() as f64 * l.norm(&t).ln()
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Diagonal `T = diag(t)` maximizing `Π t_i` subject to `||t||_L ≤ 1`, found by
/// coordinate ascent in `log t`; `K = n T(B_1^n)` is then certified to contain `L`
/// on sampled directions.
pub fn lozanovskii_diagonal(l: &StarBody, volume_level: usize, seed: u64) -> Result<PositionCertificate> {
    if !l.flags().unconditional {
        return Err(Error::HypothesisNotMet(format!("{} is not unconditional", l.label())));
    }
    let n = l.dim();
    let mut u = vec![0.0; n];
    let mut value = lozanovskii_objective(l, &u);
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..LOZANOVSKII_SWEEPS {
        iterations += 1;
        let before = value;
        for i in 0..n {
            let objective = |x: f64| {
                let mut v = u.clone();
                v[i] = x;
                lozanovskii_objective(l, &v)
            };
            let best = golden_max(&objective, u[i] - 4.0, u[i] + 4.0, 1e-10);
            let candidate = objective(best);
            if candidate > value {
                u[i] = best;
                value = candidate;
            }
        }
        history.push(value);
        if value - before <= 1e-13 * value.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let raw: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let scale = l.norm(&raw);
    let t: Vec<f64> = raw.iter().map(|v| v / scale).collect();
    let nf = n as f64;
    let outer_map = LinearMap::diagonal(&t.iter().map(|v| nf * v).collect::<Vec<_>>())?;
    let superset = StarBody::linear_image(&StarBody::cross_polytope(n)?, outer_map)?.with_label("n*T(B_1)");
    let inner_body = StarBody::weighted_box(&t)?;
    let directions = containment_directions(n, seed)?;
    let inner = check_containment(&inner_body, l, &directions);
    let outer = check_containment(l, &superset, &directions);
    // |n T(B_1^n)| = n^n Π t_i 2^n / n!
    let ln_superset = nf * nf.ln() + t.iter().map(|v| v.ln()).sum::<f64>() + nf * 2f64.ln() - statrs::function::gamma::ln_gamma(nf + 1.0);
    let superset_volume = ln_superset.exp();
    let body_volume = body_volume(l, volume_level)?;
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        matrix[i * n + i] = t[i];
    }
    Ok(PositionCertificate {
        kind: PositionKind::Lozanovskii,
        matrix,
        superset,
        inner: Some(inner),
        outer,
        ovr_upper: (superset_volume / body_volume.value).powf(1.0 / nf),
        superset_volume,
        body_volume,
        iterations,
        history,
        converged,
    })
}

pub const MVEE_TOL: f64 = 1e-9;
pub const MVEE_MAX_ITERATIONS: usize = 200_000;

fn weighted_inverse(points: &[DVector<f64>], w: &[f64]) -> Result<DMatrix<f64>> {
    let n = points[0].len();
    let mut x = DMatrix::<f64>::zeros(n, n);
    for (wi, pi) in w.iter().zip(points) {
        if *wi > 0.0 {
            x.ger(*wi, pi, pi, 1.0);
        }
    }
    x.try_inverse()
        .ok_or_else(|| Error::Quadrature("point cloud spans a proper subspace".into()))
}

/// Khachiyan's multiplicative updates with away steps on a small point set.
fn khachiyan(points: &[DVector<f64>], tol: f64, max_iterations: usize) -> Result<(DMatrix<f64>, usize)> {
    let n = points[0].len() as f64;
    let m = points.len();
    let mut w = vec![1.0 / m as f64; m];
    let mut iterations = 0;
    loop {
        let x_inv = weighted_inverse(points, &w)?;
        let mvals: Vec<f64> = points.iter().map(|p| (p.transpose() * &x_inv * p)[(0, 0)]).collect();
        let (j_max, m_max) = mvals
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let (j_min, m_min) = mvals
            .iter()
            .cloned()
            .enumerate()
            .filter(|(i, _)| w[*i] > 0.0)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("positive weight");
        let gap = m_max / n - 1.0;
        let away = 1.0 - m_min / n;
        if (gap <= tol && away <= tol) || iterations >= max_iterations {
            return Ok((x_inv, iterations));
        }
        iterations += 1;
        if gap >= away {
            let step = (m_max - n) / (n * (m_max - 1.0));
            for wi in w.iter_mut() {
                *wi *= 1.0 - step;
            }
            w[j_max] += step;
        } else {
            let wj = w[j_min];
            let step = ((n - m_min) / (n * (m_min - 1.0))).min(wj / (1.0 - wj));
            for wi in w.iter_mut() {
                *wi *= 1.0 + step;
            }
            w[j_min] -= step;
            if w[j_min] < 1e-300 {
                w[j_min] = 0.0;
            }
        }
    }
}

/// Origin-centred minimum-volume enclosing ellipsoid `{x : x^T A x ≤ 1}` of a
/// symmetric point cloud. Khachiyan's updates run on an active set that starts
/// from `n` spread-out extreme points and grows by the worst violators.
/// Returns `A`, the total iteration count and the duality gap `max_i M_i / n - 1`
/// over the full cloud.
pub fn mvee_points(points: &[Vec<f64>], tol: f64, max_iterations: usize) -> Result<(DMatrix<f64>, usize, f64)> {
    let n = points.first().map(|p| p.len()).ok_or_else(|| Error::OutOfRange("no points".into()))?;
    let nf = n as f64;
    let all: Vec<DVector<f64>> = points.iter().map(|x| DVector::from_column_slice(x)).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in 0..n {
        let mut d = DVector::from_fn(n, |i, _| if i == r { 1.0 } else { 0.5 / (1.0 + i as f64) });
        for b in &basis {
            let c = d.dot(b);
            d -= b * c;
        }
        let d = d.normalize();
        let best = (0..all.len())
            .max_by(|&a, &b| all[a].dot(&d).abs().total_cmp(&all[b].dot(&d).abs()))
            .expect("non-empty");
        if !active.contains(&best) {
            active.push(best);
        }
        let mut e = all[best].clone();
        for b in &basis {
            let c = e.dot(b);
            e -= b * c;
        }
        if e.norm() > 1e-12 {
            basis.push(e.normalize());
        }
    }
    let mut iterations = 0;
    loop {
        let subset: Vec<DVector<f64>> = active.iter().map(|&i| all[i].clone()).collect();
        let (x_inv, it) = khachiyan(&subset, tol, max_iterations.saturating_sub(iterations))?;
        iterations += it;
        let mvals: Vec<f64> = all.par_iter().map(|p| (p.transpose() * &x_inv * p)[(0, 0)]).collect();
        let gap = mvals.iter().cloned().fold(0.0f64, f64::max) / nf - 1.0;
        let mut violators: Vec<usize> = (0..all.len())
            .filter(|&i| mvals[i] > nf * (1.0 + tol) && !active.contains(&i))
            .collect();
        if violators.is_empty() || iterations >= max_iterations {
            return Ok((x_inv / nf, iterations, gap));
        }
        violators.sort_by(|&a, &b| mvals[b].total_cmp(&mvals[a]));
        active.extend(violators.into_iter().take(4 * n));
    }
}

/// Minimum-volume enclosing ellipsoid of the boundary points `ρ_L(θ) θ` over the
/// containment directions, dilated until it contains every sampled boundary point.
pub fn mvee(l: &StarBody, volume_level: usize, seed: u64) -> Result<PositionCertificate> {
    if !l.flags().origin_symmetric {
        return Err(Error::HypothesisNotMet(format!("{} is not origin-symmetric", l.label())));
    }
    let n = l.dim();
    let nf = n as f64;
    let directions = containment_directions(n, seed)?;
    let points: Vec<Vec<f64>> = directions
        .par_iter()
        .map(|theta| l.radial(theta).map(|r| theta.iter().map(|v| r * v).collect()))
        .collect::<Result<_>>()?;
    let (a, iterations, gap) = mvee_points(&points, MVEE_TOL, MVEE_MAX_ITERATIONS)?;
    let dilation = points
        .iter()
        .map(|x| {
            let v = DVector::from_column_slice(x);
            (v.transpose() * &a * &v)[(0, 0)].sqrt()
        })
        .fold(1.0f64, f64::max);
    let a = a / (dilation * dilation);
    // E = {x : x^T A x ≤ 1} = A^{-1/2} B_2^n
    let eig = a.clone().symmetric_eigen();
    let root_inv = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let shape = &root_inv * &root_inv;
    let superset = StarBody::ellipsoid(0.5 * (&shape + shape.transpose()))?.with_label("mvee");
    let ln_det: f64 = eig.eigenvalues.iter().map(|v| v.ln()).sum();
    let superset_volume = (ln_ball_volume(nf) - 0.5 * ln_det).exp();
    let outer = check_containment(l, &superset, &directions);
    let body_volume = body_volume(l, volume_level)?;
    Ok(PositionCertificate {
        kind: PositionKind::Mvee,
        matrix: (0..n * n).map(|i| root_inv[(i / n, i % n)]).collect(),
        superset,
        inner: None,
        outer,
        ovr_upper: (superset_volume / body_volume.value).powf(1.0 / nf),
        superset_volume,
        body_volume,
        iterations,
        history: vec![gap],
        converged: gap <= MVEE_TOL,
    })
}

/// `μ(L) ≤ e^k (n/(n-k)) c_{n,k} max_H μ(L ∩ H) |L|^{k/n}` for unconditional `L`,
/// with the Lozanovskii certificate giving the sharper `ovr_upper^k` variant.
pub fn verify_unconditional_bound(
    mu: &Density,
    l: &StarBody,
    k: usize,
    config: &SlicingConfig,
) -> Result<(SlicingReport, PositionCertificate)> {
    let certificate = lozanovskii_diagonal(l, config.volume_level(l.dim()), config.seed)?;
    let base = stability_constant(l.dim(), k)?;
    let mut report = slicing_report(mu, l, k, FormulaTag::Unconditional, E.powi(k as i32) * base, config)?;
    report.certificate_rhs = Some(report.rhs * (certificate.ovr_upper / E).powi(k as i32));
    Ok((report, certificate))
}

/// `μ(L) ≤ ovr^k (n/(n-k)) c_{n,k} max_H μ(L ∩ H) |L|^{k/n}` with `ovr` from the
/// enclosing ellipsoid.
pub fn verify_ellipsoid_bound(
    mu: &Density,
    l: &StarBody,
    k: usize,
    config: &SlicingConfig,
) -> Result<(SlicingReport, PositionCertificate)> {
    let certificate = mvee(l, config.volume_level(l.dim()), config.seed)?;
    if !certificate.outer.passed() {
        return Err(Error::ConstructionFailed(format!(
            "enclosing ellipsoid misses {} on {} directions",
            l.label(),
            certificate.outer.failures
        )));
    }
    let constant = certificate.ovr_upper.powi(k as i32) * stability_constant(l.dim(), k)?;
    let mut report = slicing_report(mu, l, k, FormulaTag::Ellipsoid, constant, config)?;
    report.certificate_rhs = Some(report.rhs);
    Ok((report, certificate))
}

// ---------------------------------------------------------------------------
// General bound
// ---------------------------------------------------------------------------

/// `(sqrt(n/k) log^{3/2}(e n/k))`, the per-codimension growth factor of the
/// general bound.
pub fn general_growth(n: usize, k: usize) -> f64 {
    let ratio = n as f64 / k as f64;
    ratio.sqrt() * (E * ratio).ln().powf(1.5)
}

/// `C0^k (sqrt(n/k) log^{3/2}(en/k))^k (n/(n-k)) c_{n,k}`.
pub fn general_constant(n: usize, k: usize, c0: f64) -> Result<f64> {
    Ok((c0 * general_growth(n, k)).powi(k as i32) * stability_constant(n, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CodimRule {
    Fixed(usize),
    /// `k = ceil(λ n)`, clamped to `1..n-1`.
    Proportional(f64),
}

impl CodimRule {
    pub fn codim(&self, n: usize) -> usize {
        let k = match *self {
            CodimRule::Fixed(k) => k,
            CodimRule::Proportional(lambda) => (lambda * n as f64 - 1e-9).ceil() as usize,
        };
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralBoundRow {
    pub n: usize,
    pub k: usize,
    pub c0: f64,
    pub c_nk: f64,
    pub growth: f64,
    pub constant: f64,
}

pub fn general_bound_table(ns: impl IntoIterator<Item = usize>, rule: CodimRule, c0: f64) -> Result<Vec<GeneralBoundRow>> {
    ns.into_iter()
        .filter(|&n| n >= 2)
        .map(|n| {
            let k = rule.codim(n);
            Ok(GeneralBoundRow {
                n,
                k,
                c0,
                c_nk: c_nk(n, k)?,
                growth: general_growth(n, k),
                constant: general_constant(n, k, c0)?,
            })
        })
        .collect()
}

/// Smallest `C0` for which the general bound covers a measured report.
pub fn empirical_c0(report: &SlicingReport) -> Result<f64> {
    let base = stability_constant(report.n, report.k)?;
    let ratio = report.lhs / (report.rhs / report.bound_constant * base);
    Ok(ratio.max(0.0).powf(1.0 / report.k as f64) / general_growth(report.n, report.k))
}

// ---------------------------------------------------------------------------
// Seeded corpus
// ---------------------------------------------------------------------------

/// `1 + Σ a_i x_i^2 + Σ b_i x_i^4 + Σ_{i<j} c_ij x_i^2 x_j^2` with coefficients
/// uniform in `[0, 1]`.
pub fn random_even_polynomial(n: usize, seed: u64) -> Result<Density> {
    let mut rng = stream_rng(seed, 11);
    let mut terms = vec![Monomial {
        coef: 1.0,
        exponents: vec![0; n],
    }];
    for i in 0..n {
        for power in [2u32, 4] {
            let mut e = vec![0; n];
            e[i] = power;
            terms.push(Monomial {
                coef: uniform(&mut rng, 0.0, 1.0),
                exponents: e,
            });
        }
        for j in i + 1..n {
            let mut e = vec![0; n];
            e[i] = 2;
            e[j] = 2;
            terms.push(Monomial {
                coef: uniform(&mut rng, 0.0, 1.0),
                exponents: e,
            });
        }
    }
    Ok(Density::even_polynomial(n, terms)?.with_label(format!("even_poly[{seed}]")))
}

/// Isotropic Gaussian with `σ` uniform in `[0.3, 2]`.
pub fn random_gaussian(n: usize, seed: u64) -> Result<Density> {
    let mut rng = stream_rng(seed, 12);
    let sigma = uniform(&mut rng, 0.3, 2.0);
    Ok(Density::gaussian(n, sigma)?.with_label(format!("gaussian[{seed}]")))
}

fn random_map(n: usize, seed: u64, stream: u64) -> Result<LinearMap> {
    let mut rng = stream_rng(seed, stream);
    let rotation = haar_rotation(&mut rng, n);
    let axes: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
    LinearMap::new(rotation * DMatrix::from_diagonal(&DVector::from_vec(axes)))
}

/// Rotated ellipsoid with semi-axes uniform in `[0.5, 2]`.
pub fn random_ellipsoid(n: usize, seed: u64) -> Result<StarBody> {
    let map = random_map(n, seed, 13)?;
    let m = map.matrix();
    let gram = m * m.transpose();
    Ok(StarBody::ellipsoid(0.5 * (&gram + gram.transpose()))?.with_label(format!("ellipsoid[{seed}]")))
}

/// Random linear image of `B_1^n`.
pub fn random_cross_polytope_image(n: usize, seed: u64) -> Result<StarBody> {
    let map = random_map(n, seed, 14)?;
    Ok(StarBody::linear_image(&StarBody::cross_polytope(n)?, map)?.with_label(format!("T(B_1)[{seed}]")))
}

/// Box with half-widths uniform in `[0.5, 2]`.
pub fn random_box(n: usize, seed: u64) -> Result<StarBody> {
    let mut rng = stream_rng(seed, 15);
    let widths: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
    Ok(StarBody::weighted_box(&widths)?.with_label(format!("box[{seed}]")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ball_volume;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn quick() -> SlicingConfig {
        SlicingConfig {
            budget: SearchBudget::new(3, 20),
            search_nodes: 500,
            report_nodes: 20_000,
            volume_nodes: 50_000,
            seed: 3,
        }
    }

    #[test]
    fn c_nk_closed_form_and_range() {
        assert_relative_eq!(c_nk(2, 1).unwrap(), PI.sqrt() / 2.0, max_relative = 1e-14);
        for n in 2..=100 {
            for k in 1..n {
                let c = c_nk(n, k).unwrap();
                assert!(c > (-(k as f64) / 2.0).exp() && c < 1.0, "n={n} k={k} c={c}");
            }
        }
        assert!(c_nk(5, 0).is_err());
        assert!(c_nk(5, 5).is_err());
        assert!(c_nk(1_000_000, 3).unwrap().is_finite());
    }

    #[test]
    fn ball_with_uniform_density_has_exact_slack() {
        let ball = StarBody::euclidean_ball(4).unwrap();
        let r = stability_check(&Density::uniform(4), &ball, 1, &quick()).unwrap();
        assert!(r.passed);
        assert_relative_eq!(r.lhs, ball_volume(4), max_relative = 1e-8);
        // rhs = (n/(n-k)) |B^n| exactly
        assert_relative_eq!(r.rhs, 4.0 / 3.0 * ball_volume(4), max_relative = 1e-8);
    }

    #[test]
    fn stability_refuses_bodies_outside_the_class() {
        let cube = StarBody::cube(4).unwrap();
        assert!(matches!(
            stability_check(&Density::uniform(4), &cube, 1, &quick()),
            Err(Error::HypothesisNotMet(_))
        ));
    }

    #[test]
    fn lozanovskii_positions() {
        let n = 4;
        let cube = lozanovskii_diagonal(&StarBody::cube(n).unwrap(), 12, 1).unwrap();
        assert!(cube.passed() && cube.converged);
        for i in 0..n {
            assert_relative_eq!(cube.matrix[i * n + i], 1.0, max_relative = 1e-6);
        }
        let stirling = n as f64 / 24f64.powf(0.25);
        assert_relative_eq!(cube.ovr_upper, stirling, max_relative = 1e-6);
        let cross = lozanovskii_diagonal(&StarBody::cross_polytope(n).unwrap(), 12, 1).unwrap();
        assert!(cross.passed());
        assert_relative_eq!(cross.matrix[0], 0.25, max_relative = 1e-6);
        assert_relative_eq!(cross.ovr_upper, 1.0, max_relative = 1e-6);
        let ball = lozanovskii_diagonal(&StarBody::euclidean_ball(n).unwrap(), 12, 1).unwrap();
        assert!(ball.passed());
        assert_relative_eq!(ball.matrix[0], 0.5, max_relative = 1e-6);
        assert!(ball.ovr_upper <= E);
        for w in ball.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn mvee_of_ellipsoid_is_itself() {
        let e = random_ellipsoid(4, 9).unwrap();
        let cert = mvee(&e, 20, 2).unwrap();
        assert!(cert.passed() && cert.converged, "{:?}", cert.history);
        assert!((cert.ovr_upper - 1.0).abs() < 1e-6, "{}", cert.ovr_upper);
    }

    #[test]
    fn mvee_of_cube_and_cross_polytope_are_balls() {
        let n = 4;
        let cube = mvee(&StarBody::cube(n).unwrap(), 16, 2).unwrap();
        assert!(cube.passed());
        let expect = ((n as f64).sqrt().powi(n as i32) * ball_volume(n) / 2f64.powi(n as i32)).powf(1.0 / n as f64);
        assert_relative_eq!(cube.ovr_upper, expect, max_relative = 1e-5);
        let cross = mvee(&StarBody::cross_polytope(n).unwrap(), 16, 2).unwrap();
        assert!(cross.passed());
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cross.matrix[i * n + j] - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn unconditional_bound_on_cube() {
        let (r, cert) = verify_unconditional_bound(&Density::gaussian(4, 1.0).unwrap(), &StarBody::cube(4).unwrap(), 1, &quick()).unwrap();
        assert!(r.passed && cert.passed());
        assert!(cert.ovr_upper <= E + 1e-3);
        assert!(r.certificate_rhs.unwrap() < r.rhs);
        assert!(r.lhs <= r.certificate_rhs.unwrap() + r.tolerance);
    }

    #[test]
    fn ellipsoid_route_on_ellipsoid_matches_stability() {
        let e = random_ellipsoid(4, 5).unwrap();
        let mu = random_even_polynomial(4, 5).unwrap();
        let (r, cert) = verify_ellipsoid_bound(&mu, &e, 1, &quick()).unwrap();
        let s = stability_check(&mu, &e, 1, &quick()).unwrap();
        assert!(r.passed && s.passed);
        assert!((cert.ovr_upper - 1.0).abs() < 1e-5);
        assert_relative_eq!(r.rhs, s.rhs, max_relative = 1e-4);
    }

    #[test]
    fn general_constant_proportional_form() {
        for n in [6usize, 10, 20] {
            let k = n / 2;
            let lambda = k as f64 / n as f64;
            let shape = ((1.0 - lambda.ln()).powi(3) / lambda).sqrt();
            assert_relative_eq!(general_growth(n, k), shape, max_relative = 1e-12);
        }
        let table = general_bound_table(4..=8, CodimRule::Proportional(0.5), 1.0).unwrap();
        assert_eq!(table.iter().map(|r| r.k).collect::<Vec<_>>(), vec![2, 3, 3, 4, 4]);
        let row = &table[2];
        assert_relative_eq!(
            row.constant,
            (2f64.sqrt() * (2.0 * E).ln().powf(1.5)).powi(3) * 2.0 * c_nk(6, 3).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn empirical_c0_reproduces_the_ratio() {
        let ball = StarBody::euclidean_ball(4).unwrap();
        let r = stability_check(&Density::uniform(4), &ball, 2, &quick()).unwrap();
        let c0 = empirical_c0(&r).unwrap();
        let bound = general_constant(4, 2, c0).unwrap() * r.rhs / r.bound_constant;
        assert_relative_eq!(bound, r.lhs, max_relative = 1e-10);
    }

    #[test]
    fn corpus_generators_are_seeded() {
        let a = random_even_polynomial(5, 1).unwrap();
        let b = random_even_polynomial(5, 1).unwrap();
        let x = [0.1, -0.4, 0.3, 0.2, 0.5];
        assert_eq!(a.eval(&x), b.eval(&x));
        assert!(random_ellipsoid(5, 2).unwrap().is_intersection_body_by_construction());
        assert!(random_cross_polytope_image(5, 2).unwrap().is_intersection_body_by_construction());
        assert!(random_box(5, 2).unwrap().flags().unconditional);
    }
}
