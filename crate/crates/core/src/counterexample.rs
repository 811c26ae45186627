//! Construction of a convex body `K` and a number `ε` such that every central
//! hyperplane section of `K` is smaller than the corresponding section of a
//! non-intersection body `L` by at least `ε`, while `|K|^{(n-1)/n}` stays above
//! `|L|^{(n-1)/n} - c_{n,1} ε`. The gap density between `L` and `K` then
//! violates the measure slicing inequality with constant one.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{
    check_convexity, check_revolution_profile, ConvexityReport, Density, ProfileConvexity, RevolutionProfile, StarBody,
};
use crate::error::{Error, Result};
use crate::fourier::certify::{
    intersection_body_test, meridian_point, orthogonal_unit, radial_power_series, InverseNormTransform, Verdict,
};
use crate::fourier::gegenbauer::{gegenbauer_expand_even, GegenbauerSeries, DEFAULT_DEGREE};
use crate::fourier::multiplier::ft_homogeneous_revolution;
use crate::grassmann::Subspace;
use crate::numeric::{ball_volume, dot, normalized};
use crate::quadrature::{measure_body, section_measure, volume, Estimate};
use crate::rng::{stream_rng, unit_vector};
use crate::slicing::c_nk;

/// Smooth body of revolution in `R^5` used as the default seed:
/// `N(r, z)^4 = r^4 + z^4 + 0.1 (r^2 + z^2)^2`.
pub fn default_seed_body() -> StarBody {
    let profile = RevolutionProfile {
        q: 4.0,
        radial_scale: 1.0,
        axial_scale: 1.0,
        kappa: 0.1,
    };
    StarBody::revolution(5, profile)
        .expect("valid profile")
        .with_label("rev_l4_smooth^5")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeDirection {
    pub xi0: Vec<f64>,
    /// `(||·||_L^{-1})^(ξ_0)`.
    pub value: f64,
    /// The transform stays below `-margin` on the sampled cap.
    pub margin: f64,
    /// Cap `{θ : <θ, ξ_0> ≥ 1 - cap_width}` on which the margin was verified.
    pub cap_width: f64,
    pub cap_samples: usize,
}

/// Fraction of the minimum that the transform must stay below on the cap.
pub const CAP_MARGIN: f64 = 0.25;
const CAP_HEIGHTS: usize = 64;
const CAP_AZIMUTHS: usize = 16;
const REFINE_STEPS: usize = 400;
const MERIDIAN_GRID: usize = 20_001;

/// Minimizes the transform of `||·||_L^{-1}` over the sphere (grid search plus
/// local refinement) and measures a cap around the minimizer on which it stays
/// below `CAP_MARGIN` times the minimum.
pub fn find_negative_direction(l: &StarBody, resolution: usize, seed: u64) -> Result<NegativeDirection> {
    let test = intersection_body_test(l, resolution)?;
    if test.verdict != Verdict::NegativeFound {
        return Err(Error::NotACounterexampleSeed { min: test.min_value });
    }
    let transform = InverseNormTransform::new(l, DEFAULT_DEGREE)?;
    let value_at = |theta: &[f64]| -> Result<f64> { Ok(transform.eval(theta)?.unwrap_or(f64::INFINITY)) };
    let (xi0, value) = match &transform {
        InverseNormTransform::Axial { axis, series } => {
            let perp = orthogonal_unit(axis);
            let (t, v) = (0..MERIDIAN_GRID)
                .map(|i| {
                    let t = i as f64 / (MERIDIAN_GRID - 1) as f64;
                    (t, series.eval(t))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty grid");
            (meridian_point(axis, &perp, t), v)
        }
        InverseNormTransform::Separable { .. } => {
            let mut rng = stream_rng(seed, 0);
            let mut best = test.argmin.clone();
            let mut best_value = value_at(&best)?;
            let mut step = 0.1;
            for _ in 0..REFINE_STEPS {
                let g = unit_vector(&mut rng, best.len());
                let cand = normalized(&best.iter().zip(&g).map(|(b, d)| b + step * d).collect::<Vec<_>>());
                let v = value_at(&cand)?;
                if v < best_value {
                    best = cand;
                    best_value = v;
                } else {
                    step = (step * 0.97).max(1e-4);
                }
            }
            (best, best_value)
        }
    };
    let margin = CAP_MARGIN * value.abs();
    let mut rng = stream_rng(seed, 1);
    let n = l.dim();
    let azimuths: Vec<Vec<f64>> = (0..CAP_AZIMUTHS)
        .map(|_| {
            let g = unit_vector(&mut rng, n);
            let c = dot(&g, &xi0);
            normalized(&g.iter().zip(&xi0).map(|(a, b)| a - c * b).collect::<Vec<_>>())
        })
        .collect();
    for j in 0..60 {
        let width = 0.5 * 0.95f64.powi(j);
        let mut ok = true;
        'cap: for h in 0..CAP_HEIGHTS {
            let t = 1.0 - width * h as f64 / (CAP_HEIGHTS - 1) as f64;
            for u in &azimuths {
                if value_at(&meridian_point(&xi0, u, t))? >= -margin {
                    ok = false;
                    break 'cap;
                }
            }
        }
        if ok {
            return Ok(NegativeDirection {
                xi0,
                value,
                margin,
                cap_width: width,
                cap_samples: CAP_HEIGHTS * CAP_AZIMUTHS,
            });
        }
    }
    Err(Error::ConstructionFailed(format!(
        "no cap around the negative direction keeps the transform below {:.3e}",
        -margin
    )))
}

/// `-ln` of the bump value on the boundary of its cap.
pub const BUMP_EDGE_DECAY: f64 = 28.0;
/// Largest expansion degree tried for the bump.
pub const MAX_BUMP_DEGREE: usize = 512;
/// Relative tail bound required of the bump expansion.
pub const BUMP_TAIL: f64 = 1e-8;

/// `φ(t) = exp(-κ (1 - t^2))` with `κ` chosen so that `φ ≤ e^{-28} < 1e-12`
/// for `|t| ≤ 1 - w`: even, positive, entire in `t` and equal to 1 at `t = ±1`.
pub fn bump_profile(width: f64, t: f64) -> f64 {
    let kappa = BUMP_EDGE_DECAY / (1.0 - (1.0 - width).powi(2));
    (-kappa * (1.0 - t * t)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    pub width: f64,
    pub series: GegenbauerSeries,
    /// Sup-norm bound of the last expansion terms.
    pub tail_bound: f64,
    /// Most negative value of the truncated series on a 10^4-point grid (0 if none).
    pub series_min: f64,
}

/// Gegenbauer expansion of [`bump_profile`] about an axis in `R^n`; the degree
/// starts at `degree_max` and doubles until the tail bound is below `BUMP_TAIL`.
pub fn make_bump(n: usize, width: f64, degree_max: usize) -> Result<Bump> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::OutOfRange(format!("bump width {width} outside (0, 1]")));
    }
    let mut degree = degree_max.max(8);
    loop {
        let series = gegenbauer_expand_even(|t| bump_profile(width, t), n, degree)?;
        let tail_bound = series.tail_bound(8);
        if tail_bound <= BUMP_TAIL || degree >= MAX_BUMP_DEGREE {
            if tail_bound > BUMP_TAIL {
                return Err(Error::ConstructionFailed(format!(
                    "bump of width {width} needs degree above {MAX_BUMP_DEGREE} (tail {tail_bound:.2e})"
                )));
            }
            let series_min = (0..=10_000)
                .map(|i| series.eval(-1.0 + 2.0 * i as f64 / 10_000.0))
                .fold(0.0f64, f64::min);
            return Ok(Bump {
                width,
                series,
                tail_bound,
                series_min,
            });
        }
        degree = (degree * 2).min(MAX_BUMP_DEGREE);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    pub xi0: Vec<f64>,
    pub width: f64,
    pub phi: GegenbauerSeries,
    /// `ψ` with `(ψ r^{-n+1})^ = (2π)^n φ r^{-1}`.
    pub psi: GegenbauerSeries,
    pub delta: f64,
    pub epsilon: f64,
}

impl Perturbation {
    /// `ε / |B_2^{n-1}|`, the constant removed from `ρ_L^{n-1}`.
    pub fn shift(&self) -> f64 {
        self.epsilon / ball_volume(self.xi0.len() - 1)
    }

    /// Predicted section loss `(2π)^n δ φ(<ξ, ξ_0>) / (π (n-1)) + ε`.
    pub fn predicted_loss(&self, xi: &[f64]) -> f64 {
        let n = self.xi0.len() as f64;
        (2.0 * PI).powf(n) * self.delta * self.phi.eval(dot(xi, &self.xi0)) / (PI * (n - 1.0)) + self.epsilon
    }
}

/// `ρ_K^{n-1} = ρ_L^{n-1} - δ ψ(<θ, ξ_0>) - ε / |B_2^{n-1}|`.
pub fn build_perturbed_body(l: &StarBody, pert: &Perturbation) -> Result<StarBody> {
    StarBody::radial_perturbation(l, &pert.xi0, pert.psi.clone(), pert.delta, pert.shift())
}

/// Directions used to bound radial quantities of `L`: meridians about `ξ_0` and
/// the axis of `L` (if any) plus Haar-random directions.
fn radial_sample(l: &StarBody, xi0: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = l.dim();
    let mut rng = stream_rng(seed, 2);
    let mut out = Vec::with_capacity(count + 4_000);
    let mut axes = vec![xi0.to_vec()];
    if let Some(a) = &l.flags().revolution_axis {
        axes.push(a.clone());
    }
    for axis in &axes {
        for _ in 0..4 {
            let g = unit_vector(&mut rng, n);
            let c = dot(&g, axis);
            let u = normalized(&g.iter().zip(axis).map(|(a, b)| a - c * b).collect::<Vec<_>>());
            for i in 0..=500 {
                out.push(meridian_point(axis, &u, -1.0 + 2.0 * i as f64 / 500.0));
            }
        }
    }
    for _ in 0..count {
        out.push(unit_vector(&mut rng, n));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    /// Grid resolution of the sign test.
    pub resolution: usize,
    /// Starting expansion degree of the bump.
    pub degree: usize,
    /// Midpoint trials of the convexity check.
    pub convexity_trials: usize,
    /// Samples along the meridian for the profile check of bodies of revolution.
    pub profile_samples: usize,
    /// Number of hyperplane directions for the section checks.
    pub directions: usize,
    pub section_level: usize,
    pub volume_level: usize,
    /// Cubature level for the gap density integrals.
    pub density_level: usize,
    /// Initial ramp width of the gap density, as a fraction of the radial gap.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            degree: 64,
            convexity_trials: 100_000,
            profile_samples: 4_000,
            directions: 50,
            section_level: 30,
            volume_level: 30,
            density_level: 20,
            smoothing: 0.25,
            seed: 2024,
        }
    }
}

pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Serialize)]
pub struct Construction {
    pub negative: NegativeDirection,
    pub bump: Bump,
    pub perturbation: Perturbation,
    #[serde(skip)]
    pub body: StarBody,
    pub halvings: usize,
    pub convexity: ConvexityReport,
    pub profile: Option<ProfileConvexity>,
    /// `min_θ ρ_L^{n-1}` over the radial sample.
    pub min_radial_power: f64,
    /// `max |ψ|` over a 10^4-point grid.
    pub psi_max: f64,
    /// `min_θ (ρ_L^{n-1} - ρ_K^{n-1})` over the radial sample; positive means `K ⊂ L` there.
    pub containment_margin: f64,
}

/// Full construction of `(K, ε)` from the seed `L`: negative direction, bump,
/// initial `(ε, δ)` and geometric shrinking until `K` passes the convexity checks.
pub fn construct(l: &StarBody, config: &CounterexampleConfig) -> Result<Construction> {
    let n = l.dim();
    let negative = find_negative_direction(l, config.resolution, config.seed)?;
    let bump = make_bump(n, negative.cap_width, config.degree)?;
    let psi = ft_homogeneous_revolution(&bump.series, 1.0)?;
    let sample = radial_sample(l, &negative.xi0, 10_000, config.seed);
    let nf = n as f64;
    let radial_powers: Vec<f64> = sample
        .par_iter()
        .map(|theta| l.radial(theta).map(|r| r.powf(nf - 1.0)))
        .collect::<Result<_>>()?;
    let min_radial_power = radial_powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let psi_max = (0..=10_000)
        .map(|i| psi.eval(-1.0 + 2.0 * i as f64 / 10_000.0).abs())
        .fold(0.0f64, f64::max);
    let b = ball_volume(n - 1);
    let mut epsilon = 0.5 * b * min_radial_power;
    // admissible δ: δ max|ψ| < min(ρ_L^{n-1} - ε/|B|, ε/|B|), used with factor 1/2
    let mut delta = 0.5 * (min_radial_power - epsilon / b).min(epsilon / b) / psi_max;
    for halvings in 0..=MAX_HALVINGS {
        let pert = Perturbation {
            xi0: negative.xi0.clone(),
            width: negative.cap_width,
            phi: bump.series.clone(),
            psi: psi.clone(),
            delta,
            epsilon,
        };
        let body = build_perturbed_body(l, &pert)?;
        body.validate_radial_positive(sample.iter().map(|v| v.as_slice()))?;
        let convexity = check_convexity(&body, config.convexity_trials, config.seed);
        let profile = match body.flags().revolution_axis {
            Some(_) => Some(check_revolution_profile(&body, config.profile_samples)?),
            None => None,
        };
        if convexity.violations == 0 && profile.as_ref().is_none_or(|p| p.passed()) {
            let containment_margin = sample
                .iter()
                .zip(&radial_powers)
                .map(|(theta, rl)| body.radial(theta).map(|rk| rl - rk.powf(nf - 1.0)))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            return Ok(Construction {
                negative,
                bump,
                perturbation: pert,
                body,
                halvings,
                convexity,
                profile,
                min_radial_power,
                psi_max,
                containment_margin,
            });
        }
        epsilon *= 0.5;
        delta *= 0.5;
    }
    Err(Error::ConstructionFailed(format!(
        "convexity still fails after {MAX_HALVINGS} halvings of (ε, δ)"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionRow {
    pub xi: Vec<f64>,
    /// `<ξ, ξ_0>`.
    pub height: f64,
    pub section_l: Estimate,
    pub section_k: Estimate,
    /// `|L ∩ ξ^⊥| - |K ∩ ξ^⊥|`.
    pub gap: f64,
    /// `|L ∩ ξ^⊥| - (2π)^n δ φ(ξ) / (π(n-1)) - ε`, when a perturbation is given.
    pub predicted_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionReport {
    pub epsilon: f64,
    pub rows: Vec<SectionRow>,
    pub min_gap: f64,
    /// `max_ξ (|K ∩ ξ^⊥| - |L ∩ ξ^⊥| + ε)`; at most `tolerance` when the check passes.
    pub worst_excess: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Option<Vec<f64>>,
    /// Largest relative difference between predicted and measured sections of `K`.
    pub max_prediction_error: Option<f64>,
}

/// Relative tolerance (in units of `ε`) of the section inequality.
pub const SECTION_TOL: f64 = 1e-4;

/// Directions for the section checks: meridian heights about `ξ_0` spread over
/// `[0, 1]` with extra points inside the cap, plus `ξ_0` itself. For a body of
/// revolution about `ξ_0` these cover all sections up to rotation; otherwise
/// each height gets a random azimuth.
pub fn section_directions(l: &StarBody, xi0: &[f64], cap_width: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = l.dim();
    let aligned = l
        .flags()
        .revolution_axis
        .as_ref()
        .is_some_and(|a| (dot(a, xi0).abs() - 1.0).abs() < 1e-12)
        || l.is_euclidean_ball();
    let mut rng = stream_rng(seed, 3);
    let fixed = orthogonal_unit(xi0);
    let count = count.max(2);
    let in_cap = (count / 5).max(1);
    let spread = count - in_cap;
    let mut heights: Vec<f64> = (0..spread).map(|i| (0.5 * PI * i as f64 / spread as f64).sin()).collect();
    heights.extend((1..=in_cap).map(|i| 1.0 - cap_width * i as f64 / (in_cap + 1) as f64));
    heights.push(1.0);
    heights
        .into_iter()
        .map(|t| {
            let u = if aligned {
                fixed.clone()
            } else {
                let g = unit_vector(&mut rng, n);
                let c = dot(&g, xi0);
                normalized(&g.iter().zip(xi0).map(|(a, b)| a - c * b).collect::<Vec<_>>())
            };
            meridian_point(xi0, &u, t)
        })
        .collect()
}

/// Checks `|K ∩ ξ^⊥| ≤ |L ∩ ξ^⊥| - ε + 1e-4 ε` on every direction, with sections
/// computed by cubature, and compares against the Fourier prediction when the
/// perturbation is supplied.
pub fn verify_sections(
    l: &StarBody,
    k: &StarBody,
    epsilon: f64,
    directions: &[Vec<f64>],
    level: usize,
    perturbation: Option<&Perturbation>,
) -> Result<SectionReport> {
    let mu = Density::uniform(l.dim());
    let rows: Vec<SectionRow> = directions
        .par_iter()
        .map(|xi| {
            let h = Subspace::hyperplane(xi)?;
            let section_l = section_measure(&mu, l, &h, level)?;
            let section_k = section_measure(&mu, k, &h, level)?;
            let predicted_k = perturbation.map(|p| section_l.value - p.predicted_loss(xi));
            Ok(SectionRow {
                xi: xi.clone(),
                height: perturbation.map_or(0.0, |p| dot(xi, &p.xi0)),
                gap: section_l.value - section_k.value,
                section_l,
                section_k,
                predicted_k,
            })
        })
        .collect::<Result<_>>()?;
    let tolerance = SECTION_TOL * epsilon;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut witness = None;
    let mut min_gap = f64::INFINITY;
    for row in &rows {
        min_gap = min_gap.min(row.gap);
        let excess = epsilon - row.gap;
        if excess > worst_excess {
            worst_excess = excess;
            witness = Some(row.xi.clone());
        }
    }
    let passed = worst_excess <= tolerance;
    let max_prediction_error = perturbation.map(|_| {
        rows.iter()
            .filter_map(|r| r.predicted_k.map(|p| (p - r.section_k.value).abs() / r.section_k.value.abs()))
            .fold(0.0f64, f64::max)
    });
    Ok(SectionReport {
        epsilon,
        rows,
        min_gap,
        worst_excess,
        tolerance,
        passed,
        witness: if passed { None } else { witness },
        max_prediction_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralBound {
    /// `∫_{S^{n-1}} (||·||_K^{-1})^`.
    pub lhs: f64,
    /// `(2π)^n n c_{n,1} |K|^{1/n} / (π (n-1))`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeGapReport {
    pub volume_l: Estimate,
    pub volume_k: Estimate,
    /// `|L|^{(n-1)/n} - |K|^{(n-1)/n}`.
    pub gap: f64,
    /// `c_{n,1} ε`.
    pub bound: f64,
    pub margin: f64,
    /// Propagated quadrature tolerance of `gap`.
    pub tolerance: f64,
    /// `((n-1)/n) |L|^{-1/n} (|L| - |K|)`, a lower bound for `gap`.
    pub mean_value_lower: f64,
    pub verdict: GapVerdict,
    pub integral_bound: Option<IntegralBound>,
}

/// Checks `|K|^{(n-1)/n} > |L|^{(n-1)/n} - c_{n,1} ε` with volumes at a common
/// cubature level, and the integral bound on the transform of `||·||_K^{-1}`
/// when `K` is a body of revolution.
pub fn verify_volume_gap(l: &StarBody, k: &StarBody, epsilon: f64, level: usize) -> Result<VolumeGapReport> {
    let n = l.dim();
    let nf = n as f64;
    let volume_l = volume(l, level)?;
    let volume_k = volume(k, level)?;
    let power = (nf - 1.0) / nf;
    let gap = volume_l.value.powf(power) - volume_k.value.powf(power);
    let c = c_nk(n, 1)?;
    let bound = c * epsilon;
    let tolerance = power * (volume_l.value.powf(-1.0 / nf) * volume_l.tolerance() + volume_k.value.powf(-1.0 / nf) * volume_k.tolerance());
    let margin = bound - gap;
    let verdict = if margin > tolerance {
        GapVerdict::Pass
    } else if margin < -tolerance {
        GapVerdict::Fail
    } else {
        GapVerdict::Inconclusive
    };
    let mean_value_lower = power * volume_l.value.powf(-1.0 / nf) * (volume_l.value - volume_k.value);
    let integral_bound = if k.flags().revolution_axis.is_some() {
        let axis = k.flags().revolution_axis.clone().expect("checked");
        let series = radial_power_series(k, &axis, 1.0, DEFAULT_DEGREE)?;
        let lhs = ft_homogeneous_revolution(&series, 1.0)?.sphere_integral();
        let rhs = (2.0 * PI).powf(nf) * nf * c * volume_k.value.powf(1.0 / nf) / (PI * (nf - 1.0));
        Some(IntegralBound {
            lhs,
            rhs,
            holds: lhs <= rhs,
        })
    } else {
        None
    };
    Ok(VolumeGapReport {
        volume_l,
        volume_k,
        gap,
        bound,
        margin,
        tolerance,
        mean_value_lower,
        verdict,
        integral_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapDensityReport {
    pub smoothing: f64,
    pub halvings: usize,
    /// `∫_L g`.
    pub lhs: Estimate,
    /// `min_ξ ∫_{L ∩ ξ^⊥} g` over the given directions.
    pub min_section: f64,
    pub witness: Vec<f64>,
    /// `(n/(n-1)) c_{n,1} |L|^{1/n} min_section`.
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
}

pub const MAX_SMOOTHING_HALVINGS: usize = 20;

/// Gap density `g` (a smoothed indicator of `L \ K`) and the ratio
/// `∫_L g / ((n/(n-1)) c_{n,1} |L|^{1/n} min_ξ ∫_{L∩ξ^⊥} g)`, halving the ramp
/// width until the ratio is below one.
pub fn build_gap_density(
    l: &StarBody,
    k: &StarBody,
    smoothing: f64,
    directions: &[Vec<f64>],
    level: usize,
) -> Result<(Density, GapDensityReport)> {
    let n = l.dim();
    let nf = n as f64;
    let c = c_nk(n, 1)?;
    let volume_l = volume(l, level)?.value;
    let mut smoothing = smoothing;
    let mut last = None;
    for halvings in 0..=MAX_SMOOTHING_HALVINGS {
        let g = Density::shell(k, l, smoothing)?.with_label(format!("gap({smoothing})"));
        let lhs = measure_body(&g, l, level)?;
        let sections: Vec<f64> = directions
            .par_iter()
            .map(|xi| Ok(section_measure(&g, l, &Subspace::hyperplane(xi)?, level)?.value))
            .collect::<Result<_>>()?;
        let (idx, min_section) = sections
            .iter()
            .cloned()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::OutOfRange("no directions".into()))?;
        let rhs = nf / (nf - 1.0) * c * volume_l.powf(1.0 / nf) * min_section;
        let ratio = lhs.value / rhs;
        let report = GapDensityReport {
            smoothing,
            halvings,
            lhs,
            min_section,
            witness: directions[idx].clone(),
            rhs,
            ratio,
            passed: ratio < 1.0,
        };
        if report.passed {
            return Ok((g, report));
        }
        last = Some((g, report));
        smoothing *= 0.5;
    }
    Ok(last.expect("at least one iteration"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub seed_body: String,
    pub body: String,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub xi0: Vec<f64>,
    pub cap_width: f64,
    pub negative_value: f64,
    pub bump_degree: usize,
    pub halvings: usize,
    pub c_n1: f64,
    pub min_section_gap: f64,
    pub sections: SectionReport,
    pub volume: VolumeGapReport,
    pub convexity: ConvexityReport,
    pub profile: Option<ProfileConvexity>,
    pub gap_density: GapDensityReport,
    /// `c_{n,1} min_ξ (|L∩ξ^⊥| - |K∩ξ^⊥|) > gap ≥ ((n-1)/n)|L|^{-1/n}(|L| - |K|)`.
    pub mean_value_chain: [bool; 2],
    pub passed: bool,
}

/// Construction followed by every verification.
pub fn run_counterexample(l: &StarBody, config: &CounterexampleConfig) -> Result<(Construction, CounterexampleReport)> {
    let construction = construct(l, config)?;
    let pert = &construction.perturbation;
    let k = &construction.body;
    let directions = section_directions(l, &pert.xi0, pert.width, config.directions, config.seed);
    let sections = verify_sections(l, k, pert.epsilon, &directions, config.section_level, Some(pert))?;
    let volume = verify_volume_gap(l, k, pert.epsilon, config.volume_level)?;
    let (_, gap_density) = build_gap_density(l, k, config.smoothing, &directions, config.density_level)?;
    let c = c_nk(l.dim(), 1)?;
    let chain_upper = c * sections.min_gap > volume.gap + volume.tolerance;
    let chain_lower = volume.gap + volume.tolerance >= volume.mean_value_lower;
    let passed = sections.passed
        && volume.verdict == GapVerdict::Pass
        && construction.convexity.violations == 0
        && construction.profile.as_ref().is_none_or(|p| p.passed())
        && gap_density.passed
        && chain_upper
        && chain_lower;
    let report = CounterexampleReport {
        seed_body: l.label().to_string(),
        body: k.label().to_string(),
        n: l.dim(),
        epsilon: pert.epsilon,
        delta: pert.delta,
        xi0: pert.xi0.clone(),
        cap_width: pert.width,
        negative_value: construction.negative.value,
        bump_degree: construction.bump.series.degree_max(),
        halvings: construction.halvings,
        c_n1: c,
        min_section_gap: sections.min_gap,
        sections,
        volume,
        convexity: construction.convexity.clone(),
        profile: construction.profile.clone(),
        gap_density,
        mean_value_chain: [chain_upper, chain_lower],
        passed,
    };
    Ok((construction, report))
}

/// Radius of `body` along the meridian about `axis` at `count` heights in `[-1, 1]`.
pub fn radial_profile(body: &StarBody, axis: &[f64], count: usize) -> Result<Vec<(f64, f64)>> {
    let perp = orthogonal_unit(axis);
    let count = count.max(2);
    (0..count)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
            Ok((t, body.radial(&meridian_point(axis, &perp, t))?))
        })
        .collect()
}
