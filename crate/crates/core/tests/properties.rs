use nalgebra::DMatrix;
use proptest::prelude::*;

use slicelab::bodies::{Density, LinearMap, RevolutionProfile, StarBody};
use slicelab::fourier::gegenbauer::{gegenbauer_expand_even, GegenbauerSeries};
use slicelab::fourier::multiplier::{ft_homogeneous_revolution, radon_direct, HomogeneousFn};
use slicelab::fourier::{ft_lq_norm_power, gamma_q};
use slicelab::grassmann::{haar_rotation, haar_subspace, max_section, SearchBudget};
use slicelab::numeric::{ball_volume, normalized};
use slicelab::quadrature::{mc_measure, measure_body, section_measure, section_value, volume};
use slicelab::rng::stream_rng;
use slicelab::slicing::{
    c_nk, lozanovskii_diagonal, random_cross_polytope_image, random_ellipsoid, stability_constant, stability_check,
    SlicingConfig,
};

fn corpus_body(index: usize, n: usize, seed: u64) -> StarBody {
    match index % 6 {
        0 => StarBody::euclidean_ball(n).unwrap(),
        1 => StarBody::cube(n).unwrap(),
        2 => StarBody::lq_ball(n, 1.0 + (seed % 7) as f64).unwrap(),
        3 => random_ellipsoid(n, seed).unwrap(),
        4 => random_cross_polytope_image(n, seed).unwrap(),
        _ => StarBody::revolution(
            n,
            RevolutionProfile {
                q: 4.0,
                radial_scale: 1.0,
                axial_scale: 0.8,
                kappa: 0.1,
            },
        )
        .unwrap(),
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = v.iter().map(|x| if x.abs() < 1e-3 { x + 0.01 } else { *x }).collect();
    normalized(&v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_are_positively_homogeneous(
        index in 0usize..6,
        seed in 0u64..50,
        x in prop::collection::vec(-2.0f64..2.0, 4),
        a in 0.01f64..10.0,
    ) {
        let body = corpus_body(index, 4, seed);
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let lhs = body.norm(&scaled);
        prop_assert!((lhs - a * body.norm(&x)).abs() <= 1e-10 * lhs.max(1e-300));
    }

    #[test]
    fn unconditional_flag_is_sound(
        index in 0usize..6,
        seed in 0u64..50,
        x in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let body = corpus_body(index, 4, seed);
        if body.flags().unconditional {
            let base = body.norm(&x);
            for mask in 0..16usize {
                let flipped: Vec<f64> = x.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { -v } else { *v }).collect();
                prop_assert_eq!(body.norm(&flipped), base);
            }
        }
    }

    #[test]
    fn linear_image_norm_pulls_back(
        seed in 0u64..1000,
        index in 0usize..6,
        x in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let base = corpus_body(index, 4, seed);
        let mut rng = stream_rng(seed, 99);
        let rotation = haar_rotation(&mut rng, 4);
        let stretch = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 1.0, 1.5, 2.0]));
        let map = LinearMap::new(rotation * stretch).unwrap();
        let pulled = map.apply_inverse(&x);
        let image = StarBody::linear_image(&base, map).unwrap();
        let expect = base.norm(&pulled);
        prop_assert!((image.norm(&x) - expect).abs() <= 1e-10 * expect.max(1.0));
    }

    #[test]
    fn ellipsoid_polar_is_reciprocal_support(
        axes in prop::collection::vec(0.3f64..3.0, 3),
        theta in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let theta = unit(&theta);
        let body = StarBody::ellipsoid_axes(&axes).unwrap();
        let polar = StarBody::ellipsoid_axes(&axes.iter().map(|a| 1.0 / a).collect::<Vec<_>>()).unwrap();
        let support = axes.iter().zip(&theta).map(|(a, t)| (a * t).powi(2)).sum::<f64>().sqrt();
        prop_assert!((polar.radial(&theta).unwrap() - 1.0 / support).abs() < 1e-12 / support);
        // the support function is attained at the boundary point A^2 θ / h(θ)
        let x: Vec<f64> = axes.iter().zip(&theta).map(|(a, t)| a * a * t / support).collect();
        prop_assert!((body.norm(&x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_nk_lies_strictly_between_bounds(n in 2usize..=100, k_frac in 0.0f64..1.0) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let k = k.min(n - 1);
        let c = c_nk(n, k).unwrap();
        prop_assert!(c > (-(k as f64) / 2.0).exp() && c < 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cubature_and_monte_carlo_agree(index in 0usize..6, seed in 0u64..50, sigma in 0.5f64..2.0) {
        let body = corpus_body(index, 4, seed);
        let mu = Density::gaussian(4, sigma).unwrap();
        let det = measure_body(&mu, &body, 24).unwrap();
        let mc = mc_measure(&mu, &body, 200_000, seed).unwrap();
        prop_assert!((det.value - mc.value).abs() <= 3.0 * mc.stderr + det.tolerance() + 1e-6 * det.value,
            "{det:?} vs {mc:?}");
    }

    #[test]
    fn uniform_sections_of_ellipsoids_match_closed_form(seed in 0u64..1000, k in 1usize..=2) {
        let n = 5;
        let body = random_ellipsoid(n, seed).unwrap();
        let h = haar_subspace(n, k, seed).unwrap();
        let est = section_measure(&Density::uniform(n), &body, &h, 40).unwrap();
        // E ∩ H = {F u : u^T (F^T A^{-1} F) u ≤ 1}
        let shape = match body.shape() {
            slicelab::bodies::Shape::Ellipsoid { inverse, .. } => inverse.clone(),
            _ => unreachable!(),
        };
        let f = h.frame();
        let gram = f.transpose() * shape * f;
        let expect = ball_volume(n - k) / gram.determinant().sqrt();
        prop_assert!((est.value - expect).abs() <= 1e-6 * expect, "{} vs {}", est.value, expect);
    }

    #[test]
    fn measure_is_monotone_under_inclusion(index in 0usize..6, seed in 0u64..50, factor in 0.3f64..0.99) {
        let outer = corpus_body(index, 4, seed);
        let inner = StarBody::dilate(&outer, factor).unwrap();
        let mu = Density::gaussian(4, 1.0).unwrap();
        let a = measure_body(&mu, &inner, 16).unwrap();
        let b = measure_body(&mu, &outer, 16).unwrap();
        prop_assert!(a.value <= b.value + a.tolerance() + b.tolerance());
    }

    #[test]
    fn refinement_stays_within_error_estimate(seed in 0u64..1000) {
        let body = random_ellipsoid(4, seed).unwrap();
        let coarse = volume(&body, 12).unwrap();
        let fine = volume(&body, 24).unwrap();
        prop_assert!((fine.value - coarse.value).abs() <= coarse.abs_err.max(1e-13 * fine.value));
    }

    #[test]
    fn search_winner_reevaluates_exactly(index in 0usize..6, seed in 0u64..50) {
        let body = corpus_body(index, 4, seed);
        let mu = Density::gaussian(4, 1.2).unwrap();
        let trace = max_section(&mu, &body, 1, &SearchBudget::new(2, 10), 6, 6, seed).unwrap();
        let again = section_value(&mu, &body, &trace.best_subspace, 6).unwrap();
        prop_assert_eq!(again, trace.best_value);
        prop_assert!((trace.estimate.value - trace.best_value).abs() <= trace.estimate.tolerance() + 1e-12);
    }

    #[test]
    fn odd_profiles_have_zero_radon_transform(
        coeffs in prop::collection::vec(-1.0f64..1.0, 3),
        s in -1.0f64..1.0,
        n in 3usize..=6,
    ) {
        let f = |t: f64| coeffs[0] * t + coeffs[1] * t.powi(3) + coeffs[2] * t.powi(5);
        prop_assert!(radon_direct(f, n, s, 64).unwrap().abs() < 1e-10);
    }

    #[test]
    fn euclidean_transform_matches_multiplier_backend(
        n in 3usize..=5,
        theta in prop::collection::vec(-1.0f64..1.0, 5),
        first in any::<bool>(),
    ) {
        let xi = unit(&theta[..n]);
        let p = if first { 1.0 } else { n as f64 - 1.0 };
        let separable = ft_lq_norm_power(n, 2.0, p, &xi).unwrap().value;
        let constant = GegenbauerSeries::new(n, vec![1.0, 0.0, 0.0]).unwrap();
        let via_multiplier = ft_homogeneous_revolution(&constant, p).unwrap().eval(0.3);
        prop_assert!((separable - via_multiplier).abs() <= 1e-6 * separable.abs());
    }

    #[test]
    fn transform_extension_is_homogeneous(
        theta in prop::collection::vec(-1.0f64..1.0, 4),
        scale in 0.2f64..5.0,
    ) {
        let xi = unit(&theta);
        let f = HomogeneousFn::lq_power(4, 4.0, 1.0).unwrap();
        let base = f.transform_at(&xi).unwrap();
        let scaled: Vec<f64> = xi.iter().map(|v| scale * v).collect();
        let value = f.transform_at(&scaled).unwrap();
        prop_assert!((value - scale.powf(-3.0) * base).abs() <= 1e-12 * base.abs());
    }

    #[test]
    fn transformed_even_profiles_stay_even(width in 0.2f64..0.8, n in 3usize..=6) {
        let phi = gegenbauer_expand_even(|t| (-(1.0 - t * t) / width).exp(), n, 32).unwrap();
        let psi = ft_homogeneous_revolution(&phi, 1.0).unwrap();
        prop_assert!(psi.max_odd_coefficient() <= 1e-10);
    }

    #[test]
    fn gamma_q_is_bounded_by_its_value_at_zero(q in 1.0f64..6.0, s in 0.0f64..50.0) {
        prop_assert!(gamma_q(q, s).unwrap().abs() <= gamma_q(q, 0.0).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn slicing_reports_replay_bit_identically(seed in 0u64..1000, k in 1usize..=2) {
        let body = random_ellipsoid(4, seed).unwrap();
        let mu = Density::gaussian(4, 0.8).unwrap();
        let config = SlicingConfig { seed, ..quick_config() };
        let a = stability_check(&mu, &body, k, &config).unwrap();
        let b = stability_check(&mu, &body, k, &config).unwrap();
        prop_assert!(a.passed);
        prop_assert_eq!(a.lhs.to_bits(), b.lhs.to_bits());
        prop_assert_eq!(a.rhs.to_bits(), b.rhs.to_bits());
    }

    #[test]
    fn certificate_superset_bounds_the_measure(index in 0usize..3, seed in 0u64..50, k in 1usize..=2) {
        let l = match index {
            0 => StarBody::cube(4).unwrap(),
            1 => StarBody::lq_ball(4, 4.0).unwrap(),
            _ => StarBody::weighted_box(&[0.5, 1.0, 1.5, 2.0]).unwrap(),
        };
        let mu = Density::gaussian(4, 1.0).unwrap();
        let cert = lozanovskii_diagonal(&l, 16, seed).unwrap();
        prop_assert!(cert.passed());
        for w in cert.history.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let config = quick_config();
        let lhs = measure_body(&mu, &l, 16).unwrap();
        let trace = max_section(&mu, &l, k, &config.budget, 6, 12, seed).unwrap();
        let section = trace.estimate.value.max(trace.best_value);
        let rhs = stability_constant(4, k).unwrap() * cert.superset_volume.powf(k as f64 / 4.0) * section;
        prop_assert!(lhs.value <= rhs + lhs.tolerance() + trace.estimate.tolerance());
    }
}

fn quick_config() -> SlicingConfig {
    SlicingConfig {
        budget: SearchBudget::new(3, 20),
        search_nodes: 500,
        report_nodes: 20_000,
        volume_nodes: 50_000,
        seed: 1,
    }
}

#[test]
fn rotated_bodies_have_the_same_maximal_section() {
    let mu = Density::gaussian(3, 1.0).unwrap();
    let cube = StarBody::cube(3).unwrap();
    let budget = SearchBudget::new(8, 150);
    let base = max_section(&mu, &cube, 1, &budget, 40, 60, 5).unwrap();
    for seed in 0..3 {
        let mut rng = stream_rng(seed, 0);
        let r = haar_rotation(&mut rng, 3);
        let rotated = StarBody::linear_image(&cube, LinearMap::new(r.transpose()).unwrap()).unwrap();
        let other = max_section(&mu, &rotated, 1, &budget, 40, 60, 5).unwrap();
        assert!(
            (other.estimate.value - base.estimate.value).abs() < 2e-3 * base.estimate.value,
            "{} vs {}",
            other.estimate.value,
            base.estimate.value
        );
    }
}

#[test]
fn revolution_sections_follow_the_angle_profile() {
    let n = 4;
    let body = StarBody::revolution(
        n,
        RevolutionProfile {
            q: 4.0,
            radial_scale: 1.0,
            axial_scale: 0.8,
            kappa: 0.1,
        },
    )
    .unwrap();
    let mu = Density::uniform(n);
    let level = 30;
    let section_at = |angle: f64| {
        let xi = [angle.sin(), 0.0, 0.0, angle.cos()];
        let h = slicelab::grassmann::Subspace::hyperplane(&xi).unwrap();
        section_value(&mu, &body, &h, level).unwrap()
    };
    // any hyperplane with the same angle to the axis gives the same section
    let tilted = normalized(&[0.3, -0.4, 0.5, 0.6]);
    let angle = tilted[3].acos();
    let h = slicelab::grassmann::Subspace::hyperplane(&tilted).unwrap();
    let direct = section_value(&mu, &body, &h, level).unwrap();
    assert!((direct - section_at(angle)).abs() < 1e-8 * direct);
    let scan_max = (0..=400)
        .map(|i| section_at(std::f64::consts::FRAC_PI_2 * i as f64 / 400.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let trace = max_section(&mu, &body, 1, &SearchBudget::new(8, 200), level, level, 3).unwrap();
    assert!(trace.best_value <= scan_max * (1.0 + 1e-5), "{} vs {}", trace.best_value, scan_max);
    assert!((trace.best_value - scan_max).abs() < 1e-4 * scan_max, "{} vs {}", trace.best_value, scan_max);
}
