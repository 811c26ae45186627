//! Fixtures shared by the kernel benchmarks.

use slicelab::bodies::{Density, RevolutionProfile, StarBody};
use slicelab::grassmann::{haar_subspace, Subspace};
use slicelab::slicing::random_even_polynomial;

pub struct Fixture {
    pub label: &'static str,
    pub body: StarBody,
    pub density: Density,
    pub hyperplane: Subspace,
}

/// A smooth body, a polytope and a body of revolution in `R^n` with a random
/// hyperplane each.
pub fn fixtures(n: usize) -> Vec<Fixture> {
    let make = |label, body: StarBody, density: Density, seed| Fixture {
        label,
        body,
        density,
        hyperplane: haar_subspace(n, 1, seed).expect("valid codimension"),
    };
    vec![
        make(
            "lq4_gaussian",
            StarBody::lq_ball(n, 4.0).expect("q in range"),
            Density::gaussian(n, 0.8).expect("positive sigma"),
            1,
        ),
        make(
            "cross_poly",
            StarBody::cross_polytope(n).expect("cross polytope"),
            random_even_polynomial(n, 3).expect("even polynomial"),
            2,
        ),
        make(
            "revolution_uniform",
            StarBody::revolution(n, RevolutionProfile::q_sum(4.0)).expect("profile"),
            Density::uniform(n),
            3,
        ),
    ]
}
