//! Measures of star bodies and their central sections, slicing inequalities
//! for arbitrary measures, and a Fourier-analytic construction of bodies for
//! which the slicing constant one fails.

pub mod bodies;
pub mod counterexample;
pub mod error;
pub mod fourier;
pub mod grassmann;
pub mod notation;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod run;
pub mod slicing;

pub use bodies::{Density, LinearMap, RevolutionProfile, StarBody};
pub use counterexample::{CounterexampleConfig, CounterexampleReport};
pub use error::{Error, Result};
pub use fourier::{GegenbauerSeries, IntersectionTest, Verdict};
pub use grassmann::{SearchBudget, SearchTrace, Subspace};
pub use quadrature::{Backend, Estimate};
pub use run::{Case, Command, Outcome, Record, RunConfig};
pub use slicing::{PositionCertificate, SlicingConfig, SlicingReport};
