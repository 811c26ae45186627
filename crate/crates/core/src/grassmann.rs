//! Subspaces as orthonormal frames, Haar sampling and heuristic search for
//! extremal central sections over `Gr_{n-k}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::bodies::{Density, StarBody};
use crate::error::{Error, Result};
use crate::numeric::norm2;
use crate::quadrature::{section_measure, section_value, Estimate};
use crate::rng::{gaussian_vec, stream_rng, SeededRng};

/// An `(n - k)`-dimensional subspace of `R^n` stored as an `n × (n - k)` frame
/// with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    n: usize,
    k: usize,
    frame: DMatrix<f64>,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Subspace", 4)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("k", &self.k)?;
        st.serialize_field("cols", &self.dim())?;
        st.serialize_field("frame_row_major", &self.frame_row_major())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            k: usize,
            frame_row_major: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        let cols = raw.n.saturating_sub(raw.k);
        if raw.frame_row_major.len() != raw.n * cols {
            return Err(serde::de::Error::custom("frame has the wrong number of entries"));
        }
        let frame = DMatrix::from_row_slice(raw.n, cols, &raw.frame_row_major);
        Subspace::new(frame).map_err(serde::de::Error::custom)
    }
}

fn check_codim(n: usize, k: usize) -> Result<()> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(Error::InvalidCodimension {
            k,
            max: n.saturating_sub(1),
        });
    }
    Ok(())
}

impl Subspace {
    /// Validates `frameᵀ frame = I` within `1e-10`.
    pub fn new(frame: DMatrix<f64>) -> Result<Self> {
        let n = frame.nrows();
        let cols = frame.ncols();
        if cols == 0 || cols >= n {
            return Err(Error::InvalidCodimension {
                k: n.saturating_sub(cols),
                max: n.saturating_sub(1),
            });
        }
        let s = Self::from_frame_unchecked(frame, n - cols);
        s.check_orthonormal(1e-10)?;
        Ok(s)
    }

    /// No orthonormality check; the integrators re-check with their own tolerance.
    pub fn from_frame_unchecked(frame: DMatrix<f64>, k: usize) -> Self {
        Self {
            n: frame.nrows(),
            k,
            frame,
        }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        let mut frame = DMatrix::zeros(n, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            if i >= n {
                return Err(Error::OutOfRange(format!("axis {i} in dimension {n}")));
            }
            frame[(i, j)] = 1.0;
        }
        Self::new(frame)
    }

    /// Hyperplane `ξ^⊥`.
    pub fn hyperplane(normal: &[f64]) -> Result<Self> {
        let n = normal.len();
        check_codim(n, 1)?;
        let len = norm2(normal);
        if !(len > 0.0) {
            return Err(Error::NotUnitVector { length: len });
        }
        let xi: Vec<f64> = normal.iter().map(|v| v / len).collect();
        // Householder reflection mapping e_1 to ξ; its other columns span ξ^⊥.
        let mut v = xi.clone();
        let sign = if xi[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign;
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let mut frame = DMatrix::zeros(n, n - 1);
        for j in 1..n {
            for i in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                frame[(i, j - 1)] = e - 2.0 * v[i] * v[j] / vv;
            }
        }
        let mut s = Self::from_frame_unchecked(frame, 1);
        s.reorthonormalize();
        s.check_orthonormal(1e-10)?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension `n - k` of the subspace.
    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn frame_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.dim());
        for i in 0..self.n {
            for j in 0..self.dim() {
                out.push(self.frame[(i, j)]);
            }
        }
        out
    }

    /// `max |FᵀF - I|`.
    pub fn gram_deviation(&self) -> f64 {
        let m = self.dim();
        (self.frame.transpose() * &self.frame - DMatrix::<f64>::identity(m, m)).amax()
    }

    pub fn check_orthonormal(&self, tol: f64) -> Result<()> {
        let deviation = self.gram_deviation();
        if !(deviation <= tol) {
            return Err(Error::FrameNotOrthonormal { deviation });
        }
        Ok(())
    }

    /// `F u` for coordinates `u` in the subspace.
    pub fn embed(&self, u: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..self.n)
            .map(|i| (0..m).map(|j| self.frame[(i, j)] * u[j]).sum())
            .collect()
    }

    /// Orthogonal projector `F Fᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    /// Unit normal of a hyperplane (`k = 1`).
    pub fn normal(&self) -> Option<Vec<f64>> {
        if self.k != 1 {
            return None;
        }
        let p = self.projector();
        // the column of I - P with largest norm, normalized
        let mut best = (0usize, -1.0);
        for j in 0..self.n {
            let c: f64 = (0..self.n)
                .map(|i| {
                    let e = if i == j { 1.0 } else { 0.0 };
                    (e - p[(i, j)]).powi(2)
                })
                .sum();
            if c > best.1 {
                best = (j, c);
            }
        }
        let j = best.0;
        let v: Vec<f64> = (0..self.n)
            .map(|i| if i == j { 1.0 } else { 0.0 } - p[(i, j)])
            .collect();
        Some(crate::numeric::normalized(&v))
    }

    /// `R H` for an orthogonal `R`.
    pub fn rotated(&self, rotation: &DMatrix<f64>) -> Result<Self> {
        let mut s = Self::from_frame_unchecked(rotation * &self.frame, self.k);
        s.reorthonormalize();
        s.check_orthonormal(1e-10)?;
        Ok(s)
    }

    fn reorthonormalize(&mut self) {
        self.frame = orthonormalize(self.frame.clone());
    }
}

/// Q factor of a thin QR with the signs fixed so that `R` has a positive diagonal.
fn orthonormalize(a: DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data = gaussian_vec(rng, rows * cols);
    DMatrix::from_column_slice(rows, cols, &data)
}

/// Haar-distributed subspace from an existing generator.
pub fn haar_subspace_from(rng: &mut SeededRng, n: usize, k: usize) -> Result<Subspace> {
    check_codim(n, k)?;
    let m = n - k;
    loop {
        let g = gaussian_matrix(rng, n, m);
        if g.rank(1e-8) < m {
            continue;
        }
        let s = Subspace::from_frame_unchecked(orthonormalize(g), k);
        if s.check_orthonormal(1e-10).is_ok() {
            return Ok(s);
        }
    }
}

/// Haar-distributed `(n - k)`-dimensional subspace; identical frames for equal seeds.
pub fn haar_subspace(n: usize, k: usize, seed: u64) -> Result<Subspace> {
    haar_subspace_from(&mut stream_rng(seed, 0), n, k)
}

/// Haar-distributed rotation of `R^n`.
pub fn haar_rotation(rng: &mut SeededRng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    orthonormalize(g)
}

/// Geodesic step from `frame` along the tangent direction `(I - FFᵀ) G`
/// normalized to unit Frobenius norm, by angle `step`.
fn geodesic_step(frame: &DMatrix<f64>, direction: &DMatrix<f64>, step: f64) -> DMatrix<f64> {
    let proj = frame * (frame.transpose() * direction);
    let tangent = direction - proj;
    let norm = tangent.norm();
    if norm == 0.0 {
        return frame.clone();
    }
    let tangent = tangent / norm;
    let svd = tangent.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let v = vt.transpose();
    let m = frame.ncols();
    let cos = DMatrix::from_diagonal(&svd.singular_values.map(|s| (s * step).cos()));
    let sin = DMatrix::from_diagonal(&svd.singular_values.map(|s| (s * step).sin()));
    let moved = frame * &v * cos * &vt + u * sin * &vt;
    debug_assert_eq!(moved.ncols(), m);
    orthonormalize(moved)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub initial_step: f64,
    pub decay: f64,
    pub min_step: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 32,
            iterations: 200,
            initial_step: 0.3,
            decay: 0.97,
            min_step: 1e-4,
        }
    }
}

impl SearchBudget {
    pub fn new(restarts: usize, iterations: usize) -> Self {
        Self {
            restarts,
            iterations,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Maximize => a > b,
            Sense::Minimize => a < b,
        }
    }
}

/// Best-found extremal section. Values are heuristic: a lower bound for the
/// maximum, an upper bound for the minimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchTrace {
    pub sense: Sense,
    pub best_value: f64,
    pub best_subspace: Subspace,
    /// Re-evaluation of `best_subspace` at the reporting level.
    pub estimate: Estimate,
    pub restarts: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub seed: u64,
    pub search_level: usize,
    /// Accepted values of the winning restart, monotone in the search sense.
    pub history: Vec<f64>,
    pub restart_best: Vec<f64>,
    pub heuristic: bool,
}

struct RestartResult {
    best: f64,
    frame: Subspace,
    history: Vec<f64>,
    evaluations: usize,
}

/// Generic driver: random restarts with geodesic local moves that are accepted
/// only on improvement; the step shrinks after each rejected move. Restart `r` uses stream `r` of `seed`; restart 0 starts
/// from the coordinate subspace `span(e_{k+1}, ..., e_n)`.
pub fn search_subspaces<F>(
    n: usize,
    k: usize,
    budget: &SearchBudget,
    seed: u64,
    sense: Sense,
    objective: F,
) -> Result<(Subspace, f64, Vec<f64>, Vec<f64>, usize)>
where
    F: Fn(&Subspace) -> Result<f64> + Sync,
{
    check_codim(n, k)?;
    let restarts = budget.restarts.max(1);
    let iterations = if budget.restarts == 0 { 0 } else { budget.iterations };
    let results: Vec<Result<RestartResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let start = if r == 0 && budget.restarts > 0 {
                Subspace::coordinate(n, &(k..n).collect::<Vec<_>>())?
            } else {
                haar_subspace_from(&mut rng, n, k)?
            };
            let mut best = objective(&start)?;
            let mut frame = start;
            let mut history = vec![best];
            let mut evaluations = 1;
            let mut step = budget.initial_step;
            for _ in 0..iterations {
                if step < budget.min_step {
                    break;
                }
                let dir = gaussian_matrix(&mut rng, n, n - k);
                let cand = Subspace::from_frame_unchecked(geodesic_step(frame.frame(), &dir, step), k);
                let v = objective(&cand)?;
                evaluations += 1;
                if sense.better(v, best) {
                    best = v;
                    frame = cand;
                    history.push(v);
                } else {
                    step *= budget.decay;
                }
            }
            Ok(RestartResult {
                best,
                frame,
                history,
                evaluations,
            })
        })
        .collect();
    let mut winner: Option<RestartResult> = None;
    let mut restart_best = Vec::with_capacity(restarts);
    let mut evaluations = 0;
    for res in results {
        let res = res?;
        restart_best.push(res.best);
        evaluations += res.evaluations;
        let replace = match &winner {
            None => true,
            Some(w) => sense.better(res.best, w.best),
        };
        if replace {
            winner = Some(res);
        }
    }
    let w = winner.expect("at least one restart");
    Ok((w.frame, w.best, w.history, restart_best, evaluations))
}

fn section_search(
    mu: &Density,
    body: &StarBody,
    k: usize,
    budget: &SearchBudget,
    search_level: usize,
    report_level: usize,
    seed: u64,
    sense: Sense,
) -> Result<SearchTrace> {
    let n = body.dim();
    let (frame, best, history, restart_best, evaluations) =
        search_subspaces(n, k, budget, seed, sense, |h| section_value(mu, body, h, search_level))?;
    let estimate = section_measure(mu, body, &frame, report_level)?;
    Ok(SearchTrace {
        sense,
        best_value: best,
        best_subspace: frame,
        estimate,
        restarts: budget.restarts,
        iterations: budget.iterations,
        evaluations,
        seed,
        search_level,
        history,
        restart_best,
        heuristic: true,
    })
}

/// Heuristic `max_{H ∈ Gr_{n-k}} μ(K ∩ H)`; the search runs at `search_level`
/// and the winner is re-evaluated at `report_level`.
pub fn max_section(
    mu: &Density,
    body: &StarBody,
    k: usize,
    budget: &SearchBudget,
    search_level: usize,
    report_level: usize,
    seed: u64,
) -> Result<SearchTrace> {
    section_search(mu, body, k, budget, search_level, report_level, seed, Sense::Maximize)
}

/// Heuristic `min_{H ∈ Gr_{n-k}} μ(K ∩ H)`.
pub fn min_section(
    mu: &Density,
    body: &StarBody,
    k: usize,
    budget: &SearchBudget,
    search_level: usize,
    report_level: usize,
    seed: u64,
) -> Result<SearchTrace> {
    section_search(mu, body, k, budget, search_level, report_level, seed, Sense::Minimize)
}
