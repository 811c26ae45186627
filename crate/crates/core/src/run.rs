//! Replayable runs. A flat `key = value` configuration expands into cases;
//! every case is a pure function of its serialized form, identified by the
//! SHA-256 of that form.
//!
//! Lists: `n = 4..6` or `n = 4, 5, 6`; bodies and measures are separated by `;`
//! because their arguments use commas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bodies::Density;
use crate::counterexample::{run_counterexample, CounterexampleConfig};
use crate::error::{Error, Result};
use crate::fourier::certify::{intersection_body_test, parseval_check, sorted_orthant_grid, InverseNormTransform};
use crate::fourier::gegenbauer::DEFAULT_DEGREE;
use crate::grassmann::{haar_subspace, max_section};
use crate::notation::{parse_body, parse_body_at, parse_density, parse_density_at};
use crate::quadrature::{mc_measure, measure_body, section_measure, Estimate};
use crate::slicing::{
    empirical_c0, general_bound_table, general_constant, slicing_report, stability_check, verify_ellipsoid_bound,
    verify_unconditional_bound, CodimRule, FormulaTag, SlicingConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Volume,
    Measure,
    Section,
    #[serde(rename = "maxsection")]
    MaxSection,
    Verify,
    Table,
    Ftest,
    Counterexample,
    Parseval,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Volume,
        Command::Measure,
        Command::Section,
        Command::MaxSection,
        Command::Verify,
        Command::Table,
        Command::Ftest,
        Command::Counterexample,
        Command::Parseval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Volume => "volume",
            Command::Measure => "measure",
            Command::Section => "section",
            Command::MaxSection => "maxsection",
            Command::Verify => "verify",
            Command::Table => "table",
            Command::Ftest => "ftest",
            Command::Counterexample => "counterexample",
            Command::Parseval => "parseval",
        }
    }

    fn needs_k(self) -> bool {
        matches!(self, Command::Section | Command::MaxSection | Command::Verify | Command::Table)
    }

    fn uses_body(self) -> bool {
        !matches!(self, Command::Table)
    }

    fn uses_measure(self) -> bool {
        matches!(self, Command::Measure | Command::Section | Command::MaxSection | Command::Verify)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

fn parse_formula(s: &str) -> Option<FormulaTag> {
    match s.trim() {
        "stability" => Some(FormulaTag::Stability),
        "unconditional" => Some(FormulaTag::Unconditional),
        "ellipsoid" => Some(FormulaTag::Ellipsoid),
        "general" => Some(FormulaTag::General),
        _ => None,
    }
}

/// Everything a run depends on. Lists expand into a Cartesian product of cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    /// `k = ceil(λ n)`; overrides `k` when set.
    pub lambda: Option<f64>,
    pub body: Vec<String>,
    pub measure: Vec<String>,
    /// Cubature level; per-command defaults come from the node budgets.
    pub level: Option<usize>,
    /// Monte Carlo sample count; switches `volume` and `measure` to sampling.
    pub samples: Option<usize>,
    pub slicing: SlicingConfig,
    pub formula: FormulaTag,
    pub c0: f64,
    /// Sign-test grid resolution.
    pub resolution: usize,
    pub degree: usize,
    /// Exponent `a` of the Parseval pair `(-a, -n + a)`.
    pub exponent: f64,
    /// Second body of the Parseval pair.
    pub against: String,
    pub counterexample: CounterexampleConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Volume,
            n: vec![4],
            k: vec![1],
            lambda: None,
            body: vec!["ball".into()],
            measure: vec!["uniform".into()],
            level: None,
            samples: None,
            slicing: SlicingConfig::default(),
            formula: FormulaTag::Stability,
            c0: 1.0,
            resolution: 16,
            degree: DEFAULT_DEGREE,
            exponent: 1.0,
            against: "ball".into(),
            counterexample: CounterexampleConfig::default(),
            seed: 7,
        }
    }
}

fn bad(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn scalar<T: FromStr>(value: &str, line: usize, field: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(line, field, format!("cannot parse `{}`", value.trim())))
}

/// `4..6`, `4..=6` or `4, 5, 6`.
fn int_list(value: &str, line: usize, field: &str) -> Result<Vec<usize>> {
    let value = value.trim();
    if let Some((lo, hi)) = value.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi): (usize, usize) = (scalar(lo, line, field)?, scalar(hi, line, field)?);
        if lo > hi {
            return Err(bad(line, field, format!("empty range `{value}`")));
        }
        return Ok((lo..=hi).collect());
    }
    let out: Vec<usize> = value
        .split(',')
        .map(|v| scalar(v, line, field))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(bad(line, field, "empty list"));
    }
    Ok(out)
}

fn description_list(value: &str, line: usize, field: &str) -> Result<Vec<String>> {
    let out: Vec<String> = value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect();
    if out.is_empty() {
        return Err(bad(line, field, "empty list"));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one `key = value` setting; `line` 0 marks a command-line override.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let key = key.trim();
        match key {
            "command" => self.command = value.parse().map_err(|m: String| bad(line, key, m))?,
            "n" => self.n = int_list(value, line, key)?,
            "k" => self.k = int_list(value, line, key)?,
            "lambda" => {
                let lambda: f64 = scalar(value, line, key)?;
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(bad(line, key, "lambda must lie in (0, 1)"));
                }
                self.lambda = Some(lambda);
            }
            "body" => self.body = description_list(value, line, key)?,
            "measure" => self.measure = description_list(value, line, key)?,
            "level" => self.level = Some(scalar(value, line, key)?),
            "samples" => self.samples = Some(scalar(value, line, key)?),
            "budget" => {
                let (r, i) = value
                    .split_once(['x', 'X', ','])
                    .ok_or_else(|| bad(line, key, "expected RESTARTSxITERATIONS"))?;
                self.slicing.budget.restarts = scalar(r, line, key)?;
                self.slicing.budget.iterations = scalar(i, line, key)?;
            }
            "restarts" => self.slicing.budget.restarts = scalar(value, line, key)?,
            "iterations" => self.slicing.budget.iterations = scalar(value, line, key)?,
            "search_nodes" => self.slicing.search_nodes = scalar(value, line, key)?,
            "report_nodes" => self.slicing.report_nodes = scalar(value, line, key)?,
            "volume_nodes" => self.slicing.volume_nodes = scalar(value, line, key)?,
            "formula" => {
                self.formula = parse_formula(value).ok_or_else(|| {
                    bad(line, key, "expected stability, unconditional, ellipsoid or general")
                })?
            }
            "c0" => self.c0 = scalar(value, line, key)?,
            "resolution" => self.resolution = scalar(value, line, key)?,
            "degree" => self.degree = scalar(value, line, key)?,
            "exponent" => self.exponent = scalar(value, line, key)?,
            "against" => self.against = value.trim().to_string(),
            "directions" => self.counterexample.directions = scalar(value, line, key)?,
            "convexity_trials" => self.counterexample.convexity_trials = scalar(value, line, key)?,
            "seed" => {
                self.seed = scalar(value, line, key)?;
                self.slicing.seed = self.seed;
                self.counterexample.seed = self.seed;
            }
            other => return Err(bad(line, other, "unknown key")),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(i + 1, line, "expected `key = value`"))?;
            self.set(key, value, i + 1)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    fn codims(&self, n: usize) -> Vec<usize> {
        match self.lambda {
            Some(lambda) => vec![CodimRule::Proportional(lambda).codim(n)],
            None => self.k.clone(),
        }
    }

    /// Expands the lists into cases, parsing every body and measure once so
    /// that description errors surface before anything runs.
    pub fn cases(&self) -> Result<Vec<Case>> {
        let mut out = Vec::new();
        for &n in &self.n {
            if n < 2 {
                return Err(bad(0, "n", format!("dimension {n} is below 2")));
            }
            let ks: Vec<Option<usize>> = if self.command.needs_k() {
                self.codims(n).into_iter().map(Some).collect()
            } else {
                vec![None]
            };
            let bodies = if self.command.uses_body() { self.body.clone() } else { vec![String::new()] };
            let measures = if self.command.uses_measure() {
                self.measure.clone()
            } else {
                vec![String::new()]
            };
            for k in ks {
                if let Some(k) = k {
                    if k == 0 || k >= n {
                        return Err(bad(0, "k", format!("codimension {k} is outside 1..={}", n - 1)));
                    }
                }
                for body in &bodies {
                    if self.command.uses_body() {
                        parse_body_at(body, n, 0, "body")?;
                    }
                    for measure in &measures {
                        if self.command.uses_measure() {
                            parse_density_at(measure, n, 0, "measure")?;
                        }
                        if self.command == Command::Parseval {
                            parse_body_at(&self.against, n, 0, "against")?;
                        }
                        out.push(self.case(n, k, body, measure));
                    }
                }
            }
        }
        Ok(out)
    }

    fn case(&self, n: usize, k: Option<usize>, body: &str, measure: &str) -> Case {
        let mut counterexample = self.counterexample.clone();
        counterexample.resolution = self.resolution;
        if let Some(level) = self.level {
            counterexample.section_level = level;
            counterexample.volume_level = level;
        }
        Case {
            command: self.command,
            n,
            k,
            body: body.to_string(),
            measure: measure.to_string(),
            level: self.level,
            samples: self.samples,
            slicing: self.slicing.clone(),
            formula: self.formula,
            c0: self.c0,
            resolution: self.resolution,
            degree: self.degree,
            exponent: self.exponent,
            against: if self.command == Command::Parseval { self.against.clone() } else { String::new() },
            counterexample,
            seed: self.seed,
        }
    }
}

/// A single unit of work, fully determined by its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub command: Command,
    pub n: usize,
    pub k: Option<usize>,
    pub body: String,
    pub measure: String,
    pub level: Option<usize>,
    pub samples: Option<usize>,
    pub slicing: SlicingConfig,
    pub formula: FormulaTag,
    pub c0: f64,
    pub resolution: usize,
    pub degree: usize,
    pub exponent: f64,
    pub against: String,
    pub counterexample: CounterexampleConfig,
    pub seed: u64,
}

/// Hex SHA-256 of the JSON form of `value`.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("configurations serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Result of one case. `passed` is `None` for commands without a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub value: f64,
    pub bound: Option<f64>,
    pub passed: Option<bool>,
    /// Standard error of `value` for sampled estimates.
    pub stderr: f64,
    pub detail: Value,
    /// Plot-ready rows, with column names in `plot_columns`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plot_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plot: Vec<Vec<f64>>,
}

impl Outcome {
    fn plain(value: f64, stderr: f64, detail: Value) -> Self {
        Self {
            value,
            bound: None,
            passed: None,
            stderr,
            detail,
            plot_columns: Vec::new(),
            plot: Vec::new(),
        }
    }

    fn from_estimate(e: &Estimate, detail: Value) -> Self {
        Self::plain(e.value, e.stderr, detail)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

impl Case {
    pub fn digest(&self) -> String {
        config_digest(self)
    }

    fn density(&self) -> Result<Density> {
        parse_density(&self.measure, self.n)
    }

    fn codim(&self) -> Result<usize> {
        self.k.ok_or_else(|| Error::InvalidCodimension { k: 0, max: self.n - 1 })
    }

    fn estimate(&self, mu: &Density) -> Result<Estimate> {
        let body = parse_body(&self.body, self.n)?;
        match self.samples {
            Some(samples) => mc_measure(mu, &body, samples, self.seed),
            None => measure_body(mu, &body, self.level.unwrap_or(self.slicing.volume_level(self.n))),
        }
    }

    pub fn run(&self) -> Result<Outcome> {
        let n = self.n;
        match self.command {
            Command::Volume => {
                let e = self.estimate(&Density::uniform(n))?;
                let exact = parse_body(&self.body, n)?.closed_form_volume();
                Ok(Outcome::from_estimate(&e, json!({ "estimate": e, "closed_form": exact })))
            }
            Command::Measure => {
                let e = self.estimate(&self.density()?)?;
                Ok(Outcome::from_estimate(&e, json!({ "estimate": e })))
            }
            Command::Section => {
                let k = self.codim()?;
                let body = parse_body(&self.body, n)?;
                let h = haar_subspace(n, k, self.seed)?;
                let level = self.level.unwrap_or(self.slicing.report_level(n, k));
                let e = section_measure(&self.density()?, &body, &h, level)?;
                Ok(Outcome::from_estimate(&e, json!({ "estimate": e, "subspace": h })))
            }
            Command::MaxSection => {
                let k = self.codim()?;
                let body = parse_body(&self.body, n)?;
                let search_level = self.level.unwrap_or(self.slicing.search_level(n, k));
                let trace = max_section(
                    &self.density()?,
                    &body,
                    k,
                    &self.slicing.budget,
                    search_level,
                    self.slicing.report_level(n, k),
                    self.seed,
                )?;
                Ok(Outcome::from_estimate(&trace.estimate, to_value(&trace)))
            }
            Command::Verify => self.verify(),
            Command::Table => {
                let k = self.codim()?;
                let rows = general_bound_table([n], CodimRule::Fixed(k), self.c0)?;
                let row = &rows[0];
                Ok(Outcome::plain(row.constant, 0.0, to_value(row)))
            }
            Command::Ftest => self.ftest(),
            Command::Counterexample => {
                let body = parse_body(&self.body, n)?;
                let (_, report) = run_counterexample(&body, &self.counterexample)?;
                let plot = report
                    .sections
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.height,
                            r.height.clamp(-1.0, 1.0).acos(),
                            r.section_l.value,
                            r.section_k.value,
                            r.gap,
                            r.predicted_k.unwrap_or(f64::NAN),
                        ]
                    })
                    .collect();
                Ok(Outcome {
                    value: report.volume.gap,
                    bound: Some(report.c_n1 * report.sections.min_gap),
                    passed: Some(report.passed),
                    stderr: 0.0,
                    detail: to_value(&report),
                    plot_columns: ["height", "angle", "section_l", "section_k", "gap", "predicted_k"]
                        .map(String::from)
                        .to_vec(),
                    plot,
                })
            }
            Command::Parseval => {
                let k_body = parse_body(&self.body, n)?;
                let l_body = parse_body(&self.against, n)?;
                let report = parseval_check(&k_body, &l_body, self.exponent, self.degree)?;
                Ok(Outcome {
                    value: report.rel_gap,
                    bound: Some(PARSEVAL_TOL),
                    passed: Some(report.rel_gap < PARSEVAL_TOL),
                    stderr: 0.0,
                    detail: to_value(&report),
                    plot_columns: Vec::new(),
                    plot: Vec::new(),
                })
            }
        }
    }

    fn verify(&self) -> Result<Outcome> {
        let k = self.codim()?;
        let body = parse_body(&self.body, self.n)?;
        let mu = self.density()?;
        let (report, detail) = match self.formula {
            FormulaTag::Stability => {
                let r = stability_check(&mu, &body, k, &self.slicing)?;
                let d = json!({ "report": r });
                (r, d)
            }
            FormulaTag::Unconditional => {
                let (r, cert) = verify_unconditional_bound(&mu, &body, k, &self.slicing)?;
                let d = json!({ "report": r, "certificate": cert });
                (r, d)
            }
            FormulaTag::Ellipsoid => {
                let (r, cert) = verify_ellipsoid_bound(&mu, &body, k, &self.slicing)?;
                let d = json!({ "report": r, "certificate": cert });
                (r, d)
            }
            FormulaTag::General => {
                let constant = general_constant(self.n, k, self.c0)?;
                let r = slicing_report(&mu, &body, k, FormulaTag::General, constant, &self.slicing)?;
                let d = json!({ "report": r, "empirical_c0": empirical_c0(&r)? });
                (r, d)
            }
        };
        Ok(Outcome {
            value: report.lhs,
            bound: Some(report.rhs),
            passed: Some(report.passed),
            stderr: report.mu_l.stderr,
            detail,
            plot_columns: Vec::new(),
            plot: Vec::new(),
        })
    }

    fn ftest(&self) -> Result<Outcome> {
        let body = parse_body(&self.body, self.n)?;
        let test = intersection_body_test(&body, self.resolution)?;
        let transform = InverseNormTransform::new(&body, self.degree)?;
        let mut plot = Vec::new();
        for theta in sorted_orthant_grid(self.n, self.resolution) {
            if let Some(v) = transform.eval(&theta)? {
                let mut row = theta;
                row.push(v);
                plot.push(row);
            }
        }
        let mut columns: Vec<String> = (1..=self.n).map(|i| format!("theta_{i}")).collect();
        columns.push("transform".into());
        Ok(Outcome {
            value: test.min_value,
            bound: Some(-test.tolerance),
            passed: None,
            stderr: 0.0,
            detail: to_value(&test),
            plot_columns: columns,
            plot,
        })
    }
}

/// Relative gap accepted by the `parseval` command.
pub const PARSEVAL_TOL: f64 = 1e-3;

/// One line of a record stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub digest: String,
    pub seed: u64,
    pub case: Case,
    pub outcome: Outcome,
}

impl Record {
    pub fn new(index: usize, case: Case, outcome: Outcome) -> Self {
        Self {
            index,
            digest: case.digest(),
            seed: case.seed,
            case,
            outcome,
        }
    }
}

/// Comparison of a stored record with a fresh run of its case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replay {
    pub digest_matches: bool,
    /// Every reported number is bit-identical.
    pub identical: bool,
    /// `|new - old| ≤ σ` on the headline value (always true when `identical`).
    pub within_sigma: bool,
}

impl Replay {
    pub fn reproduced(&self) -> bool {
        self.digest_matches && (self.identical || self.within_sigma)
    }
}

pub fn replay(record: &Record) -> Result<Replay> {
    let digest_matches = record.case.digest() == record.digest;
    let fresh = record.case.run()?;
    let old = &record.outcome;
    let identical = to_value(&fresh) == to_value(old);
    let within_sigma = identical || (fresh.value - old.value).abs() <= old.stderr.max(fresh.stderr);
    Ok(Replay {
        digest_matches,
        identical,
        within_sigma,
    })
}
