//! `slicelab` command-line front end.
//!
//! Exit status: 0 when every case passes, 1 when any case fails or a record
//! does not replay, 2 for configuration errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use slicelab::run::replay;
use slicelab::{Case, Command, Error, Outcome, Record, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "slicelab", version, about = "Volumes, sections and slicing inequalities of star bodies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Volume of each body.
    Volume(RunArgs),
    /// `μ(L)` for each body and measure.
    Measure(RunArgs),
    /// Section by a Haar-random subspace drawn from the seed.
    Section(RunArgs),
    /// Heuristic maximal section over the Grassmannian.
    Maxsection(RunArgs),
    /// Slicing inequality checks for the chosen `--formula`.
    Verify(RunArgs),
    /// Constants of the general bound, one row per dimension.
    Table(RunArgs),
    /// Intersection-body sign test of the inverse gauge transform.
    Ftest(RunArgs),
    /// Perturbation of a seed body that defeats slicing constant one.
    Counterexample(RunArgs),
    /// Spherical Parseval identity for `--body` against `--against`.
    Parseval(RunArgs),
    /// Re-run every record of a JSONL file and compare.
    Replay {
        records: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Records,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dimensions: `5`, `4..6` or `4,5,6`.
    #[arg(long)]
    n: Option<String>,
    /// Codimensions, same syntax as `--n`.
    #[arg(long)]
    k: Option<String>,
    /// Proportional codimension `k = ceil(λ n)`.
    #[arg(long)]
    lambda: Option<String>,
    /// Body descriptions; repeat or separate with `;`.
    #[arg(long)]
    body: Vec<String>,
    /// Measure descriptions; repeat or separate with `;`.
    #[arg(long)]
    measure: Vec<String>,
    #[arg(long)]
    level: Option<String>,
    /// Monte Carlo samples instead of cubature.
    #[arg(long)]
    samples: Option<String>,
    /// Search budget as `RESTARTSxITERATIONS`.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    /// stability, unconditional, ellipsoid or general.
    #[arg(long)]
    formula: Option<String>,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    #[arg(long)]
    exponent: Option<String>,
    #[arg(long)]
    against: Option<String>,
    /// Any other configuration key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write plot-ready rows (transform grid, section gaps) as CSV.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Records)]
    format: Format,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::InvalidBody(_)
            | Error::InvalidDensity(_)
            | Error::NonConvexExponent { .. }
            | Error::InvalidCodimension { .. }
            | Error::OutOfRange(_)
            | Error::UnsupportedBody(_)
            | Error::HypothesisNotMet(_)
            | Error::NotACounterexampleSeed { .. }
            | Error::DimensionMismatch { .. }
    )
}

fn build_config(command: Command, args: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        config
            .apply_text(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    }
    let mut overrides: Vec<(&str, String)> = vec![("command", command.name().to_string())];
    let scalars = [
        ("n", &args.n),
        ("k", &args.k),
        ("lambda", &args.lambda),
        ("level", &args.level),
        ("samples", &args.samples),
        ("budget", &args.budget),
        ("seed", &args.seed),
        ("c0", &args.c0),
        ("formula", &args.formula),
        ("resolution", &args.resolution),
        ("degree", &args.degree),
        ("exponent", &args.exponent),
        ("against", &args.against),
    ];
    overrides.extend(scalars.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))));
    if !args.body.is_empty() {
        overrides.push(("body", args.body.join(";")));
    }
    if !args.measure.is_empty() {
        overrides.push(("measure", args.measure.join(";")));
    }
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        overrides.push((key, value.to_string()));
    }
    for (key, value) in overrides {
        config
            .set(key, &value, 0)
            .map_err(|e| Failure::Config(format!("command line: {e}")))?;
    }
    Ok(config)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    index: usize,
    command: &'a str,
    n: usize,
    k: Option<usize>,
    body: &'a str,
    measure: &'a str,
    value: f64,
    stderr: f64,
    bound: Option<f64>,
    verdict: &'a str,
    seed: u64,
    digest: &'a str,
}

fn verdict(outcome: &Outcome) -> &'static str {
    match outcome.passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "-",
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn write_records(records: &[Record], format: Format, out: Option<&Path>) -> Result<()> {
    let mut sink = open_output(out)?;
    match format {
        Format::Records => {
            for r in records {
                serde_json::to_writer(&mut sink, r)?;
                writeln!(sink)?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            for r in records {
                w.serialize(SummaryRow {
                    index: r.index,
                    command: r.case.command.name(),
                    n: r.case.n,
                    k: r.case.k,
                    body: &r.case.body,
                    measure: &r.case.measure,
                    value: r.outcome.value,
                    stderr: r.outcome.stderr,
                    bound: r.outcome.bound,
                    verdict: verdict(&r.outcome),
                    seed: r.seed,
                    digest: &r.digest,
                })?;
            }
            w.flush()?;
            return Ok(());
        }
    }
    sink.flush()?;
    Ok(())
}

fn write_plot(records: &[Record], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header_written = false;
    for r in records.iter().filter(|r| !r.outcome.plot.is_empty()) {
        if !header_written {
            let mut header = vec!["index".to_string()];
            header.extend(r.outcome.plot_columns.iter().cloned());
            w.write_record(&header)?;
            header_written = true;
        }
        for row in &r.outcome.plot {
            let mut fields = vec![r.index.to_string()];
            fields.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&fields)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(command: Command, args: &RunArgs) -> std::result::Result<bool, Failure> {
    let config = build_config(command, args)?;
    let cases: Vec<Case> = config.cases().map_err(|e| Failure::Config(e.to_string()))?;
    let results: Vec<slicelab::Result<Outcome>> = cases.par_iter().map(Case::run).collect();
    let mut records = Vec::with_capacity(cases.len());
    let mut config_error = None;
    let mut run_errors = 0;
    for (index, (case, result)) in cases.into_iter().zip(results).enumerate() {
        match result {
            Ok(outcome) => records.push(Record::new(index, case, outcome)),
            Err(e) => {
                eprintln!("case {index} ({} n={} {}): {e}", case.command, case.n, case.body);
                if is_config_error(&e) {
                    config_error.get_or_insert(e.to_string());
                } else {
                    run_errors += 1;
                }
            }
        }
    }
    write_records(&records, args.format, args.out.as_deref())?;
    if let Some(path) = &args.plot {
        write_plot(&records, path)?;
    }
    let failed = records.iter().filter(|r| r.outcome.passed == Some(false)).count();
    let passed = records.iter().filter(|r| r.outcome.passed == Some(true)).count();
    eprintln!(
        "{} cases: {passed} passed, {failed} failed, {} errors",
        records.len() + run_errors + usize::from(config_error.is_some()),
        run_errors + usize::from(config_error.is_some())
    );
    if let Some(message) = config_error {
        return Err(Failure::Config(message));
    }
    Ok(failed == 0 && run_errors == 0)
}

fn replay_file(path: &Path) -> std::result::Result<bool, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let records: Vec<Record> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect::<std::result::Result<_, _>>()?;
    let checks: Vec<_> = records.par_iter().map(replay).collect();
    let mut all = true;
    for (record, check) in records.iter().zip(checks) {
        match check {
            Ok(c) => {
                let ok = c.reproduced();
                all &= ok;
                println!(
                    "{} {} {} identical={} within_sigma={}",
                    record.index,
                    record.digest,
                    if ok { "REPRODUCED" } else { "MISMATCH" },
                    c.identical,
                    c.within_sigma
                );
            }
            Err(e) => {
                all = false;
                println!("{} {} ERROR {e}", record.index, record.digest);
            }
        }
    }
    Ok(all)
}

fn init_threads() -> std::result::Result<(), Failure> {
    if let Ok(value) = std::env::var("SLICELAB_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("SLICELAB_THREADS=`{value}` is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Run(e.into()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Cmd::Volume(a) => run(Command::Volume, a),
        Cmd::Measure(a) => run(Command::Measure, a),
        Cmd::Section(a) => run(Command::Section, a),
        Cmd::Maxsection(a) => run(Command::MaxSection, a),
        Cmd::Verify(a) => run(Command::Verify, a),
        Cmd::Table(a) => run(Command::Table, a),
        Cmd::Ftest(a) => run(Command::Ftest, a),
        Cmd::Counterexample(a) => run(Command::Counterexample, a),
        Cmd::Parseval(a) => run(Command::Parseval, a),
        Cmd::Replay { records } => replay_file(records),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(message)) => {
            eprintln!("configuration error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
