//! Subcommands and their dispatch.

use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use refracted_core::{
    simulate_exit, simulate_occupation, simulate_path, BarrierMode, BiasBound, LevySpec,
    Observable, QuadOptions, RefractedSpec, ScaleEvaluator, SimConfig,
};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::{load_model, Scenario, Suite};
use crate::error::{CliError, Result};
use crate::report::{emit_report, fmt_float, to_csv, to_json, write_output, CheckRecord, Format};
use crate::suites::{kl_checks, run_suite};

pub const DEFAULT_N: u32 = 64;
pub const DEFAULT_REPS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(
    name = "refracted",
    version,
    about = "Scale functions, refracted Lévy identities and their Monte Carlo checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. List-valued flags take comma-separated
/// values; write negative values as `--b=-1` or `--x -1,0`.
#[derive(Args, Clone, Debug, PartialEq)]
pub struct Common {
    /// Model file of X (TOML: family, delta, lambda, mu | alpha)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Model file of Y; defaults to the X model
    #[arg(long = "model-y")]
    pub model_y: Option<PathBuf>,
    /// Discount rates
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1",
        allow_hyphen_values = true
    )]
    pub q: Vec<f64>,
    /// Start points
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_hyphen_values = true
    )]
    pub x: Vec<f64>,
    /// Second arguments (targets of densities, lower arguments of W_U)
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "-1",
        allow_hyphen_values = true
    )]
    pub y: Vec<f64>,
    /// Upper barrier
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Lower barrier
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Truncation level for simulation [default: 64; validate: from the scenario]
    #[arg(long)]
    pub n: Option<u32>,
    /// Monte Carlo replicates [default: 100000; validate: from the scenario]
    #[arg(long)]
    pub reps: Option<u64>,
    /// Base seed [default: 2024; validate: from the scenario]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative quadrature tolerance; for kl-check the relative check tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Exit,
    Occupation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// W^(q)(x) and W^(q)'(x) of the X model
    Scale(Common),
    /// Φ(q) and Ψ'(Φ(q)) of the X model
    Phi(Common),
    /// Exit transform of X: two-sided with --b and --a, one-sided with --a
    ExitLevy(Common),
    /// Potential density of X killed at the given barriers (none, --b, --a or both)
    PotentialLevy(Common),
    /// W_U^(q)(x, y) for the refracted pair (X, Y)
    Wu(Common),
    /// E_x[e^{−qτ_a⁺}; τ_a⁺ < τ_b⁻] for U; one-sided without --b
    Exit(Common),
    /// Killed potential density of U on [b, a]
    Potential(Common),
    /// R_U^(q) f(x) for f = 1 or an indicator
    Resolvent {
        #[command(flatten)]
        common: Common,
        /// f = 1_{(lo, hi]} instead of f = 1
        #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true, value_names = ["LO,HI"])]
        indicator: Option<Vec<f64>>,
    },
    /// Normalization constant, directly and through q·N_U 1
    Normalization(Common),
    /// Generalized formulas against the drift-refracted closed forms (Y = X + α·t)
    KlCheck {
        #[command(flatten)]
        common: Common,
        /// Refraction drift α
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Monte Carlo estimates for the truncated process U^(n)
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Estimator::Exit)]
        estimator: Estimator,
        /// Number of occupation bins splitting [b, a]
        #[arg(long, default_value_t = 10)]
        bins: usize,
        /// Time cap [default: 50/q]
        #[arg(long)]
        t_max: Option<f64>,
        /// Write the event logs of the first --log-paths replicas here (JSON lines)
        #[arg(long)]
        event_log: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        log_paths: u64,
    },
    /// Run a validation suite from a scenario file and write the report
    Validate {
        #[command(flatten)]
        common: Common,
        /// Scenario file
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's suite
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        /// Include per-check wall-clock seconds (makes the report non-reproducible)
        #[arg(long)]
        timings: bool,
    },
}

/// Parses arguments, runs the command and returns the process exit status:
/// 0 success, 1 failed checks, 2 usage or configuration error, 3 numerical
/// error, 4 I/O error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command; `Ok(false)` means some check failed.
pub fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Scale(c) => {
            let x = model_x(&c)?;
            let mut t = Table::new(&["q", "x", "w", "w_prime"]);
            for &q in &c.q {
                let ev = ScaleEvaluator::new(&x, q)?;
                for &p in &c.x {
                    t.push(vec![
                        q.into(),
                        p.into(),
                        ev.w(p).into(),
                        ev.w_prime(p).into(),
                    ]);
                }
            }
            t.emit(&c)
        }
        Command::Phi(c) => {
            let x = model_x(&c)?;
            let mut t = Table::new(&["q", "phi", "psi_prime_phi"]);
            for &q in &c.q {
                let ev = ScaleEvaluator::new(&x, q)?;
                t.push(vec![q.into(), ev.phi().into(), ev.psi_prime_phi().into()]);
            }
            t.emit(&c)
        }
        Command::ExitLevy(c) => {
            let x = model_x(&c)?;
            let mode = match (c.b, c.a) {
                (Some(b), Some(a)) => BarrierMode::Both { b, a },
                (None, Some(a)) => BarrierMode::Upper { a },
                _ => {
                    return Err(CliError::Usage(
                        "exit-levy needs --a (and optionally --b)".into(),
                    ))
                }
            };
            let mut t = Table::new(&["q", "x", "value"]);
            for &q in &c.q {
                let ev = ScaleEvaluator::new(&x, q)?;
                for &p in &c.x {
                    t.push(vec![q.into(), p.into(), ev.exit_levy(mode, p)?.into()]);
                }
            }
            t.emit(&c)
        }
        Command::PotentialLevy(c) => {
            let x = model_x(&c)?;
            let mode = match (c.b, c.a) {
                (Some(b), Some(a)) => BarrierMode::Both { b, a },
                (Some(b), None) => BarrierMode::Lower { b },
                (None, Some(a)) => BarrierMode::Upper { a },
                (None, None) => BarrierMode::None,
            };
            let mut t = Table::new(&["q", "x", "y", "density"]);
            for &q in &c.q {
                let ev = ScaleEvaluator::new(&x, q)?;
                for &p in &c.x {
                    for &y in &c.y {
                        t.push(vec![
                            q.into(),
                            p.into(),
                            y.into(),
                            ev.potential_density(mode, p, y)?.into(),
                        ]);
                    }
                }
            }
            t.emit(&c)
        }
        Command::Wu(c) => {
            let rs = refracted(&c)?;
            let mut t = Table::new(&["q", "x", "y", "value", "error"]);
            for &q in &c.q {
                let ev = rs.at(q)?.with_options(quad(&c));
                for &p in &c.x {
                    for &y in &c.y {
                        let w = ev.w_u(p, y)?;
                        t.push(vec![
                            q.into(),
                            p.into(),
                            y.into(),
                            w.value.into(),
                            w.error.into(),
                        ]);
                    }
                }
            }
            t.emit(&c)
        }
        Command::Exit(c) => {
            let rs = refracted(&c)?;
            let a =
                c.a.ok_or_else(|| CliError::Usage("exit needs --a".into()))?;
            let mut t = Table::new(&["q", "x", "value"]);
            for &q in &c.q {
                let ev = rs.at(q)?.with_options(quad(&c));
                for &p in &c.x {
                    let v = match c.b {
                        Some(b) => ev.exit_up(b, p, a)?,
                        None => ev.exit_up_one_sided(p, a)?,
                    };
                    t.push(vec![q.into(), p.into(), v.into()]);
                }
            }
            t.emit(&c)
        }
        Command::Potential(c) => {
            let rs = refracted(&c)?;
            let (b, a) = barriers(&c, "potential")?;
            let mut t = Table::new(&["q", "x", "y", "density"]);
            for &q in &c.q {
                let ev = rs.at(q)?.with_options(quad(&c));
                for &p in &c.x {
                    for &y in &c.y {
                        t.push(vec![
                            q.into(),
                            p.into(),
                            y.into(),
                            ev.killed_potential_density(b, a, p, y)?.into(),
                        ]);
                    }
                }
            }
            t.emit(&c)
        }
        Command::Resolvent {
            common: c,
            indicator,
        } => {
            let rs = refracted(&c)?;
            let f = match indicator.as_deref() {
                None => Observable::constant(1.0),
                Some([lo, hi]) if lo < hi => Observable::indicator(*lo, *hi),
                Some(v) => {
                    return Err(CliError::Usage(format!(
                        "--indicator needs LO,HI with LO < HI, got {v:?}"
                    )))
                }
            };
            let mut t = Table::new(&["q", "x", "value", "error"]);
            for &q in &c.q {
                let ev = rs.at(q)?.with_resolvent_options(resolvent_quad(&c));
                for &p in &c.x {
                    let r = ev.resolvent(p, &f)?;
                    t.push(vec![q.into(), p.into(), r.value.into(), r.error.into()]);
                }
            }
            t.emit(&c)
        }
        Command::Normalization(c) => {
            let rs = refracted(&c)?;
            let mut t = Table::new(&["q", "direct", "direct_error", "dual", "dual_error"]);
            for &q in &c.q {
                let ev = rs
                    .at(q)?
                    .with_options(quad(&c))
                    .with_resolvent_options(resolvent_quad(&c));
                let d = ev.normalization()?;
                let r = ev.normalization_via_resolvent()?;
                t.push(vec![
                    q.into(),
                    d.value.into(),
                    d.error.into(),
                    r.value.into(),
                    r.error.into(),
                ]);
            }
            t.emit(&c)
        }
        Command::KlCheck { common: c, alpha } => {
            let x = model_x(&c)?;
            let (b, a) = match (c.b, c.a) {
                (None, None) => (-2.0, 2.0),
                _ => barriers(&c, "kl-check")?,
            };
            let tol = c.tol.unwrap_or(1e-5);
            let mut records = Vec::new();
            for &q in &c.q {
                records.extend(kl_checks(&x, alpha, q, b, a, &c.x, &c.y, tol));
            }
            for r in &mut records {
                r.seconds = None;
            }
            let digest = digest_of(&(&x, alpha, &c.q, b, a, &c.x, &c.y, tol));
            emit_report(&records, &digest, c.format, c.out.as_deref())?;
            Ok(summarize(&records))
        }
        Command::Simulate {
            common: c,
            estimator,
            bins,
            t_max,
            event_log,
            log_paths,
        } => simulate(&c, estimator, bins, t_max, event_log.as_deref(), log_paths),
        Command::Validate {
            common: c,
            config,
            suite,
            timings,
        } => {
            let mut scenario = Scenario::load(&config)?;
            if let Some(s) = suite {
                scenario.suite = s;
            }
            if let Some(seed) = c.seed {
                scenario.mc.seed = seed;
            }
            if let Some(reps) = c.reps {
                scenario.mc.reps = reps;
            }
            let mut records = run_suite(&scenario);
            if !timings {
                for r in &mut records {
                    r.seconds = None;
                }
            }
            emit_report(&records, &scenario.digest(), c.format, c.out.as_deref())?;
            Ok(summarize(&records))
        }
    }
}

fn simulate(
    c: &Common,
    estimator: Estimator,
    bins: usize,
    t_max: Option<f64>,
    event_log: Option<&Path>,
    log_paths: u64,
) -> Result<bool> {
    let rs = refracted(c)?;
    let n = c.n.unwrap_or(DEFAULT_N);
    let reps = c.reps.unwrap_or(DEFAULT_REPS);
    let seed = c.seed.unwrap_or(DEFAULT_SEED);
    let mut t = Table::new(&[
        "estimator",
        "x0",
        "q",
        "n",
        "R",
        "mean",
        "stderr",
        "bias_bound",
        "censored",
        "seed",
    ]);
    let mut log_lines = Vec::new();
    for &q in &c.q {
        for &x0 in &c.x {
            let mut cfg = SimConfig::new(rs.clone(), Some(n), x0, q)
                .with_reps(reps)
                .with_seed(seed);
            cfg.a = c.a;
            cfg.b = c.b;
            cfg.t_max = t_max;
            let mut row = |name: String, est: refracted_core::FunctionalEstimate| {
                let bias = match est.bias_bound {
                    BiasBound::Bound(v) => v,
                    BiasBound::Unknown => f64::NAN,
                };
                t.push(vec![
                    Cell::Text(name),
                    x0.into(),
                    q.into(),
                    Cell::Int(n as u64),
                    Cell::Int(est.reps),
                    est.mean.into(),
                    est.std_error.into(),
                    bias.into(),
                    Cell::Int(est.censored),
                    Cell::Int(est.seed),
                ]);
            };
            match estimator {
                Estimator::Exit => row("exit".into(), simulate_exit(&cfg)?),
                Estimator::Occupation => {
                    let (b, a) = barriers(c, "occupation")?;
                    if bins == 0 {
                        return Err(CliError::Usage("--bins must be positive".into()));
                    }
                    let edges: Vec<f64> = (0..=bins)
                        .map(|i| b + (a - b) * i as f64 / bins as f64)
                        .collect();
                    let occ = simulate_occupation(&cfg, &edges)?;
                    for (w, est) in edges.windows(2).zip(occ.bins) {
                        row(
                            format!("occupation({},{}]", fmt_float(w[0]), fmt_float(w[1])),
                            est,
                        );
                    }
                }
            }
            if event_log.is_some() {
                for r in 0..log_paths.min(reps) {
                    let path = simulate_path(&cfg, r)?;
                    log_lines.push(serde_json::to_string(&path).expect("path serializes"));
                }
            }
        }
    }
    if let Some(p) = event_log {
        let mut text = log_lines.join("\n");
        text.push('\n');
        write_output(text.as_bytes(), Some(p))?;
    }
    t.emit(c)
}

fn model_x(c: &Common) -> Result<LevySpec> {
    let path = c
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    load_model(path)
}

fn refracted(c: &Common) -> Result<RefractedSpec> {
    let x = model_x(c)?;
    let y = match &c.model_y {
        Some(p) => load_model(p)?,
        None => x.clone(),
    };
    Ok(RefractedSpec::new(x, y)?)
}

fn barriers(c: &Common, what: &str) -> Result<(f64, f64)> {
    match (c.b, c.a) {
        (Some(b), Some(a)) => Ok((b, a)),
        _ => Err(CliError::Usage(format!("{what} needs --b and --a"))),
    }
}

fn quad(c: &Common) -> QuadOptions {
    match c.tol {
        Some(t) => QuadOptions::default().with_rel_tol(t),
        None => QuadOptions::default(),
    }
}

fn resolvent_quad(c: &Common) -> QuadOptions {
    QuadOptions::default().with_rel_tol(c.tol.unwrap_or(1e-6))
}

fn digest_of<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(value).expect("inputs serialize"),
    ))
}

/// One PASS/FAIL line per record on stderr; returns whether all passed.
fn summarize(records: &[CheckRecord]) -> bool {
    let color = std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty())
        && std::io::stderr().is_terminal();
    let (mut passed, mut failed) = (0, 0);
    for r in records {
        let tag = match (r.pass, color) {
            (true, true) => "\x1b[32mPASS\x1b[0m",
            (true, false) => "PASS",
            (false, true) => "\x1b[31mFAIL\x1b[0m",
            (false, false) => "FAIL",
        };
        if r.pass {
            passed += 1;
        } else {
            failed += 1;
        }
        eprintln!("{tag} {}", r.name);
    }
    eprintln!("{passed} passed, {failed} failed");
    failed == 0
}

#[derive(Clone, Debug)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Num(_) => s.serialize_none(),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

/// Rows of named columns, emitted as a JSON array of objects or as CSV.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

struct Row<'a>(&'a [&'static str], &'a [Cell]);

impl Serialize for Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for r in &self.rows {
            seq.serialize_element(&Row(&self.columns, r))?;
        }
        seq.end()
    }
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn emit(&self, c: &Common) -> Result<bool> {
        let bytes = match c.format {
            Format::Json => to_json(self),
            Format::Csv => to_csv(
                &self.columns,
                self.rows.iter().map(|r| r.iter().map(Cell::csv).collect()),
            ),
        };
        write_output(&bytes, c.out.as_deref())?;
        Ok(true)
    }
}
