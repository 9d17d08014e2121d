//! Byte-stable JSON and CSV reports.
//!
//! Floats are written with 17 significant digits in exponent form, non-finite
//! values as `null` (JSON) or an empty field (CSV), lines end in `\n`.

use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{CliError, Result};

pub const REPORT_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub analytic: f64,
    pub reference: f64,
    pub stderr: Option<f64>,
    /// Absolute tolerance.
    pub tol: f64,
    pub pass: bool,
    pub seconds: Option<f64>,
}

impl CheckRecord {
    pub fn new(
        name: impl Into<String>,
        analytic: f64,
        reference: f64,
        stderr: Option<f64>,
        tol: f64,
    ) -> Self {
        Self {
            name: name.into(),
            analytic,
            reference,
            stderr,
            tol,
            pass: Self::passes(analytic, reference, stderr, tol),
            seconds: None,
        }
    }

    /// |analytic − reference| ≤ tol + 3·stderr, false for non-finite input.
    pub fn passes(analytic: f64, reference: f64, stderr: Option<f64>, tol: f64) -> bool {
        let diff = (analytic - reference).abs();
        diff.is_finite() && diff <= tol + 3.0 * stderr.unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Serialize)]
struct Report<'a> {
    version: &'a str,
    config_digest: &'a str,
    records: &'a [CheckRecord],
}

pub const CSV_COLUMNS: [&str; 7] = [
    "name",
    "analytic",
    "reference",
    "stderr",
    "tol",
    "pass",
    "seconds",
];

pub fn render(records: &[CheckRecord], config_digest: &str, format: Format) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Err(CliError::EmptyReport);
    }
    match format {
        Format::Json => Ok(to_json(&Report {
            version: REPORT_VERSION,
            config_digest,
            records,
        })),
        Format::Csv => {
            let rows = records.iter().map(|r| {
                vec![
                    r.name.clone(),
                    fmt_float(r.analytic),
                    fmt_float(r.reference),
                    r.stderr.map(fmt_float).unwrap_or_default(),
                    fmt_float(r.tol),
                    r.pass.to_string(),
                    r.seconds.map(fmt_float).unwrap_or_default(),
                ]
            });
            Ok(to_csv(&CSV_COLUMNS, rows))
        }
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(
    records: &[CheckRecord],
    config_digest: &str,
    format: Format,
    path: Option<&Path>,
) -> Result<()> {
    let bytes = render(records, config_digest, format)?;
    write_output(&bytes, path)
}

pub(crate) fn write_output(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_owned(),
            source,
        }),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

/// 17 significant digits; empty for non-finite values.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// Pretty JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, FixedFloats(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization");
    out.push(b'\n');
    out
}

pub fn to_csv<I>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory CSV");
    for row in rows {
        w.write_record(&row).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}
