//! Run configuration, machine-readable reports, file formats and the
//! verification suites behind the `ncw` command line.

mod commands;
mod csv_out;
mod matrix_file;
mod suites;

pub use commands::{
    cmd_exist, cmd_laplace, cmd_sample, cmd_verify, ExistInput, LaplaceInput, LaplaceTarget,
    SampleTarget,
};
pub use csv_out::{fmt_f64, write_records_csv, write_samples_csv};
pub use matrix_file::{parse_matrix, read_matrix_file, ParsedMatrix, ASYMMETRY_WARN};
pub use suites::{run_suite, Suite};

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ExistenceVerdict, TruncationPolicy};
use crate::zonal::coeffs;

/// Version of the JSON report layout.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Trials per rank experiment and draws per Monte-Carlo estimate.
    pub trials: u64,
    pub trunc: TruncationPolicy,
    /// Rank tolerance for matrix inputs; `≤ 0` picks a scale-aware default.
    pub tol: f64,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Wall-clock budget for `verify`; checks not started in time are
    /// skipped and the report is flagged incomplete.
    pub max_seconds: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10_000,
            trunc: TruncationPolicy::default(),
            tol: 0.0,
            output_path: None,
            format: OutputFormat::Json,
            max_seconds: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        if let Some(s) = self.max_seconds {
            if !(s > 0.0) {
                return Err(Error::Domain(format!(
                    "max_seconds must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// How a record's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    ClosedForm,
    Series,
    MonteCarlo,
    Quadrature,
}

/// What `error` measures and `tolerance` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RelErr,
    AbsErr,
    /// Distance in standard errors.
    ZScore,
    /// Number of offending cases.
    Count,
    /// No comparison; the value is reported as is.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub error: Option<f64>,
    pub tolerance: Option<f64>,
    pub metric: Metric,
    pub pass: bool,
    pub provenance: Provenance,
    /// The identity or property being checked.
    pub anchor: String,
}

impl Record {
    /// Relative error of `value` against `expected`, at most `tol`.
    pub fn rel(
        name: impl Into<String>,
        value: f64,
        expected: f64,
        tol: f64,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        let error = if expected == 0.0 {
            value.abs()
        } else {
            (value / expected - 1.0).abs()
        };
        Self::with(
            name,
            value,
            Some(expected),
            error,
            tol,
            Metric::RelErr,
            provenance,
            anchor,
        )
    }

    pub fn abs(
        name: impl Into<String>,
        value: f64,
        expected: f64,
        tol: f64,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        Self::with(
            name,
            value,
            Some(expected),
            (value - expected).abs(),
            tol,
            Metric::AbsErr,
            provenance,
            anchor,
        )
    }

    /// `value ± std_error` against `expected` within `sigmas`.
    pub fn z(
        name: impl Into<String>,
        est: crate::numeric::mc::Estimate,
        expected: f64,
        sigmas: f64,
        anchor: &str,
    ) -> Self {
        Self::with(
            name,
            est.mean,
            Some(expected),
            est.z_against_value(expected),
            sigmas,
            Metric::ZScore,
            Provenance::MonteCarlo,
            anchor,
        )
    }

    /// `count` offending cases, none allowed.
    pub fn count(
        name: impl Into<String>,
        count: u64,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        Self::with(
            name,
            count as f64,
            Some(0.0),
            count as f64,
            0.0,
            Metric::Count,
            provenance,
            anchor,
        )
    }

    pub fn flag(name: impl Into<String>, ok: bool, provenance: Provenance, anchor: &str) -> Self {
        Self::count(name, u64::from(!ok), provenance, anchor)
    }

    /// A reported value with nothing to compare against.
    pub fn info(name: impl Into<String>, value: f64, provenance: Provenance, anchor: &str) -> Self {
        Self {
            name: name.into(),
            value,
            expected: None,
            error: None,
            tolerance: None,
            metric: Metric::None,
            pass: value.is_finite(),
            provenance,
            anchor: anchor.to_string(),
        }
    }

    /// A check that could not be evaluated.
    pub fn failed(
        name: impl Into<String>,
        err: &Error,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            expected: None,
            error: None,
            tolerance: None,
            metric: Metric::None,
            pass: false,
            provenance,
            anchor: format!("{anchor} [error: {err}]"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn with(
        name: impl Into<String>,
        value: f64,
        expected: Option<f64>,
        error: f64,
        tol: f64,
        metric: Metric,
        provenance: Provenance,
        anchor: &str,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            expected,
            error: Some(error),
            tolerance: Some(tol),
            metric,
            pass: error <= tol,
            provenance,
            anchor: anchor.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub code: String,
    pub schema: u32,
    pub zonal_exact_weight_max: usize,
    pub zonal_cache: Option<String>,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            code: env!("CARGO_PKG_VERSION").to_string(),
            schema: SCHEMA,
            zonal_exact_weight_max: coeffs::EXACT_WEIGHT_MAX,
            zonal_cache: std::env::var(coeffs::CACHE_ENV).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub inputs: serde_json::Value,
    pub results: Vec<Record>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<ExistenceVerdict>,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// False when a time budget cut the run short.
    pub complete: bool,
    pub pass: bool,
    pub timing: Timing,
    pub versions: Versions,
}

impl Report {
    pub fn new(command: &str, inputs: serde_json::Value) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            inputs,
            results: Vec::new(),
            verdict: None,
            warnings: Vec::new(),
            complete: true,
            pass: true,
            timing: Timing { seconds: 0.0 },
            versions: Versions::current(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.results.push(r);
    }

    /// Fixes `pass` and `timing` once all records are in.
    pub fn finish(mut self, started: Instant) -> Self {
        self.pass = self.complete && self.results.iter().all(|r| r.pass);
        self.timing.seconds = started.elapsed().as_secs_f64();
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.results.iter().filter(|r| !r.pass)
    }

    /// `0` when everything passed, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing { seconds: 0.0 },
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &self.results).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}
