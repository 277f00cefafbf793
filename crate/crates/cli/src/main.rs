//! `ncw`: existence verdicts, Laplace transforms, samples and verification
//! suites, reported as JSON or CSV.
//!
//! Exit codes: 0 every record passed, 1 some record failed, 2 usage error or
//! invalid input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ncwishart::harness::{
    cmd_exist, cmd_laplace, cmd_sample, cmd_verify, read_matrix_file, write_samples_csv,
    ExistInput, LaplaceInput, LaplaceTarget, OutputFormat, Report, RunConfig, SampleTarget, Suite,
};
use ncwishart::measures::{MeasureSpec, NcwParams, TruncationMode, TruncationPolicy};
use ncwishart::symcore::SymMatrix;
use ncwishart::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ncw",
    version,
    about = "Non-central Wishart existence, transforms, sampling and verification"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Trials per rank experiment and draws per Monte-Carlo estimate.
    #[arg(long, global = true, default_value_t = 10_000)]
    trials: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report (or the samples for `sample`) here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Rank tolerance for matrix inputs (default: scale-aware).
    #[arg(long, global = true, default_value_t = 0.0)]
    tol: f64,
    /// Highest zonal weight summed by series.
    #[arg(long, global = true, default_value_t = 64)]
    weight_max: usize,
    /// Relative tail tolerance for adaptive series truncation.
    #[arg(long, global = true, default_value_t = 1e-10)]
    trunc_tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = Trunc::Adaptive)]
    trunc: Trunc,
    /// Wall-clock budget in seconds for `verify`.
    #[arg(long, global = true)]
    max_seconds: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Trunc {
    Fixed,
    Adaptive,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Target {
    Ncw,
    M,
    SingularR,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuiteArg {
    Zonal,
    D2,
    Fd,
    Support,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Does NCW(2p, w, Sigma) or m(2p, k, d) exist?
    Exist {
        #[arg(long)]
        two_p: f64,
        #[arg(long)]
        d: Option<usize>,
        /// Rank of w when no w file is given.
        #[arg(long)]
        k: Option<usize>,
        /// Noncentrality matrix file.
        #[arg(long)]
        w: Option<PathBuf>,
        /// Covariance matrix file (default identity).
        #[arg(long)]
        sigma: Option<PathBuf>,
    },
    /// Closed-form Laplace transform at s, optionally cross-checked.
    Laplace {
        #[arg(long, value_enum)]
        target: Target,
        #[command(flatten)]
        shape: Shape,
        /// Argument matrix file; must be positive definite.
        #[arg(long)]
        s: PathBuf,
        /// Add Monte-Carlo and quadrature estimates.
        #[arg(long)]
        cross_check: bool,
        /// Allow weighted Monte-Carlo estimates outside s > I/2.
        #[arg(long)]
        allow_outside: bool,
    },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
    /// Draw samples as CSV rows of Lebesgue coordinates (then weight).
    Sample {
        #[arg(long, value_enum)]
        target: Target,
        #[command(flatten)]
        shape: Shape,
        /// Number of draws.
        #[arg(long, default_value_t = 10_000)]
        draws: u64,
        /// Where to write the report when samples go to stdout (default stderr).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Shape {
    /// Shape parameter 2p.
    #[arg(long, visible_alias = "n")]
    two_p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Rank of the noncentrality for m(2p, k, d).
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Noncentrality matrix file (NCW, default zero).
    #[arg(long)]
    w: Option<PathBuf>,
    /// Covariance matrix file (NCW, default identity).
    #[arg(long)]
    sigma: Option<PathBuf>,
}

fn read(path: &Path, warnings: &mut Vec<String>) -> Result<SymMatrix> {
    let p = read_matrix_file(path)?;
    if let Some(w) = p.warning {
        warnings.push(format!("{}: {w}", path.display()));
    }
    Ok(p.matrix)
}

fn read_opt(path: &Option<PathBuf>, warnings: &mut Vec<String>) -> Result<Option<SymMatrix>> {
    path.as_deref().map(|p| read(p, warnings)).transpose()
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Invalid(format!("missing --{flag}")))
}

impl Shape {
    fn two_p(&self) -> Result<f64> {
        need(self.two_p, "two-p")
    }

    fn spec(&self) -> Result<MeasureSpec> {
        MeasureSpec::new(self.two_p()?, self.k, need(self.d, "d")?)
    }

    /// NCW parameters; the dimension comes from whichever of `--d`, `--w`,
    /// `--sigma` is given, and they must agree.
    fn ncw(&self, warnings: &mut Vec<String>) -> Result<NcwParams> {
        let w = read_opt(&self.w, warnings)?;
        let sigma = read_opt(&self.sigma, warnings)?;
        let d = match (self.d, &w, &sigma) {
            (Some(d), _, _) => d,
            (None, Some(w), _) => w.dim(),
            (None, None, Some(s)) => s.dim(),
            _ => return Err(Error::Invalid("give --d, --w or --sigma".into())),
        };
        let w = w.unwrap_or_else(|| SymMatrix::zeros(d));
        let sigma = sigma.unwrap_or_else(|| SymMatrix::identity(d));
        for m in [&w, &sigma] {
            if m.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: m.dim(),
                });
            }
        }
        NcwParams::new(self.two_p()?, w, sigma)
    }
}

fn config(g: &Global) -> Result<RunConfig> {
    let cfg = RunConfig {
        seed: g.seed,
        trials: g.trials,
        trunc: TruncationPolicy {
            weight_max: g.weight_max,
            rel_tol: g.trunc_tol,
            mode: match g.trunc {
                Trunc::Fixed => TruncationMode::FixedWeight,
                Trunc::Adaptive => TruncationMode::AdaptiveTail,
            },
        },
        tol: g.tol,
        output_path: g.output.clone(),
        format: match g.format {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        },
        max_seconds: g.max_seconds,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    let mut out = open(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Invalid(format!("writing output: {e}")))
}

fn run(cli: Cli) -> Result<Report> {
    let cfg = config(&cli.global)?;
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("--threads: {e}")))?;
    }
    let mut warnings = Vec::new();
    let mut rep = match &cli.command {
        Command::Exist {
            two_p,
            d,
            k,
            w,
            sigma,
        } => {
            let input = ExistInput {
                two_p: *two_p,
                d: *d,
                k: *k,
                w: read_opt(w, &mut warnings)?,
                sigma: read_opt(sigma, &mut warnings)?,
            };
            cmd_exist(&input, &cfg)?
        }
        Command::Laplace {
            target,
            shape,
            s,
            cross_check,
            allow_outside,
        } => {
            let s = read(s, &mut warnings)?;
            let target = match target {
                Target::M => LaplaceTarget::M(shape.spec()?),
                Target::Ncw => LaplaceTarget::Ncw(shape.ncw(&mut warnings)?),
                Target::SingularR => {
                    return Err(Error::Invalid("laplace supports --target m or ncw".into()));
                }
            };
            let input = LaplaceInput {
                target,
                s,
                cross_check: *cross_check,
                allow_outside: *allow_outside,
            };
            cmd_laplace(&input, &cfg)?
        }
        Command::Verify { suite } => {
            let suite = match suite {
                SuiteArg::Zonal => Suite::Zonal,
                SuiteArg::D2 => Suite::D2,
                SuiteArg::Fd => Suite::Fd,
                SuiteArg::Support => Suite::Support,
                SuiteArg::All => Suite::All,
            };
            cmd_verify(suite, &cfg)?
        }
        Command::Sample {
            target,
            shape,
            draws,
            report,
        } => {
            let target = match target {
                Target::Ncw => SampleTarget::Ncw(shape.ncw(&mut warnings)?),
                Target::M => SampleTarget::M(shape.spec()?),
                Target::SingularR => SampleTarget::SingularR(need(shape.d, "d")?),
            };
            let (mut rep, rows) = cmd_sample(&target, *draws, &cfg)?;
            let d = rows.first().map_or(0, |(m, _)| m.dim());
            let mut out = open(cfg.output_path.as_deref())?;
            write_samples_csv(&mut out, d, &rows)?;
            out.flush()
                .map_err(|e| Error::Invalid(format!("writing samples: {e}")))?;
            rep.warnings.append(&mut warnings);
            let text = rep.render(cfg.format);
            match (report, &cfg.output_path) {
                (Some(p), _) => emit(&text, Some(p))?,
                (None, Some(_)) => emit(&text, None)?,
                (None, None) => eprint!("{text}"),
            }
            return Ok(rep);
        }
    };
    rep.warnings.append(&mut warnings);
    emit(&rep.render(cfg.format), cfg.output_path.as_deref())?;
    Ok(rep)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(rep) => {
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for r in rep.failures() {
                eprintln!("FAIL {}: {}", r.name, r.anchor);
            }
            if !rep.complete {
                eprintln!("warning: time budget reached, report incomplete");
            }
            ExitCode::from(rep.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
