//! Command-line surface: every verification workflow as a subcommand, with
//! machine-readable CSV/JSON reports.
//!
//! Exit codes: 0 success/pass, 2 usage error, 3 mathematical precondition
//! violation, 4 verdict failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use smalldet::report::{self, OutputFormat};
use smalldet::rng::substream_rng;
use smalldet::{
    append_column_identity_check, bound_check, build_product_law, complex_gaussian_det_indexed,
    compute_d_values, gram_det, ks_fit, ComplexConvention, CovarianceSpec, DetEvent, Error,
    GammaProductSpec, GridConfig, McConfig,
};

const EXIT_USAGE: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "smalldet",
    version,
    about = "Small-deviation probabilities of Gaussian matrix determinants: \
             conditional variances, product-law tables, and Monte Carlo bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional residual variances d_k and the eps0 divisor.
    #[command(name = "d-values")]
    DValues(DValuesArgs),
    /// Export the CDF table of prod |X_j| on a log-eps grid.
    #[command(name = "product-law")]
    ProductLaw(ProductLawArgs),
    /// Monte Carlo verification of the product-law bound.
    #[command(name = "bound-check")]
    BoundCheck(BoundCheckArgs),
    /// Gram column-append identity and monotonicity over random cases.
    #[command(name = "lemma-check")]
    LemmaCheck(LemmaCheckArgs),
    /// KS fit of complex-Gaussian det MM* against a gamma-product law.
    #[command(name = "complex-law")]
    ComplexLaw(ComplexLawArgs),
}

/// Flags shared by every subcommand; unset values fall back to the config
/// file, then to defaults.
#[derive(Args, Clone)]
struct CommonArgs {
    /// Covariance spec, e.g. "kind=iid" or "kind=equicorrelated rho=0.5".
    #[arg(long)]
    spec: Option<String>,
    /// Matrix order n.
    #[arg(long)]
    n: Option<usize>,
    /// Column count m (defaults to n).
    #[arg(long)]
    m: Option<usize>,
    /// Threshold eps; repeatable.
    #[arg(long = "eps")]
    eps: Vec<f64>,
    /// Monte Carlo trial budget.
    #[arg(long)]
    trials: Option<u64>,
    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (does not change results).
    #[arg(long)]
    workers: Option<usize>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// TOML config file supplying any of the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DValuesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Exit with code 3 if any d_k is zero.
    #[arg(long)]
    require_positive: bool,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Left edge of the log-eps grid.
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    /// Right edge of the log-eps grid.
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Grid step (shared by the integration lattice).
    #[arg(long)]
    grid_step: Option<f64>,
    /// Left truncation of the density integration window.
    #[arg(long, allow_negative_numbers = true)]
    u_min: Option<f64>,
    /// Right truncation of the density integration window.
    #[arg(long, allow_negative_numbers = true)]
    u_max: Option<f64>,
}

#[derive(Args)]
struct ProductLawArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Append asymptotic-value and ratio columns.
    #[arg(long)]
    asymptotic: bool,
}

#[derive(Args)]
struct BoundCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Event variant: square (|det| with m = n) or gram (sqrt det AA^T).
    #[arg(long)]
    event: Option<String>,
}

#[derive(Args)]
struct LemmaCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of seeded random cases.
    #[arg(long)]
    cases: Option<u64>,
    /// Relative gap tolerance for the verdict.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ComplexLawArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gamma shape per factor, comma separated (default 1,2,...,n).
    #[arg(long, value_delimiter = ',')]
    shapes: Option<Vec<f64>>,
    /// Common gamma scale (default 1).
    #[arg(long)]
    scale: Option<f64>,
    /// Entry convention: unit-complex (E|m|^2 = 1) or unit-per-part.
    #[arg(long)]
    convention: Option<String>,
}

/// Config-file mirror of the flags. Unknown keys are rejected.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    spec: Option<String>,
    n: Option<usize>,
    m: Option<usize>,
    eps: Option<Vec<f64>>,
    trials: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    format: Option<String>,
    require_positive: Option<bool>,
    asymptotic: Option<bool>,
    event: Option<String>,
    cases: Option<u64>,
    tol: Option<f64>,
    shapes: Option<Vec<f64>>,
    scale: Option<f64>,
    convention: Option<String>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    grid_step: Option<f64>,
    u_min: Option<f64>,
    u_max: Option<f64>,
}

/// Error carrying its own exit code.
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::NotPositiveSemidefinite(_)
            | Error::NotPositiveDefinite(_)
            | Error::OutOfRange(_)
            | Error::ZeroDValue { .. }
            | Error::DimensionMismatch(_) => EXIT_PRECONDITION,
            Error::InvalidArgument(_)
            | Error::SpecParse(_)
            | Error::IncompatibleEstimates(_)
            | Error::Io { .. } => EXIT_USAGE,
        };
        CliError {
            message: err.to_string(),
            code,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

/// Flag values override file values; defaults fill the rest.
struct Resolved {
    spec: CovarianceSpec,
    n: usize,
    m: usize,
    eps: Vec<f64>,
    trials: u64,
    seed: u64,
    workers: usize,
    out: Option<PathBuf>,
    format: OutputFormat,
}

fn resolve_common(args: &CommonArgs, file: &FileConfig) -> CliResult<Resolved> {
    let spec_text = args
        .spec
        .clone()
        .or_else(|| file.spec.clone())
        .unwrap_or_else(|| "kind=iid".to_string());
    let spec = CovarianceSpec::parse(&spec_text)?;
    let n = args
        .n
        .or(file.n)
        .ok_or_else(|| CliError::usage("missing --n (or n in the config file)"))?;
    let m = args.m.or(file.m).unwrap_or(n);
    let eps = if !args.eps.is_empty() {
        args.eps.clone()
    } else {
        file.eps.clone().unwrap_or_default()
    };
    let format = match (&args.format, &file.format) {
        (Some(f), _) => *f,
        (None, Some(s)) => s
            .parse()
            .map_err(|e: String| CliError::usage(format!("config format: {e}")))?,
        (None, None) => OutputFormat::Csv,
    };
    Ok(Resolved {
        spec,
        n,
        m,
        eps,
        trials: args.trials.or(file.trials).unwrap_or(100_000),
        seed: args.seed.or(file.seed).unwrap_or(0),
        workers: args.workers.or(file.workers).unwrap_or(1).max(1),
        out: args.out.clone().or_else(|| file.out.clone()),
        format,
    })
}

fn resolve_grid(args: &GridArgs, file: &FileConfig) -> GridConfig {
    let d = GridConfig::default();
    GridConfig {
        t_min: args.t_min.or(file.t_min).unwrap_or(d.t_min),
        t_max: args.t_max.or(file.t_max).unwrap_or(d.t_max),
        step: args.grid_step.or(file.grid_step).unwrap_or(d.step),
        u_min: args.u_min.or(file.u_min).unwrap_or(d.u_min),
        u_max: args.u_max.or(file.u_max).unwrap_or(d.u_max),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|source| {
            CliError::from(Error::Io {
                path: path.display().to_string(),
                source,
            })
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_d_values(args: &DValuesArgs) -> CliResult<u8> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file)?;
    let require_positive = args.require_positive || file.require_positive.unwrap_or(false);

    let d = compute_d_values(&resolved.spec, resolved.n, resolved.m)?;
    let content = match resolved.format {
        OutputFormat::Csv => report::d_values_csv(&d),
        OutputFormat::Json => report::d_values_json(&d),
    };
    write_output(resolved.out.as_deref(), &content)?;
    if require_positive && d.values().contains(&0.0) {
        eprintln!("smalldet: some d_k is zero");
        return Ok(EXIT_PRECONDITION);
    }
    Ok(0)
}

fn cmd_product_law(args: &ProductLawArgs) -> CliResult<u8> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file)?;
    let grid = resolve_grid(&args.grid, &file);
    let with_asymptotic = args.asymptotic || file.asymptotic.unwrap_or(false);

    let table = build_product_law(resolved.n, &grid)?;
    let csv = report::product_law_csv(&table, with_asymptotic);
    let sidecar = report::product_law_sidecar_json(&table);
    match resolved.out.as_deref() {
        Some(path) => {
            write_output(Some(path), &csv)?;
            let mut sidecar_path = path.as_os_str().to_owned();
            sidecar_path.push(".json");
            write_output(Some(Path::new(&sidecar_path)), &sidecar)?;
        }
        None => {
            print!("{csv}");
        }
    }
    Ok(0)
}

fn parse_event(text: Option<&str>, n: usize, m: usize) -> CliResult<DetEvent> {
    match text {
        Some("square") => Ok(DetEvent::SquareAbsDet),
        Some("gram") => Ok(DetEvent::GramSqrtDet),
        Some(other) => Err(CliError::usage(format!(
            "unknown event {other:?} (expected square or gram)"
        ))),
        None => Ok(if n == m {
            DetEvent::SquareAbsDet
        } else {
            DetEvent::GramSqrtDet
        }),
    }
}

fn cmd_bound_check(args: &BoundCheckArgs) -> CliResult<u8> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file)?;
    let grid = resolve_grid(&args.grid, &file);
    let event_text = args.event.clone().or_else(|| file.event.clone());
    let event = parse_event(event_text.as_deref(), resolved.n, resolved.m)?;
    if resolved.eps.is_empty() {
        return Err(CliError::usage("bound-check needs at least one --eps"));
    }

    let rows = bound_check(
        &resolved.spec,
        resolved.n,
        resolved.m,
        event,
        &resolved.eps,
        &grid,
        &McConfig {
            trials: resolved.trials,
            base_seed: resolved.seed,
            workers: resolved.workers,
            confidence: 0.99,
        },
    )?;
    let content = match resolved.format {
        OutputFormat::Csv => report::bound_check_csv(&rows),
        OutputFormat::Json => report::bound_check_json(&rows),
    };
    write_output(resolved.out.as_deref(), &content)?;
    if rows.iter().all(|r| r.verdict) {
        Ok(0)
    } else {
        eprintln!("smalldet: bound verdict failed");
        Ok(EXIT_VERDICT)
    }
}

fn cmd_lemma_check(args: &LemmaCheckArgs) -> CliResult<u8> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file)?;
    let cases = args.cases.or(file.cases).unwrap_or(100);
    let tol = args.tol.or(file.tol).unwrap_or(1e-8);
    if cases == 0 {
        return Err(CliError::usage("lemma-check needs at least one case"));
    }

    let mut max_rel_gap = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for case in 0..cases {
        let n = 1 + (case % 5) as usize;
        let m = n + ((case / 5) % 4) as usize;
        let mut rng = substream_rng(resolved.seed, 11, case);
        let a = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let col = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let check = append_column_identity_check(&a, &col)?;
        max_rel_gap = max_rel_gap.max(check.gap.abs() / check.lhs.abs().max(1.0));
        min_margin = min_margin.min(check.lhs);
    }

    // zero-column case: appending zeros must change nothing
    let mut rng = substream_rng(resolved.seed, 12, 0);
    let a = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let zero_gap = append_column_identity_check(&a, &DVector::zeros(3))?.lhs;

    // dependent rows: det AA^T = 0, appending a column keeps it nonnegative
    let dep = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    let dep_base = gram_det(&dep)?.det;
    let mut dep_b = DMatrix::zeros(2, 4);
    dep_b.view_mut((0, 0), (2, 3)).copy_from(&dep);
    dep_b.set_column(3, &DVector::from_column_slice(&[1.0, 0.0]));
    let dep_lhs = gram_det(&dep_b)?.det - dep_base;

    let verdict = max_rel_gap <= tol
        && min_margin >= -1e-10
        && zero_gap.abs() <= 1e-14
        && dep_base == 0.0
        && dep_lhs >= -1e-10;
    let content = match resolved.format {
        OutputFormat::Csv => format!(
            "cases,max_rel_gap,min_monotonicity_margin,zero_column_gap,dependent_rows_lhs,verdict\n{},{},{},{},{},{}\n",
            cases,
            report::fmt_float(max_rel_gap),
            report::fmt_float(min_margin),
            report::fmt_float(zero_gap),
            report::fmt_float(dep_lhs),
            if verdict { "pass" } else { "fail" }
        ),
        OutputFormat::Json => format!(
            "{{\n  \"cases\": {},\n  \"max_rel_gap\": {},\n  \"min_monotonicity_margin\": {},\n  \"zero_column_gap\": {},\n  \"dependent_rows_lhs\": {},\n  \"verdict\": {}\n}}\n",
            cases,
            report::fmt_float(max_rel_gap),
            report::fmt_float(min_margin),
            report::fmt_float(zero_gap),
            report::fmt_float(dep_lhs),
            verdict
        ),
    };
    write_output(resolved.out.as_deref(), &content)?;
    Ok(if verdict { 0 } else { EXIT_VERDICT })
}

fn cmd_complex_law(args: &ComplexLawArgs) -> CliResult<u8> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolved = resolve_common(&args.common, &file)?;
    if resolved.trials < 10_000 {
        return Err(CliError::usage(format!(
            "complex-law needs at least 10000 trials, got {}",
            resolved.trials
        )));
    }
    let convention = match args
        .convention
        .clone()
        .or_else(|| file.convention.clone())
        .as_deref()
    {
        None | Some("unit-complex") => ComplexConvention::UnitComplexVariance,
        Some("unit-per-part") => ComplexConvention::UnitPerPart,
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown convention {other:?} (expected unit-complex or unit-per-part)"
            )))
        }
    };
    let spec = match args.shapes.clone().or_else(|| file.shapes.clone()) {
        Some(shapes) => GammaProductSpec::new(shapes, args.scale.or(file.scale).unwrap_or(1.0))?,
        None => {
            let base = GammaProductSpec::complex_determinant_law(resolved.n)?;
            match args.scale.or(file.scale) {
                Some(scale) => GammaProductSpec::new(base.shapes().to_vec(), scale)?,
                None => base,
            }
        }
    };

    let law = spec.build_law(1.0 / 128.0)?;
    let mut draws: Vec<f64> = (0..resolved.trials)
        .map(|i| {
            complex_gaussian_det_indexed(resolved.n, resolved.seed, i, convention)
                .expect("order validated above")
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let ks = ks_fit(&draws, |x| law.cdf(x))?;

    let label = format!(
        "gamma-product shapes={} scale={}",
        spec.shapes()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
        spec.scale()
    );
    let content = match resolved.format {
        OutputFormat::Csv => report::ks_csv(&ks, &label),
        OutputFormat::Json => report::ks_json(&ks, &label),
    };
    write_output(resolved.out.as_deref(), &content)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::DValues(args) => cmd_d_values(args),
        Command::ProductLaw(args) => cmd_product_law(args),
        Command::BoundCheck(args) => cmd_bound_check(args),
        Command::LemmaCheck(args) => cmd_lemma_check(args),
        Command::ComplexLaw(args) => cmd_complex_law(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("smalldet: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
