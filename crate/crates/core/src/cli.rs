//! Command-line front end: generate measures, compute spectra, kernel
//! coefficients, potentials and energies, estimate dimension lower bounds,
//! and benchmark the energy algorithms.
//!
//! Reports go to --out (default stdout) as CSV or JSON. Machine numbers are
//! printed with 17 significant digits so files round-trip losslessly; the
//! few human-facing summary lines use 6. Every invocation is deterministic
//! given its flags and seed; only timing columns vary between runs.
//!
//! Exit codes: 0 success, 2 usage or validation failure, 3 inconclusive
//! science result, 4 internal invariant violation.

use crate::dimension::{
    box_counting_dim_from_table, dim_lower_bound_with, ClassifierConfig, DimensionError, SProbe,
};
use crate::energy::{
    energy_hierarchical_from_table, energy_naive, energy_spectral, potential_from_table,
    EnergyError, EnergyMethod, NAIVE_MAX_LEVELS,
};
use crate::group::{CylinderId, GroupElement, Resolution};
use crate::kernel::{block_of, full_coefficient, truncated_coefficient, KernelError, KernelSpec};
use crate::measure::{
    fwht, level_masses, read_measure, write_measure, CylinderMeasure, MeasureEncoding,
    MeasureError, MeasureIoError,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Methods must agree to this relative deviation or the energy command
/// reports an internal invariant violation.
const DEVIATION_LIMIT: f64 = 1e-8;

/// Largest truncation level the quadrature oracle will sample (2^n cells).
const ORACLE_MAX_LEVELS: u32 = 16;

/// Fallback truncation for the limit oracle of full-kernel coefficients.
const ORACLE_LIMIT_LEVEL: u32 = 60;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    MeasureIo(#[from] MeasureIoError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("{0}")]
    Inconclusive(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Inconclusive(_) => 3,
            CliError::Invariant(_) => 4,
            _ => 2,
        }
    }
}

impl From<DimensionError> for CliError {
    fn from(e: DimensionError) -> Self {
        match e {
            DimensionError::AllInconclusive { .. } => CliError::Inconclusive(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "dyaden",
    version,
    about = "Walsh spectra, radial-kernel energies, and dimension lower bounds \
             for measures on the dyadic group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report destination (default: stdout). For `gen` this is the measure
    /// file and is required.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for the parallel kernels (default: available cores).
    /// Results are identical for every thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for all pseudo-random generation (ChaCha8 keystream).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a measure file
    Gen(GenArgs),
    /// Walsh coefficients of a measure
    Spectrum {
        /// Measure file to read
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Closed-form kernel coefficients over a range of indices
    Kernel {
        /// Kernel exponent in (0, 1)
        #[arg(long)]
        s: f64,
        /// Truncation level (omit for the full kernel)
        #[arg(long)]
        trunc: Option<u32>,
        /// Index or inclusive range, e.g. `7` or `2..9`
        #[arg(long, value_parser = parse_u64_range)]
        k: (u64, u64),
        /// Add an independently computed oracle column: transform quadrature
        /// for truncations up to 16, the deep-truncation limit otherwise
        #[arg(long)]
        oracle: bool,
    },
    /// Pointwise potential of a measure
    Potential {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        trunc: Option<u32>,
    },
    /// Kernel energy of a measure by one or all methods
    Energy {
        #[arg(long = "in")]
        input: PathBuf,
        /// One or more exponents, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        #[arg(long)]
        trunc: Option<u32>,
    },
    /// Dimension lower bound from energy growth, with box-counting comparator
    Dim {
        #[arg(long = "in")]
        input: PathBuf,
        /// Bisection bracket tolerance
        #[arg(long, default_value_t = 0.015625)]
        tol: f64,
        /// Growth ratios up to 1 + this classify as bounded
        #[arg(long, default_value_t = 0.01)]
        eps_bounded: f64,
        /// Growth ratios from 1 + this classify as divergent
        #[arg(long, default_value_t = 0.015)]
        eps_divergent: f64,
        /// Trailing fit-window override, in profile increments
        #[arg(long)]
        window: Option<usize>,
    },
    /// Time the energy algorithms across resolutions
    Bench {
        /// Inclusive resolution range, e.g. `8..12`
        #[arg(long, value_parser = parse_u32_range)]
        n: (u32, u32),
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Timing repetitions per cell count; the median is reported
        #[arg(long, default_value_t = 3)]
        repeats: u32,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Payload encoding of the measure file
    #[arg(long, global = true, value_enum, default_value_t = EncodingArg::F64le)]
    encoding: EncodingArg,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Uniform measure: every cell carries 2^-N
    Haar {
        /// Resolution (number of coordinate levels)
        #[arg(long)]
        n: u32,
    },
    /// Unit mass spread over a single cylinder
    Cylinder {
        #[arg(long)]
        n: u32,
        /// Cylinder level (1..=n)
        #[arg(long)]
        level: u32,
        /// Cylinder index (word of the first `level` coordinates)
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Unit mass on the cells whose listed coordinates are zero
    Pattern {
        #[arg(long)]
        n: u32,
        /// 1-based coordinates forced to zero, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        zeros: Vec<u32>,
    },
    /// Product measure with per-coordinate probabilities
    Bernoulli {
        /// One probability per coordinate, or a single probability for all
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// Resolution; required when --p has one entry, otherwise inferred
        #[arg(long)]
        n: Option<u32>,
    },
    /// Seeded random measure with i.i.d. cell masses
    Random {
        #[arg(long)]
        n: u32,
        /// Probability that a cell is emptied
        #[arg(long, default_value_t = 0.0)]
        sparsity: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    F64le,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Naive,
    Hierarchical,
    Spectral,
    /// Every method the resolution permits, with a cross-method deviation check
    All,
}

fn parse_u64_range(text: &str) -> Result<(u64, u64), String> {
    parse_range(text)
}

fn parse_u32_range(text: &str) -> Result<(u32, u32), String> {
    parse_range(text)
}

fn parse_range<T: std::str::FromStr + PartialOrd + Copy>(text: &str) -> Result<(T, T), String> {
    let parse_one = |t: &str| {
        t.parse::<T>()
            .map_err(|_| format!("'{t}' is not a valid bound"))
    };
    match text.split_once("..") {
        None => {
            let v = parse_one(text)?;
            Ok((v, v))
        }
        Some((lo, hi)) => {
            let lo = parse_one(lo)?;
            let hi = parse_one(hi)?;
            if lo > hi {
                return Err(format!("range '{text}' is empty"));
            }
            Ok((lo, hi))
        }
    }
}

/// Parse arguments, run the selected command, and return the process exit
/// code. Errors print to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let command_line = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 2 };
        }
    };
    match execute(cli, &command_line) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, command_line: &str) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |p| p.get())
    });
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let ctx = Context {
        out: cli.out,
        format: cli.format,
        threads,
        seed: cli.seed,
        command_line: command_line.to_string(),
    };
    match cli.command {
        Command::Gen(args) => cmd_gen(&ctx, args),
        Command::Spectrum { input } => cmd_spectrum(&ctx, &input),
        Command::Kernel { s, trunc, k, oracle } => cmd_kernel(&ctx, s, trunc, k, oracle),
        Command::Potential { input, s, trunc } => cmd_potential(&ctx, &input, s, trunc),
        Command::Energy { input, s, method, trunc } => cmd_energy(&ctx, &input, &s, method, trunc),
        Command::Dim { input, tol, eps_bounded, eps_divergent, window } => {
            cmd_dim(&ctx, &input, tol, eps_bounded, eps_divergent, window)
        }
        Command::Bench { n, s, repeats } => cmd_bench(&ctx, n, s, repeats),
    }
}

struct Context {
    out: Option<PathBuf>,
    format: Format,
    threads: usize,
    seed: u64,
    command_line: String,
}

fn load_measure(path: &std::path::Path) -> Result<CylinderMeasure, CliError> {
    read_measure(path)
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))
}

impl Context {
    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
            None => Box::new(std::io::BufWriter::new(std::io::stdout())),
        })
    }

    fn spec(&self, s: f64, trunc: Option<u32>) -> Result<KernelSpec, CliError> {
        let mut spec = KernelSpec::new(s)?;
        if let Some(n) = trunc {
            spec = spec.with_truncation(n)?;
        }
        Ok(spec)
    }
}

#[derive(Serialize)]
struct Header {
    tool: &'static str,
    version: &'static str,
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<u32>,
}

impl Header {
    fn new(ctx: &Context, resolution: Option<u32>) -> Self {
        Header {
            tool: "dyaden",
            version: VERSION,
            command: ctx.command_line.clone(),
            resolution,
        }
    }

    fn write_csv(&self, w: &mut dyn Write) -> Result<(), CliError> {
        writeln!(w, "# tool=dyaden {VERSION}")?;
        writeln!(w, "# command={}", self.command)?;
        if let Some(n) = self.resolution {
            writeln!(w, "# resolution={n}")?;
        }
        Ok(())
    }
}

/// 17 significant digits: enough to reconstruct the exact double.
fn machine(v: f64) -> String {
    format!("{v:.16e}")
}

/// 6 significant digits for human-facing summary lines.
fn human(v: f64) -> String {
    format!("{v:.5e}")
}

fn write_json<T: Serialize>(w: &mut dyn Write, report: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, report)
        .map_err(|e| CliError::Usage(format!("serializing report: {e}")))?;
    writeln!(w)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn cmd_gen(ctx: &Context, args: GenArgs) -> Result<(), CliError> {
    let out = ctx.out.clone().ok_or_else(|| {
        CliError::Usage("gen writes a measure file and requires --out <path>".into())
    })?;
    let mu = match args.kind {
        GenKind::Haar { n } => CylinderMeasure::haar(resolution(n)?),
        GenKind::Cylinder { n, level, index } => {
            let cylinder =
                CylinderId::new(level, index).map_err(|e| CliError::Usage(e.to_string()))?;
            CylinderMeasure::uniform_on(&cylinder, resolution(n)?)?
        }
        GenKind::Pattern { n, zeros } => CylinderMeasure::pattern(&zeros, resolution(n)?)?,
        GenKind::Bernoulli { p, n } => {
            let probabilities = match (p.len(), n) {
                (1, Some(n)) => vec![p[0]; n as usize],
                (1, None) => {
                    return Err(CliError::Usage(
                        "--n is required when --p gives a single probability".into(),
                    ))
                }
                (len, Some(n)) if len as u32 != n => {
                    return Err(CliError::Usage(format!(
                        "--p lists {len} probabilities but --n says {n}; \
                         drop --n or make them agree"
                    )))
                }
                _ => p,
            };
            CylinderMeasure::bernoulli_product(&probabilities)?
        }
        GenKind::Random { n, sparsity } => {
            CylinderMeasure::random(resolution(n)?, ctx.seed, sparsity)?
        }
    };
    let encoding = match args.encoding {
        EncodingArg::F64le => MeasureEncoding::F64Le,
        EncodingArg::Json => MeasureEncoding::Json,
    };
    write_measure(&mu, &out, encoding)?;
    println!(
        "wrote {} cells at resolution {}: total mass {}, support {}",
        mu.resolution().cells(),
        mu.resolution().levels(),
        human(mu.total_mass()),
        mu.support_size()
    );
    Ok(())
}

fn resolution(n: u32) -> Result<Resolution, CliError> {
    Resolution::new(n).map_err(|e| CliError::Usage(e.to_string()))
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SpectrumRow {
    k: u64,
    block: u32,
    coefficient: f64,
}

#[derive(Serialize)]
struct SpectrumReport {
    header: Header,
    rows: Vec<SpectrumRow>,
}

fn cmd_spectrum(ctx: &Context, input: &std::path::Path) -> Result<(), CliError> {
    let mu = load_measure(input)?;
    let sp = crate::measure::spectrum(&mu);
    let rows: Vec<SpectrumRow> = sp
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, &coefficient)| SpectrumRow {
            k: k as u64,
            block: block_of(k as u64),
            coefficient,
        })
        .collect();
    let header = Header::new(ctx, Some(mu.resolution().levels()));
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            header.write_csv(&mut *w)?;
            writeln!(w, "k,block,coefficient")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.k, r.block, machine(r.coefficient))?;
            }
        }
        Format::Json => write_json(&mut *w, &SpectrumReport { header, rows })?,
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// kernel
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct KernelRow {
    k: u64,
    block: u32,
    coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<f64>,
}

#[derive(Serialize)]
struct KernelReport {
    header: Header,
    s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<u32>,
    rows: Vec<KernelRow>,
}

/// Coefficients by direct transform of the sampled kernel: exact for a
/// truncated kernel once the sampling resolution reaches the truncation,
/// because the kernel is then constant on every sampling cell. The origin
/// sample is the plateau value, not the pointwise 0.
fn quadrature_oracle(spec: &KernelSpec, levels: u32) -> Result<Vec<f64>, CliError> {
    let resolution = resolution(levels)?;
    let plateau = (levels as f64 * spec.s()).exp2();
    let samples: Vec<f64> = (0..resolution.cells() as u64)
        .map(|w| {
            if w == 0 {
                return plateau;
            }
            let z = GroupElement::new(w, resolution).expect("word fits resolution");
            crate::kernel::kernel_value(spec, &z)
        })
        .collect();
    let mut transformed = fwht(&samples)?;
    let scale = (-(levels as f64)).exp2();
    for v in &mut transformed {
        *v *= scale;
    }
    Ok(transformed)
}

fn cmd_kernel(
    ctx: &Context,
    s: f64,
    trunc: Option<u32>,
    (k_lo, k_hi): (u64, u64),
    oracle: bool,
) -> Result<(), CliError> {
    let spec = ctx.spec(s, trunc)?;
    let oracle_table = match (oracle, trunc) {
        (false, _) => None,
        (true, Some(n)) if n <= ORACLE_MAX_LEVELS => Some(quadrature_oracle(&spec, n)?),
        (true, Some(n)) => {
            return Err(CliError::Usage(format!(
                "--oracle samples 2^n kernel values and supports --trunc up to \
                 {ORACLE_MAX_LEVELS}, got {n}"
            )))
        }
        (true, None) => None, // handled per row via the limit oracle
    };
    let mut rows = Vec::with_capacity((k_hi - k_lo + 1) as usize);
    for k in k_lo..=k_hi {
        let coefficient = match trunc {
            Some(n) => truncated_coefficient(s, n, k)?,
            None => full_coefficient(s, k)?,
        };
        let oracle_value = if oracle {
            Some(match &oracle_table {
                Some(table) => table.get(k as usize).copied().unwrap_or(0.0),
                None => truncated_coefficient(s, ORACLE_LIMIT_LEVEL, k)?,
            })
        } else {
            None
        };
        rows.push(KernelRow {
            k,
            block: block_of(k),
            coefficient,
            oracle: oracle_value,
        });
    }
    let header = Header::new(ctx, None);
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            header.write_csv(&mut *w)?;
            writeln!(w, "# s={}", machine(s))?;
            if let Some(n) = trunc {
                writeln!(w, "# truncation={n}")?;
            }
            if oracle {
                writeln!(w, "k,block,coefficient,oracle")?;
                for r in &rows {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        r.k,
                        r.block,
                        machine(r.coefficient),
                        machine(r.oracle.expect("oracle column requested"))
                    )?;
                }
            } else {
                writeln!(w, "k,block,coefficient")?;
                for r in &rows {
                    writeln!(w, "{},{},{}", r.k, r.block, machine(r.coefficient))?;
                }
            }
        }
        Format::Json => write_json(
            &mut *w,
            &KernelReport {
                header,
                s,
                truncation: trunc,
                rows,
            },
        )?,
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// potential
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PotentialRow {
    cell: u64,
    mass: f64,
    value: f64,
}

#[derive(Serialize)]
struct PotentialReport {
    header: Header,
    s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<u32>,
    rows: Vec<PotentialRow>,
}

fn cmd_potential(
    ctx: &Context,
    input: &std::path::Path,
    s: f64,
    trunc: Option<u32>,
) -> Result<(), CliError> {
    let mu = load_measure(input)?;
    let spec = ctx.spec(s, trunc)?;
    let table = level_masses(&mu);
    let field = potential_from_table(&table, &spec, ctx.threads);
    let rows: Vec<PotentialRow> = field
        .values()
        .iter()
        .zip(mu.masses())
        .enumerate()
        .map(|(i, (&value, &mass))| PotentialRow {
            cell: i as u64,
            mass,
            value,
        })
        .collect();
    let header = Header::new(ctx, Some(mu.resolution().levels()));
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            header.write_csv(&mut *w)?;
            writeln!(w, "cell,mass,value")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.cell, machine(r.mass), machine(r.value))?;
            }
        }
        Format::Json => write_json(
            &mut *w,
            &PotentialReport {
                header,
                s,
                truncation: trunc,
                rows,
            },
        )?,
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// energy
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EnergyRow {
    s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation: Option<u32>,
    method: String,
    value: f64,
    seconds: f64,
    /// Max pairwise relative deviation across this row's s; only present
    /// when more than one method ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<f64>,
}

#[derive(Serialize)]
struct EnergyReport {
    header: Header,
    rows: Vec<EnergyRow>,
}

fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn cmd_energy(
    ctx: &Context,
    input: &std::path::Path,
    s_values: &[f64],
    method: MethodArg,
    trunc: Option<u32>,
) -> Result<(), CliError> {
    let mu = load_measure(input)?;
    let levels = mu.resolution().levels();
    let methods: Vec<EnergyMethod> = match method {
        MethodArg::Naive => {
            if levels > NAIVE_MAX_LEVELS {
                return Err(CliError::Usage(format!(
                    "the naive method is capped at {NAIVE_MAX_LEVELS} levels and this \
                     measure has {levels}; use --method hierarchical or spectral"
                )));
            }
            vec![EnergyMethod::Naive]
        }
        MethodArg::Hierarchical => vec![EnergyMethod::Hierarchical],
        MethodArg::Spectral => vec![EnergyMethod::Spectral],
        MethodArg::All => {
            let mut all = Vec::new();
            if levels <= NAIVE_MAX_LEVELS {
                all.push(EnergyMethod::Naive);
            }
            all.extend([EnergyMethod::Hierarchical, EnergyMethod::Spectral]);
            all
        }
    };

    let table = level_masses(&mu);
    let mut rows = Vec::new();
    let mut worst_deviation = 0.0f64;
    for &s in s_values {
        let spec = ctx.spec(s, trunc)?;
        let mut values = Vec::new();
        for &m in &methods {
            let start = Instant::now();
            let result = match m {
                EnergyMethod::Naive => energy_naive(&mu, &spec, ctx.threads)?,
                EnergyMethod::Hierarchical => energy_hierarchical_from_table(&table, &spec),
                EnergyMethod::Spectral => energy_spectral(&mu, &spec),
            };
            values.push((m, result.value, start.elapsed().as_secs_f64()));
        }
        let deviation = if values.len() > 1 {
            let mut worst = 0.0f64;
            for i in 0..values.len() {
                for j in i + 1..values.len() {
                    worst = worst.max(relative_deviation(values[i].1, values[j].1));
                }
            }
            Some(worst)
        } else {
            None
        };
        if let Some(d) = deviation {
            worst_deviation = worst_deviation.max(d);
        }
        for (m, value, seconds) in values {
            rows.push(EnergyRow {
                s,
                truncation: trunc,
                method: m.to_string(),
                value,
                seconds,
                deviation,
            });
        }
    }

    let header = Header::new(ctx, Some(levels));
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            header.write_csv(&mut *w)?;
            writeln!(w, "s,truncation,method,value,seconds,deviation")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    machine(r.s),
                    r.truncation.map_or(String::new(), |n| n.to_string()),
                    r.method,
                    machine(r.value),
                    machine(r.seconds),
                    r.deviation.map_or(String::new(), machine),
                )?;
            }
        }
        Format::Json => write_json(&mut *w, &EnergyReport { header, rows })?,
    }
    w.flush()?;

    if worst_deviation > DEVIATION_LIMIT {
        return Err(CliError::Invariant(format!(
            "energy methods disagree: max relative deviation {} exceeds {DEVIATION_LIMIT}",
            human(worst_deviation)
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// dim
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProbeRow {
    s: f64,
    growth_ratio: f64,
    verdict: String,
}

#[derive(Serialize)]
struct DimReport {
    header: Header,
    lower_bound: Option<f64>,
    bracket_low: Option<f64>,
    bracket_high: Option<f64>,
    resolved: bool,
    box_dim: f64,
    probes: Vec<ProbeRow>,
}

fn write_dim_report(ctx: &Context, report: &DimReport) -> Result<(), CliError> {
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            report.header.write_csv(&mut *w)?;
            let blank = |v: Option<f64>| v.map_or(String::new(), machine);
            writeln!(
                w,
                "row,s,growth_ratio,verdict,lower_bound,bracket_low,bracket_high,resolved,box_dim"
            )?;
            for p in &report.probes {
                writeln!(
                    w,
                    "probe,{},{},{},,,,,",
                    machine(p.s),
                    machine(p.growth_ratio),
                    p.verdict
                )?;
            }
            writeln!(
                w,
                "summary,,,,{},{},{},{},{}",
                blank(report.lower_bound),
                blank(report.bracket_low),
                blank(report.bracket_high),
                report.resolved,
                machine(report.box_dim)
            )?;
        }
        Format::Json => write_json(&mut *w, report)?,
    }
    w.flush()?;
    Ok(())
}

fn cmd_dim(
    ctx: &Context,
    input: &std::path::Path,
    tol: f64,
    eps_bounded: f64,
    eps_divergent: f64,
    window: Option<usize>,
) -> Result<(), CliError> {
    let mu = load_measure(input)?;
    let table = level_masses(&mu);
    let config = ClassifierConfig {
        eps_bounded,
        eps_divergent,
        window,
    };
    let box_dim = box_counting_dim_from_table(&table)?;
    let probe_rows = |probes: &[SProbe]| {
        probes
            .iter()
            .map(|p| ProbeRow {
                s: p.s,
                growth_ratio: p.growth_ratio,
                verdict: p.verdict.to_string(),
            })
            .collect::<Vec<_>>()
    };
    let header = Header::new(ctx, Some(mu.resolution().levels()));

    match dim_lower_bound_with(&table, tol, &config) {
        Ok(estimate) => {
            let report = DimReport {
                header,
                lower_bound: Some(estimate.lower_bound),
                bracket_low: Some(estimate.bracket.0),
                bracket_high: Some(estimate.bracket.1),
                resolved: estimate.resolved,
                box_dim,
                probes: probe_rows(&estimate.probes),
            };
            write_dim_report(ctx, &report)?;
            if ctx.out.is_some() {
                println!(
                    "dimension lower bound {} (bracket {}..{}, box dim {})",
                    human(estimate.lower_bound),
                    human(estimate.bracket.0),
                    human(estimate.bracket.1),
                    human(box_dim)
                );
            }
            if estimate.resolved {
                Ok(())
            } else {
                Err(CliError::Inconclusive(format!(
                    "bracket {}..{} is wider than the tolerance {}; the report was written",
                    human(estimate.bracket.0),
                    human(estimate.bracket.1),
                    human(tol)
                )))
            }
        }
        Err(DimensionError::AllInconclusive { probes }) => {
            let report = DimReport {
                header,
                lower_bound: None,
                bracket_low: None,
                bracket_high: None,
                resolved: false,
                box_dim,
                probes: probe_rows(&probes),
            };
            write_dim_report(ctx, &report)?;
            Err(CliError::Inconclusive(
                "every probed exponent was inconclusive; the probe report was written".into(),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BenchRow {
    n: u32,
    cells: u64,
    method: String,
    status: String,
    median_seconds: Option<f64>,
    throughput_cells_per_s: Option<f64>,
    value: Option<f64>,
    deviation: Option<f64>,
}

#[derive(Serialize)]
struct BenchReport {
    header: Header,
    s: f64,
    repeats: u32,
    rows: Vec<BenchRow>,
}

fn cmd_bench(ctx: &Context, (n_lo, n_hi): (u32, u32), s: f64, repeats: u32) -> Result<(), CliError> {
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let spec = ctx.spec(s, None)?;
    let mut rows = Vec::new();
    for n in n_lo..=n_hi {
        let resolution = resolution(n)?;
        let mu = CylinderMeasure::random(resolution, ctx.seed, 0.0)?;
        let cells = resolution.cells() as u64;
        let mut values: Vec<f64> = Vec::new();
        for method in [
            EnergyMethod::Naive,
            EnergyMethod::Hierarchical,
            EnergyMethod::Spectral,
        ] {
            if method == EnergyMethod::Naive && n > NAIVE_MAX_LEVELS {
                rows.push(BenchRow {
                    n,
                    cells,
                    method: method.to_string(),
                    status: "skipped".into(),
                    median_seconds: None,
                    throughput_cells_per_s: None,
                    value: None,
                    deviation: None,
                });
                continue;
            }
            let mut timings = Vec::with_capacity(repeats as usize);
            let mut value = 0.0;
            for _ in 0..repeats {
                let start = Instant::now();
                value = match method {
                    EnergyMethod::Naive => energy_naive(&mu, &spec, ctx.threads)?.value,
                    EnergyMethod::Hierarchical => energy_hierarchical_from_table(
                        &level_masses(&mu),
                        &spec,
                    )
                    .value,
                    EnergyMethod::Spectral => energy_spectral(&mu, &spec).value,
                };
                timings.push(start.elapsed().as_secs_f64());
            }
            timings.sort_by(f64::total_cmp);
            let median = timings[timings.len() / 2];
            values.push(value);
            rows.push(BenchRow {
                n,
                cells,
                method: method.to_string(),
                status: "ok".into(),
                median_seconds: Some(median),
                throughput_cells_per_s: Some(cells as f64 / median.max(f64::MIN_POSITIVE)),
                value: Some(value),
                deviation: None,
            });
        }
        let mut worst = 0.0f64;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                worst = worst.max(relative_deviation(values[i], values[j]));
            }
        }
        for row in rows.iter_mut().rev() {
            if row.n == n && row.status == "ok" {
                row.deviation = Some(worst);
            } else if row.n != n {
                break;
            }
        }
    }

    let header = Header::new(ctx, None);
    let mut w = ctx.writer()?;
    match ctx.format {
        Format::Csv => {
            header.write_csv(&mut *w)?;
            writeln!(w, "# s={}", machine(s))?;
            writeln!(w, "# repeats={repeats}")?;
            writeln!(
                w,
                "n,cells,method,status,median_seconds,throughput_cells_per_s,value,deviation"
            )?;
            let blank = |v: Option<f64>| v.map_or(String::new(), machine);
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    r.n,
                    r.cells,
                    r.method,
                    r.status,
                    blank(r.median_seconds),
                    blank(r.throughput_cells_per_s),
                    blank(r.value),
                    blank(r.deviation)
                )?;
            }
        }
        Format::Json => write_json(&mut *w, &BenchReport { header, s, repeats, rows })?,
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parser_accepts_single_values_and_ranges() {
        assert_eq!(parse_u64_range("7").unwrap(), (7, 7));
        assert_eq!(parse_u64_range("2..9").unwrap(), (2, 9));
        assert!(parse_u64_range("9..2").is_err());
        assert!(parse_u64_range("x..2").is_err());
        assert_eq!(parse_u32_range("8..12").unwrap(), (8, 12));
    }

    #[test]
    fn machine_format_is_17_significant_digits() {
        assert_eq!(machine(0.5), "5.0000000000000000e-1");
        assert_eq!(machine(1.0 / 3.0), "3.3333333333333331e-1");
    }

    #[test]
    fn relative_deviation_is_symmetric_and_zero_on_equal() {
        assert_eq!(relative_deviation(1.5, 1.5), 0.0);
        let d = relative_deviation(1.0, 1.0 + 1e-9);
        assert!(d > 0.0 && d < 2e-9);
        assert_eq!(relative_deviation(2.0, 1.0), relative_deviation(1.0, 2.0));
    }

    #[test]
    fn cli_parses_nested_generator_flags() {
        let cli = Cli::try_parse_from([
            "dyaden", "gen", "pattern", "--n", "12", "--zeros", "2,4,6", "--out", "/tmp/x",
        ])
        .unwrap();
        assert!(matches!(
            cli.command,
            Command::Gen(GenArgs {
                kind: GenKind::Pattern { n: 12, .. },
                ..
            })
        ));
        assert_eq!(cli.out, Some(PathBuf::from("/tmp/x")));
    }

    #[test]
    fn cli_rejects_unknown_method() {
        assert!(Cli::try_parse_from(["dyaden", "energy", "--in", "x", "--s", "0.5", "--method", "magic"]).is_err());
    }
}
