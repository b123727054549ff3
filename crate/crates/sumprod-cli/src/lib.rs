//! Command-line front end: one subcommand per experiment, one report per run.
//!
//! Every run prints a single report on standard output. The default format is
//! a short human summary; `--format json` emits an envelope with the echoed
//! parameters, the payload, the wall time and the crate version, and
//! `--format csv` prints the subcommand's primary table. Exit codes separate
//! the three outcomes a harness cares about: 0 success, 2 parameter or input
//! format errors (diagnostic on standard error), 3 cost-guard refusals.
//!
//! Reruns with identical parameters reproduce the payload bit for bit; the
//! kernels are sequential and deterministic, so this holds for every value of
//! `--threads`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use sumprod::avg::{self, TruncationLadder};
use sumprod::catalog;
use sumprod::ineq::{
    dilation_transfer_gap, multiplicative_vdc, tk_transfer_discrepancy, turan_kubilius_direct,
    turan_kubilius_log, VdcFamily,
};
use sumprod::patterns::{
    density_report, dsharp_estimate, find_patterns, iterated_affine_correlation,
    valuation_obstruction_check, PatternConstraints, SetSpec,
};
use sumprod::poly::{IntPolynomial, RationalPoly};
use sumprod::primes::{mertens_log_sum, mertens_reciprocal_sum, sieve_block};
use sumprod::ramsey::{
    mr_lower_bound, search_threshold, verify_coloring, Coloring, SearchCertificate,
    SearchOutcome, DEFAULT_NODE_BUDGET,
};
use sumprod::seq::{Alpha, SequenceSpec};
use sumprod::spectral::{
    correlation_sequence, herglotz_psd_check, prime_exp_sum, rational_mass, AvgMode,
};
use sumprod::structure::{aperiodicity_score, modulus_ladder_decompose, residue_projection};
use sumprod::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Short readable summary.
    Human,
    /// Envelope with parameters, payload, wall time and versions.
    Json,
    /// The subcommand's primary table, one header line first.
    Csv,
}

#[derive(Parser)]
#[command(
    name = "sumprod",
    version,
    about = "Experiments with logarithmic averages, sum-product patterns and colorings",
    arg_required_else_help = false
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,

    /// Worker threads; only independent searches fan out, so any value
    /// reproduces the single-threaded output bit for bit.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run each module's trivial examples and exit nonzero on any mismatch.
    #[arg(long, hide = true)]
    selftest: bool,

    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Logarithmic or Cesaro average of a bounded sequence over n <= N.
    Avg(AvgCmd),
    /// Sieve the primes p <= M with p = 1 (mod W) and report block statistics.
    Primes(PrimesCmd),
    /// Logarithmically averaged Turan-Kubilius inequality.
    Tk(TkCmd),
    /// Discrepancy of the average under iterated prime dilations.
    TkTransfer(TkTransferCmd),
    /// Multiplicative van der Corput inequality with explicit budgets.
    Mvdc(MvdcCmd),
    /// Weighted average of e(Q(p) alpha) over a filtered prime block.
    Expsum(ExpsumCmd),
    /// Autocorrelations, positive-definiteness and spectral mass on 1/q grids.
    Spectral(SpectralCmd),
    /// Periodic projection, aperiodic remainder and modulus ladders.
    Structure(StructureCmd),
    /// Cesaro and logarithmic densities of a set along a truncation ladder.
    Density(DensityCmd),
    /// Min-max multiplicative density along a divisibility chain.
    Dsharp(DsharpCmd),
    /// Exhaustive scan for {x + Q(y), x*y} configurations inside a set.
    Pattern(PatternCmd),
    /// The two pattern-free example sets with their defining diagnostics.
    Counterexample(CounterexampleCmd),
    /// Nested logarithmic correlation along k-fold prime dilations.
    Correlate(CorrelateCmd),
    /// Coloring searches for monochromatic {x + y, x*y} pairs.
    Ramsey {
        #[command(subcommand)]
        cmd: RamseyCmd,
    },
}

#[derive(Args)]
struct AvgCmd {
    /// Sequence spec, e.g. const:1, alternating, liouville, char:sqrt2,
    /// residue:3,1, table:1,-1,0, indicator:evens.
    #[arg(long = "f", allow_hyphen_values = true)]
    f: SequenceSpec,
    /// Averaging scale: the pass covers 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
    /// Weighting: log (weights 1/n) or cesaro (weights 1).
    #[arg(long, default_value = "log")]
    mode: AvgMode,
}

#[derive(Args)]
struct PrimesCmd {
    /// Keep only primes p = 1 (mod W); W = 1 keeps the whole block.
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Prime cutoff: the block holds the filtered primes p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Echo at most this many primes in the payload.
    #[arg(long, default_value_t = 25)]
    limit: usize,
}

#[derive(Args)]
struct TkCmd {
    /// Averaging scale: the outer average covers 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
    /// Prime cutoff for the block p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Keep only primes p = 1 (mod W).
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Also run the literal sieved pass and report its gap to the closed form.
    #[arg(long)]
    direct: bool,
}

#[derive(Args)]
struct TkTransferCmd {
    /// Sequence spec to average (1-bounded).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: SequenceSpec,
    /// Number of prime dilations applied to the argument.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Keep only primes p = 1 (mod W).
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Prime cutoff for the block p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Averaging scale: the base average covers 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
}

#[derive(Args)]
struct MvdcCmd {
    /// Sequence spec multiplying the dilated term (1-bounded).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: SequenceSpec,
    /// Sequence spec evaluated along the dilation p*n (1-bounded).
    #[arg(long = "g", allow_hyphen_values = true)]
    g: SequenceSpec,
    /// Keep only primes p = 1 (mod W).
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Prime cutoff for the block p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Averaging scale: inner averages cover 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
}

#[derive(Args)]
struct ExpsumCmd {
    /// Polynomial argument Q in the phase e(Q(p) alpha); `y^2`, `(y^2-1)/3`.
    #[arg(long = "Q", allow_hyphen_values = true)]
    q: RationalPoly,
    /// Frequency: sqrt2, sqrt:K, P/Q or a decimal literal.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Alpha,
    /// Residue filter modulus: the numerator keeps p = b (mod a).
    #[arg(long, default_value_t = 1)]
    a: u64,
    /// Residue filter class b (mod a); may be negative.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    b: i64,
    /// Keep only primes p = 1 (mod W).
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Prime cutoff for the block p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Weighting over the block: log (weights 1/p) or cesaro (weights 1).
    #[arg(long, default_value = "log")]
    mode: AvgMode,
}

#[derive(Args)]
struct SpectralCmd {
    /// Sequence spec to autocorrelate (bounded).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: SequenceSpec,
    /// Averaging scale: correlations are E^log over 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
    /// Largest lag m of phi(m); needs max-lag <= N/10.
    #[arg(long, default_value_t = 24)]
    max_lag: u64,
    /// Toeplitz order for the positive-definiteness check;
    /// defaults to min(max-lag + 1, 25).
    #[arg(long)]
    psd_order: Option<usize>,
    /// Report spectral mass on the rational grid {0, 1/q, ..., (q-1)/q}.
    #[arg(long)]
    mass_q: Option<u64>,
    /// Averaging length for the mass estimate (uses lags q, 2q, ..., Mq);
    /// defaults to max-lag / q.
    #[arg(long)]
    mass_m: Option<u64>,
}

#[derive(Args)]
struct StructureCmd {
    /// Sequence spec to decompose (bounded).
    #[arg(long = "f", allow_hyphen_values = true)]
    f: SequenceSpec,
    /// Averaging scale: all projections average over 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
    /// Project onto the q-periodic sequences (needs q <= N/10).
    #[arg(long)]
    q: Option<u64>,
    /// Also decompose along the ladder lcm(1..k) for k <= this.
    #[arg(long)]
    ladder_k: Option<u64>,
    /// Average |f| over windows of this length along q*Z to score
    /// aperiodicity (needs --q and q*H <= N/10).
    #[arg(long = "H")]
    h: Option<u64>,
}

#[derive(Args)]
struct LadderArgs {
    /// Explicit ladder cutoffs, comma separated and strictly increasing.
    #[arg(long, value_delimiter = ',')]
    cutoffs: Option<Vec<u64>>,
    /// Geometric ladder start,factor,count (e.g. 10,10,5 for 10..10^5).
    #[arg(long, value_delimiter = ',')]
    geometric: Option<Vec<u64>>,
}

impl LadderArgs {
    /// Falls back to 10, 100, ..., 10^5 when neither flag is given.
    fn resolve(&self) -> Result<TruncationLadder> {
        match (&self.cutoffs, &self.geometric) {
            (Some(_), Some(_)) => Err(Error::param("--cutoffs and --geometric are exclusive")),
            (Some(c), None) => TruncationLadder::new(c.clone()),
            (None, Some(g)) => {
                let [start, factor, count] = g[..] else {
                    return Err(Error::param("--geometric needs start,factor,count"));
                };
                let count = usize::try_from(count)
                    .map_err(|_| Error::param("geometric ladder count is too large"))?;
                TruncationLadder::geometric(start, factor, count)
            }
            (None, None) => TruncationLadder::geometric(10, 10, 5),
        }
    }
}

#[derive(Args)]
struct DensityCmd {
    /// Set spec, e.g. all, evens, mult-even, primes-shifted:-1,
    /// double-exp-blocks, valuation-blocks:3, file:PATH.
    #[arg(long, allow_hyphen_values = true)]
    set: SetSpec,
    #[command(flatten)]
    ladder: LadderArgs,
}

#[derive(Args)]
struct DsharpCmd {
    /// Set spec to estimate the multiplicative density of.
    #[arg(long, allow_hyphen_values = true)]
    set: SetSpec,
    #[command(flatten)]
    ladder: LadderArgs,
    /// Divisibility chain a_1 | a_2 | ..., comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2])]
    chain: Vec<u64>,
    /// Dilations m = a, 2a, ..., cap*a probed per chain entry.
    #[arg(long, default_value_t = 4)]
    cap: u64,
}

#[derive(Args)]
struct PatternCmd {
    /// Set spec to scan.
    #[arg(long, allow_hyphen_values = true)]
    set: SetSpec,
    /// Shift polynomial Q in the pair {x + Q(y), x*y}; variable y.
    #[arg(long = "Q", allow_hyphen_values = true)]
    q: IntPolynomial,
    /// Smallest x scanned.
    #[arg(long, default_value_t = 1)]
    x_min: u64,
    /// Largest x scanned.
    #[arg(long)]
    x_max: u64,
    /// Smallest y scanned.
    #[arg(long, default_value_t = 1)]
    y_min: u64,
    /// Largest y scanned.
    #[arg(long)]
    y_max: u64,
    /// Both pattern values must land in [1, n-max];
    /// defaults to x-max * y-max.
    #[arg(long)]
    n_max: Option<u64>,
    /// Require x, y >= this (2 excludes the x = y = 1 trivia).
    #[arg(long, default_value_t = 2)]
    min_xy: u64,
    /// Count pairs with x + Q(y) = x*y too.
    #[arg(long)]
    allow_equal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExampleSet {
    /// Blocks [2^(2^n), 2^(2^n) sqrt2): positive Cesaro density upstairs,
    /// no {x + y - 1, x*y} patterns.
    DoubleExp,
    /// 2-adic valuation blocks: no {x + y, x*y} patterns by a parity
    /// obstruction.
    Valuation,
}

#[derive(Args)]
struct CounterexampleCmd {
    /// Which example set to audit.
    #[arg(long, value_enum)]
    which: ExampleSet,
    /// Largest x and y in the pattern scan; defaults to 50000 (double-exp,
    /// with x, y >= 2) or 10000 (valuation, with x, y >= 1).
    #[arg(long)]
    pair_max: Option<u64>,
    /// Cap on both pattern values; defaults to 100000 (double-exp)
    /// or 10^8 (valuation).
    #[arg(long)]
    n_max: Option<u64>,
    /// Pair bound for the valuation obstruction proof scan.
    #[arg(long, default_value_t = 1000)]
    bound: u64,
    /// Density ladder cutoffs for the double-exp report.
    #[arg(long, value_delimiter = ',', default_values_t = [1_000u64, 10_000, 92_681])]
    cutoffs: Vec<u64>,
}

#[derive(Args)]
struct CorrelateCmd {
    /// Set spec whose indicator is correlated.
    #[arg(long, allow_hyphen_values = true)]
    set: SetSpec,
    /// Shift polynomial Q; the pattern pair is {a*n + Q(v*P), a*v*P*n}.
    #[arg(long = "Q", allow_hyphen_values = true)]
    q: IntPolynomial,
    /// Number of prime factors in the dilation products P.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// Keep only primes p = 1 (mod W).
    #[arg(long = "W", default_value_t = 1)]
    w: u64,
    /// Prime cutoff for the block p <= M.
    #[arg(long = "M")]
    m: u64,
    /// Inner averaging scale: 1 <= n <= N.
    #[arg(long = "N")]
    n: u64,
    /// Multiplier a of the linear argument a*n.
    #[arg(long, default_value_t = 1)]
    a: u64,
    /// Multiplier v inside the dilation v*P.
    #[arg(long, default_value_t = 1)]
    v: u64,
}

#[derive(Args)]
struct ConstraintArgs {
    /// Require x, y >= this in every monochromatic pair.
    #[arg(long, default_value_t = 2)]
    min_xy: u64,
    /// Also count pairs with x + y = x*y.
    #[arg(long)]
    allow_equal: bool,
}

impl ConstraintArgs {
    fn resolve(&self) -> PatternConstraints {
        PatternConstraints { min_xy: self.min_xy, require_distinct: !self.allow_equal }
    }
}

#[derive(Subcommand)]
enum RamseyCmd {
    /// One certificate per N in [n-start, n-limit]: a verified good coloring
    /// or an exhaustion proof.
    Search {
        /// Number of colors.
        #[arg(long)]
        r: u32,
        /// First N searched.
        #[arg(long, default_value_t = 1)]
        n_start: u64,
        /// Last N searched.
        #[arg(long)]
        n_limit: u64,
        /// Backtracking node budget per N.
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        #[command(flatten)]
        constraints: ConstraintArgs,
    },
    /// Walk N upward until the first forced scale M(r).
    Threshold {
        /// Number of colors.
        #[arg(long)]
        r: u32,
        /// Backtracking node budget per N.
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
        /// Write the best good coloring to this file in the text
        /// certificate format.
        #[arg(long)]
        save: Option<PathBuf>,
        #[command(flatten)]
        constraints: ConstraintArgs,
    },
    /// Re-check a saved coloring certificate with the independent verifier.
    Verify {
        /// Path to a text certificate.
        #[arg(long)]
        cert: PathBuf,
    },
}

/// Everything one run produces, before formatting.
struct RunOutput {
    parameters: Value,
    payload: Value,
    human: String,
    csv_header: &'static [&'static str],
    csv_rows: Vec<Vec<String>>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    subcommand: &'a str,
    parameters: &'a Value,
    payload: &'a Value,
    wall_time_s: f64,
    versions: Versions,
}

#[derive(Serialize)]
struct Versions {
    sumprod: &'static str,
    schema: u32,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("sumprod: --threads must be >= 1");
            return 2;
        }
        // Only fails when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if cli.selftest {
        return selftest();
    }
    let Some(cmd) = cli.cmd else {
        eprintln!("sumprod: missing subcommand; see --help");
        return 2;
    };
    let started = Instant::now();
    match dispatch(&cmd) {
        Ok(out) => {
            emit(cli.format, subcommand_name(&cmd), &out, started.elapsed().as_secs_f64());
            0
        }
        Err(e) => {
            eprintln!("sumprod: {e}");
            match e {
                Error::CostGuard { .. } => 3,
                _ => 2,
            }
        }
    }
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Avg(_) => "avg",
        Cmd::Primes(_) => "primes",
        Cmd::Tk(_) => "tk",
        Cmd::TkTransfer(_) => "tk-transfer",
        Cmd::Mvdc(_) => "mvdc",
        Cmd::Expsum(_) => "expsum",
        Cmd::Spectral(_) => "spectral",
        Cmd::Structure(_) => "structure",
        Cmd::Density(_) => "density",
        Cmd::Dsharp(_) => "dsharp",
        Cmd::Pattern(_) => "pattern",
        Cmd::Counterexample(_) => "counterexample",
        Cmd::Correlate(_) => "correlate",
        Cmd::Ramsey { cmd } => match cmd {
            RamseyCmd::Search { .. } => "ramsey search",
            RamseyCmd::Threshold { .. } => "ramsey threshold",
            RamseyCmd::Verify { .. } => "ramsey verify",
        },
    }
}

// A closed pipe (e.g. piping into head) is not an error worth reporting.
fn emit(format: Format, name: &str, out: &RunOutput, wall_time_s: f64) {
    use std::io::Write as _;
    let stdout = std::io::stdout();
    let result = match format {
        Format::Human => writeln!(stdout.lock(), "{}", out.human),
        Format::Json => {
            let envelope = Envelope {
                subcommand: name,
                parameters: &out.parameters,
                payload: &out.payload,
                wall_time_s,
                versions: Versions { sumprod: env!("CARGO_PKG_VERSION"), schema: 1 },
            };
            let text = serde_json::to_string_pretty(&envelope).expect("report serializes");
            writeln!(stdout.lock(), "{text}")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout.lock());
            w.write_record(out.csv_header)
                .and_then(|()| out.csv_rows.iter().try_for_each(|row| w.write_record(row)))
                .map_err(std::io::Error::from)
                .and_then(|()| w.flush())
        }
    };
    if let Err(e) = result {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            panic!("failed writing the report: {e}");
        }
    }
}

fn dispatch(cmd: &Cmd) -> Result<RunOutput> {
    match cmd {
        Cmd::Avg(c) => run_avg(c),
        Cmd::Primes(c) => run_primes(c),
        Cmd::Tk(c) => run_tk(c),
        Cmd::TkTransfer(c) => run_tk_transfer(c),
        Cmd::Mvdc(c) => run_mvdc(c),
        Cmd::Expsum(c) => run_expsum(c),
        Cmd::Spectral(c) => run_spectral(c),
        Cmd::Structure(c) => run_structure(c),
        Cmd::Density(c) => run_density(c),
        Cmd::Dsharp(c) => run_dsharp(c),
        Cmd::Pattern(c) => run_pattern(c),
        Cmd::Counterexample(c) => run_counterexample(c),
        Cmd::Correlate(c) => run_correlate(c),
        Cmd::Ramsey { cmd } => match cmd {
            RamseyCmd::Search { r, n_start, n_limit, budget, constraints } => {
                run_ramsey_search(*r, *n_start, *n_limit, *budget, constraints.resolve())
            }
            RamseyCmd::Threshold { r, budget, save, constraints } => {
                run_ramsey_threshold(*r, *budget, save.as_deref(), constraints.resolve())
            }
            RamseyCmd::Verify { cert } => run_ramsey_verify(cert),
        },
    }
}

fn cjson(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{} - {}i", z.re, -z.im)
    } else {
        format!("{} + {}i", z.re, z.im)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn run_avg(c: &AvgCmd) -> Result<RunOutput> {
    let value = match c.mode {
        AvgMode::Logarithmic => avg::log_average(&c.f, c.n)?,
        AvgMode::Cesaro => avg::cesaro_average(&c.f, c.n)?,
    };
    Ok(RunOutput {
        parameters: json!({ "f": c.f.to_string(), "N": c.n, "mode": c.mode.to_string() }),
        payload: json!({ "value": cjson(value), "norm": value.norm() }),
        human: format!("E^{}_{{n<={}}} [{}] = {}", c.mode, c.n, c.f, fmt_c(value)),
        csv_header: &["f", "N", "mode", "re", "im", "norm"],
        csv_rows: vec![vec![
            c.f.to_string(),
            c.n.to_string(),
            c.mode.to_string(),
            value.re.to_string(),
            value.im.to_string(),
            value.norm().to_string(),
        ]],
    })
}

fn run_primes(c: &PrimesCmd) -> Result<RunOutput> {
    let block = sieve_block(c.w, c.m)?;
    let recip = mertens_reciprocal_sum(&block);
    let log_sum = mertens_log_sum(&block);
    let first: Vec<u64> = block.primes().iter().take(c.limit).copied().collect();
    Ok(RunOutput {
        parameters: json!({ "W": c.w, "M": c.m, "limit": c.limit }),
        payload: json!({
            "count": block.len(),
            "max_prime": block.max_prime(),
            "reciprocal_sum": recip,
            "log_weight_sum": log_sum,
            "first_primes": first,
        }),
        human: format!(
            "primes p = 1 (mod {}), p <= {}: {} primes, max {}, sum 1/p = {:.6}",
            c.w,
            c.m,
            block.len(),
            block.max_prime().map_or_else(|| "-".into(), |p| p.to_string()),
            recip,
        ),
        csv_header: &["W", "M", "count", "max_prime", "reciprocal_sum", "log_weight_sum"],
        csv_rows: vec![vec![
            c.w.to_string(),
            c.m.to_string(),
            block.len().to_string(),
            block.max_prime().map_or_else(String::new, |p| p.to_string()),
            recip.to_string(),
            log_sum.to_string(),
        ]],
    })
}

fn run_tk(c: &TkCmd) -> Result<RunOutput> {
    let block = sieve_block(c.w, c.m)?;
    let report = turan_kubilius_log(&block, c.n)?;
    let mut payload = to_value(&report);
    if c.direct {
        let direct = turan_kubilius_direct(&block, c.n)?;
        payload["direct_lhs"] = json!(direct);
        payload["direct_gap"] = json!((report.lhs - direct).abs());
    }
    let human = format!(
        "Turan-Kubilius at N = {}, block (W = {}, M = {}): lhs = {:.6} <= {:.6} -> {}",
        c.n,
        c.w,
        c.m,
        report.lhs,
        report.rhs_main + report.rhs_error_budget,
        if report.holds { "holds" } else { "FAILS" },
    );
    let row = vec![
        c.n.to_string(),
        c.w.to_string(),
        c.m.to_string(),
        report.lhs.to_string(),
        report.rhs_main.to_string(),
        report.rhs_error_budget.to_string(),
        report.holds.to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({ "N": c.n, "M": c.m, "W": c.w, "direct": c.direct }),
        payload,
        human,
        csv_header: &["N", "W", "M", "lhs", "rhs_main", "rhs_error_budget", "holds"],
        csv_rows: vec![row],
    })
}

fn run_tk_transfer(c: &TkTransferCmd) -> Result<RunOutput> {
    let report = tk_transfer_discrepancy(&c.f, c.w, c.m, c.n, c.k)?;
    let human = format!(
        "transfer of [{}] through {} dilation(s), block (W = {}, M = {}), N = {}: \
         |base - transferred| = {:.6e} over {} products",
        c.f, c.k, c.w, c.m, c.n, report.discrepancy, report.distinct_products,
    );
    let row = vec![
        c.f.to_string(),
        c.k.to_string(),
        c.w.to_string(),
        c.m.to_string(),
        c.n.to_string(),
        report.discrepancy.to_string(),
        report.distinct_products.to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({ "f": c.f.to_string(), "k": c.k, "W": c.w, "M": c.m, "N": c.n }),
        payload: to_value(&report),
        human,
        csv_header: &["f", "k", "W", "M", "N", "discrepancy", "distinct_products"],
        csv_rows: vec![row],
    })
}

fn run_mvdc(c: &MvdcCmd) -> Result<RunOutput> {
    let block = sieve_block(c.w, c.m)?;
    let report = multiplicative_vdc(&VdcFamily::Uniform(c.f.clone()), &c.g, &block, c.n)?;
    let human = format!(
        "van der Corput for f = [{}], g = [{}], block (W = {}, M = {}), N = {}: \
         lhs = {:.6} <= {:.6} -> {}",
        c.f,
        c.g,
        c.w,
        c.m,
        c.n,
        report.lhs,
        report.rhs_main + report.rhs_error_budget,
        if report.holds { "holds" } else { "FAILS" },
    );
    let row = vec![
        c.f.to_string(),
        c.g.to_string(),
        c.w.to_string(),
        c.m.to_string(),
        c.n.to_string(),
        report.lhs.to_string(),
        report.rhs_main.to_string(),
        report.rhs_error_budget.to_string(),
        report.holds.to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({
            "f": c.f.to_string(), "g": c.g.to_string(), "W": c.w, "M": c.m, "N": c.n,
        }),
        payload: to_value(&report),
        human,
        csv_header: &["f", "g", "W", "M", "N", "lhs", "rhs_main", "rhs_error_budget", "holds"],
        csv_rows: vec![row],
    })
}

fn run_expsum(c: &ExpsumCmd) -> Result<RunOutput> {
    let value = prime_exp_sum(&c.q, &c.alpha, c.a, c.b, c.w, c.m, c.mode)?;
    let human = format!(
        "E^{}_{{p<={}, p={} (mod {})}} e({} * Q(p)), Q = {}: {} (|.| = {:.6})",
        c.mode,
        c.m,
        c.b,
        c.a,
        c.alpha,
        c.q,
        fmt_c(value),
        value.norm(),
    );
    let row = vec![
        c.q.to_string(),
        c.alpha.to_string(),
        c.a.to_string(),
        c.b.to_string(),
        c.w.to_string(),
        c.m.to_string(),
        c.mode.to_string(),
        value.re.to_string(),
        value.im.to_string(),
        value.norm().to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({
            "Q": c.q.to_string(), "alpha": c.alpha, "a": c.a, "b": c.b,
            "W": c.w, "M": c.m, "mode": c.mode.to_string(),
        }),
        payload: json!({ "value": cjson(value), "norm": value.norm() }),
        human,
        csv_header: &["Q", "alpha", "a", "b", "W", "M", "mode", "re", "im", "norm"],
        csv_rows: vec![row],
    })
}

fn run_spectral(c: &SpectralCmd) -> Result<RunOutput> {
    let corr = correlation_sequence(&c.f, c.n, c.max_lag)?;
    let order = c.psd_order.unwrap_or_else(|| (c.max_lag as usize + 1).min(25));
    let psd = herglotz_psd_check(&corr, order)?;

    let mut payload = json!({
        "eps_num": corr.eps_num(),
        "correlations": corr
            .values()
            .iter()
            .enumerate()
            .map(|(m, z)| json!({ "lag": m, "re": z.re, "im": z.im }))
            .collect::<Vec<_>>(),
        "psd": to_value(&psd),
    });
    let mut human = format!(
        "phi over lags 0..={} at N = {} for [{}]: phi(0) = {}, eps_num = {:.3e}\n\
         PSD at order {}: min eigenvalue {:.3e} against tolerance {:.3e} -> {}",
        c.max_lag,
        c.n,
        c.f,
        fmt_c(corr.phi(0)),
        corr.eps_num(),
        psd.order,
        psd.min_eigenvalue,
        psd.tolerance,
        if psd.psd { "positive semidefinite" } else { "NOT PSD" },
    );

    if let Some(q) = c.mass_q {
        if q == 0 {
            return Err(Error::param("--mass-q must be >= 1"));
        }
        let m = match c.mass_m {
            Some(m) => m,
            None => c.max_lag / q,
        };
        if m == 0 {
            return Err(Error::param(format!(
                "mass estimate needs at least one multiple of q = {q} inside max-lag = {}",
                c.max_lag
            )));
        }
        let mass = rational_mass(&corr, q, m)?;
        payload["rational_mass"] = json!({ "q": q, "m": m, "value": mass });
        let _ = write!(human, "\nmass on the 1/{q} grid (M = {m}): {mass:.6}");
    }

    let csv_rows = corr
        .values()
        .iter()
        .enumerate()
        .map(|(m, z)| vec![m.to_string(), z.re.to_string(), z.im.to_string()])
        .collect();
    Ok(RunOutput {
        parameters: json!({
            "f": c.f.to_string(), "N": c.n, "max_lag": c.max_lag, "psd_order": order,
            "mass_q": c.mass_q, "mass_m": c.mass_m,
        }),
        payload,
        human,
        csv_header: &["lag", "re", "im"],
        csv_rows,
    })
}

fn run_structure(c: &StructureCmd) -> Result<RunOutput> {
    if c.q.is_none() && c.ladder_k.is_none() {
        return Err(Error::param("structure needs --q and/or --ladder-k"));
    }
    if c.h.is_some() && c.q.is_none() {
        return Err(Error::param("--H scores aperiodicity along --q; pass both"));
    }

    let mut payload = json!({});
    let mut human = String::new();
    let mut csv_header: &'static [&'static str] = &["class", "mean_re", "mean_im"];
    let mut csv_rows = Vec::new();

    if let Some(q) = c.q {
        let d = residue_projection(&c.f, q, c.n)?;
        let means = d.class_means();
        payload["projection"] = json!({
            "modulus": d.modulus,
            "scale": d.scale,
            "residual_energy": d.residual_energy,
            "class_means": means
                .iter()
                .enumerate()
                .map(|(r, z)| json!({ "class": r, "re": z.re, "im": z.im }))
                .collect::<Vec<_>>(),
            "f_str": d.f_str.to_string(),
        });
        let _ = write!(
            human,
            "projection of [{}] onto period {} at N = {}: residual energy {:.6e}",
            c.f, q, c.n, d.residual_energy,
        );
        for (r, z) in means.iter().enumerate() {
            csv_rows.push(vec![r.to_string(), z.re.to_string(), z.im.to_string()]);
        }
        if let Some(h) = c.h {
            let score = aperiodicity_score(&c.f, q, h, c.n)?;
            payload["aperiodicity"] = json!({ "q": q, "H": h, "score": score });
            let _ = write!(human, "\naperiodicity along {q}Z with windows of {h}: {score:.6}");
        }
    }

    if let Some(k) = c.ladder_k {
        let ladder = modulus_ladder_decompose(&c.f, k, c.n)?;
        payload["ladder"] = json!({
            "moduli": ladder.moduli,
            "residuals": ladder.residuals,
        });
        if !human.is_empty() {
            human.push('\n');
        }
        let _ = write!(human, "ladder residuals for [{}] at N = {}:", c.f, c.n);
        for (q, e) in ladder.moduli.iter().zip(&ladder.residuals) {
            let _ = write!(human, "\n  lcm-modulus {q}: {e:.6}");
        }
        if c.q.is_none() {
            csv_header = &["modulus", "residual_energy"];
            csv_rows = ladder
                .moduli
                .iter()
                .zip(&ladder.residuals)
                .map(|(q, e)| vec![q.to_string(), e.to_string()])
                .collect();
        }
    }

    Ok(RunOutput {
        parameters: json!({
            "f": c.f.to_string(), "N": c.n, "q": c.q, "ladder_k": c.ladder_k, "H": c.h,
        }),
        payload,
        human,
        csv_header,
        csv_rows,
    })
}

fn run_density(c: &DensityCmd) -> Result<RunOutput> {
    let ladder = c.ladder.resolve()?;
    let report = density_report(&c.set, &ladder)?;
    let mut human = format!("densities of [{}]:", report.set);
    for (i, n) in report.cutoffs.iter().enumerate() {
        let _ = write!(
            human,
            "\n  N = {}: count {}, cesaro {:.6}, logarithmic {:.6}",
            n, report.counts[i], report.cesaro[i], report.logarithmic[i],
        );
    }
    let csv_rows = report
        .cutoffs
        .iter()
        .enumerate()
        .map(|(i, n)| {
            vec![
                n.to_string(),
                report.counts[i].to_string(),
                report.cesaro[i].to_string(),
                report.logarithmic[i].to_string(),
            ]
        })
        .collect();
    Ok(RunOutput {
        parameters: json!({ "set": c.set.to_string(), "cutoffs": report.cutoffs }),
        payload: to_value(&report),
        human,
        csv_header: &["cutoff", "count", "cesaro", "logarithmic"],
        csv_rows,
    })
}

fn run_dsharp(c: &DsharpCmd) -> Result<RunOutput> {
    let ladder = c.ladder.resolve()?;
    let report = dsharp_estimate(&c.set, &ladder, &c.chain, c.cap)?;
    let mut human = format!(
        "d# of [{}] along chain {:?}, cap {}, scale {}: {:.6} \
         (witness divisor {}, multiple {})",
        report.set,
        report.chain,
        report.multiplier_cap,
        report.scale,
        report.value,
        report.witness_divisor,
        report.witness_multiple,
    );
    for (a, v) in report.chain.iter().zip(&report.per_divisor_max) {
        let _ = write!(human, "\n  divisor {a}: max over multiples {v:.6}");
    }
    let csv_rows = report
        .chain
        .iter()
        .zip(&report.per_divisor_max)
        .map(|(a, v)| {
            vec![
                report.set.clone(),
                a.to_string(),
                v.to_string(),
                report.value.to_string(),
            ]
        })
        .collect();
    Ok(RunOutput {
        parameters: json!({
            "set": c.set.to_string(), "chain": c.chain, "cap": c.cap, "scale": report.scale,
        }),
        payload: to_value(&report),
        human,
        csv_header: &["set", "chain_divisor", "per_divisor_max", "value"],
        csv_rows,
    })
}

fn pattern_output(report: &sumprod::patterns::PatternReport) -> (String, Vec<Vec<String>>) {
    let mut human = format!(
        "{{x + Q(y), x*y}} in [{}] with Q = {}: {} hit(s) over {} pairs",
        report.set, report.poly, report.total_hits, report.pairs_scanned,
    );
    for h in report.hits.iter().take(10) {
        let _ = write!(
            human,
            "\n  (x, y) = ({}, {}): {{{}, {}}}",
            h.x, h.y, h.sum, h.product,
        );
    }
    if report.total_hits as usize > report.hits.len() {
        let _ = write!(human, "\n  ... {} stored of {}", report.hits.len(), report.total_hits);
    } else if report.hits.len() > 10 {
        let _ = write!(human, "\n  ... {} more stored", report.hits.len() - 10);
    }
    let rows = report
        .hits
        .iter()
        .map(|h| {
            vec![h.x.to_string(), h.y.to_string(), h.sum.to_string(), h.product.to_string()]
        })
        .collect();
    (human, rows)
}

fn run_pattern(c: &PatternCmd) -> Result<RunOutput> {
    let n_max = c.n_max.unwrap_or_else(|| c.x_max.saturating_mul(c.y_max));
    let constraints = PatternConstraints { min_xy: c.min_xy, require_distinct: !c.allow_equal };
    let report = find_patterns(
        &c.set,
        &c.q,
        (c.x_min, c.x_max),
        (c.y_min, c.y_max),
        n_max,
        constraints,
    )?;
    let (human, csv_rows) = pattern_output(&report);
    Ok(RunOutput {
        parameters: json!({
            "set": c.set.to_string(), "Q": c.q.to_string(),
            "x_range": [c.x_min, c.x_max], "y_range": [c.y_min, c.y_max],
            "n_max": n_max, "constraints": to_value(&constraints),
        }),
        payload: to_value(&report),
        human,
        csv_header: &["x", "y", "sum", "product"],
        csv_rows,
    })
}

fn run_counterexample(c: &CounterexampleCmd) -> Result<RunOutput> {
    match c.which {
        ExampleSet::DoubleExp => {
            let set = SetSpec::DoubleExpBlocks;
            let q: IntPolynomial = "y-1".parse()?;
            let pair_max = c.pair_max.unwrap_or(50_000);
            let n_max = c.n_max.unwrap_or(100_000);
            let patterns = find_patterns(
                &set,
                &q,
                (2, pair_max),
                (2, pair_max),
                n_max,
                PatternConstraints::default(),
            )?;
            let ladder = TruncationLadder::new(c.cutoffs.clone())?;
            let density = density_report(&set, &ladder)?;
            let top = density.cutoffs.len() - 1;
            let human = format!(
                "double-exp blocks: {} {{x + y - 1, x*y}} hit(s) over {} pairs \
                 (values <= {});\nat N = {}: cesaro density {:.4}, logarithmic {:.4}",
                patterns.total_hits,
                patterns.pairs_scanned,
                n_max,
                density.cutoffs[top],
                density.cesaro[top],
                density.logarithmic[top],
            );
            let row = vec![
                "double-exp".into(),
                patterns.total_hits.to_string(),
                patterns.pairs_scanned.to_string(),
                density.cesaro[top].to_string(),
                density.logarithmic[top].to_string(),
                String::new(),
            ];
            Ok(RunOutput {
                parameters: json!({
                    "which": "double-exp", "pair_max": pair_max, "n_max": n_max,
                    "cutoffs": c.cutoffs,
                }),
                payload: json!({ "patterns": to_value(&patterns), "density": to_value(&density) }),
                human,
                csv_header: COUNTEREXAMPLE_HEADER,
                csv_rows: vec![row],
            })
        }
        ExampleSet::Valuation => {
            let set = SetSpec::ValuationBlocks { k_max: 3 };
            let q = IntPolynomial::identity();
            let pair_max = c.pair_max.unwrap_or(10_000);
            let n_max = c.n_max.unwrap_or(100_000_000);
            let obstruction = valuation_obstruction_check(c.bound)?;
            let patterns = find_patterns(
                &set,
                &q,
                (1, pair_max),
                (1, pair_max),
                n_max,
                PatternConstraints { min_xy: 1, require_distinct: false },
            )?;
            let human = format!(
                "valuation blocks: obstruction v2(x + y) = v2(x*y) -> even holds up to {} \
                 ({}); {} {{x + y, x*y}} hit(s) over {} pairs",
                c.bound,
                obstruction,
                patterns.total_hits,
                patterns.pairs_scanned,
            );
            let row = vec![
                "valuation".into(),
                patterns.total_hits.to_string(),
                patterns.pairs_scanned.to_string(),
                String::new(),
                String::new(),
                obstruction.to_string(),
            ];
            Ok(RunOutput {
                parameters: json!({
                    "which": "valuation", "pair_max": pair_max, "n_max": n_max, "bound": c.bound,
                }),
                payload: json!({ "obstruction": obstruction, "patterns": to_value(&patterns) }),
                human,
                csv_header: COUNTEREXAMPLE_HEADER,
                csv_rows: vec![row],
            })
        }
    }
}

const COUNTEREXAMPLE_HEADER: &[&str] = &[
    "which",
    "total_hits",
    "pairs_scanned",
    "cesaro_top",
    "logarithmic_top",
    "obstruction",
];

fn run_correlate(c: &CorrelateCmd) -> Result<RunOutput> {
    let report = iterated_affine_correlation(&c.set, &c.q, c.k, c.w, c.m, c.n, c.a, c.v)?;
    let human = format!(
        "E^log_P E^log_n 1_A({}n + Q({}P)) 1_A({}*{}*P*n) for A = [{}], Q = {}, \
         k = {}, block (W = {}, M = {}), N = {}: {:.6} ({} products, {} path)",
        c.a, c.v, c.a, c.v, c.set, c.q, c.k, c.w, c.m, c.n, report.value,
        report.distinct_products, report.path,
    );
    let row = vec![
        c.set.to_string(),
        c.q.to_string(),
        c.k.to_string(),
        c.w.to_string(),
        c.m.to_string(),
        c.n.to_string(),
        c.a.to_string(),
        c.v.to_string(),
        report.value.to_string(),
        report.distinct_products.to_string(),
        report.path.to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({
            "set": c.set.to_string(), "Q": c.q.to_string(), "k": c.k,
            "W": c.w, "M": c.m, "N": c.n, "a": c.a, "v": c.v,
        }),
        payload: to_value(&report),
        human,
        csv_header: &[
            "set", "Q", "k", "W", "M", "N", "a", "v", "value", "distinct_products", "path",
        ],
        csv_rows: vec![row],
    })
}

fn certificate_row(cert: &SearchCertificate) -> Vec<String> {
    let (good, detail) = match &cert.outcome {
        SearchOutcome::GoodColoring(_) => (true, String::new()),
        SearchOutcome::Forced { leaves } => (false, leaves.to_string()),
    };
    vec![cert.n.to_string(), good.to_string(), cert.nodes.to_string(), detail]
}

fn run_ramsey_search(
    r: u32,
    n_start: u64,
    n_limit: u64,
    budget: u64,
    constraints: PatternConstraints,
) -> Result<RunOutput> {
    if n_start == 0 || n_start > n_limit {
        return Err(Error::param(format!("bad range [{n_start}, {n_limit}]")));
    }
    // Per-N searches are independent; indexed collect keeps the output order
    // (and hence the report) identical at every thread count.
    let certs: Vec<SearchCertificate> = (n_start..=n_limit)
        .into_par_iter()
        .map(|n| {
            search_threshold(r, n, n, constraints, budget)
                .map(|mut v| v.pop().expect("one certificate per scale"))
        })
        .collect::<Result<_>>()?;
    let mut human = format!("search with r = {r} colors over N in [{n_start}, {n_limit}]:");
    for cert in &certs {
        let line = match &cert.outcome {
            SearchOutcome::GoodColoring(_) => "good coloring".to_string(),
            SearchOutcome::Forced { leaves } => format!("forced ({leaves} leaves)"),
        };
        let _ = write!(human, "\n  N = {}: {} [{} nodes]", cert.n, line, cert.nodes);
    }
    let csv_rows = certs.iter().map(certificate_row).collect();
    Ok(RunOutput {
        parameters: json!({
            "r": r, "n_start": n_start, "n_limit": n_limit, "budget": budget,
            "constraints": to_value(&constraints),
        }),
        payload: json!({ "certificates": to_value(&certs) }),
        human,
        csv_header: &["N", "good", "nodes", "forced_leaves"],
        csv_rows,
    })
}

fn run_ramsey_threshold(
    r: u32,
    budget: u64,
    save: Option<&std::path::Path>,
    constraints: PatternConstraints,
) -> Result<RunOutput> {
    let report = mr_lower_bound(r, constraints, budget)?;
    let mut payload = to_value(&report);
    if let Some(path) = save {
        let coloring = report
            .coloring
            .as_ref()
            .ok_or_else(|| Error::param("no good coloring found; nothing to save"))?;
        std::fs::write(path, coloring.to_text(constraints))?;
        payload["saved"] = json!(path.display().to_string());
    }
    let status = match (report.forced_at, report.budget_exhausted) {
        (Some(m), _) => format!("M({r}) = {m}"),
        (None, true) => format!("budget exhausted; M({r}) > {}", report.best_n),
        (None, false) => "no forced scale found".to_string(),
    };
    let human = format!(
        "threshold walk with r = {r} color(s): best good coloring at N = {}; {}",
        report.best_n, status,
    );
    let row = vec![
        r.to_string(),
        report.best_n.to_string(),
        report.forced_at.map_or_else(String::new, |m| m.to_string()),
        report.budget_exhausted.to_string(),
    ];
    Ok(RunOutput {
        parameters: json!({
            "r": r, "budget": budget, "constraints": to_value(&constraints),
            "save": save.map(|p| p.display().to_string()),
        }),
        payload,
        human,
        csv_header: &["r", "best_n", "forced_at", "budget_exhausted"],
        csv_rows: vec![row],
    })
}

fn run_ramsey_verify(cert: &std::path::Path) -> Result<RunOutput> {
    let text = std::fs::read_to_string(cert)?;
    let (coloring, constraints) = Coloring::from_text(&text)?;
    let violation = verify_coloring(&coloring, constraints);
    let valid = violation.is_none();
    let human = match violation {
        None => format!(
            "certificate {} verifies: N = {}, r = {} colors, no monochromatic pair",
            cert.display(),
            coloring.n,
            coloring.r,
        ),
        Some((x, y)) => format!(
            "certificate {} FAILS at (x, y) = ({x}, {y}): {{{}, {}}} is monochromatic",
            cert.display(),
            x + y,
            x * y,
        ),
    };
    let row = vec![
        coloring.n.to_string(),
        coloring.r.to_string(),
        valid.to_string(),
        violation.map_or_else(String::new, |(x, _)| x.to_string()),
        violation.map_or_else(String::new, |(_, y)| y.to_string()),
    ];
    Ok(RunOutput {
        parameters: json!({ "cert": cert.display().to_string() }),
        payload: json!({
            "n": coloring.n,
            "r": coloring.r,
            "constraints": to_value(&constraints),
            "valid": valid,
            "violation": violation.map(|(x, y)| json!({
                "x": x, "y": y, "sum": x + y, "product": x * y,
            })),
        }),
        human,
        csv_header: &["N", "r", "valid", "violation_x", "violation_y"],
        csv_rows: vec![row],
    })
}

/// Trivial examples from every module; prints one line per check.
fn selftest() -> i32 {
    let mut failures = 0u32;
    let mut check = |name: &str, ok: bool| {
        println!("selftest: {name} {}", if ok { "ok" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    check("catalog bounds", catalog::bound_check(2000));

    let one = SequenceSpec::constant(1.0);
    check(
        "unit averages are exactly 1",
        avg::log_average(&one, 1000).map_or(false, |z| z == Complex64::new(1.0, 0.0))
            && avg::cesaro_average(&one, 1000).map_or(false, |z| z == Complex64::new(1.0, 0.0)),
    );

    check(
        "dilation by 1 transfers exactly",
        dilation_transfer_gap(&SequenceSpec::alternating(), 1, 10_000)
            .map_or(false, |r| r.lhs == 0.0 && r.holds),
    );

    check(
        "Turan-Kubilius at N = 1000",
        sieve_block(1, 1000)
            .and_then(|b| turan_kubilius_log(&b, 1000))
            .map_or(false, |r| r.holds),
    );

    check(
        "van der Corput on constants",
        sieve_block(1, 100)
            .and_then(|b| {
                multiplicative_vdc(&VdcFamily::Uniform(one.clone()), &one, &b, 10_000)
            })
            .map_or(false, |r| r.holds),
    );

    check(
        "prime average of e(0) is exactly 1",
        Alpha::rational(0, 1)
            .and_then(|zero| {
                prime_exp_sum(
                    &RationalPoly::integer(IntPolynomial::identity()),
                    &zero,
                    1,
                    0,
                    1,
                    100,
                    AvgMode::Logarithmic,
                )
            })
            .map_or(false, |z| z == Complex64::new(1.0, 0.0)),
    );

    check(
        "constant correlations are PSD",
        correlation_sequence(&one, 10_000, 4)
            .and_then(|corr| {
                let flat = corr.phi(3) == Complex64::new(1.0, 0.0);
                herglotz_psd_check(&corr, 3).map(|r| flat && r.psd)
            })
            .unwrap_or(false),
    );

    check(
        "periodic functions project exactly",
        residue_projection(
            &SequenceSpec::ResidueIndicator { modulus: 2, residue: 0 },
            2,
            10_000,
        )
        .map_or(false, |d| d.residual_energy == 0.0),
    );

    check(
        "full set has logarithmic density exactly 1",
        TruncationLadder::new(vec![1000])
            .and_then(|l| density_report(&SetSpec::All, &l))
            .map_or(false, |r| r.logarithmic.last() == Some(&1.0)),
    );

    check(
        "d# of the full set is exactly 1",
        TruncationLadder::new(vec![1000])
            .and_then(|l| dsharp_estimate(&SetSpec::All, &l, &[1, 2], 3))
            .map_or(false, |r| r.value == 1.0),
    );

    check(
        "pattern scan finds (2, 3) in the integers",
        find_patterns(
            &SetSpec::All,
            &IntPolynomial::identity(),
            (1, 10),
            (1, 10),
            100,
            PatternConstraints::default(),
        )
        .map_or(false, |r| r.hits.iter().any(|h| h.x == 2 && h.y == 3)),
    );

    check(
        "2-adic valuation obstruction",
        valuation_obstruction_check(100).unwrap_or(false),
    );

    check(
        "first coloring threshold is 6",
        mr_lower_bound(1, PatternConstraints::default(), 100_000)
            .map_or(false, |r| r.best_n == 5 && r.forced_at == Some(6)),
    );

    check(
        "spec strings round-trip",
        ["char:sqrt2", "residue:3,1", "liouville", "table:1,-1"]
            .iter()
            .all(|s| s.parse::<SequenceSpec>().map_or(false, |f| f.to_string() == *s))
            && ["all", "primes-shifted:-1", "valuation-blocks:3"]
                .iter()
                .all(|s| s.parse::<SetSpec>().map_or(false, |set| set.to_string() == *s)),
    );

    if failures == 0 {
        println!("selftest: all checks passed");
        0
    } else {
        eprintln!("selftest: {failures} check(s) failed");
        1
    }
}
