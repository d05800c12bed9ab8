//! Command-line front end for the gradcode library.
//!
//! Subcommands: `construct`, `decode`, `bounds`, `failprob`, `curve`,
//! `train`, `example1`. Tabular output is CSV with a header row and
//! floats printed with 12 significant digits; decode outcomes serialize
//! to JSON. Every randomized run requires an explicit `--seed`, so
//! identical invocations produce byte-identical output files at any
//! thread count.
//!
//! Worker, partition, and batch indices are 1-based on the command line
//! and in files; the library is 0-based internally.
//!
//! Exit codes: 0 success, 1 domain/data error, 2 usage error. Set
//! `GRADCODE_LOG=debug` for diagnostics on stderr.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gradcode::bounds;
use gradcode::decode::{self, DecodeOutcome};
use gradcode::matrix::{CodingMatrix, ReceivedSet, SchemeTag};
use gradcode::montecarlo::{self, CurveConfig, DecoderKind, McConfig, SchemeSpec, TrialStats};
use gradcode::rng::RngSpec;
use gradcode::schemes;
use gradcode::trainer::{self, TrainConfig};
use gradcode::Error as LibError;

#[derive(Parser, Debug)]
#[command(
    name = "gradcode",
    version,
    about = "Gradient-coding schemes, decoders, load bounds, and experiment harnesses"
)]
struct Cli {
    /// Cap the number of worker threads (results are identical at any
    /// thread count).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a coding matrix and write it in the plain-text triplet format.
    Construct(ConstructArgs),
    /// Decode a straggler pattern against a matrix file.
    Decode(DecodeArgs),
    /// Sweep the load-bound formulas over s and epsilon into a CSV.
    Bounds(BoundsArgs),
    /// Monte Carlo failure probability for one configuration.
    Failprob(FailprobArgs),
    /// Failure probability across worker counts at a fixed straggler
    /// fraction, with per-n loads chosen automatically.
    Curve(CurveArgs),
    /// Distributed gradient descent on synthetic data with simulated
    /// stragglers.
    Train(TrainArgs),
    /// Replay the two fixed batch-raptor walkthrough instances and check
    /// them against their expected traces.
    Example1(Example1Args),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliScheme {
    Frc,
    Brc,
    Forget,
    Bernoulli,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CliDecoder {
    Ls,
    Peel,
    Frc,
}

impl From<CliDecoder> for DecoderKind {
    fn from(d: CliDecoder) -> Self {
        match d {
            CliDecoder::Ls => DecoderKind::Ls,
            CliDecoder::Peel => DecoderKind::Peel,
            CliDecoder::Frc => DecoderKind::FrcCombinatorial,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    scheme: CliScheme,
    /// Workers (= partitions).
    #[arg(long)]
    n: usize,
    /// Replication degree (frc) or expected row support (bernoulli).
    #[arg(long)]
    d: Option<usize>,
    /// Straggler fraction the code is built for (brc).
    #[arg(long)]
    delta: Option<f64>,
    /// Target recovery error fraction (brc).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Matrix file in triplet format (see `construct`).
    #[arg(long)]
    matrix: PathBuf,
    /// Comma-separated 1-based straggler workers, e.g. `5,6`.
    #[arg(long, conflicts_with = "s")]
    stragglers: Option<String>,
    /// Number of stragglers to sample uniformly (needs --seed).
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decoder; defaults to the scheme's own (frc -> frc, brc -> peel,
    /// otherwise ls).
    #[arg(long, value_enum)]
    decoder: Option<CliDecoder>,
    /// Failure threshold fraction: success iff residual <= eps * n.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    smin: usize,
    #[arg(long)]
    smax: usize,
    #[arg(long, default_value_t = 10)]
    sstep: usize,
    /// Comma-separated epsilon values.
    #[arg(long, default_value = "0,0.001,0.01")]
    eps: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FailprobArgs {
    #[arg(long, value_enum)]
    scheme: CliScheme,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    d: Option<usize>,
    /// Straggler fraction for the brc batch size; defaults to s/n.
    #[arg(long)]
    delta: Option<f64>,
    /// Failure threshold fraction (and brc code epsilon).
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum)]
    decoder: Option<CliDecoder>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Freeze one code draw instead of re-drawing per trial.
    #[arg(long)]
    fix_code: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long, value_enum)]
    scheme: CliScheme,
    /// Comma-separated worker counts, e.g. `100,300,1000`.
    #[arg(long)]
    n_list: String,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum)]
    decoder: Option<CliDecoder>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fix_code: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Flat key=value config file; flags override file entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<CliScheme>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Step size.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    /// Synthetic sample count.
    #[arg(long)]
    data_n: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Apply the partial aggregate immediately on decode failure instead
    /// of resampling stragglers.
    #[arg(long)]
    no_restart: bool,
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Example1Args {
    /// Write the two decode traces as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that carry their process exit code.
#[derive(Debug)]
enum CliError {
    /// Exit 1: parameter outside a formula's domain, bad input data,
    /// I/O failure.
    Domain(String),
    /// Exit 2: inconsistent or missing flags.
    Usage(String),
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };

    let threads = cli.threads;
    let body = || match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
    };
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                1
            }
        },
        None => body(),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Construct(a) => cmd_construct(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Failprob(a) => cmd_failprob(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Train(a) => cmd_train(a),
        Command::Example1(a) => cmd_example1(a),
    }
}

// ---------------------------------------------------------------------------
// construct
// ---------------------------------------------------------------------------

fn require_seed(seed: Option<u64>, what: &str) -> CliResult<u64> {
    seed.ok_or_else(|| {
        usage(format!(
            "{what} is randomized: an explicit --seed is required"
        ))
    })
}

fn cmd_construct(a: ConstructArgs) -> CliResult<()> {
    let matrix = match a.scheme {
        CliScheme::Frc => {
            let d = a.d.ok_or_else(|| usage("frc needs --d"))?;
            let seed = require_seed(a.seed, "frc construction")?;
            schemes::build_frc(a.n, d, &RngSpec::new(seed))?
        }
        CliScheme::Brc => {
            let delta = a.delta.ok_or_else(|| usage("brc needs --delta"))?;
            let eps = a.eps.ok_or_else(|| usage("brc needs --eps"))?;
            let seed = require_seed(a.seed, "brc construction")?;
            let cfg = schemes::BrcConfig::new(a.n, delta, eps)?;
            schemes::build_brc(&cfg, &RngSpec::new(seed))?
        }
        CliScheme::Forget => schemes::build_forget_s(a.n)?,
        CliScheme::Bernoulli => {
            let d = a.d.ok_or_else(|| usage("bernoulli needs --d"))?;
            let seed = require_seed(a.seed, "bernoulli construction")?;
            schemes::build_bernoulli(a.n, d, &RngSpec::new(seed))?
        }
    };
    fs::write(&a.out, matrix.to_triplet_string())?;
    println!(
        "construct: {} n={} load={} -> {}",
        matrix.scheme(),
        matrix.n_workers(),
        matrix.computation_load(),
        a.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

/// Decode outcome as reported on the CLI: all indices 1-based.
#[derive(Serialize)]
struct DecodeReport {
    scheme: String,
    decoder: String,
    n_workers: usize,
    n_partitions: usize,
    stragglers: Vec<usize>,
    received: Vec<usize>,
    recovered_partitions: Vec<usize>,
    coefficients: Vec<f64>,
    residual_error: f64,
    success: bool,
    recovery_order_batches: Vec<usize>,
    exact_decodable: bool,
}

fn cmd_decode(a: DecodeArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.matrix)?;
    let matrix = CodingMatrix::read_triplet(text.as_bytes())?;
    let n = matrix.n_workers();

    let received = match (&a.stragglers, a.s) {
        (Some(list), None) => {
            let stragglers = parse_index_list_1based(list)?;
            ReceivedSet::from_stragglers(n, &stragglers)?
        }
        (None, Some(s)) => {
            let seed = require_seed(a.seed, "straggler sampling")?;
            ReceivedSet::sample(n, s, &RngSpec::new(seed))?
        }
        _ => return Err(usage("give exactly one of --stragglers or --s")),
    };

    let decoder: DecoderKind = a
        .decoder
        .map(Into::into)
        .unwrap_or_else(|| default_decoder(matrix.scheme()));
    let threshold = a.eps * matrix.n_partitions() as f64;

    let a_s = matrix.restrict(&received)?;
    let outcome = match decoder {
        DecoderKind::Ls => {
            let (residual, u) = decode::recovery_error_ls(&a_s)?;
            DecodeOutcome {
                recovered_partitions: Vec::new(),
                coefficients: u,
                residual_error: residual,
                success: residual <= threshold,
                recovery_order: Vec::new(),
            }
        }
        DecoderKind::Peel => decode::peel_decode(&a_s, 1.0),
        DecoderKind::FrcCombinatorial => decode::decode_frc(&matrix, &received)?,
    };

    let report = DecodeReport {
        scheme: matrix.scheme().to_string(),
        decoder: decoder.to_string(),
        n_workers: n,
        n_partitions: matrix.n_partitions(),
        stragglers: (0..n)
            .filter(|w| !received.contains(*w))
            .map(|w| w + 1)
            .collect(),
        received: received.indices().iter().map(|w| w + 1).collect(),
        recovered_partitions: outcome.recovered_partitions.iter().map(|j| j + 1).collect(),
        coefficients: outcome.coefficients.clone(),
        residual_error: outcome.residual_error,
        success: outcome.residual_error <= threshold,
        recovery_order_batches: outcome.recovery_order.iter().map(|b| b + 1).collect(),
        exact_decodable: decode::exact_decodable(&a_s),
    };

    let rendered = match a.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("scheme,decoder,n,s,residual_error,success\n");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                report.scheme,
                report.decoder,
                report.n_workers,
                report.stragglers.len(),
                fmt_f64(report.residual_error),
                report.success
            );
            s
        }
    };
    match &a.out {
        Some(path) => {
            fs::write(path, rendered)?;
            println!(
                "decode: {} residual={} success={} -> {}",
                report.decoder,
                fmt_f64(report.residual_error),
                report.success,
                path.display()
            );
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn default_decoder(scheme: SchemeTag) -> DecoderKind {
    match scheme {
        SchemeTag::Frc => DecoderKind::FrcCombinatorial,
        SchemeTag::Brc => DecoderKind::Peel,
        SchemeTag::ForgetS | SchemeTag::Bernoulli => DecoderKind::Ls,
    }
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

fn cmd_bounds(a: BoundsArgs) -> CliResult<()> {
    if a.smin == 0 || a.smin > a.smax || a.sstep == 0 {
        return Err(usage("need 0 < smin <= smax and sstep >= 1"));
    }
    let eps_list = parse_f64_list(&a.eps)?;
    if eps_list.is_empty() {
        return Err(usage("--eps needs at least one value"));
    }
    let mut csv =
        String::from("n,s,delta,epsilon,lb_exact,lb_eps,frc_load,brc_expected_load,regime_flag\n");
    let mut rows = 0usize;
    let mut s = a.smin;
    while s <= a.smax {
        let lb_exact = bounds::lb_exact(a.n, s)?;
        let frc_load = bounds::frc_load(a.n, s)?;
        for &eps in &eps_list {
            let lb_eps = bounds::lb_eps(a.n, s, eps)?;
            let brc = bounds::brc_load(a.n, s, eps)
                .map(|b| b.expected_load)
                .unwrap_or(f64::NAN);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                a.n,
                s,
                fmt_f64(s as f64 / a.n as f64),
                fmt_f64(eps),
                fmt_f64(lb_exact),
                fmt_f64(lb_eps),
                frc_load,
                fmt_f64(brc),
                bounds::in_regime(a.n, eps)
            );
            rows += 1;
        }
        s += a.sstep;
    }
    fs::write(&a.out, csv)?;
    println!("bounds: {rows} rows -> {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// failprob / curve
// ---------------------------------------------------------------------------

fn scheme_spec(
    scheme: CliScheme,
    n: usize,
    s: usize,
    d: Option<usize>,
    delta: Option<f64>,
    eps: f64,
) -> CliResult<SchemeSpec> {
    Ok(match scheme {
        CliScheme::Frc => SchemeSpec::Frc {
            d: match d {
                Some(d) => d,
                None => bounds::frc_load(n, s)?,
            },
        },
        CliScheme::Brc => {
            let delta = delta.unwrap_or(s as f64 / n as f64);
            SchemeSpec::Brc {
                delta,
                epsilon: eps,
            }
        }
        CliScheme::Forget => SchemeSpec::ForgetS,
        CliScheme::Bernoulli => SchemeSpec::Bernoulli {
            d: match d {
                Some(d) => d,
                None => bounds::frc_load(n, s)?,
            },
        },
    })
}

fn cli_default_decoder(scheme: CliScheme) -> DecoderKind {
    match scheme {
        CliScheme::Frc => DecoderKind::FrcCombinatorial,
        CliScheme::Brc => DecoderKind::Peel,
        CliScheme::Forget | CliScheme::Bernoulli => DecoderKind::Ls,
    }
}

fn trial_stats_csv(rows: &[TrialStats]) -> String {
    let mut csv = String::from("scheme,decoder,n,s,epsilon,trials,p_hat,ci,mean_error,seed\n");
    for t in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            t.scheme,
            t.decoder,
            t.n,
            t.s,
            fmt_f64(t.epsilon),
            t.trials,
            fmt_f64(t.p_hat),
            fmt_f64(t.ci_halfwidth_3sigma),
            fmt_f64(t.mean_error),
            t.seed.label()
        );
    }
    csv
}

fn cmd_failprob(a: FailprobArgs) -> CliResult<()> {
    let seed = require_seed(a.seed, "monte carlo")?;
    let scheme = scheme_spec(a.scheme, a.n, a.s, a.d, a.delta, a.eps)?;
    let decoder = a
        .decoder
        .map(Into::into)
        .unwrap_or_else(|| cli_default_decoder(a.scheme));
    let cfg = McConfig {
        scheme,
        decoder,
        n: a.n,
        s: a.s,
        epsilon: a.eps,
        trials: a.trials,
        fix_code: a.fix_code,
    };
    let stats = montecarlo::estimate_failure(&cfg, &RngSpec::new(seed))?;
    let rendered = match a.format {
        Format::Csv => trial_stats_csv(std::slice::from_ref(&stats)),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&stats)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    fs::write(&a.out, rendered)?;
    println!(
        "failprob: {} {} n={} s={} p_hat={} ci={} -> {}",
        stats.scheme,
        stats.decoder,
        stats.n,
        stats.s,
        fmt_f64(stats.p_hat),
        fmt_f64(stats.ci_halfwidth_3sigma),
        a.out.display()
    );
    Ok(())
}

fn cmd_curve(a: CurveArgs) -> CliResult<()> {
    let seed = require_seed(a.seed, "monte carlo")?;
    let n_list = parse_usize_list(&a.n_list)?;
    let tag = match a.scheme {
        CliScheme::Frc => SchemeTag::Frc,
        CliScheme::Brc => SchemeTag::Brc,
        CliScheme::Forget => SchemeTag::ForgetS,
        CliScheme::Bernoulli => SchemeTag::Bernoulli,
    };
    let decoder = a
        .decoder
        .map(Into::into)
        .unwrap_or_else(|| cli_default_decoder(a.scheme));
    let cfg = CurveConfig {
        scheme: tag,
        decoder,
        delta: a.delta,
        epsilon: a.eps,
        trials: a.trials,
        fix_code: a.fix_code,
    };
    let rows = montecarlo::failure_curve(&cfg, &n_list, &RngSpec::new(seed))?;
    fs::write(&a.out, trial_stats_csv(&rows))?;
    println!("curve: {} points -> {}", rows.len(), a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let file = match &a.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let get = |key: &str| file.get(key).cloned();

    let scheme_name = a
        .scheme
        .map(|s| {
            match s {
                CliScheme::Frc => "frc",
                CliScheme::Brc => "brc",
                CliScheme::Forget => "forget",
                CliScheme::Bernoulli => "bernoulli",
            }
            .to_string()
        })
        .or_else(|| get("scheme"))
        .ok_or_else(|| usage("train needs --scheme (or scheme= in --config)"))?;
    let scheme = match scheme_name.as_str() {
        "frc" => CliScheme::Frc,
        "brc" => CliScheme::Brc,
        "forget" => CliScheme::Forget,
        "bernoulli" => CliScheme::Bernoulli,
        other => return Err(CliError::Domain(format!("unknown scheme {other:?}"))),
    };

    let n = resolve(a.n, get("n"), "n")?.unwrap_or(60);
    let s = resolve(a.s, get("s"), "s")?.unwrap_or(6);
    let d = resolve(a.d, get("d"), "d")?;
    let delta = resolve(a.delta, get("delta"), "delta")?;
    let eps = resolve(a.eps, get("eps"), "eps")?.unwrap_or(0.0);
    let alpha = resolve(a.alpha, get("alpha"), "alpha")?.unwrap_or(1e-4);
    let iters = resolve(a.iters, get("iters"), "iters")?.unwrap_or(100);
    let data_n = resolve(a.data_n, get("data_n"), "data_n")?.unwrap_or(20_000);
    let dim = resolve(a.dim, get("dim"), "dim")?.unwrap_or(50);
    let max_retries = resolve(a.max_retries, get("max_retries"), "max_retries")?.unwrap_or(10);
    let restart = if a.no_restart {
        false
    } else {
        resolve(None, get("restart"), "restart")?.unwrap_or(true)
    };
    let seed = match a.seed.or(resolve(None, get("seed"), "seed")?) {
        Some(seed) => seed,
        None => return Err(usage("train is randomized: an explicit --seed is required")),
    };

    let spec = scheme_spec(scheme, n, s, d, delta, eps)?;
    let rng = RngSpec::new(seed);
    // Streams: 0 builds the dataset, 1 runs the training loop (which
    // splits its own substreams for the matrix and straggler draws).
    let ds = trainer::gen_synthetic(data_n, dim, n, &rng.substream(0))?;
    let cfg = TrainConfig {
        scheme: spec,
        n_workers: n,
        s,
        epsilon: eps,
        step_size: alpha,
        iterations: iters,
        restart_on_failure: restart,
        max_retries,
        rng: rng.substream(1),
    };
    log::debug!("train config: {cfg:?}");
    let records = trainer::train(&ds, &cfg)?;

    let mut csv = String::from("iteration,loss,auc,residual,retries\n");
    for r in &records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.loss),
            fmt_f64(r.auc),
            fmt_f64(r.decode_residual),
            r.retries
        );
    }
    let last = records.last().expect("at least one iteration");
    match &a.out {
        Some(path) => {
            fs::write(path, csv)?;
            println!(
                "train: {} n={n} s={s} final_loss={} final_auc={} retries_total={} -> {}",
                scheme_name,
                fmt_f64(last.loss),
                fmt_f64(last.auc),
                records.iter().map(|r| r.retries).sum::<usize>(),
                path.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// CLI value wins; otherwise parse the config-file string.
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    file_value: Option<String>,
    key: &str,
) -> CliResult<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file_value {
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Domain(format!("config key {key}: cannot parse {v:?}"))),
        None => Ok(None),
    }
}

fn parse_config_file(path: &Path) -> CliResult<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Domain(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// example1
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ExampleTrace {
    description: String,
    stragglers: Vec<usize>,
    recovered_partitions: Vec<usize>,
    recovery_order_batches: Vec<usize>,
    residual_error: f64,
    matched: bool,
}

fn cmd_example1(a: Example1Args) -> CliResult<()> {
    // Instance: 6 partitions, batches {1},{2},{3,4},{5,6}; workers
    // compute g1+g2, g1, g2+(g5+g6), (g3+g4)+(g5+g6), g5+g6, g2+(g5+g6).
    let full = schemes::brc_from_batches(
        6,
        &[vec![0], vec![1], vec![2, 3], vec![4, 5]],
        &[
            vec![0, 1],
            vec![0],
            vec![1, 3],
            vec![2, 3],
            vec![3],
            vec![1, 3],
        ],
    )?;
    let received = ReceivedSet::from_stragglers(6, &[4, 5])?;
    let out = decode::peel_decode(&full.restrict(&received)?, 1.0);
    let first_ok = out.residual_error == 0.0
        && out.recovered_partitions == vec![0, 1, 2, 3, 4, 5]
        && out.recovery_order == vec![0, 1, 3, 2];
    let first = ExampleTrace {
        description: "workers 5,6 straggle: full recovery, order g1, g2, g5+g6, g3+g4".into(),
        stragglers: vec![5, 6],
        recovered_partitions: out.recovered_partitions.iter().map(|j| j + 1).collect(),
        recovery_order_batches: out.recovery_order.iter().map(|b| b + 1).collect(),
        residual_error: out.residual_error,
        matched: first_ok,
    };
    println!(
        "example1 case 1: {} (order {:?}, residual {})",
        if first_ok { "PASS" } else { "FAIL" },
        first.recovery_order_batches,
        first.residual_error
    );

    // Variant: workers 3, 4, 6 now compute g2, g3+g4, g1+g2; stragglers
    // 4 and 6. Recovers g1+g2+g5+g6 without g3, g4.
    let variant = schemes::brc_from_batches(
        6,
        &[vec![0], vec![1], vec![2, 3], vec![4, 5]],
        &[vec![0, 1], vec![0], vec![1], vec![2], vec![3], vec![0, 1]],
    )?;
    let received = ReceivedSet::from_stragglers(6, &[3, 5])?;
    let out = decode::peel_decode(&variant.restrict(&received)?, 1.0);
    let second_ok = out.residual_error == 2.0 && out.recovered_partitions == vec![0, 1, 4, 5];
    let second = ExampleTrace {
        description: "variant, workers 4,6 straggle: recovers g1+g2+g5+g6, residual 2".into(),
        stragglers: vec![4, 6],
        recovered_partitions: out.recovered_partitions.iter().map(|j| j + 1).collect(),
        recovery_order_batches: out.recovery_order.iter().map(|b| b + 1).collect(),
        residual_error: out.residual_error,
        matched: second_ok,
    };
    println!(
        "example1 case 2: {} (recovered {:?}, residual {})",
        if second_ok { "PASS" } else { "FAIL" },
        second.recovered_partitions,
        second.residual_error
    );

    if let Some(path) = &a.out {
        let mut s = serde_json::to_string_pretty(&[&first, &second])
            .map_err(|e| CliError::Domain(e.to_string()))?;
        s.push('\n');
        fs::write(path, s)?;
        println!("example1: traces -> {}", path.display());
    }

    if first_ok && second_ok {
        Ok(())
    } else {
        Err(CliError::Domain("example1 trace mismatch".into()))
    }
}

// ---------------------------------------------------------------------------
// shared parsing / formatting
// ---------------------------------------------------------------------------

/// Floats in CSV output carry 12 significant digits.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn parse_index_list_1based(list: &str) -> CliResult<Vec<usize>> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: usize = t
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad index {t:?}")))?;
            if v == 0 {
                return Err(usage("indices are 1-based; 0 is out of range"));
            }
            Ok(v - 1)
        })
        .collect()
}

fn parse_usize_list(list: &str) -> CliResult<Vec<usize>> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| usage(format!("bad integer {t:?}")))
        })
        .collect()
}

fn parse_f64_list(list: &str) -> CliResult<Vec<f64>> {
    list.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| usage(format!("bad number {t:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_has_12_significant_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_f64(0.0), "0.00000000000e0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn index_lists_are_one_based() {
        assert_eq!(parse_index_list_1based("5,6").unwrap(), vec![4, 5]);
        assert!(parse_index_list_1based("0").is_err());
        assert!(parse_index_list_1based("x").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["gradcode", "--definitely-not-a-flag"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["gradcode", "--help"]), 0);
    }
}
