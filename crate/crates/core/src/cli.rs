//! Command-line front end. [`run`] parses arguments, dispatches and returns
//! the process exit code.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::check_context;
use crate::band::{
    corollary_criterion, empirical_spectrum, predict_moments_on_grid, semicircle_distance, Histogram, VarianceProfile,
    DEFAULT_GRID,
};
use crate::canonical::{CanonicalModel, PrescribedCumulants};
use crate::error::{Error, Result};
use crate::freeness::{
    check_factorization, check_restriction_theorem, check_semicircular_characterization, freeness_oracle,
    lift_free_variables, ContextEta, OracleConfig, Verdict,
};
use crate::io::{load_context, read_json, read_series, EtaDocument, Level, SeriesDocument};
use crate::partition::{enumerate_nc, enumerate_nc2};
use crate::series::{Cumulant, Moment};
use crate::transform::{cumulants_from_moments, moments_from_cumulants};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NUMERIC: i32 = 70;
pub const THREADS_ENV: &str = "AMALGAM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "amalgam", version, about = "Operator-valued free probability over matrix algebras")]
struct Cli {
    /// Worker threads for parallel kernels.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Omit the `generated_at` field so identical runs give identical output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Non-crossing partitions.
    #[command(subcommand)]
    Nc(NcCommand),
    /// Context files.
    #[command(subcommand)]
    Algebra(AlgebraCommand),
    /// Moment-cumulant transforms of series files.
    #[command(subcommand)]
    Transform(TransformCommand),
    /// The canonical model realising a cumulant series.
    #[command(subcommand)]
    Canonical(CanonicalCommand),
    /// Freeness with amalgamation.
    #[command(subcommand)]
    Freeness(FreenessCommand),
    /// Gaussian band matrices.
    #[command(subcommand)]
    Bandmatrix(BandCommand),
}

#[derive(Subcommand, Debug)]
enum NcCommand {
    /// Number of non-crossing partitions of n points.
    Count {
        n: usize,
        /// Count pair partitions only.
        #[arg(long)]
        pairs: bool,
    },
    /// One partition per line in block notation.
    List {
        n: usize,
        #[arg(long)]
        pairs: bool,
        #[arg(long, value_enum, default_value_t = ListFormat::Text)]
        format: ListFormat,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ListFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum AlgebraCommand {
    /// Validate the expectations of a context file.
    Check { context: PathBuf },
}

#[derive(Args, Debug)]
struct SeriesInput {
    series: PathBuf,
    /// Context file overriding the one named in the series.
    context: Option<PathBuf>,
    /// Highest order to compute; defaults to the order cap of the input.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum TransformCommand {
    /// Free cumulants of a moment series.
    MomentsToCumulants(SeriesInput),
    /// Moments of a cumulant series.
    CumulantsToMoments(SeriesInput),
}

#[derive(Subcommand, Debug)]
enum CanonicalCommand {
    /// Moment series of the canonical variables.
    Moments {
        #[arg(long)]
        cumulants: PathBuf,
        #[arg(long)]
        order: usize,
        /// Ladder truncation level; defaults to order − 1.
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long)]
        context: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum FreenessCommand {
    /// Test `κ = F∘κ∘F` on a cumulant series over B.
    Factorization(SeriesInput),
    /// Evaluate centred alternating words for the variables of a cumulant series.
    Oracle {
        #[command(flatten)]
        input: SeriesInput,
        #[arg(long, default_value_t = 200)]
        random_words: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Semicircle test for a covariance map on B.
    Semicircular {
        eta: PathBuf,
        context: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        order: usize,
    },
    /// Cumulants over B of variables free from B over D.
    Lift {
        series: PathBuf,
        context: Option<PathBuf>,
    },
    /// Compare D-valued cumulants with the restriction of B-valued ones.
    Restriction(SeriesInput),
}

#[derive(Subcommand, Debug)]
enum BandCommand {
    /// Monte Carlo spectrum.
    Run {
        /// `builtin:const`, `builtin:xy`, `builtin:linear`, `builtin:checkerboard` or a JSON file.
        #[arg(long)]
        profile: String,
        /// Matrix size.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        trials: usize,
        /// Trial t is sampled from seed + t.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        /// Semicircle variance for the distance; defaults to the integral of the profile.
        #[arg(long)]
        variance: Option<f64>,
        /// `csv` prints the histogram only.
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
    },
    /// Limiting moments from the semicircular predictor.
    Predict {
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 8)]
        orders: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
    },
    /// Whether the row integrals of the profile are constant.
    Criterion {
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
}

struct Output<'a> {
    out: &'a mut dyn Write,
    path: Option<PathBuf>,
    timestamp: bool,
}

impl Output<'_> {
    fn text(&mut self, s: &str) -> Result<()> {
        match &self.path {
            Some(p) => std::fs::write(p, s)?,
            None => self.out.write_all(s.as_bytes())?,
        }
        Ok(())
    }

    fn json(&mut self, value: impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let (true, Value::Object(map)) = (self.timestamp, &mut v) {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            map.insert("generated_at".into(), secs.into());
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        self.text(&s)
    }
}

fn exit_for_error(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::EmptySample => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success or a passing check, 1 for a failing check, 2 for an
/// inconclusive check or unmet hypothesis, 64 for bad input, 70 for a
/// numerical failure.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // The pool can only be configured once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut output = Output {
        out,
        path: cli.out.clone(),
        timestamp: !cli.no_timestamp,
    };
    match dispatch(cli.command, &mut output) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_for_error(&e)
        }
    }
}

fn dispatch(cmd: Command, o: &mut Output) -> Result<i32> {
    match cmd {
        Command::Nc(c) => nc(c, o),
        Command::Algebra(AlgebraCommand::Check { context }) => {
            let report = check_context(&load_context(context)?)?;
            o.json(&report)?;
            Ok(if report.passes { 0 } else { 1 })
        }
        Command::Transform(c) => transform(c, o),
        Command::Canonical(c) => canonical(c, o),
        Command::Freeness(c) => freeness(c, o),
        Command::Bandmatrix(c) => band(c, o),
    }
}

fn nc(cmd: NcCommand, o: &mut Output) -> Result<i32> {
    let list = |n, pairs| if pairs { enumerate_nc2(n) } else { enumerate_nc(n) };
    match cmd {
        NcCommand::Count { n, pairs } => o.text(&format!("{}\n", list(n, pairs)?.len()))?,
        NcCommand::List { n, pairs, format } => {
            let parts = list(n, pairs)?;
            match format {
                ListFormat::Text => o.text(&parts.iter().map(|p| format!("{p}\n")).collect::<String>())?,
                ListFormat::Json => {
                    let blocks: Vec<_> = parts.iter().map(|p| p.blocks().to_vec()).collect();
                    o.json(json!({ "n": n, "pairs": pairs, "count": parts.len(), "partitions": blocks }))?
                }
            }
        }
    }
    Ok(0)
}

fn order_or_cap(order: Option<usize>, cap: usize) -> usize {
    order.unwrap_or(cap)
}

fn context_arg(p: &Option<PathBuf>) -> Option<&Path> {
    p.as_deref()
}

fn transform(cmd: TransformCommand, o: &mut Output) -> Result<i32> {
    let doc = match cmd {
        TransformCommand::MomentsToCumulants(i) => {
            let l = read_series::<Moment>(&i.series, context_arg(&i.context))?;
            let k = order_or_cap(i.order, l.series.order_cap());
            SeriesDocument::from_series(&cumulants_from_moments(&l.series, k)?, l.source, l.level)
        }
        TransformCommand::CumulantsToMoments(i) => {
            let l = read_series::<Cumulant>(&i.series, context_arg(&i.context))?;
            let k = order_or_cap(i.order, l.series.order_cap());
            SeriesDocument::from_series(&moments_from_cumulants(&l.series, k)?, l.source, l.level)
        }
    };
    o.json(&doc)?;
    Ok(0)
}

fn canonical(cmd: CanonicalCommand, o: &mut Output) -> Result<i32> {
    let CanonicalCommand::Moments {
        cumulants,
        order,
        truncation,
        context,
    } = cmd;
    let l = read_series::<Cumulant>(&cumulants, context_arg(&context))?;
    let level = truncation.unwrap_or(order.saturating_sub(1)).max(1);
    let model = CanonicalModel::new(PrescribedCumulants::new(l.series, level)?);
    let moments = model.moment_series(order)?;
    o.json(&SeriesDocument::from_series(&moments, l.source, l.level))?;
    Ok(0)
}

fn require_b(level: Level) -> Result<()> {
    match level {
        Level::B => Ok(()),
        Level::D => Err(Error::config("this check needs a series over B")),
    }
}

fn freeness(cmd: FreenessCommand, o: &mut Output) -> Result<i32> {
    match cmd {
        FreenessCommand::Factorization(i) => {
            let l = read_series::<Cumulant>(&i.series, context_arg(&i.context))?;
            require_b(l.level)?;
            let k = order_or_cap(i.order, l.series.order_cap());
            let report = check_factorization(&l.series, &l.context.f, k)?;
            let verdict = if report.passes { Verdict::Pass } else { Verdict::Fail };
            o.json(json!({ "verdict": verdict, "report": report }))?;
            Ok(verdict.exit_code())
        }
        FreenessCommand::Oracle {
            input,
            random_words,
            seed,
        } => {
            let l = read_series::<Cumulant>(&input.series, context_arg(&input.context))?;
            require_b(l.level)?;
            let k = order_or_cap(input.order, l.series.order_cap().min(6));
            let moments = moments_from_cumulants(&l.series, k)?;
            let config = OracleConfig {
                max_order: k,
                random_words,
                seed,
            };
            let report = freeness_oracle(&moments, &l.context, &config)?;
            o.json(json!({ "config": config, "report": report }))?;
            Ok(report.verdict.exit_code())
        }
        FreenessCommand::Semicircular { eta, context, order } => {
            let doc: EtaDocument = read_json(&eta)?;
            let spec = match (&context, &doc.context) {
                (Some(p), _) => read_json(p)?,
                (None, Some(src)) => src.resolve(eta.parent())?,
                (None, None) => return Err(Error::config("no context given for the covariance map")),
            };
            let ctx = crate::algebra::AlgebraContext::from_spec(&spec)?;
            let model = ContextEta::from_images(&ctx, &doc.matrices()?)?;
            let basis: Vec<_> = (0..ctx.b.dim()).map(|a| ctx.b.unit(a)).collect();
            let report = check_semicircular_characterization(&model, &basis, order)?;
            o.json(&report)?;
            Ok(report.verdict.exit_code())
        }
        FreenessCommand::Lift { series, context } => {
            let l = read_series::<Cumulant>(&series, context_arg(&context))?;
            let lifted = lift_free_variables(&l.series, &l.context)?;
            o.json(&SeriesDocument::from_series(&lifted, l.source, Level::B))?;
            Ok(0)
        }
        FreenessCommand::Restriction(i) => {
            let l = read_series::<Cumulant>(&i.series, context_arg(&i.context))?;
            require_b(l.level)?;
            let k = order_or_cap(i.order, l.series.order_cap());
            let report = check_restriction_theorem(&l.series, &l.context, k)?;
            o.json(&report)?;
            Ok(report.verdict.exit_code())
        }
    }
}

fn band(cmd: BandCommand, o: &mut Output) -> Result<i32> {
    match cmd {
        BandCommand::Run {
            profile,
            n,
            trials,
            seed,
            bins,
            variance,
            format,
        } => {
            let profile = VarianceProfile::parse(&profile)?;
            let sample = empirical_spectrum(n, &profile, trials, seed)?;
            let eigs = sample.pooled_eigenvalues();
            let histogram = Histogram::auto(&eigs, bins)?;
            match format {
                TableFormat::Csv => o.text(&histogram.to_csv())?,
                TableFormat::Json => {
                    let c = match variance {
                        Some(c) => c,
                        None => predict_moments_on_grid(&profile, 2, n)?.moments[1],
                    };
                    let ks = semicircle_distance(&eigs, c)?;
                    o.json(json!({
                        "sample": sample,
                        "semicircle_variance": c,
                        "ks_statistic": ks,
                        "histogram": histogram,
                    }))?
                }
            }
        }
        BandCommand::Predict {
            profile,
            orders,
            grid,
            format,
        } => {
            let p = predict_moments_on_grid(&VarianceProfile::parse(&profile)?, orders, grid)?;
            match format {
                TableFormat::Csv => {
                    let mut s = String::from("k,moment\n");
                    for (k, m) in p.moments.iter().enumerate() {
                        s.push_str(&format!("{},{}\n", k + 1, m));
                    }
                    o.text(&s)?
                }
                TableFormat::Json => o.json(&p)?,
            }
        }
        BandCommand::Criterion {
            profile,
            grid,
            tolerance,
        } => o.json(corollary_criterion(&VarianceProfile::parse(&profile)?, grid, tolerance)?)?,
    }
    Ok(0)
}
