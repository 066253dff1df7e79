//! Command-line driver: expansions, invariant densities, Markov models,
//! and seeded simulation experiments, with JSON or CSV output.
//!
//! Exit codes: 0 success, 2 input/domain error, 3 non-convergence,
//! 4 hypothesis not met, 5 internal failure.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use randbeta::markov::{greedy_expansion_of_one, MarkovModel, OneExpansion};
use randbeta::sim::{
    block_census, digit_stream, max_entropy_digit_stream, normality_test, singularity_diagnostic,
    switch_frequency, Metric, OrbitMode, RngSpec,
};
use randbeta::transfer::invariance_residual;
use randbeta::ulam::{build_ulam, fixed_density, FixedPointScheme};
use randbeta::{
    build_model, build_regions, expand_greedy, expand_lazy, expand_random, reconstruct_omega,
    reconstruction_error_bound, BetaParams, Error, PiecewiseConstantDensity, RegionPartition,
    GOLDEN, SILVER, TRIBONACCI,
};

#[derive(Parser)]
#[command(
    name = "randbeta",
    version,
    about = "Greedy, lazy, and random beta-expansions: digits, invariant densities, \
             Markov models, and reproducible simulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BaseArgs {
    /// Base: a number > 1, or one of `golden`, `silver`, `tribonacci`.
    #[arg(long)]
    beta: String,

    /// Probability of the greedy branch on switch regions.
    #[arg(long, default_value_t = 0.5)]
    p: f64,

    /// Seed for every randomized quantity; equal seeds reproduce runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Greedy,
    Lazy,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Exact Markov density when the base qualifies, Ulam otherwise.
    Auto,
    Ulam,
    Markov,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Cesaro,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum DigitSource {
    /// Digits of one random-map expansion.
    Kbeta,
    /// I.i.d. uniform digits.
    MaxEntropy,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the digits of one expansion of x.
    Expand {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Point to expand, in [0, floor(beta)/(beta-1)].
        #[arg(long)]
        x: f64,
        /// Number of digits (capped at 64 per call).
        #[arg(long, default_value_t = 64)]
        digits: usize,
    },
    /// Emit the invariant density of the random map.
    Density {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Scheme::Cesaro)]
        scheme: Scheme,
        /// Self-consistency tolerance for the iterative scheme.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
    /// Emit the exact Markov model (cells, matrices, stationary vector,
    /// entropies) when 1 has a finite greedy expansion with positive
    /// coefficients.
    Markov {
        #[command(flatten)]
        base: BaseArgs,
    },
    /// Run a seeded experiment and emit its report.
    Simulate {
        #[command(subcommand)]
        experiment: Experiment,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Long-run fraction of orbit time spent in switch regions.
    SwitchFreq {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Starting point (defaults to the middle of the interval).
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Census of all digit blocks up to a length in one expansion.
    Blocks {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1_000_000)]
        digits: usize,
        #[arg(long, default_value_t = 5)]
        max_block: usize,
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Switch-to-C0 mass ratios under the maximal-entropy process and the
    /// Markov measure (requires the Markov path and p = 1/2).
    Diagnose {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Chi-square deviation of block frequencies from the uniform law.
    Normality {
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1_000_000)]
        digits: usize,
        #[arg(long, default_value_t = 5)]
        max_block: usize,
        #[arg(long, value_enum, default_value_t = DigitSource::Kbeta)]
        source: DigitSource,
        #[arg(long)]
        x0: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidBeta { .. }
        | Error::InvalidProbability { .. }
        | Error::OutsideDomain { .. }
        | Error::DigitCapExceeded { .. }
        | Error::InvalidExpansion { .. }
        | Error::ExhaustedCoins { .. }
        | Error::InvalidArgument(_) => 2,
        Error::NonConvergence { .. } => 3,
        Error::HypothesisNotMet(_) => 4,
        Error::NumericalFailure(_) => 5,
    }
}

fn parse_beta(raw: &str) -> Result<f64, Error> {
    match raw {
        "golden" => Ok(GOLDEN),
        "silver" => Ok(SILVER),
        "tribonacci" => Ok(TRIBONACCI),
        other => other
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("unrecognized beta `{other}`"))),
    }
}

fn setup(base: &BaseArgs) -> Result<RegionPartition, Error> {
    let beta = parse_beta(&base.beta)?;
    let params = BetaParams::new(beta, base.p)?;
    Ok(build_regions(params))
}

fn emit(base: &BaseArgs, text: String) -> Result<(), Error> {
    match &base.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::InvalidArgument(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Expand {
            base,
            mode,
            x,
            digits,
        } => cmd_expand(base, mode, x, digits),
        Command::Density {
            base,
            grid,
            method,
            scheme,
            tol,
            max_iter,
        } => cmd_density(base, grid, method, scheme, tol, max_iter),
        Command::Markov { base } => cmd_markov(base),
        Command::Simulate { experiment } => cmd_simulate(experiment),
    }
}

#[derive(Serialize)]
struct ExpandOutput {
    beta: f64,
    p: f64,
    mode: &'static str,
    x: f64,
    digits: Vec<u32>,
    /// Upper bound on |x - partial sum| after these digits.
    error_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    coins_consumed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn cmd_expand(base: BaseArgs, mode: Mode, x: f64, digits: usize) -> Result<(), Error> {
    let part = setup(&base)?;
    let (sequence, consumed, seed, mode_name) = match mode {
        Mode::Greedy => (expand_greedy(&part, x, digits)?, None, None, "greedy"),
        Mode::Lazy => (expand_lazy(&part, x, digits)?, None, None, "lazy"),
        Mode::Random => {
            let mut coins = randbeta::sim::BernoulliCoins::new(base.p, RngSpec::new(base.seed, 0));
            let seq = expand_random(&part, x, digits, &mut coins)?;
            // Recover how many coins the orbit consumed.
            let omega = reconstruct_omega(&part, x, &seq)?;
            (seq, Some(omega.len()), Some(base.seed), "random")
        }
    };
    let bound = reconstruction_error_bound(part.params(), sequence.len());
    match base.format {
        Format::Json => emit(
            &base,
            to_json(&ExpandOutput {
                beta: part.params().beta(),
                p: part.params().p(),
                mode: mode_name,
                x,
                digits: sequence.digits().to_vec(),
                error_bound: bound,
                coins_consumed: consumed,
                seed,
            }),
        ),
        Format::Csv => {
            let line = sequence
                .digits()
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            eprintln!("# error_bound = {bound:.3e}");
            emit(&base, format!("{line}\n"))
        }
    }
}

#[derive(Serialize)]
struct DensityRow {
    x_lo: f64,
    x_hi: f64,
    value: f64,
}

#[derive(Serialize)]
struct DensityOutput {
    beta: f64,
    p: f64,
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<&'static str>,
    /// Sup invariance defect over seeded random intervals.
    residual: f64,
    lower_bound: f64,
    rows: Vec<DensityRow>,
}

fn density_rows(d: &PiecewiseConstantDensity) -> Vec<DensityRow> {
    d.values()
        .iter()
        .zip(d.breakpoints().windows(2))
        .map(|(v, w)| DensityRow {
            x_lo: w[0],
            x_hi: w[1],
            value: *v,
        })
        .collect()
}

fn markov_model_if_available(part: &RegionPartition) -> Option<MarkovModel> {
    match greedy_expansion_of_one(part, 64, 1e-10) {
        OneExpansion::Finite(pattern) if pattern.all_positive() => build_model(part, &pattern).ok(),
        _ => None,
    }
}

fn cmd_density(
    base: BaseArgs,
    grid: usize,
    method: Method,
    scheme: Scheme,
    tol: f64,
    max_iter: usize,
) -> Result<(), Error> {
    let part = setup(&base)?;
    let markov = match method {
        Method::Ulam => None,
        Method::Auto => markov_model_if_available(&part),
        Method::Markov => Some(markov_model_if_available(&part).ok_or_else(|| {
            Error::HypothesisNotMet(
                "the exact density needs 1 to have a finite greedy expansion with positive \
                 coefficients"
                    .into(),
            )
        })?),
    };
    let (density, method_name, grid_used, scheme_name) = match markov {
        Some(model) => (model.exact_density(), "markov-exact", None, None),
        None => {
            let op = build_ulam(&part, grid)?;
            let fps = match scheme {
                Scheme::Cesaro => FixedPointScheme::Cesaro,
                Scheme::Power => FixedPointScheme::Power,
            };
            let d = fixed_density(&op, fps, tol, max_iter)?;
            let name = match scheme {
                Scheme::Cesaro => "cesaro",
                Scheme::Power => "power",
            };
            (d, "ulam", Some(grid), Some(name))
        }
    };
    let residual = invariance_residual(&part, &density, 1000);
    match base.format {
        Format::Json => emit(
            &base,
            to_json(&DensityOutput {
                beta: part.params().beta(),
                p: part.params().p(),
                method: method_name,
                grid: grid_used,
                scheme: scheme_name,
                residual,
                lower_bound: density.lower_bound(),
                rows: density_rows(&density),
            }),
        ),
        Format::Csv => {
            eprintln!(
                "# method = {method_name}, residual = {residual:.3e}, lower_bound = {:.6e}",
                density.lower_bound()
            );
            emit(&base, density.to_csv())
        }
    }
}

fn cmd_markov(base: BaseArgs) -> Result<(), Error> {
    let part = setup(&base)?;
    let pattern = match greedy_expansion_of_one(&part, 64, 1e-10) {
        OneExpansion::Finite(p) => p,
        OneExpansion::NotFinite {
            iterations,
            remainder,
        } => {
            return Err(Error::HypothesisNotMet(format!(
                "the Markov construction needs a finite greedy expansion of 1 with positive \
                 coefficients; the orbit of 1 did not reach 0 in {iterations} steps \
                 (remainder {remainder:.3e})"
            )));
        }
    };
    if !pattern.all_positive() {
        return Err(Error::HypothesisNotMet(format!(
            "the Markov construction needs positive coefficients, but the greedy expansion \
             of 1 is {:?}",
            pattern.coefficients()
        )));
    }
    let model = build_model(&part, &pattern)?;
    emit(&base, to_json(&model.export()))
}

fn default_x0(part: &RegionPartition) -> f64 {
    0.5 * part.params().j_max()
}

fn metrics_json(metrics: &[Metric]) -> String {
    if metrics.len() == 1 {
        to_json(&metrics[0])
    } else {
        to_json(&metrics)
    }
}

fn cmd_simulate(experiment: Experiment) -> Result<(), Error> {
    match experiment {
        Experiment::SwitchFreq { base, samples, x0 } => {
            let part = setup(&base)?;
            let x0 = x0.unwrap_or_else(|| default_x0(&part));
            let mut report = switch_frequency(&part, x0, samples, RngSpec::new(base.seed, 0))?;
            // Attach the exact stationary switch mass when it is known.
            if let Some(model) = markov_model_if_available(&part) {
                report.metrics[0].target = Some(model.switch_mass());
            }
            emit(&base, metrics_json(&report.metrics))
        }
        Experiment::Blocks {
            base,
            digits,
            max_block,
            x0,
        } => {
            let part = setup(&base)?;
            let x0 = x0.unwrap_or_else(|| default_x0(&part));
            let census = block_census(
                &part,
                x0,
                digits,
                max_block,
                OrbitMode::Random,
                RngSpec::new(base.seed, 0),
            )?;
            emit(&base, to_json(&census))
        }
        Experiment::Diagnose { base, samples } => {
            let part = setup(&base)?;
            let model = markov_model_if_available(&part).ok_or_else(|| {
                Error::HypothesisNotMet(
                    "the diagnostic needs 1 to have a finite greedy expansion with positive \
                     coefficients"
                        .into(),
                )
            })?;
            let report =
                singularity_diagnostic(&part, &model, samples, RngSpec::new(base.seed, 0))?;
            emit(&base, metrics_json(&report.metrics))
        }
        Experiment::Normality {
            base,
            digits,
            max_block,
            source,
            x0,
        } => {
            let part = setup(&base)?;
            let stream = match source {
                DigitSource::Kbeta => {
                    let x0 = x0.unwrap_or_else(|| default_x0(&part));
                    digit_stream(
                        &part,
                        x0,
                        digits,
                        OrbitMode::Random,
                        RngSpec::new(base.seed, 0),
                    )?
                }
                DigitSource::MaxEntropy => {
                    max_entropy_digit_stream(part.params(), digits, RngSpec::new(base.seed, 0))
                }
            };
            let report = normality_test(&stream, part.params().floor_beta(), max_block)?;
            #[derive(Serialize)]
            struct NormalityOutput<'a> {
                beta: f64,
                p: f64,
                source: &'static str,
                n_digits: usize,
                seed: u64,
                #[serde(flatten)]
                report: &'a randbeta::sim::NormalityReport,
            }
            emit(
                &base,
                to_json(&NormalityOutput {
                    beta: part.params().beta(),
                    p: part.params().p(),
                    source: match source {
                        DigitSource::Kbeta => "kbeta",
                        DigitSource::MaxEntropy => "max-entropy",
                    },
                    n_digits: digits,
                    seed: base.seed,
                    report: &report,
                }),
            )
        }
    }
}
