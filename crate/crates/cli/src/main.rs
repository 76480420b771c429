//! `lowrank-itlab` command line: instance generation, sampling, decoding,
//! entropy and bound calculators, sweeps and plots.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use lowrank_itlab::bounds::{
    evaluate_queries, fano_min_samples, gaussian_rd_info_bound, hamming_rd_min_samples, hamming_rd_min_samples_with_entropy, write_bounds_csv,
    BoundSweep, ConverseInput, DistortionInput, LogUnit,
};
use lowrank_itlab::decoder::{decode, exact_error_rate, mc_error_rate, Observation, DEFAULT_ENUMERATION_BUDGET, DEFAULT_LOCATION_BUDGET};
use lowrank_itlab::entropy::{
    agreement_probability, conditional_source_entropy_given_v, exact_source_entropy, fano_verify, lemma32_conditional_entropy, lemma32_subset_entropy, observation_entropy,
};
use lowrank_itlab::harness::{emit_svg_curve, load_csv, run_sweep_to_dir, SweepConfig};
use lowrank_itlab::model::{generate_source, product, Instance, ModelParams, SeedSpec, Semiring};
use lowrank_itlab::sampling::{coverage_failure_report, sample_locations, LocationSequence};
use lowrank_itlab::{Error, Result};

const THREADS_ENV: &str = "LOWRANK_ITLAB_THREADS";

#[derive(Parser)]
#[command(name = "lowrank-itlab", version, about = "Finite-alphabet low-rank matrix completion laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random source instance S = UV.
    Gen {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw n distinct observation cells.
    Sample {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode an instance from a subset of its entries.
    Decode {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, conflicts_with_all = ["n", "seed"])]
        locs: Option<PathBuf>,
        #[arg(long, requires = "seed")]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// Decoding error probability, exactly or by Monte Carlo.
    Pe {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        mode: PeMode,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = DEFAULT_LOCATION_BUDGET)]
        location_budget: u128,
    },
    /// Row and column coverage failure of random sampling.
    Coverage {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Exact entropies by enumeration.
    #[command(subcommand)]
    Entropy(EntropyCommand),
    /// Lower bounds on the number of samples.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Run a parameter sweep and write CSV, SVG and threshold tables.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot two columns of a results CSV as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "n")]
        x: String,
        #[arg(long, default_value = "pe_hat")]
        y: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log_y: bool,
    },
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = Semiring::IntegerProduct)]
    semiring: Semiring,
}

impl ParamArgs {
    fn build(self) -> Result<ModelParams> {
        ModelParams::new(self.m, self.r, self.q, self.semiring)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PeMode {
    Exact,
    Mc,
}

#[derive(Subcommand)]
enum EntropyCommand {
    /// H(S) of the induced source distribution.
    Source {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// H(S | V) overall and restricted to full-rank V.
    Vcond {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// Entropy of the values observed at the given cells.
    Obs {
        #[command(flatten)]
        params: ParamArgs,
        /// Location JSON file; omitted means no observations.
        #[arg(long)]
        locs: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// Conditional entropy of one product entry given others, at m = r + 1.
    Lemma32 {
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = Semiring::IntegerProduct)]
        semiring: Semiring,
        /// Conditioning rows, each below r - 1; defaults to all of them.
        #[arg(long, value_delimiter = ',')]
        rows: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// Probability that a uniform source agrees with an observation.
    Agreement {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        locs: PathBuf,
        #[arg(long, value_delimiter = ',', required_unless_present = "instance", conflicts_with = "instance")]
        values: Option<Vec<u64>>,
        /// Read the observed values off this instance.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    /// Check Fano's inequality for one location set.
    Fano {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        locs: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    Fano {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        pe: f64,
    },
    Hamming {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        q: u64,
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = LogUnit::Nats)]
        unit: LogUnit,
        /// Replace the source term by the enumerated H(S).
        #[arg(long)]
        exact_hs: bool,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
    },
    Gaussian {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long = "D")]
        d: f64,
        #[arg(long)]
        hstar: f64,
        #[arg(long, default_value_t = LogUnit::Nats)]
        unit: LogUnit,
    },
    /// Evaluate a JSON list of bound queries into CSV.
    Table {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::BudgetExceeded { .. } => 3,
        Error::Io(_) => 4,
        Error::Json(e) if e.is_io() => 4,
        Error::Csv(e) if e.is_io_error() => 4,
        _ => 2,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("cannot configure thread pool: {e}")))
}

fn write_out(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    write_out(&(serde_json::to_string_pretty(value)? + "\n"), out)
}

/// Rounds every fractional number to nine decimals.
fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or_default();
            if let Some(r) = serde_json::Number::from_f64((x * 1e9).round() / 1e9) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn emit_entropy_json<T: Serialize>(value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    emit_json(&v, None)
}

fn load_locs(path: Option<&Path>, m: usize) -> Result<LocationSequence> {
    let locs = match path {
        Some(p) => LocationSequence::from_json(&fs::read_to_string(p)?)?,
        None => LocationSequence::empty(m),
    };
    if locs.m() != m {
        return Err(Error::DimensionMismatch(format!("locations are for m={}, parameters have m={m}", locs.m())));
    }
    Ok(locs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { params, seed, stream, out } => {
            let params = params.build()?;
            let instance = Instance::new(params, generate_source(&params, SeedSpec::new(seed, stream)))?;
            write_out(&(instance.to_json()? + "\n"), out.as_deref())
        }
        Command::Sample { m, n, seed, out } => emit_json(&sample_locations(m, n, SeedSpec::new(seed, 0))?, out.as_deref()),
        Command::Decode { instance, locs, n, seed, budget } => {
            let instance = Instance::load(&instance)?;
            let m = instance.params.m();
            let locs = match (locs, n, seed) {
                (Some(path), _, _) => load_locs(Some(&path), m)?,
                (None, Some(n), Some(seed)) => sample_locations(m, n, SeedSpec::new(seed, 0))?,
                _ => return Err(Error::InvalidInput("decode needs --locs FILE or --n INT --seed INT".into())),
            };
            let obs = Observation::reveal(&instance.product, &locs);
            emit_json(&decode(&obs, &instance.params, budget)?, None)
        }
        Command::Pe { params, n, mode, trials, seed, budget, location_budget } => {
            let params = params.build()?;
            let report = match mode {
                PeMode::Exact => exact_error_rate(&params, n, budget, location_budget)?,
                PeMode::Mc => mc_error_rate(&params, n, trials, SeedSpec::new(seed, 0), budget)?,
            };
            emit_json(&report, None)
        }
        Command::Coverage { m, r, alpha, trials, seed, json } => {
            let report = coverage_failure_report(m, r, alpha, trials, SeedSpec::new(seed, 0))?;
            if json {
                return emit_json(&report, None);
            }
            let chernoff = report.chernoff_bound.map_or_else(|| "n/a".to_string(), |c| format!("{c:.6e}"));
            let text = format!(
                "m={} r={} alpha={} n={}\nexact marginal tail   {:.6e}\nunion reference       {:.6e}\nchernoff bound        {chernoff}\npaper bound           {:.6e}\nmonte carlo estimate  {:.6e} ({} of {} trials)\n95% interval          [{:.6e}, {:.6e}]\n",
                report.m,
                report.r,
                report.alpha,
                report.n_used,
                report.exact_marginal_tail,
                report.union_reference,
                report.paper_bound,
                report.mc_estimate,
                report.mc_failures,
                report.trials,
                report.mc_ci95.0,
                report.mc_ci95.1,
            );
            write_out(&text, None)
        }
        Command::Entropy(cmd) => run_entropy(cmd),
        Command::Bounds(cmd) => run_bounds(cmd),
        Command::Sweep { config, out } => {
            let config = SweepConfig::load(&config)?;
            let outputs = run_sweep_to_dir(&config, &out)?;
            let mut text = format!("{}\n", outputs.csv.display());
            if let Some(svg) = &outputs.svg {
                text += &format!("{}\n", svg.display());
            }
            text += &format!("{}\n", outputs.thresholds.display());
            write_out(&text, None)
        }
        Command::Plot { csv, x, y, out, log_y } => emit_svg_curve(&load_csv(&csv)?, &x, &y, &out, log_y),
    }
}

fn run_entropy(cmd: EntropyCommand) -> Result<()> {
    match cmd {
        EntropyCommand::Source { params, budget } => emit_entropy_json(&exact_source_entropy(&params.build()?, budget)?),
        EntropyCommand::Vcond { params, budget } => emit_entropy_json(&conditional_source_entropy_given_v(&params.build()?, budget)?),
        EntropyCommand::Obs { params, locs, budget } => {
            let params = params.build()?;
            let locs = load_locs(locs.as_deref(), params.m())?;
            emit_entropy_json(&observation_entropy(&params, &locs, budget)?)
        }
        EntropyCommand::Lemma32 { r, q, semiring, rows, budget } => {
            let report = match rows {
                Some(rows) => lemma32_subset_entropy(r, q, semiring, &rows, budget)?,
                None => lemma32_conditional_entropy(r, q, semiring, budget)?,
            };
            emit_entropy_json(&report)
        }
        EntropyCommand::Agreement { params, locs, values, instance, budget } => {
            let params = params.build()?;
            let locs = load_locs(Some(&locs), params.m())?;
            let obs = match (values, instance) {
                (Some(values), _) => Observation::new(locs, values, &params)?,
                (None, Some(path)) => {
                    let inst = Instance::load(&path)?;
                    if inst.params != params {
                        return Err(Error::InvalidInput("instance parameters differ from --m/--r/--q/--semiring".into()));
                    }
                    Observation::reveal(&product(&inst.pair, &params)?, &locs)
                }
                (None, None) => return Err(Error::InvalidInput("agreement needs --values or --instance".into())),
            };
            let p = agreement_probability(&obs, &params, budget)?;
            emit_entropy_json(&serde_json::json!({ "locs": obs.locs, "values": obs.values, "probability": p }))
        }
        EntropyCommand::Fano { params, locs, budget } => {
            let params = params.build()?;
            let locs = load_locs(locs.as_deref(), params.m())?;
            emit_entropy_json(&fano_verify(&params, &locs, budget)?)
        }
    }
}

fn run_bounds(cmd: BoundsCommand) -> Result<()> {
    match cmd {
        BoundsCommand::Fano { m, r, q, pe } => emit_json(&fano_min_samples(&ConverseInput { m, r, q, pe })?, None),
        BoundsCommand::Hamming { m, r, q, d, beta, delta, unit, exact_hs, budget } => {
            let inp = DistortionInput { m, r, q, d_level: d, beta_exp: beta, delta_slack: delta, h_star: 0.0, unit };
            let report = if exact_hs {
                let params = ModelParams::integer(m, r, q)?;
                let bits = exact_source_entropy(&params, budget)?.value_bits;
                let hs = match unit {
                    LogUnit::Bits => bits,
                    LogUnit::Nats => bits * std::f64::consts::LN_2,
                };
                hamming_rd_min_samples_with_entropy(&inp, hs)?
            } else {
                hamming_rd_min_samples(&inp)?
            };
            emit_json(&report, None)
        }
        BoundsCommand::Gaussian { m, r, beta, d, hstar, unit } => {
            let inp = DistortionInput { m, r, q: 0, d_level: d, beta_exp: beta, delta_slack: 0.0, h_star: hstar, unit };
            emit_json(&gaussian_rd_info_bound(&inp)?, None)
        }
        BoundsCommand::Table { sweep, out } => {
            let sweep: BoundSweep = serde_json::from_str(&fs::read_to_string(sweep)?)?;
            let reports = evaluate_queries(&sweep.rows)?;
            let mut buf = Vec::new();
            write_bounds_csv(&reports, &mut buf)?;
            write_out(&String::from_utf8_lossy(&buf), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
