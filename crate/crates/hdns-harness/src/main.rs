//! `hdns` — simulation, dependence, bootstrap, testing, and Monte Carlo
//! experiments for high-dimensional non-stationary time series.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hdns_core::bootstrap::{
    block_sums, bootstrap_sample, conditional_covariance, default_grid, delta_diagnostics,
    select_block_size,
};
use hdns_core::dependence::{estimate_theta, min_eigenvalue};
use hdns_core::inference::{run_combined_test, run_threshold_test, DEFAULT_B_SIGMA};
use hdns_core::models::{simulate_model, ModelId, ModelSpec};

use hdns_harness::experiment::{
    run_experiment, Alternative, ExperimentConfig, ExperimentKind, HarnessError,
};
use hdns_harness::io::{
    read_series_csv, read_vector, write_json_value, write_series_csv, TestReport,
};
use hdns_harness::report::{cells_to_csv, write_csv, write_json};

#[derive(Parser)]
#[command(
    name = "hdns",
    version,
    about = "Bootstrap inference and Monte Carlo experiments for high-dimensional \
             non-stationary time series"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

// One instance exists for the life of the process; boxing the wide variants
// would buy nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Subcommand)]
enum Cmd {
    /// Simulate one series from a benchmark model and write it as CSV.
    Simulate {
        /// Model name, M1..M5.
        #[arg(long)]
        model: String,
        /// Series length.
        #[arg(long)]
        n: usize,
        /// Dimension.
        #[arg(long)]
        d: usize,
        #[arg(long)]
        seed: u64,
        /// Pre-sample steps (default 200).
        #[arg(long)]
        burn_in: Option<usize>,
        /// Degrees of freedom of the M5 innovation (default 5).
        #[arg(long)]
        t_df: Option<f64>,
        /// Output CSV path (header t,x1,...,xd).
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate physical-dependence measures of a benchmark model by coupled
    /// re-simulation; emits CSV `k,coord,theta_hat,mc_se` with a `max`
    /// summary row per lag.
    Deps {
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Largest lag k to estimate (all of 0..=k_max are emitted).
        #[arg(long)]
        k_max: usize,
        /// Moment order q >= 1.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Coupled re-simulations per lag (>= 100).
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multiplier-bootstrap covariance diagnostics for one observed series:
    /// the exact conditional covariance of the scaled draw against the
    /// empirical second moment of B realized draws. `delta_frobenius` /
    /// `delta_max` therefore measure multiplier Monte Carlo noise at this
    /// (L, B) — no population target exists for observed data —  and
    /// `min_eigenvalue_boot` is the smallest eigenvalue of the conditional
    /// covariance.
    BootstrapDiag {
        /// Input series CSV as produced by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Block size: a positive integer or `auto` (minimal-volatility
        /// selection on the series).
        #[arg(long = "L", default_value = "auto")]
        l: String,
        /// Bootstrap draws.
        #[arg(long = "B", default_value_t = 1000)]
        b: usize,
        #[arg(long)]
        seed: u64,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Test H0: beta = beta0 on observed data with bootstrap critical values.
    #[command(subcommand)]
    Test(TestCmd),
    /// Monte Carlo experiment grids (Type I error, power, rate decay).
    #[command(subcommand)]
    Mc(McCmd),
}

#[derive(Args)]
struct TestArgs {
    /// Predictor series CSV (header t,x1,...,xd).
    #[arg(long)]
    x: PathBuf,
    /// Response vector, one value per line.
    #[arg(long)]
    y: PathBuf,
    /// Null coefficient vector, one value per line.
    #[arg(long)]
    beta0: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Block size: a positive integer or `auto`.
    #[arg(long = "L", default_value = "auto")]
    l: String,
    /// Bootstrap draws.
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long)]
    seed: u64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum TestCmd {
    /// Combined sup/Euclidean-norm test.
    Combined {
        #[command(flatten)]
        args: TestArgs,
    },
    /// Soft-threshold max test.
    Threshold {
        #[command(flatten)]
        args: TestArgs,
        /// Draws behind the threshold scale estimate (>= 50).
        #[arg(long, default_value_t = DEFAULT_B_SIGMA)]
        b_sigma: usize,
    },
}

/// Flags shared by the `mc` subcommands. A `--config` JSON file supplies the
/// base configuration; any flag given explicitly overrides the file. Without
/// `--config`, flags must pin at least the model, d grid, and seed.
#[derive(Args)]
struct McFlags {
    /// JSON ExperimentConfig file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name, M1..M5.
    #[arg(long)]
    model: Option<String>,
    /// Series length (rejection kinds) or comma-separated grid (rate kinds).
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated dimension grid, e.g. 5,10,15,20,25.
    #[arg(long)]
    d: Option<String>,
    /// Comma-separated test levels, e.g. 0.05,0.10.
    #[arg(long)]
    alpha: Option<String>,
    /// Monte Carlo reps per cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Bootstrap draws per test.
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (never changes the numbers, only the wall clock).
    #[arg(long)]
    workers: Option<usize>,
    /// CSV report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full JSON report path (cells, config echo, seed ledger).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Which test the type1/power kinds run: combined (default) or threshold.
    #[arg(long)]
    test: Option<String>,
    /// Comma-separated offsets from the null (power kinds).
    #[arg(long)]
    delta: Option<String>,
    /// Power-combined alternative: sparse or uniform.
    #[arg(long)]
    alternative: Option<String>,
    /// Zero fraction of the threshold null.
    #[arg(long)]
    r_fraction: Option<f64>,
    /// Block size: a positive integer or `auto` (default).
    #[arg(long = "L")]
    l: Option<String>,
    /// Draws behind the threshold scale estimate.
    #[arg(long)]
    b_sigma: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    t_df: Option<f64>,
    #[arg(long)]
    band_value: Option<f64>,
}

#[derive(Subcommand)]
enum McCmd {
    /// Type I error grid under a true null.
    Type1(McFlags),
    /// Power curves over a delta grid.
    Power(McFlags),
    /// Bootstrap covariance error along an n grid.
    RateDelta(McFlags),
    /// Gaussian approximation error along an n grid.
    RateGa(McFlags),
}

fn parse_model(name: &str) -> Result<ModelId> {
    match name {
        "M1" => Ok(ModelId::M1),
        "M2" => Ok(ModelId::M2),
        "M3" => Ok(ModelId::M3),
        "M4" => Ok(ModelId::M4),
        "M5" => Ok(ModelId::M5),
        other => bail!("unknown model {other:?} (want M1..M5)"),
    }
}

fn parse_block_size(text: &str) -> Result<Option<usize>> {
    if text.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        let l: usize = text.parse().with_context(|| format!("--L {text:?}"))?;
        Ok(Some(l))
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("{flag} {s:?}: {e}"))
        })
        .collect()
}

fn run_simulate(
    model: String,
    n: usize,
    d: usize,
    seed: u64,
    burn_in: Option<usize>,
    t_df: Option<f64>,
    out: PathBuf,
) -> Result<()> {
    let mut spec = ModelSpec::new(parse_model(&model)?, n, d, seed);
    if let Some(burn_in) = burn_in {
        spec = spec.with_burn_in(burn_in);
    }
    if let Some(t_df) = t_df {
        spec = spec.with_t_df(t_df);
    }
    let x = simulate_model(&spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    write_series_csv(&out, &x)?;
    eprintln!("wrote {} ({} x {})", out.display(), n, d);
    Ok(())
}

// One parameter per CLI flag of the `deps` subcommand.
#[allow(clippy::too_many_arguments)]
fn run_deps(
    model: String,
    n: usize,
    d: usize,
    k_max: usize,
    q: f64,
    reps: usize,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let spec = ModelSpec::new(parse_model(&model)?, n, d, seed);
    let mut csv = String::from("k,coord,theta_hat,mc_se\n");
    for k in 0..=k_max {
        let est = estimate_theta(&spec, k, q, reps, seed).map_err(|e| anyhow::anyhow!("{e}"))?;
        for j in 0..d {
            csv.push_str(&format!(
                "{k},{},{},{}\n",
                j + 1,
                est.per_coord[j],
                est.mc_se[j]
            ));
        }
        // summary row: the max coordinate and the standard error at it
        let argmax = (0..d)
            .max_by(|&a, &b| est.per_coord[a].total_cmp(&est.per_coord[b]))
            .expect("d >= 1");
        csv.push_str(&format!(
            "{k},max,{},{}\n",
            est.max_over_coords, est.mc_se[argmax]
        ));
    }
    fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} (lags 0..={k_max})", out.display());
    Ok(())
}

#[derive(Serialize)]
struct DiagReport {
    #[serde(rename = "L")]
    l: usize,
    delta_frobenius: f64,
    delta_max: f64,
    min_eigenvalue_boot: f64,
}

fn run_bootstrap_diag(input: PathBuf, l: String, b: usize, seed: u64, out: PathBuf) -> Result<()> {
    let x = read_series_csv(&input)?;
    let l = match parse_block_size(&l)? {
        Some(l) => l,
        None => select_block_size(&x, &default_grid(x.n())).map_err(|e| anyhow::anyhow!("{e}"))?,
    };
    let psi = block_sums(&x, l).map_err(|e| anyhow::anyhow!("{e}"))?;
    let cond = conditional_covariance(&psi);
    let d = x.d();
    let draws = bootstrap_sample(&x, l, b, seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    // empirical second moment of the realized draws (mean zero by symmetry)
    let mut emp = vec![0.0; d * d];
    for i in 0..b {
        let row = draws.row(i);
        for j in 0..d {
            for k in j..d {
                emp[j * d + k] += row[j] * row[k];
            }
        }
    }
    for j in 0..d {
        for k in j..d {
            emp[j * d + k] /= b as f64;
            emp[k * d + j] = emp[j * d + k];
        }
    }
    let diag = delta_diagnostics(&cond, &emp, d).map_err(|e| anyhow::anyhow!("{e}"))?;
    let min_eig = min_eigenvalue(&cond, d).map_err(|e| anyhow::anyhow!("{e}"))?;
    write_json_value(
        &out,
        &DiagReport {
            l,
            delta_frobenius: diag.delta_frobenius,
            delta_max: diag.delta_max,
            min_eigenvalue_boot: min_eig,
        },
    )?;
    eprintln!("wrote {} (L = {l})", out.display());
    Ok(())
}

fn run_test_cmd(cmd: TestCmd) -> Result<()> {
    let (args, b_sigma) = match cmd {
        TestCmd::Combined { args } => (args, None),
        TestCmd::Threshold { args, b_sigma } => (args, Some(b_sigma)),
    };
    let x = read_series_csv(&args.x)?;
    let y = read_vector(&args.y)?;
    let beta0 = read_vector(&args.beta0)?;
    let l = parse_block_size(&args.l)?;
    let outcome = match b_sigma {
        None => run_combined_test(&x, &y, &beta0, args.alpha, l, args.b, args.seed),
        Some(b_sigma) => {
            run_threshold_test(&x, &y, &beta0, args.alpha, l, args.b, b_sigma, args.seed)
        }
    }
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let report = TestReport::from(&outcome);
    write_json_value(&args.out, &report)?;
    println!(
        "{}: T = {:.6}, critical value = {:.6}, p = {:.6} -> {}",
        report.kind,
        report.statistic,
        report.critical_value,
        report.p_value,
        if report.reject {
            "reject"
        } else {
            "fail to reject"
        }
    );
    Ok(())
}

/// The experiment kind named by an `mc` subcommand plus an optional `--test`
/// variant (combined is the default for the rejection families).
fn resolve_kind(kind_base: &str, test: Option<&str>) -> Result<ExperimentKind> {
    match (kind_base, test) {
        ("type1", None | Some("combined")) => Ok(ExperimentKind::Type1Combined),
        ("type1", Some("threshold")) => Ok(ExperimentKind::Type1Threshold),
        ("power", None | Some("combined")) => Ok(ExperimentKind::PowerCombined),
        ("power", Some("threshold")) => Ok(ExperimentKind::PowerThreshold),
        ("rate-delta", None) => Ok(ExperimentKind::RateDelta),
        ("rate-ga", None) => Ok(ExperimentKind::RateGa),
        (base, Some(test)) => bail!("--test {test:?} does not apply to mc {base}"),
        _ => unreachable!("clap restricts the subcommands"),
    }
}

fn build_config(kind_base: &str, flags: &McFlags) -> Result<ExperimentConfig> {
    let mut config = match &flags.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut config: ExperimentConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            // the file picks combined vs threshold unless --test overrides it
            let file_test = match config.kind {
                ExperimentKind::Type1Combined | ExperimentKind::PowerCombined => Some("combined"),
                ExperimentKind::Type1Threshold | ExperimentKind::PowerThreshold => {
                    Some("threshold")
                }
                _ => None,
            };
            let kind = resolve_kind(kind_base, flags.test.as_deref().or(file_test))?;
            let same_family = match kind {
                ExperimentKind::Type1Combined | ExperimentKind::Type1Threshold => {
                    !config.kind.is_power() && !config.kind.is_rate()
                }
                ExperimentKind::PowerCombined | ExperimentKind::PowerThreshold => {
                    config.kind.is_power()
                }
                rate => config.kind == rate,
            };
            if !same_family {
                bail!(
                    "config file kind {} does not match the subcommand (expected mc {kind_base})",
                    config.kind
                );
            }
            config.kind = kind;
            config
        }
        None => {
            let kind = resolve_kind(kind_base, flags.test.as_deref())?;
            let model = flags
                .model
                .clone()
                .context("--model required without --config")?;
            let d_text = flags.d.clone().context("--d required without --config")?;
            let seed = flags.seed.context("--seed required without --config")?;
            ExperimentConfig::new(kind, &model, parse_list(&d_text, "--d")?, seed)
        }
    };

    if let Some(model) = &flags.model {
        config.model = model.clone();
    }
    if let Some(d_text) = &flags.d {
        config.d_grid = parse_list(d_text, "--d")?;
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(n_text) = &flags.n {
        let ns: Vec<usize> = parse_list(n_text, "--n")?;
        if config.kind.is_rate() {
            config.n_grid = Some(ns);
        } else if let [n] = ns[..] {
            config.n = n;
        } else {
            bail!("--n takes one value for mc type1/power (a grid only for the rate kinds)");
        }
    }
    if let Some(alpha_text) = &flags.alpha {
        config.alpha_grid = parse_list(alpha_text, "--alpha")?;
    }
    if let Some(delta_text) = &flags.delta {
        config.delta_grid = parse_list(delta_text, "--delta")?;
    }
    if let Some(alt) = &flags.alternative {
        config.alternative = Some(
            alt.parse::<Alternative>()
                .map_err(|e| anyhow::anyhow!("{e}"))?,
        );
    }
    if let Some(reps) = flags.reps {
        config.reps = reps;
    }
    if let Some(b) = flags.b {
        config.b = b;
    }
    if let Some(workers) = flags.workers {
        config.workers = workers;
    }
    if let Some(r_fraction) = flags.r_fraction {
        config.r_fraction = r_fraction;
    }
    if let Some(l_text) = &flags.l {
        config.l = parse_block_size(l_text)?;
    }
    if let Some(b_sigma) = flags.b_sigma {
        config.b_sigma = b_sigma;
    }
    if let Some(burn_in) = flags.burn_in {
        config.burn_in = burn_in;
    }
    if let Some(t_df) = flags.t_df {
        config.t_df = t_df;
    }
    if let Some(band_value) = flags.band_value {
        config.band_value = band_value;
    }
    Ok(config)
}

fn run_mc(cmd: McCmd) -> Result<()> {
    let (base, flags) = match &cmd {
        McCmd::Type1(f) => ("type1", f),
        McCmd::Power(f) => ("power", f),
        McCmd::RateDelta(f) => ("rate-delta", f),
        McCmd::RateGa(f) => ("rate-ga", f),
    };
    let config = build_config(base, flags)?;
    let report = run_experiment(&config)?;
    if let Some(path) = &flags.out {
        write_csv(path, &report).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {} ({} cells)", path.display(), report.cells.len());
    } else {
        print!("{}", cells_to_csv(&report.cells));
    }
    if let Some(path) = &flags.json {
        write_json(path, &report).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    eprintln!(
        "{} finished: {} cells, {} ledger entries, {:.1}s",
        config.kind,
        report.cells.len(),
        report.seed_ledger.len(),
        report.runtime_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate {
            model,
            n,
            d,
            seed,
            burn_in,
            t_df,
            out,
        } => run_simulate(model, n, d, seed, burn_in, t_df, out),
        Cmd::Deps {
            model,
            n,
            d,
            k_max,
            q,
            reps,
            seed,
            out,
        } => run_deps(model, n, d, k_max, q, reps, seed, out),
        Cmd::BootstrapDiag {
            input,
            l,
            b,
            seed,
            out,
        } => run_bootstrap_diag(input, l, b, seed, out),
        Cmd::Test(cmd) => run_test_cmd(cmd),
        Cmd::Mc(cmd) => run_mc(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let rep_failure = err
                .downcast_ref::<HarnessError>()
                .is_some_and(HarnessError::is_rep_failure);
            if rep_failure {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
