//! Monte Carlo experiments over configuration grids.
//!
//! Six experiment kinds share one engine: the two rejection families tally
//! how often the combined or threshold test rejects a true (Type I error) or
//! false (power) null across `reps` fresh datasets, and the two rate families
//! track how fast the bootstrap covariance error and the Gaussian
//! approximation error shrink along an `n` grid.
//!
//! # Reproducibility
//!
//! Every rep draws from streams derived as
//! `cell_seed = derive(config.seed, Cell, group_index)` and then
//! `derive(cell_seed, RepData | RepTest, rep_index)`, so a rep's randomness
//! depends only on the configuration, never on scheduling. Reps run on a
//! `rayon` pool sized by `config.workers` and are merged by rep index; the
//! report is bit-identical for any worker count. A rep whose design matrix
//! fails to invert is retried on a fresh `RepRetry`-derived stream (the seed
//! ledger records the attempt count); when total retries exceed 1% of reps,
//! or a single rep fails [`MAX_ATTEMPTS`] times in a row, the run aborts with
//! [`HarnessError::RepFailures`] / [`HarnessError::RepExhausted`] — the CLI
//! maps both to exit code 2.
//!
//! # Rate-cell metrics
//!
//! The fixed report schema has `rejection_rate`/`mc_se` columns; rate cells
//! have no rejection rate, so those columns carry the cell's two headline
//! metrics instead (see [`CellRecord`]) and the full detail rides along in
//! the JSON-only `rate`/`ga` structs.

use std::fmt;
use std::time::Instant;

use hdns_core::bootstrap::{block_sums, conditional_covariance, delta_diagnostics};
use hdns_core::gaussian::{
    empirical_kolmogorov, empirical_w2_1d, gaussian_w2, spd_sqrt, SpdMatrix,
};
use hdns_core::inference::{run_combined_test, run_threshold_test, DEFAULT_B_SIGMA};
use hdns_core::models::{
    generate_regression, simulate_model, ModelId, ModelSpec, DEFAULT_BAND_VALUE, DEFAULT_BURN_IN,
    DEFAULT_T_DF,
};
use hdns_core::rng::{derive_seed, Purpose, Stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{CellRecord, ExperimentReport, GaDetail, RateDetail, SeedLedgerEntry};

/// Retries allowed for one rep before the run gives up.
pub const MAX_ATTEMPTS: u32 = 4;
/// Independent series used to estimate the target covariance of X_n/√n in
/// the rate experiments.
pub const TARGET_SERIES: usize = 2000;

/// Which experiment the harness runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "TYPE1_COMBINED")]
    Type1Combined,
    #[serde(rename = "TYPE1_THRESHOLD")]
    Type1Threshold,
    #[serde(rename = "POWER_COMBINED")]
    PowerCombined,
    #[serde(rename = "POWER_THRESHOLD")]
    PowerThreshold,
    #[serde(rename = "RATE_DELTA")]
    RateDelta,
    #[serde(rename = "RATE_GA")]
    RateGa,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Type1Combined => "TYPE1_COMBINED",
            ExperimentKind::Type1Threshold => "TYPE1_THRESHOLD",
            ExperimentKind::PowerCombined => "POWER_COMBINED",
            ExperimentKind::PowerThreshold => "POWER_THRESHOLD",
            ExperimentKind::RateDelta => "RATE_DELTA",
            ExperimentKind::RateGa => "RATE_GA",
        }
    }

    pub fn is_power(self) -> bool {
        matches!(
            self,
            ExperimentKind::PowerCombined | ExperimentKind::PowerThreshold
        )
    }

    pub fn is_rate(self) -> bool {
        matches!(self, ExperimentKind::RateDelta | ExperimentKind::RateGa)
    }

    /// True for the kinds that exercise the soft-threshold test.
    pub fn is_threshold(self) -> bool {
        matches!(
            self,
            ExperimentKind::Type1Threshold | ExperimentKind::PowerThreshold
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TYPE1_COMBINED" => Ok(ExperimentKind::Type1Combined),
            "TYPE1_THRESHOLD" => Ok(ExperimentKind::Type1Threshold),
            "POWER_COMBINED" => Ok(ExperimentKind::PowerCombined),
            "POWER_THRESHOLD" => Ok(ExperimentKind::PowerThreshold),
            "RATE_DELTA" => Ok(ExperimentKind::RateDelta),
            "RATE_GA" => Ok(ExperimentKind::RateGa),
            other => Err(format!("unknown experiment kind {other:?}")),
        }
    }
}

/// How the power experiments move the true coefficient off the null.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// β = β₀ + δ·e₁ — one coordinate moves.
    #[serde(rename = "SPARSE")]
    Sparse,
    /// β = (1+δ)·β₀ — every coordinate moves proportionally.
    #[serde(rename = "UNIFORM")]
    Uniform,
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::Sparse => "SPARSE",
            Alternative::Uniform => "UNIFORM",
        })
    }
}

impl std::str::FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SPARSE" => Ok(Alternative::Sparse),
            "UNIFORM" => Ok(Alternative::Uniform),
            other => Err(format!(
                "unknown alternative {other:?} (want sparse or uniform)"
            )),
        }
    }
}

fn default_alpha_grid() -> Vec<f64> {
    vec![0.05, 0.10]
}

fn default_reps() -> usize {
    2000
}

fn default_b() -> usize {
    1000
}

fn default_n() -> usize {
    500
}

fn default_b_sigma() -> usize {
    DEFAULT_B_SIGMA
}

fn default_workers() -> usize {
    1
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_t_df() -> f64 {
    DEFAULT_T_DF
}

fn default_band_value() -> f64 {
    DEFAULT_BAND_VALUE
}

/// Full description of one experiment run. The `model`/`burn_in`/`t_df`/
/// `band_value` quadruple is the model template; `n`, `d`, and the per-rep
/// seed are filled in per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Model name, one of "M1".."M5".
    pub model: String,
    pub d_grid: Vec<usize>,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Bootstrap draws per test.
    #[serde(rename = "B", default = "default_b")]
    pub b: usize,
    /// Series length for the rejection kinds.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Series-length grid for the rate kinds (defaults: {250, 1000, 4000}
    /// for RATE_DELTA, {125, 500, 2000} for RATE_GA). Must stay `None` for
    /// the rejection kinds.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    /// Offsets from the null, power kinds only.
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    /// Required for POWER_COMBINED; POWER_THRESHOLD is implicitly sparse in
    /// the first coordinate.
    #[serde(default)]
    pub alternative: Option<Alternative>,
    /// Fraction of coordinates pinned at zero in the threshold null
    /// β₀ = [0_r, 1_{d−r}], r = round(r_fraction·d).
    #[serde(default)]
    pub r_fraction: f64,
    /// Block size; `None` auto-selects per dataset on the score matrix.
    #[serde(default, rename = "L")]
    pub l: Option<usize>,
    /// Draws behind the threshold test's σ̂.
    #[serde(default = "default_b_sigma")]
    pub b_sigma: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_t_df")]
    pub t_df: f64,
    #[serde(default = "default_band_value")]
    pub band_value: f64,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the identity of the run.
    pub fn new(kind: ExperimentKind, model: &str, d_grid: Vec<usize>, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            model: model.to_string(),
            d_grid,
            alpha_grid: default_alpha_grid(),
            reps: default_reps(),
            b: default_b(),
            n: default_n(),
            n_grid: None,
            delta_grid: Vec::new(),
            alternative: None,
            r_fraction: 0.0,
            l: None,
            b_sigma: default_b_sigma(),
            seed,
            workers: default_workers(),
            burn_in: default_burn_in(),
            t_df: default_t_df(),
            band_value: default_band_value(),
        }
    }

    pub fn model_id(&self) -> Result<ModelId, HarnessError> {
        match self.model.as_str() {
            "M1" => Ok(ModelId::M1),
            "M2" => Ok(ModelId::M2),
            "M3" => Ok(ModelId::M3),
            "M4" => Ok(ModelId::M4),
            "M5" => Ok(ModelId::M5),
            other => Err(HarnessError::InvalidConfig(format!(
                "unknown model {other:?} (want M1..M5)"
            ))),
        }
    }

    /// The n grid a rate run walks.
    pub fn rate_n_grid(&self) -> Vec<usize> {
        match &self.n_grid {
            Some(grid) => grid.clone(),
            None => match self.kind {
                ExperimentKind::RateGa => vec![125, 500, 2000],
                _ => vec![250, 1000, 4000],
            },
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        self.model_id()?;
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.b == 0 {
            return bad("B must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.d_grid.is_empty() {
            return bad("d_grid must be non-empty".into());
        }
        if self.model == "M5" && !(self.t_df > 2.0) {
            return bad(format!("M5 needs t_df > 2, got {}", self.t_df));
        }
        if self.kind.is_rate() {
            // The combined statistic needs d >= 2, but the rate probes only
            // aggregate column sums, and the Gaussian-approximation probe
            // explicitly includes a d = 1 sanity cell; d >= 1 suffices here.
            let grid = self.rate_n_grid();
            if grid.is_empty() {
                return bad("rate kinds need a non-empty n grid".into());
            }
            for &n in &grid {
                if n < 2 {
                    return bad(format!("series length {n} too short"));
                }
            }
            if !self.delta_grid.is_empty() {
                return bad("delta_grid applies to the power kinds only".into());
            }
        } else {
            if self.n_grid.is_some() {
                return bad("n_grid applies to the rate kinds only; set n".into());
            }
            for &d in &self.d_grid {
                if d < 2 {
                    return bad(format!("d must be >= 2 for the test kinds, got {d}"));
                }
                if d >= self.n {
                    return bad(format!("d must be < n, got d = {d}, n = {}", self.n));
                }
            }
            if self.alpha_grid.is_empty() {
                return bad("alpha_grid must be non-empty".into());
            }
            for &alpha in &self.alpha_grid {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return bad(format!("alpha must be in (0,1), got {alpha}"));
                }
            }
            if self.kind.is_power() {
                if self.delta_grid.is_empty() {
                    return bad("power kinds need a non-empty delta_grid".into());
                }
                for &delta in &self.delta_grid {
                    if !delta.is_finite() {
                        return bad(format!("delta must be finite, got {delta}"));
                    }
                }
            } else if !self.delta_grid.is_empty() {
                return bad("delta_grid applies to the power kinds only".into());
            }
            match self.kind {
                ExperimentKind::PowerCombined if self.alternative.is_none() => {
                    return bad("POWER_COMBINED needs alternative (sparse or uniform)".into());
                }
                ExperimentKind::PowerThreshold
                    if self.alternative == Some(Alternative::Uniform) =>
                {
                    return bad("POWER_THRESHOLD moves the first coordinate only; \
                                alternative UNIFORM is not defined for it"
                        .into());
                }
                _ => {}
            }
            if self.kind.is_threshold() {
                if !(self.r_fraction >= 0.0 && self.r_fraction <= 1.0) {
                    return bad(format!(
                        "r_fraction must be in [0,1], got {}",
                        self.r_fraction
                    ));
                }
                if self.b_sigma < 50 {
                    return bad(format!("b_sigma must be >= 50, got {}", self.b_sigma));
                }
            }
        }
        Ok(())
    }
}

/// Failures that end an experiment run.
#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    InvalidConfig(String),
    /// Retries across the run exceeded the 1% budget.
    RepFailures {
        cell: String,
        failures: usize,
        budget: usize,
        sample: String,
    },
    /// One rep failed [`MAX_ATTEMPTS`] consecutive attempts.
    RepExhausted {
        cell: String,
        rep: usize,
        last_error: String,
    },
    /// A deterministic (non-rep) computation failed.
    Core(String),
}

impl HarnessError {
    /// True for the failure modes the CLI reports with exit code 2.
    pub fn is_rep_failure(&self) -> bool {
        matches!(
            self,
            HarnessError::RepFailures { .. } | HarnessError::RepExhausted { .. }
        )
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            HarnessError::RepFailures {
                cell,
                failures,
                budget,
                sample,
            } => write!(
                f,
                "cell {cell}: {failures} rep failures exceed the budget of {budget} \
                 (1% of reps); first failure: {sample}"
            ),
            HarnessError::RepExhausted {
                cell,
                rep,
                last_error,
            } => write!(
                f,
                "cell {cell}: rep {rep} failed {MAX_ATTEMPTS} attempts in a row; last: {last_error}"
            ),
            HarnessError::Core(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

/// Retries tolerated across one cell group before aborting: 1% of reps,
/// rounded up.
pub fn retry_budget(reps: usize) -> usize {
    reps.div_ceil(100)
}

struct RepRecord {
    rep: usize,
    p_value: f64,
    data_seed: u64,
    test_seed: u64,
    attempts: u32,
}

/// One (d, δ?) group of a rejection experiment: where its data comes from
/// and which hypothesis it tests.
struct RejectionGroup {
    group_index: usize,
    d: usize,
    delta: Option<f64>,
    r: Option<usize>,
    beta_true: Vec<f64>,
    beta0: Vec<f64>,
}

fn rejection_groups(config: &ExperimentConfig) -> Vec<RejectionGroup> {
    let mut groups = Vec::new();
    let deltas: Vec<Option<f64>> = if config.kind.is_power() {
        config.delta_grid.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut group_index = 0;
    for &d in &config.d_grid {
        for &delta in &deltas {
            let (beta0, r) = if config.kind.is_threshold() {
                let r = ((config.r_fraction * d as f64).round() as usize).min(d);
                let mut b0 = vec![1.0; d];
                b0[..r].fill(0.0);
                (b0, Some(r))
            } else {
                (vec![1.0; d], None)
            };
            let mut beta_true = beta0.clone();
            if let Some(delta) = delta {
                match (config.kind, config.alternative) {
                    (ExperimentKind::PowerCombined, Some(Alternative::Uniform)) => {
                        for b in &mut beta_true {
                            *b *= 1.0 + delta;
                        }
                    }
                    // sparse: move the first coordinate only
                    _ => beta_true[0] += delta,
                }
            }
            groups.push(RejectionGroup {
                group_index,
                d,
                delta,
                r,
                beta_true,
                beta0,
            });
            group_index += 1;
        }
    }
    groups
}

fn group_label(config: &ExperimentConfig, d: usize, delta: Option<f64>, n: usize) -> String {
    match delta {
        Some(delta) => format!("{}:n={},d={},delta={}", config.kind, n, d, delta),
        None => format!("{}:n={},d={}", config.kind, n, d),
    }
}

/// Seeds for one attempt of one rep. Attempt 0 uses the plain
/// (RepData, RepTest) streams; retries re-key both through RepRetry so a
/// resampled rep shares nothing with the failed attempt.
fn attempt_seeds(cell_seed: u64, rep: usize, attempt: u32) -> (u64, u64) {
    let base = if attempt == 0 {
        cell_seed
    } else {
        derive_seed(
            cell_seed,
            Purpose::RepRetry,
            rep as i64 * MAX_ATTEMPTS as i64 + attempt as i64,
        )
    };
    (
        derive_seed(base, Purpose::RepData, rep as i64),
        derive_seed(base, Purpose::RepTest, rep as i64),
    )
}

fn run_rejection_group(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    group: &RejectionGroup,
    cells: &mut Vec<CellRecord>,
    ledger: &mut Vec<SeedLedgerEntry>,
) -> Result<(), HarnessError> {
    let model_id = config.model_id()?;
    let cell_seed = derive_seed(config.seed, Purpose::Cell, group.group_index as i64);
    let label = group_label(config, group.d, group.delta, config.n);
    // Any alpha works here: rejection at each level is decided from the
    // rep's p-value, so one bootstrap draw set per rep serves every level.
    let alpha_ref = config.alpha_grid[0];

    let results: Vec<Result<RepRecord, (usize, u32, String)>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let mut attempt = 0;
                loop {
                    let (data_seed, test_seed) = attempt_seeds(cell_seed, rep, attempt);
                    let spec = ModelSpec::new(model_id, config.n, group.d, data_seed)
                        .with_burn_in(config.burn_in)
                        .with_t_df(config.t_df)
                        .with_band_value(config.band_value);
                    let outcome = generate_regression(&spec, &group.beta_true)
                        .map_err(|e| e.to_string())
                        .and_then(|ds| {
                            let run = if config.kind.is_threshold() {
                                run_threshold_test(
                                    &ds.x,
                                    &ds.y,
                                    &group.beta0,
                                    alpha_ref,
                                    config.l,
                                    config.b,
                                    config.b_sigma,
                                    test_seed,
                                )
                            } else {
                                run_combined_test(
                                    &ds.x,
                                    &ds.y,
                                    &group.beta0,
                                    alpha_ref,
                                    config.l,
                                    config.b,
                                    test_seed,
                                )
                            };
                            run.map_err(|e| e.to_string())
                        });
                    match outcome {
                        Ok(out) => {
                            return Ok(RepRecord {
                                rep,
                                p_value: out.p_value,
                                data_seed,
                                test_seed,
                                attempts: attempt + 1,
                            })
                        }
                        Err(msg) => {
                            attempt += 1;
                            if attempt >= MAX_ATTEMPTS {
                                return Err((rep, attempt, msg));
                            }
                        }
                    }
                }
            })
            .collect()
    });

    let budget = retry_budget(config.reps);
    let mut failures = 0usize;
    let mut first_failure = String::new();
    let mut records = Vec::with_capacity(config.reps);
    for result in results {
        match result {
            Ok(rec) => {
                failures += (rec.attempts - 1) as usize;
                records.push(rec);
            }
            Err((rep, _attempts, msg)) => {
                return Err(HarnessError::RepExhausted {
                    cell: label,
                    rep,
                    last_error: msg,
                })
            }
        }
    }
    if failures > budget {
        for rec in &records {
            if rec.attempts > 1 && first_failure.is_empty() {
                first_failure = format!("rep {} needed {} attempts", rec.rep, rec.attempts);
            }
        }
        return Err(HarnessError::RepFailures {
            cell: label,
            failures,
            budget,
            sample: first_failure,
        });
    }

    for &alpha in &config.alpha_grid {
        let rejections = records.iter().filter(|r| r.p_value <= alpha).count();
        let rate = rejections as f64 / config.reps as f64;
        let mc_se = (rate * (1.0 - rate) / config.reps as f64).sqrt();
        cells.push(CellRecord {
            kind: config.kind.as_str().to_string(),
            model: config.model.clone(),
            n: config.n,
            d: group.d,
            alpha: Some(alpha),
            delta: group.delta,
            r: group.r,
            rejection_rate: rate,
            mc_se,
            reps: config.reps,
            rate: None,
            ga: None,
        });
    }
    for rec in records {
        ledger.push(SeedLedgerEntry {
            cell: label.clone(),
            rep: rec.rep,
            data_seed: rec.data_seed,
            test_seed: Some(rec.test_seed),
            attempts: rec.attempts,
        });
    }
    Ok(())
}

/// Column sums of one simulated series, scaled by 1/√n: a draw of X_n/√n.
fn scaled_column_sums(spec: &ModelSpec) -> Result<Vec<f64>, String> {
    let x = simulate_model(spec).map_err(|e| e.to_string())?;
    let (n, d) = (spec.n, spec.d);
    let mut sums = vec![0.0; d];
    let mut comp = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..d {
            // Neumaier compensation: column sums feed covariance targets
            let t = sums[j] + row[j];
            comp[j] += if sums[j].abs() >= row[j].abs() {
                (sums[j] - t) + row[j]
            } else {
                (row[j] - t) + sums[j]
            };
            sums[j] = t;
        }
    }
    let inv = 1.0 / (n as f64).sqrt();
    for j in 0..d {
        sums[j] = (sums[j] + comp[j]) * inv;
    }
    Ok(sums)
}

/// Monte Carlo target for Cov(X_n/√n): the uncentered second moment of
/// [`TARGET_SERIES`] independent scaled column sums (the process mean is 0
/// by construction). Streams are derived from the cell seed under the
/// AuxNoise purpose, disjoint from the per-rep streams.
fn target_covariance(
    pool: &rayon::ThreadPool,
    cell_seed: u64,
    spec_template: &ModelSpec,
) -> Result<Vec<f64>, HarnessError> {
    let d = spec_template.d;
    let sums: Vec<Result<Vec<f64>, String>> = pool.install(|| {
        (0..TARGET_SERIES)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(cell_seed, Purpose::AuxNoise, rep as i64);
                scaled_column_sums(&spec_template.clone().with_seed(seed))
            })
            .collect()
    });
    let mut target = vec![0.0; d * d];
    for sum in sums {
        let v = sum.map_err(HarnessError::Core)?;
        for j in 0..d {
            for k in j..d {
                target[j * d + k] += v[j] * v[k];
            }
        }
    }
    let inv = 1.0 / TARGET_SERIES as f64;
    for j in 0..d {
        for k in j..d {
            target[j * d + k] *= inv;
            target[k * d + j] = target[j * d + k];
        }
    }
    Ok(target)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

fn run_rate_delta_cell(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    group_index: usize,
    n: usize,
    d: usize,
    cells: &mut Vec<CellRecord>,
    ledger: &mut Vec<SeedLedgerEntry>,
) -> Result<(), HarnessError> {
    let model_id = config.model_id()?;
    let cell_seed = derive_seed(config.seed, Purpose::Cell, group_index as i64);
    let label = group_label(config, d, None, n);
    let template = ModelSpec::new(model_id, n, d, 0)
        .with_burn_in(config.burn_in)
        .with_t_df(config.t_df)
        .with_band_value(config.band_value);
    let target = target_covariance(pool, cell_seed, &template)?;
    let l = (n as f64).cbrt().ceil() as usize;

    let results: Vec<Result<(u64, f64, f64), String>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let data_seed = derive_seed(cell_seed, Purpose::RepData, rep as i64);
                let x = simulate_model(&template.clone().with_seed(data_seed))
                    .map_err(|e| e.to_string())?;
                let psi = block_sums(&x, l).map_err(|e| e.to_string())?;
                let boot_cov = conditional_covariance(&psi);
                let diag = delta_diagnostics(&target, &boot_cov, d).map_err(|e| e.to_string())?;
                Ok((data_seed, diag.delta_frobenius, diag.delta_max))
            })
            .collect()
    });

    let mut frob = Vec::with_capacity(config.reps);
    let mut max = Vec::with_capacity(config.reps);
    for (rep, result) in results.into_iter().enumerate() {
        let (data_seed, d1, d2) = result.map_err(HarnessError::Core)?;
        frob.push(d1);
        max.push(d2);
        ledger.push(SeedLedgerEntry {
            cell: label.clone(),
            rep,
            data_seed,
            test_seed: None,
            attempts: 1,
        });
    }
    let median_frob = median(&mut frob);
    let median_max = median(&mut max);
    let reference = d as f64 * ((l as f64 / n as f64).sqrt() + 1.0 / l as f64);
    cells.push(CellRecord {
        kind: config.kind.as_str().to_string(),
        model: config.model.clone(),
        n,
        d,
        alpha: None,
        delta: None,
        r: None,
        rejection_rate: median_frob,
        mc_se: median_max,
        reps: config.reps,
        rate: Some(RateDetail {
            l,
            reference,
            median_delta_frobenius: median_frob,
            median_delta_max: median_max,
            ratio_to_reference: median_frob / reference,
        }),
        ga: None,
    });
    Ok(())
}

/// The scalar statistic whose law the Gaussian-approximation probe compares:
/// the combined max/Euclidean form for d ≥ 2, plain |v| for d = 1 (where the
/// √(2·log d) normalizer degenerates).
fn ga_statistic(v: &[f64]) -> f64 {
    let d = v.len();
    if d == 1 {
        return v[0].abs();
    }
    let sup = v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let two: f64 = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
    (sup / (2.0 * (d as f64).ln()).sqrt()).max(two / (d as f64).sqrt())
}

fn sample_covariance(vectors: &[Vec<f64>], d: usize) -> Vec<f64> {
    let m = vectors.len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for j in 0..d {
            mean[j] += v[j];
        }
    }
    for j in 0..d {
        mean[j] /= m as f64;
    }
    let mut cov = vec![0.0; d * d];
    for v in vectors {
        for j in 0..d {
            for k in j..d {
                cov[j * d + k] += (v[j] - mean[j]) * (v[k] - mean[k]);
            }
        }
    }
    let inv = 1.0 / (m - 1) as f64;
    for j in 0..d {
        for k in j..d {
            cov[j * d + k] *= inv;
            cov[k * d + j] = cov[j * d + k];
        }
    }
    cov
}

fn run_rate_ga_cell(
    config: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    group_index: usize,
    n: usize,
    d: usize,
    cells: &mut Vec<CellRecord>,
    ledger: &mut Vec<SeedLedgerEntry>,
) -> Result<(), HarnessError> {
    let model_id = config.model_id()?;
    let cell_seed = derive_seed(config.seed, Purpose::Cell, group_index as i64);
    let label = group_label(config, d, None, n);
    let template = ModelSpec::new(model_id, n, d, 0)
        .with_burn_in(config.burn_in)
        .with_t_df(config.t_df)
        .with_band_value(config.band_value);
    let m = config.reps;

    let draws: Vec<Result<(u64, Vec<f64>), String>> = pool.install(|| {
        (0..m)
            .into_par_iter()
            .map(|rep| {
                let data_seed = derive_seed(cell_seed, Purpose::RepData, rep as i64);
                let v = scaled_column_sums(&template.clone().with_seed(data_seed))?;
                Ok((data_seed, v))
            })
            .collect()
    });
    let mut vectors = Vec::with_capacity(m);
    for (rep, draw) in draws.into_iter().enumerate() {
        let (data_seed, v) = draw.map_err(HarnessError::Core)?;
        vectors.push(v);
        ledger.push(SeedLedgerEntry {
            cell: label.clone(),
            rep,
            data_seed,
            test_seed: None,
            attempts: 1,
        });
    }
    if m < 2 {
        return Err(HarnessError::InvalidConfig(
            "RATE_GA needs reps >= 2 to fit a covariance".into(),
        ));
    }

    let fitted = SpdMatrix::new(sample_covariance(&vectors, d), d)
        .map_err(|e| HarnessError::Core(format!("fitted covariance at {label}: {e}")))?;
    let root = spd_sqrt(&fitted).map_err(|e| HarnessError::Core(e.to_string()))?;
    // matched Gaussian sample: g = Σ̂^{1/2} z, one fresh stream per (rep, j)
    let gaussians: Vec<Vec<f64>> = pool.install(|| {
        (0..m)
            .into_par_iter()
            .map(|rep| {
                let mut z = vec![0.0; d];
                for (j, slot) in z.iter_mut().enumerate() {
                    *slot = Stream::new(cell_seed, Purpose::CouplingNoise, rep as i64, j as u64)
                        .next_gaussian();
                }
                let mut g = vec![0.0; d];
                for j in 0..d {
                    let row = &root.entries()[j * d..(j + 1) * d];
                    g[j] = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                }
                g
            })
            .collect()
    });

    let t_data: Vec<f64> = vectors.iter().map(|v| ga_statistic(v)).collect();
    let t_gauss: Vec<f64> = gaussians.iter().map(|g| ga_statistic(g)).collect();
    let kolmogorov =
        empirical_kolmogorov(&t_data, &t_gauss).map_err(|e| HarnessError::Core(e.to_string()))?;

    let target_entries = target_covariance(pool, cell_seed, &template)?;
    let target = SpdMatrix::new(target_entries, d)
        .map_err(|e| HarnessError::Core(format!("target covariance at {label}: {e}")))?;
    let w2_covariance =
        gaussian_w2(&fitted, &target).map_err(|e| HarnessError::Core(e.to_string()))?;

    let w2_1d = if d == 1 {
        let xs: Vec<f64> = vectors.iter().map(|v| v[0]).collect();
        let gs: Vec<f64> = gaussians.iter().map(|g| g[0]).collect();
        Some(empirical_w2_1d(&xs, &gs).map_err(|e| HarnessError::Core(e.to_string()))?)
    } else {
        None
    };

    cells.push(CellRecord {
        kind: config.kind.as_str().to_string(),
        model: config.model.clone(),
        n,
        d,
        alpha: None,
        delta: None,
        r: None,
        rejection_rate: kolmogorov,
        mc_se: w2_covariance,
        reps: m,
        rate: None,
        ga: Some(GaDetail {
            m,
            kolmogorov,
            w2_covariance,
            w2_1d,
        }),
    });
    Ok(())
}

/// Runs the configured experiment and assembles the report. Deterministic in
/// everything but `runtime_seconds` for a fixed config (workers included —
/// scheduling never changes the numbers).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Core(format!("worker pool: {e}")))?;

    let mut cells = Vec::new();
    let mut ledger = Vec::new();
    if config.kind.is_rate() {
        let n_grid = config.rate_n_grid();
        let mut group_index = 0;
        for &d in &config.d_grid {
            for &n in &n_grid {
                if config.kind == ExperimentKind::RateDelta {
                    run_rate_delta_cell(config, &pool, group_index, n, d, &mut cells, &mut ledger)?;
                } else {
                    run_rate_ga_cell(config, &pool, group_index, n, d, &mut cells, &mut ledger)?;
                }
                group_index += 1;
            }
        }
    } else {
        for group in rejection_groups(config) {
            run_rejection_group(config, &pool, &group, &mut cells, &mut ledger)?;
        }
    }

    Ok(ExperimentReport {
        cells,
        runtime_seconds: start.elapsed().as_secs_f64(),
        config_echo: config.clone(),
        seed_ledger: ledger,
    })
}
