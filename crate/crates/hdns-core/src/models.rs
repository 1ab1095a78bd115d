//! Benchmark non-stationary time series models and the regression layer.
//!
//! Five stock models share one recursion skeleton
//! `x_i = a(i/n) · (A·) x_{i−1} + e_i` with time-varying scalar coefficient
//! `a` and i.i.d. innovations `e_i`:
//!
//! * **M1** — `a(u) = 0.6·cos(2πu)`, `A = I`, standard Gaussian innovations.
//! * **M2** — as M1 but `A` tridiagonal with unit diagonal and off-diagonal
//!   `band_value` (default 1/5): cross-sectional dependence.
//! * **M3** — piecewise: `0.25·cos(2πu)` on `[0, 0.75)`, `u − 0.3` on
//!   `[0.75, 1]`; an abrupt regime change.
//! * **M4** — three regimes: `0.25·cos(2πu)` on `[0, 0.25)`, `u − 0.6` on
//!   `[0.25, 0.6)`, `0.6·e^{−50(u−0.75)²}` on `[0.6, 1]`.
//! * **M5** — as M1 with heavy tails: innovations are multivariate
//!   t(ν, 0, I_d) rescaled by 1/√(ν/(ν−2)) to unit variance, realized as
//!   `z/√(w/ν)` with one chi-square mixing variable `w` per time index shared
//!   across coordinates.
//!
//! The recursion starts at the zero vector and runs `burn_in` extra steps
//! (default 200) before the retained window; burn-in steps reuse the `i = 1`
//! coefficient since `a` is only defined on the retained time scale. With
//! coefficient magnitudes ≤ 0.6 the starting point is forgotten at geometric
//! rate (0.6²⁰⁰ ≈ 10⁻⁴⁴), which the burn-in stability test pins down.
//!
//! The regression layer draws predictors from any of the five models and an
//! error series `ε_i = [14(i/n)²(1−i/n)² − 0.5]·ε_{i−1} + η_i` from an
//! independent stream, then sets `y = Xβ + ε`.
//!
//! Innovation addressing: the innovation entering at absolute time `i`
//! (burn-in runs over `i ≤ 0`) and coordinate `j` comes from the stream
//! `(seed, Innovation, i, j)` — so the dependence estimator can replace the
//! innovation at a single time index with an independent copy and replay the
//! recursion from there.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::rng::{derive_seed, Purpose, Stream};

/// Which benchmark process a [`ModelSpec`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
    /// Marker for regression experiment configuration; not itself simulable —
    /// predictors of a regression dataset come from one of M1–M5.
    Regression,
}

impl ModelId {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::M5 => "M5",
            ModelId::Regression => "REGRESSION",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    SeriesTooShort {
        n: usize,
    },
    DimensionZero,
    /// OLS needs more observations than coefficients.
    RegressionUnderdetermined {
        n: usize,
        d: usize,
    },
    /// The scaled t innovation has unit variance only for ν > 2.
    TDfTooSmall {
        t_df: f64,
    },
    NotSimulable {
        model_id: ModelId,
    },
    BetaDimensionMismatch {
        expected: usize,
        got: usize,
    },
    BetaNotFinite,
    /// A simulated entry overflowed or went NaN; signals a misconfigured
    /// coefficient, must never occur for the five stock models.
    NonFiniteOutput,
    DataDimensionMismatch {
        expected: usize,
        got: usize,
    },
    DataNotFinite,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::SeriesTooShort { n } => write!(f, "series length must be >= 2, got {n}"),
            ModelError::DimensionZero => write!(f, "dimension must be >= 1"),
            ModelError::RegressionUnderdetermined { n, d } => {
                write!(f, "regression needs d < n, got d = {d}, n = {n}")
            }
            ModelError::TDfTooSmall { t_df } => {
                write!(f, "M5 needs t_df > 2 for unit-variance scaling, got {t_df}")
            }
            ModelError::NotSimulable { model_id } => {
                write!(
                    f,
                    "model {} cannot be simulated directly",
                    model_id.as_str()
                )
            }
            ModelError::BetaDimensionMismatch { expected, got } => {
                write!(f, "beta has length {got}, expected {expected}")
            }
            ModelError::BetaNotFinite => write!(f, "beta contains a non-finite entry"),
            ModelError::NonFiniteOutput => write!(f, "simulation produced a non-finite value"),
            ModelError::DataDimensionMismatch { expected, got } => {
                write!(f, "data buffer has {got} entries, expected {expected}")
            }
            ModelError::DataNotFinite => write!(f, "matrix entries must all be finite"),
        }
    }
}

/// Full description of a simulable process (or regression template).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub model_id: ModelId,
    pub n: usize,
    pub d: usize,
    /// Pre-sample steps before the retained window; output length is always n.
    pub burn_in: usize,
    /// Degrees of freedom of the M5 innovation (ignored elsewhere).
    pub t_df: f64,
    /// Off-diagonal entry of the M2 band matrix (ignored elsewhere).
    pub band_value: f64,
    /// Regression coefficients, when the spec doubles as a dataset template.
    pub beta: Option<Vec<f64>>,
    pub seed: u64,
}

pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_T_DF: f64 = 5.0;
pub const DEFAULT_BAND_VALUE: f64 = 0.2;

impl ModelSpec {
    pub fn new(model_id: ModelId, n: usize, d: usize, seed: u64) -> Self {
        ModelSpec {
            model_id,
            n,
            d,
            burn_in: DEFAULT_BURN_IN,
            t_df: DEFAULT_T_DF,
            band_value: DEFAULT_BAND_VALUE,
            beta: None,
            seed,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_t_df(mut self, t_df: f64) -> Self {
        self.t_df = t_df;
        self
    }

    pub fn with_band_value(mut self, band_value: f64) -> Self {
        self.band_value = band_value;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::SeriesTooShort { n: self.n });
        }
        if self.d == 0 {
            return Err(ModelError::DimensionZero);
        }
        if self.model_id == ModelId::Regression && self.d >= self.n {
            return Err(ModelError::RegressionUnderdetermined {
                n: self.n,
                d: self.d,
            });
        }
        if self.model_id == ModelId::M5 && !(self.t_df > 2.0) {
            return Err(ModelError::TDfTooSmall { t_df: self.t_df });
        }
        if let Some(beta) = &self.beta {
            if beta.len() != self.d {
                return Err(ModelError::BetaDimensionMismatch {
                    expected: self.d,
                    got: beta.len(),
                });
            }
            if !linalg::all_finite(beta) {
                return Err(ModelError::BetaNotFinite);
            }
        }
        Ok(())
    }
}

/// Dense n×d series, row-major: row i is the observation at time i+1.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl TimeSeriesMatrix {
    /// Wraps a row-major buffer, enforcing shape and finiteness.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != n * d {
            return Err(ModelError::DataDimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if !linalg::all_finite(&data) {
            return Err(ModelError::DataNotFinite);
        }
        Ok(TimeSeriesMatrix { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Row for 0-based time index i (time i+1 in the 1-based math).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// AR coefficient a(i/n) of a stock model, for 1-based time index i.
///
/// Piecewise boundaries follow the half-open convention of the printed
/// definitions: a regime `[l, r)` owns the indices with l ≤ i/n < r.
pub fn ar_coefficient(model_id: ModelId, i: usize, n: usize) -> f64 {
    let u = i as f64 / n as f64;
    match model_id {
        ModelId::M1 | ModelId::M2 | ModelId::M5 => 0.6 * libm::cos(2.0 * core::f64::consts::PI * u),
        ModelId::M3 => {
            if (i as f64) < 0.75 * n as f64 {
                0.25 * libm::cos(2.0 * core::f64::consts::PI * u)
            } else {
                u - 0.3
            }
        }
        ModelId::M4 => {
            if (i as f64) < 0.25 * n as f64 {
                0.25 * libm::cos(2.0 * core::f64::consts::PI * u)
            } else if (i as f64) < 0.6 * n as f64 {
                u - 0.6
            } else {
                0.6 * libm::exp(-50.0 * (u - 0.75) * (u - 0.75))
            }
        }
        ModelId::Regression => 0.0,
    }
}

/// AR coefficient of the regression error process, 14(i/n)²(1−i/n)² − 0.5.
pub fn error_coefficient(i: usize, n: usize) -> f64 {
    let u = i as f64 / n as f64;
    14.0 * u * u * (1.0 - u) * (1.0 - u) - 0.5
}

/// Fills `buf` with the innovation vector entering at absolute time `i`.
/// `alt` switches every stream to its replacement purpose, giving an
/// independent copy of the entire random element (for M5 that includes the
/// chi-square mixing variable).
pub(crate) fn innovation(spec: &ModelSpec, i: i64, alt: bool, buf: &mut [f64]) {
    let z_purpose = if alt {
        Purpose::InnovationAlt
    } else {
        Purpose::Innovation
    };
    for (j, slot) in buf.iter_mut().enumerate() {
        *slot = Stream::new(spec.seed, z_purpose, i, j as u64).next_gaussian();
    }
    if spec.model_id == ModelId::M5 {
        let w_purpose = if alt {
            Purpose::HeavyTailMixAlt
        } else {
            Purpose::HeavyTailMix
        };
        let w = Stream::new(spec.seed, w_purpose, i, 0).next_chi_square(spec.t_df);
        // t = z/sqrt(w/nu) has variance nu/(nu-2); divide it out.
        let scale = 1.0 / libm::sqrt(w / spec.t_df) / libm::sqrt(spec.t_df / (spec.t_df - 2.0));
        for slot in buf.iter_mut() {
            *slot *= scale;
        }
    }
}

/// One recursion step: `next = a(clamp(i,1)/n)·(A·)state + innov`.
/// The coefficient index is clamped to 1 during burn-in (i ≤ 0).
pub(crate) fn step(spec: &ModelSpec, i: i64, state: &[f64], innov: &[f64], next: &mut [f64]) {
    let i_coef = i.max(1) as usize;
    let a = ar_coefficient(spec.model_id, i_coef, spec.n);
    let d = spec.d;
    if spec.model_id == ModelId::M2 {
        let b = spec.band_value;
        for j in 0..d {
            let left = if j > 0 { state[j - 1] } else { 0.0 };
            let right = if j + 1 < d { state[j + 1] } else { 0.0 };
            next[j] = a * (state[j] + b * (left + right)) + innov[j];
        }
    } else {
        for j in 0..d {
            next[j] = a * state[j] + innov[j];
        }
    }
}

/// Simulates one of the five stock models.
///
/// The recursion starts at the zero vector at time `1 − burn_in` and the last
/// n states (times 1..n) are retained. Innovations are addressed by absolute
/// time index, so enlarging `burn_in` leaves the retained window's innovation
/// stream unchanged.
pub fn simulate_model(spec: &ModelSpec) -> Result<TimeSeriesMatrix, ModelError> {
    spec.validate()?;
    if spec.model_id == ModelId::Regression {
        return Err(ModelError::NotSimulable {
            model_id: spec.model_id,
        });
    }
    let (n, d) = (spec.n, spec.d);
    let mut state = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut innov = vec![0.0; d];
    let mut data = Vec::with_capacity(n * d);
    let start = 1 - spec.burn_in as i64;
    for i in start..=(n as i64) {
        innovation(spec, i, false, &mut innov);
        step(spec, i, &state, &innov, &mut next);
        core::mem::swap(&mut state, &mut next);
        if i >= 1 {
            data.extend_from_slice(&state);
        }
    }
    TimeSeriesMatrix::new(n, d, data).map_err(|_| ModelError::NonFiniteOutput)
}

/// Simulates the regression error process ε_1..ε_n from ε_0 = 0.
pub fn simulate_error_process(n: usize, seed: u64) -> Result<Vec<f64>, ModelError> {
    if n < 2 {
        return Err(ModelError::SeriesTooShort { n });
    }
    let mut eps = Vec::with_capacity(n);
    let mut prev = 0.0;
    for i in 1..=n {
        let eta = Stream::new(seed, Purpose::ErrorInnovation, i as i64, 0).next_gaussian();
        prev = error_coefficient(i, n) * prev + eta;
        eps.push(prev);
    }
    Ok(eps)
}

/// A simulated regression problem: `y = Xβ + ε` holds exactly by construction
/// (`y` is assembled from the stored `x`, `beta_true`, and `eps` with one dot
/// product per row, so recomputing it in the same order reproduces the bits).
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    pub x: TimeSeriesMatrix,
    pub y: Vec<f64>,
    pub beta_true: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Generates predictors from `spec` and errors from a stream derived off
/// `spec.seed`; see [`generate_regression_with_error_seed`] for the variant
/// with an independently chosen error seed.
pub fn generate_regression(
    spec: &ModelSpec,
    beta: &[f64],
) -> Result<RegressionDataset, ModelError> {
    let error_seed = derive_seed(spec.seed, Purpose::ErrorSeed, 0);
    generate_regression_with_error_seed(spec, beta, error_seed)
}

/// As [`generate_regression`] but with the error-process seed supplied by the
/// caller: changing only `error_seed` leaves X unchanged entry-for-entry.
pub fn generate_regression_with_error_seed(
    spec: &ModelSpec,
    beta: &[f64],
    error_seed: u64,
) -> Result<RegressionDataset, ModelError> {
    if beta.len() != spec.d {
        return Err(ModelError::BetaDimensionMismatch {
            expected: spec.d,
            got: beta.len(),
        });
    }
    if !linalg::all_finite(beta) {
        return Err(ModelError::BetaNotFinite);
    }
    let x = simulate_model(spec)?;
    let eps = simulate_error_process(spec.n, error_seed)?;
    let mut y = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let row = x.row(i);
        let mut dot = 0.0;
        for j in 0..spec.d {
            dot += row[j] * beta[j];
        }
        y.push(dot + eps[i]);
    }
    Ok(RegressionDataset {
        x,
        y,
        beta_true: beta.to_vec(),
        eps,
    })
}
