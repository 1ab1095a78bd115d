//! Physical dependence measures by coupled simulation.
//!
//! The dependence of `x_{i*}` on the innovation `k` steps back is measured by
//! replacing that single innovation with an independent copy, replaying the
//! recursion forward, and taking the L_q norm of the displacement:
//!
//! ```text
//! θ_{k,j,q} = ‖ x_{i*,j} − x'_{i*,j} ‖_q,    x' = same path, e_{i*−k} redrawn
//! ```
//!
//! The supremum over time is approximated by the max over the probe indices
//! `{⌈n/4⌉, ⌈n/2⌉, ⌈3n/4⌉, n}`, which is adequate for coefficient functions
//! that vary smoothly or in a few regimes. Estimates are raw Monte Carlo
//! means of `|Δx|^q` (no monotone smoothing), reported with a delta-method
//! standard error taken at the probe that attains the max.
//!
//! `cumulative_theta` sums a contiguous run of lags per coordinate and then
//! maximizes over coordinates — a truncated stand-in for the infinite tail
//! sum, justified when the per-lag estimates decay geometrically.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::models::{innovation, step, ModelError, ModelSpec};
use crate::rng::{derive_seed, Purpose};

#[derive(Clone, Debug, PartialEq)]
pub enum DependenceError {
    TooFewReps { reps: usize },
    MomentOrderTooSmall { q: f64 },
    Model(ModelError),
    EmptyEstimates,
    LagGap { after: usize, next: usize },
    MixedDimensions,
    DimensionMismatch { expected: usize, got: usize },
    NotSymmetric { asymmetry: f64 },
    NotFinite,
}

impl fmt::Display for DependenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DependenceError::TooFewReps { reps } => {
                write!(f, "dependence estimation needs >= 100 reps, got {reps}")
            }
            DependenceError::MomentOrderTooSmall { q } => {
                write!(f, "moment order q must be >= 1, got {q}")
            }
            DependenceError::Model(e) => write!(f, "model error: {e}"),
            DependenceError::EmptyEstimates => write!(f, "estimate list is empty"),
            DependenceError::LagGap { after, next } => {
                write!(
                    f,
                    "lag range must be contiguous, found {next} after {after}"
                )
            }
            DependenceError::MixedDimensions => {
                write!(f, "estimates carry different coordinate counts")
            }
            DependenceError::DimensionMismatch { expected, got } => {
                write!(f, "matrix has {got} entries, expected {expected}")
            }
            DependenceError::NotSymmetric { asymmetry } => {
                write!(f, "matrix asymmetry {asymmetry} exceeds tolerance 1e-8")
            }
            DependenceError::NotFinite => write!(f, "input contains a non-finite entry"),
        }
    }
}

impl From<ModelError> for DependenceError {
    fn from(e: ModelError) -> Self {
        DependenceError::Model(e)
    }
}

/// Monte Carlo estimate of θ_{k,·,q} with per-coordinate standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceEstimate {
    pub k: usize,
    pub q: f64,
    /// θ̂_{k,j,q}, the per-coordinate max over probe indices.
    pub per_coord: Vec<f64>,
    /// δ̂_{k,q} = max_j θ̂_{k,j,q}.
    pub max_over_coords: f64,
    /// Delta-method standard error at each coordinate's attaining probe.
    pub mc_se: Vec<f64>,
    pub reps: usize,
}

/// Compensated (Neumaier) accumulator, keeping the moment sums
/// order-independent under any scheduling of the reps.
#[derive(Clone, Copy, Default)]
struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        self.comp += if self.sum.abs() >= v.abs() {
            (self.sum - t) + v
        } else {
            (v - t) + self.sum
        };
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn probe_indices(n: usize) -> Vec<usize> {
    let mut probes = vec![n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
    probes.sort_unstable();
    probes.dedup();
    probes
}

/// Estimates θ_{k,j,q} for all coordinates by coupled re-simulation.
///
/// Each rep simulates a fresh path from its own derived seed, then for every
/// probe index i* redraws the innovation at time i* − k (replacement streams
/// are keyed independently of the originals), replays the k steps up to i*,
/// and records |Δx_{i*,j}|^q. When i* − k predates the zero start of the
/// recursion the displacement is exactly zero.
pub fn estimate_theta(
    spec: &ModelSpec,
    k: usize,
    q: f64,
    reps: usize,
    seed: u64,
) -> Result<DependenceEstimate, DependenceError> {
    if reps < 100 {
        return Err(DependenceError::TooFewReps { reps });
    }
    if !(q >= 1.0) {
        return Err(DependenceError::MomentOrderTooSmall { q });
    }
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let probes = probe_indices(n);
    let start: i64 = 1 - spec.burn_in as i64;
    let total_steps = (n as i64 - start + 1) as usize;

    // moment accumulators indexed [probe][coord]
    let mut m1 = vec![Accum::default(); probes.len() * d];
    let mut m2 = vec![Accum::default(); probes.len() * d];

    let mut path = vec![0.0; total_steps * d]; // states for times start..=n
    let mut innov = vec![0.0; d];
    let mut state = vec![0.0; d];
    let mut next = vec![0.0; d];

    let idx_of = |time: i64| -> usize { (time - start) as usize };

    for rep in 0..reps {
        let mut rep_spec = spec.clone();
        rep_spec.seed = derive_seed(seed, Purpose::DependenceRep, rep as i64);

        // base path
        state.iter_mut().for_each(|s| *s = 0.0);
        for i in start..=(n as i64) {
            innovation(&rep_spec, i, false, &mut innov);
            step(&rep_spec, i, &state, &innov, &mut next);
            path[idx_of(i) * d..(idx_of(i) + 1) * d].copy_from_slice(&next);
            core::mem::swap(&mut state, &mut next);
        }

        for (p, &probe) in probes.iter().enumerate() {
            let t_r = probe as i64 - k as i64;
            if t_r < start {
                // replaced innovation predates the zero start: coupled path identical
                continue;
            }
            // replay from t_r with the replacement innovation
            if t_r == start {
                state.iter_mut().for_each(|s| *s = 0.0);
            } else {
                state.copy_from_slice(&path[idx_of(t_r - 1) * d..idx_of(t_r) * d]);
            }
            innovation(&rep_spec, t_r, true, &mut innov);
            step(&rep_spec, t_r, &state, &innov, &mut next);
            core::mem::swap(&mut state, &mut next);
            for i in (t_r + 1)..=(probe as i64) {
                innovation(&rep_spec, i, false, &mut innov);
                step(&rep_spec, i, &state, &innov, &mut next);
                core::mem::swap(&mut state, &mut next);
            }
            let base = &path[idx_of(probe as i64) * d..(idx_of(probe as i64) + 1) * d];
            for j in 0..d {
                let delta = libm::fabs(state[j] - base[j]);
                let pw = libm::pow(delta, q);
                m1[p * d + j].add(pw);
                m2[p * d + j].add(pw * pw);
            }
        }
    }

    let r = reps as f64;
    let mut per_coord = vec![0.0; d];
    let mut mc_se = vec![0.0; d];
    for j in 0..d {
        let mut best_mean = -1.0;
        let mut best_se = 0.0;
        for p in 0..probes.len() {
            let mean = m1[p * d + j].value() / r;
            if mean > best_mean {
                best_mean = mean;
                let second = m2[p * d + j].value() / r;
                let var_mean = ((second - mean * mean).max(0.0)) / r;
                // delta method for m^{1/q}: se = (1/q)·m^{1/q−1}·se(m)
                best_se = if mean > 0.0 {
                    libm::pow(mean, 1.0 / q - 1.0) / q * libm::sqrt(var_mean)
                } else {
                    0.0
                };
            }
        }
        per_coord[j] = libm::pow(best_mean, 1.0 / q);
        mc_se[j] = best_se;
    }
    let max_over_coords = per_coord.iter().copied().fold(0.0, f64::max);
    Ok(DependenceEstimate {
        k,
        q,
        per_coord,
        max_over_coords,
        mc_se,
        reps,
    })
}

/// Truncated cumulative dependence: per-coordinate sums of θ̂ over a
/// contiguous lag range, maximized over coordinates.
pub fn cumulative_theta(estimates: &[DependenceEstimate]) -> Result<f64, DependenceError> {
    let first = estimates.first().ok_or(DependenceError::EmptyEstimates)?;
    let d = first.per_coord.len();
    let mut sums = vec![0.0; d];
    let mut prev_k: Option<usize> = None;
    for est in estimates {
        if est.per_coord.len() != d {
            return Err(DependenceError::MixedDimensions);
        }
        if let Some(pk) = prev_k {
            if est.k != pk + 1 {
                return Err(DependenceError::LagGap {
                    after: pk,
                    next: est.k,
                });
            }
        }
        prev_k = Some(est.k);
        for j in 0..d {
            sums[j] += est.per_coord[j];
        }
    }
    Ok(sums.iter().copied().fold(0.0, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized by averaging when
/// within the 1e−8 tolerance); diagnostic for the lower covariance bound.
pub fn min_eigenvalue(m: &[f64], d: usize) -> Result<f64, DependenceError> {
    if m.len() != d * d {
        return Err(DependenceError::DimensionMismatch {
            expected: d * d,
            got: m.len(),
        });
    }
    if !linalg::all_finite(m) {
        return Err(DependenceError::NotFinite);
    }
    let asym = linalg::asymmetry(m, d);
    if !(asym <= 1e-8) {
        return Err(DependenceError::NotSymmetric { asymmetry: asym });
    }
    if d == 1 {
        return Ok(m[0]);
    }
    let mut sym = m.to_vec();
    linalg::symmetrize(&mut sym, d);
    Ok(linalg::min_eigenvalue(&sym, d))
}
