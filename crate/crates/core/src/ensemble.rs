//! Seeded trial ensembles, their switching-current distributions, and the
//! escape-rate inversion used to check equilibrium-regime samples against
//! the survival-function form of the distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{run_trials, trial_seed, TrialSetup};
use crate::error::{ensure, Error, Result};

/// Trials handed to one worker at a time. Blocks are contiguous in trial
/// index so the reduction order is fixed.
const BLOCK: u64 = 32;

/// Thread pool that runs ensembles. Results never depend on its size.
pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    /// `workers == 0` selects the machine parallelism.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?;
        Ok(Executor { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// Everything that determines an ensemble's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub setup: TrialSetup,
    pub n_trials: u64,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(setup: TrialSetup, n_trials: u64, master_seed: u64) -> Self {
        EnsembleSpec {
            setup,
            n_trials,
            master_seed,
        }
    }

    /// Stable content hash of the ensemble definition.
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

/// Hex SHA-256 of the canonical JSON form of `value`, truncated to 16 bytes.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration types serialize");
    let hash = Sha256::digest(&json);
    hash[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// A labeled switching-current distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScdSample {
    pub label: String,
    /// Switching currents of the switched trials, in trial-index order.
    pub values: Vec<f64>,
    pub censored_count: u64,
    pub n_trials: u64,
    pub master_seed: u64,
    pub config_digest: String,
    /// Integration steps over all trials.
    pub total_steps: u64,
}

impl ScdSample {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Runs `spec.n_trials` sweeps, trial `k` with seed `trial_seed(master_seed, k)`.
pub fn run_ensemble(spec: &EnsembleSpec, label: impl Into<String>, exec: &Executor) -> Result<ScdSample> {
    spec.setup.validate()?;
    ensure(spec.n_trials >= 1, "n_trials", spec.n_trials as f64, "n_trials >= 1")?;
    let setup = spec.setup;
    let blocks = spec.n_trials.div_ceil(BLOCK);
    let outcomes: Vec<_> = exec.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let seeds: Vec<u64> = (b * BLOCK..((b + 1) * BLOCK).min(spec.n_trials))
                    .map(|k| trial_seed(spec.master_seed, k))
                    .collect();
                run_trials(&setup, &seeds)
            })
            .collect()
    });

    let mut values = Vec::with_capacity(spec.n_trials as usize);
    let mut censored_count = 0;
    let mut total_steps = 0;
    for outcome in outcomes.into_iter().flatten() {
        let event = outcome?;
        total_steps += event.steps;
        if event.switched {
            values.push(event.i_sw);
        } else {
            censored_count += 1;
        }
    }
    Ok(ScdSample {
        label: label.into(),
        values,
        censored_count,
        n_trials: spec.n_trials,
        master_seed: spec.master_seed,
        config_digest: spec.digest(),
        total_steps,
    })
}

/// Density-normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n: usize,
}

impl Histogram {
    pub fn bin_width(&self, k: usize) -> f64 {
        self.bin_edges[k + 1] - self.bin_edges[k]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `Σ density·width`.
    pub fn total_mass(&self) -> f64 {
        (0..self.densities.len()).map(|k| self.densities[k] * self.bin_width(k)).sum()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Freedman–Diaconis bin count `range / (2·IQR·n^{-1/3})`, at least 1.
pub fn freedman_diaconis_bins(values: &[f64]) -> usize {
    if values.len() < 2 {
        return 1;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 1;
    }
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(1, 10_000)
}

/// Equal-width bin edges over `[min, max]` and the count per bin.
fn binned(values: &[f64], bin_count: Option<usize>) -> Result<(Vec<f64>, Vec<u64>)> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let bins = bin_count.unwrap_or_else(|| freedman_diaconis_bins(values));
    ensure(bins >= 1, "bin_count", bins as f64, "bin_count >= 1")?;
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi <= lo {
        let pad = lo.abs().max(1.0) * 1e-6;
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &x in values {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok((edges, counts))
}

/// Histogram over `[min, max]` of the values; `bin_count = None` applies the
/// Freedman–Diaconis rule.
pub fn histogram(values: &[f64], bin_count: Option<usize>) -> Result<Histogram> {
    let (bin_edges, counts) = binned(values, bin_count)?;
    let n = values.len();
    let densities = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / (n as f64 * (bin_edges[k + 1] - bin_edges[k])))
        .collect();
    Ok(Histogram {
        bin_edges,
        densities,
        n,
    })
}

/// Escape rate sampled on a current grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub currents: Vec<f64>,
    pub rates: Vec<f64>,
}

/// Inverts a switching-current sample into an escape rate per bin,
/// `Γ_k = v·ln(S_k / S_{k+1}) / Δi` with `S` the empirical survival function
/// at the bin edges. The curve is sampled at bin centers and stops at the
/// first bin that leaves no survivors.
pub fn fd_escape_rate(values: &[f64], v: f64, bin_count: Option<usize>) -> Result<RateCurve> {
    ensure(v > 0.0, "v", v, "v > 0")?;
    let (edges, counts) = binned(values, bin_count)?;
    let mut survivors = values.len() as u64;
    let mut currents = Vec::new();
    let mut rates = Vec::new();
    for (k, &leaving) in counts.iter().enumerate() {
        let width = edges[k + 1] - edges[k];
        let after = survivors - leaving;
        if after == 0 {
            break;
        }
        currents.push(0.5 * (edges[k] + edges[k + 1]));
        rates.push(v * (survivors as f64 / after as f64).ln() / width);
        survivors = after;
    }
    Ok(RateCurve { currents, rates })
}

/// Switching-current density predicted by an escape rate,
/// `P(i) = (Γ(i)/v)·exp(−∫Γ/v di)`, with the integral accumulated by the
/// trapezoidal rule from the first grid point.
pub fn scd_from_rate(curve: &RateCurve, v: f64) -> Result<Vec<f64>> {
    ensure(v > 0.0, "v", v, "v > 0")?;
    if let Some(&bad) = curve.rates.iter().find(|r| r.is_nan() || **r < 0.0) {
        return Err(Error::InvalidParameter {
            field: "rate",
            value: bad,
            constraint: "rate >= 0",
        });
    }
    let mut integral = 0.0;
    let mut density = Vec::with_capacity(curve.rates.len());
    for k in 0..curve.rates.len() {
        if k > 0 {
            integral += 0.5 * (curve.rates[k] + curve.rates[k - 1]) * (curve.currents[k] - curve.currents[k - 1]) / v;
        }
        density.push(curve.rates[k] / v * (-integral).exp());
    }
    Ok(density)
}
