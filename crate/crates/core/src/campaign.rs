//! Parameter campaigns built on signal-on/signal-off ensemble pairs.
//!
//! Every comparison runs both arms with the same master seed, so trial `k`
//! of each arm sees the same noise path (common random numbers). A campaign
//! is a deterministic function of its inputs and the master seed.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{BiasProtocol, JunctionParams, TrialSetup};
use crate::ensemble::{run_ensemble, EnsembleSpec, Executor, ScdSample};
use crate::error::{ensure, Error, Result};
use crate::metrics::{compare, RocResult};
use crate::signal::SignalSpec;

/// Default bisection stopping width, relative to the midpoint.
pub const DEFAULT_BRACKET_TOLERANCE: f64 = 0.05;
/// Default maximum residual of the linear fit defining the linear range.
pub const DEFAULT_LINEARITY_TOLERANCE: f64 = 0.02;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Default κ grid: 0.1 to 10, 20 log-spaced points.
pub fn default_kappa_grid() -> Vec<f64> {
    log_grid(0.1, 10.0, 20)
}

/// Default φ₀ grid: 0 to 0.5 in steps of 0.05.
pub fn default_phi0_grid() -> Vec<f64> {
    linear_grid(0.0, 0.5, 11)
}

/// Default photon-number grid, dense at the low end where the response is
/// expected to be linear.
pub const DEFAULT_N_PH_GRID: [f64; 14] = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0];

/// Pulse arrival half way to the critical current, `τ_d = 1/(2v)`.
pub fn default_arrival(protocol: &BiasProtocol) -> f64 {
    0.5 / protocol.v
}

/// A signal-off and a signal-on ensemble and their ROC comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub reference: ScdSample,
    pub test: ScdSample,
    pub roc: RocResult,
}

impl Contrast {
    pub fn censored_count(&self) -> u64 {
        self.reference.censored_count + self.test.censored_count
    }
}

/// Runs `reference` and `test` with a shared master seed and compares them.
pub fn contrast(
    reference: &TrialSetup,
    test: &TrialSetup,
    n_trials: u64,
    master_seed: u64,
    threshold: f64,
    exec: &Executor,
) -> Result<Contrast> {
    let reference = run_ensemble(&EnsembleSpec::new(*reference, n_trials, master_seed), "reference", exec)?;
    let test = run_ensemble(&EnsembleSpec::new(*test, n_trials, master_seed), "test", exec)?;
    let roc = compare(&reference.values, &test.values, threshold)?;
    Ok(Contrast { reference, test, roc })
}

/// Signal-off `base` against the same setup driven by `signal`.
pub fn signal_contrast(
    base: &TrialSetup,
    signal: &SignalSpec,
    n_trials: u64,
    master_seed: u64,
    threshold: f64,
    exec: &Executor,
) -> Result<Contrast> {
    let off = TrialSetup {
        signal: SignalSpec::None,
        ..*base
    };
    let on = TrialSetup {
        signal: *signal,
        ..*base
    };
    contrast(&off, &on, n_trials, master_seed, threshold, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis_values: Vec<f64>,
    pub r_auc_values: Vec<f64>,
    pub best_index: usize,
    pub best_value: f64,
    /// Censored trials over all ensembles of the sweep.
    pub censored_count: u64,
}

impl SweepResult {
    pub fn new(axis_name: impl Into<String>, axis_values: Vec<f64>, r_auc_values: Vec<f64>, censored_count: u64) -> Result<Self> {
        ensure(
            !axis_values.is_empty() && axis_values.len() == r_auc_values.len(),
            "r_auc_values",
            r_auc_values.len() as f64,
            "one value per axis point",
        )?;
        // first maximum wins ties
        let mut best_index = 0;
        for (k, &r) in r_auc_values.iter().enumerate() {
            if r > r_auc_values[best_index] {
                best_index = k;
            }
        }
        Ok(SweepResult {
            axis_name: axis_name.into(),
            best_value: r_auc_values[best_index],
            axis_values,
            r_auc_values,
            best_index,
            censored_count,
        })
    }

    pub fn best_axis_value(&self) -> f64 {
        self.axis_values[self.best_index]
    }

    /// Two whitespace-separated columns with a header line.
    pub fn to_columns(&self) -> String {
        columns(&self.axis_name, &self.axis_values, &self.r_auc_values)
    }
}

fn columns(axis: &str, x: &[f64], y: &[f64]) -> String {
    let mut out = format!("# {axis} r_auc\n");
    for (a, r) in x.iter().zip(y) {
        let _ = writeln!(out, "{a} {r}");
    }
    out
}

fn at_point<T>(axis: &'static str, value: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::CampaignPoint {
        axis,
        value,
        source: Box::new(e),
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    axis: &'static str,
    grid: &[f64],
    base: &TrialSetup,
    signal: &SignalSpec,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
    apply: impl Fn(&mut TrialSetup, &mut SignalSpec, f64) -> Result<()>,
) -> Result<SweepResult> {
    ensure(!grid.is_empty(), "grid", 0.0, "grid nonempty")?;
    let mut r_auc = Vec::with_capacity(grid.len());
    let mut censored = 0;
    for &x in grid {
        let mut setup = *base;
        let mut s = *signal;
        let c = at_point(axis, x, apply(&mut setup, &mut s, x).and_then(|_| signal_contrast(&setup, &s, n_trials, master_seed, 0.7, exec)))?;
        r_auc.push(c.roc.r_auc);
        censored += c.censored_count();
    }
    SweepResult::new(axis, grid.to_vec(), r_auc, censored)
}

/// Signal detectability over κ at fixed β (`v = κβ` per point). A pulse with
/// `tau_d` equal to the base arrival `1/(2v)` keeps arriving at `1/(2v)`.
pub fn sweep_kappa(
    base: &TrialSetup,
    kappa_grid: &[f64],
    signal: &SignalSpec,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
) -> Result<SweepResult> {
    let base_arrival = default_arrival(&base.protocol);
    sweep("kappa", kappa_grid, base, signal, n_trials, master_seed, exec, |setup, s, kappa| {
        let protocol = BiasProtocol::from_kappa(kappa, setup.params.beta)?;
        setup.protocol = BiasProtocol {
            v: protocol.v,
            ..setup.protocol
        };
        if let SignalSpec::GaussianPulse { tau_d, .. } = s {
            if (*tau_d - base_arrival).abs() <= 1e-9 * base_arrival.abs() {
                *tau_d = default_arrival(&setup.protocol);
            }
        }
        setup.validate()
    })
}

/// Signal detectability over the initial phase at fixed κ.
pub fn sweep_phi0(
    base: &TrialSetup,
    phi0_grid: &[f64],
    signal: &SignalSpec,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
) -> Result<SweepResult> {
    sweep("phi0", phi0_grid, base, signal, n_trials, master_seed, exec, |setup, _, phi0| {
        setup.init.phi0 = phi0;
        setup.validate()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSearch {
    /// Midpoint of the final bracket.
    pub amplitude: f64,
    pub bracket: (f64, f64),
    /// Every evaluated `(amplitude, r_auc)` in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    pub target: f64,
    /// Censored trials over every ensemble of the search.
    #[serde(default)]
    pub censored_count: u64,
}

/// Bisects the signal strength (`i_mw`, or `n_ph` for a pulse) for the point
/// where r_auc crosses `target`. The signal-off ensemble is run once and
/// every evaluation reuses the same seed schedule.
#[allow(clippy::too_many_arguments)]
pub fn min_detectable_amplitude(
    base: &TrialSetup,
    signal: &SignalSpec,
    bracket: (f64, f64),
    target: f64,
    rel_tolerance: f64,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
) -> Result<AmplitudeSearch> {
    let (mut lo, mut hi) = bracket;
    ensure(lo >= 0.0 && lo.is_finite(), "bracket_lo", lo, "bracket_lo >= 0")?;
    ensure(hi > lo && hi.is_finite(), "bracket_hi", hi, "bracket_hi > bracket_lo")?;
    ensure(rel_tolerance > 0.0, "rel_tolerance", rel_tolerance, "rel_tolerance > 0")?;
    ensure(!signal.is_none(), "signal", 0.0, "a signal template is required")?;
    let off = TrialSetup {
        signal: SignalSpec::None,
        ..*base
    };
    let reference = run_ensemble(&EnsembleSpec::new(off, n_trials, master_seed), "reference", exec)?;
    let mut evaluations = Vec::new();
    let mut censored = reference.censored_count;
    let mut eval = |a: f64| -> Result<f64> {
        let on = TrialSetup {
            signal: signal.with_strength(a),
            ..*base
        };
        let test = at_point("amplitude", a, run_ensemble(&EnsembleSpec::new(on, n_trials, master_seed), "test", exec))?;
        censored += test.censored_count;
        let r = compare(&reference.values, &test.values, target.clamp(0.5, 1.0))?.r_auc;
        evaluations.push((a, r));
        Ok(r)
    };
    let auc_lo = eval(lo)?;
    let auc_hi = eval(hi)?;
    if !(auc_lo < target && auc_hi >= target) {
        return Err(Error::BracketFailure {
            lo,
            hi,
            target,
            auc_lo,
            auc_hi,
        });
    }
    while (hi - lo) >= rel_tolerance * 0.5 * (hi + lo) {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(AmplitudeSearch {
        amplitude: 0.5 * (lo + hi),
        bracket: (lo, hi),
        evaluations,
        target,
        censored_count: censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonResponse {
    pub n_ph_values: Vec<f64>,
    pub r_auc_values: Vec<f64>,
    pub linear_range_end: f64,
    pub n_ph_max: f64,
    pub censored_count: u64,
}

impl PhotonResponse {
    pub fn to_columns(&self) -> String {
        columns("n_ph", &self.n_ph_values, &self.r_auc_values)
    }
}

/// Largest `x` (with `x ≥ 1`) such that a least-squares line through the
/// points with `1 ≤ x_k ≤ x` has every residual below `tolerance`. Two or
/// fewer points always fit.
pub fn linear_range_end(x: &[f64], y: &[f64], tolerance: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, _)| **a >= 1.0).map(|(a, b)| (*a, *b)).collect();
    let mut best = None;
    for end in 0..pts.len() {
        let xe = pts[end].0;
        let window: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0 <= xe).collect();
        if max_linear_residual(&window) < tolerance {
            best = Some(best.map_or(xe, |b: f64| b.max(xe)));
        }
    }
    best
}

fn max_linear_residual(pts: &[(f64, f64)]) -> f64 {
    if pts.len() <= 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    pts.iter()
        .map(|p| (p.1 - (my + slope * (p.0 - mx))).abs())
        .fold(0.0, f64::max)
}

/// Detectability against photon number for a pulse template. The linear
/// range ends where a straight-line fit from `n_ph = 1` first leaves
/// `linearity_tolerance`; that end is reported as the maximal resolvable
/// photon number.
pub fn photon_response(
    base: &TrialSetup,
    pulse: &SignalSpec,
    n_ph_grid: &[f64],
    linearity_tolerance: f64,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
) -> Result<PhotonResponse> {
    ensure(
        matches!(pulse, SignalSpec::GaussianPulse { .. }),
        "signal",
        0.0,
        "photon response needs a gaussian_pulse template",
    )?;
    ensure(!n_ph_grid.is_empty(), "n_ph_grid", 0.0, "grid nonempty")?;
    let off = TrialSetup {
        signal: SignalSpec::None,
        ..*base
    };
    let reference = run_ensemble(&EnsembleSpec::new(off, n_trials, master_seed), "reference", exec)?;
    let mut censored = reference.censored_count;
    let mut r_auc_values = Vec::with_capacity(n_ph_grid.len());
    for &n in n_ph_grid {
        let on = TrialSetup {
            signal: pulse.with_strength(n),
            ..*base
        };
        let test = at_point("n_ph", n, on.validate().and_then(|_| run_ensemble(&EnsembleSpec::new(on, n_trials, master_seed), "test", exec)))?;
        censored += test.censored_count;
        r_auc_values.push(compare(&reference.values, &test.values, 0.7)?.r_auc);
    }
    let end = linear_range_end(n_ph_grid, &r_auc_values, linearity_tolerance).unwrap_or(0.0);
    Ok(PhotonResponse {
        n_ph_values: n_ph_grid.to_vec(),
        r_auc_values,
        linear_range_end: end,
        n_ph_max: end,
        censored_count: censored,
    })
}

/// Comparison of two no-signal ensembles that differ only in noise intensity.
pub fn thermal_robustness(
    base: &TrialSetup,
    d1: f64,
    d2: f64,
    n_trials: u64,
    master_seed: u64,
    exec: &Executor,
) -> Result<Contrast> {
    ensure(d1 >= 0.0, "d1", d1, "d1 >= 0")?;
    ensure(d2 >= 0.0, "d2", d2, "d2 >= 0")?;
    let with_noise = |d: f64| -> Result<TrialSetup> {
        Ok(TrialSetup {
            params: JunctionParams::from_noise_intensity(base.params.beta, d)?,
            signal: SignalSpec::None,
            ..*base
        })
    };
    contrast(&with_noise(d1)?, &with_noise(d2)?, n_trials, master_seed, 0.7, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InitialCondition;

    fn cheap_base() -> TrialSetup {
        // heavily damped with a fast sweep: a few thousand steps per trial
        TrialSetup::new(
            JunctionParams::from_noise_intensity(0.05, 1e-4).unwrap(),
            BiasProtocol::new(5e-3).unwrap(),
            InitialCondition::at_rest(0.1),
            SignalSpec::None,
        )
    }

    fn cw(i_mw: f64) -> SignalSpec {
        SignalSpec::ContinuousWave { i_mw, omega_mw: 1.0 }
    }

    #[test]
    fn grids() {
        let g = default_kappa_grid();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[19] - 10.0).abs() < 1e-12);
        let p = default_phi0_grid();
        assert_eq!(p.len(), 11);
        assert!((p[1] - 0.05).abs() < 1e-15 && (p[10] - 0.5).abs() < 1e-15);
        assert_eq!(log_grid(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn sweep_result_invariants() {
        let s = SweepResult::new("phi0", vec![0.1], vec![0.8], 0).unwrap();
        assert_eq!(s.best_index, 0);
        assert_eq!(s.best_value, 0.8);
        let s = SweepResult::new("k", vec![1.0, 2.0, 3.0], vec![0.6, 0.9, 0.9], 0).unwrap();
        assert_eq!(s.best_index, 1);
        assert!(SweepResult::new("k", vec![1.0, 2.0], vec![0.6], 0).is_err());
        assert!(SweepResult::new("k", vec![], vec![], 0).is_err());
        assert_eq!(s.to_columns().lines().count(), 4);
    }

    #[test]
    fn one_point_phi0_sweep() {
        let s = sweep_phi0(&cheap_base(), &[0.1], &cw(0.01), 40, 1, &Executor::new(1).unwrap()).unwrap();
        assert_eq!(s.axis_values, vec![0.1]);
        assert_eq!(s.r_auc_values.len(), 1);
        assert_eq!(s.best_value, s.r_auc_values[0]);
    }

    #[test]
    fn no_signal_is_indistinguishable() {
        // identical seeds and setups give identical ensembles
        let base = cheap_base();
        let s = sweep_kappa(&base, &[0.1, 0.2], &SignalSpec::None, 50, 3, &Executor::new(1).unwrap()).unwrap();
        assert!(s.r_auc_values.iter().all(|&r| r == 0.5));
        let t = thermal_robustness(&base, 1e-4, 1e-4, 50, 3, &Executor::new(1).unwrap()).unwrap();
        assert_eq!(t.roc.r_auc, 0.5);
    }

    #[test]
    fn failing_point_names_its_coordinate() {
        match sweep_kappa(&cheap_base(), &[0.1, -1.0], &cw(0.01), 10, 1, &Executor::new(1).unwrap()) {
            Err(Error::CampaignPoint { axis, value, .. }) => {
                assert_eq!(axis, "kappa");
                assert_eq!(value, -1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kappa_sweep_moves_pulse_arrival() {
        let base = cheap_base();
        let pulse = SignalSpec::GaussianPulse {
            n_ph: 4.0,
            i_ph: 0.01,
            omega_ph: 1.0,
            tau_ph: 1.0,
            tau_d: default_arrival(&base.protocol),
        };
        let a = sweep_kappa(&base, &[0.2], &pulse, 30, 5, &Executor::new(1).unwrap()).unwrap();
        let mut moved = base;
        moved.protocol.v = 0.2 * base.params.beta;
        let expect = signal_contrast(
            &moved,
            &SignalSpec::GaussianPulse {
                n_ph: 4.0,
                i_ph: 0.01,
                omega_ph: 1.0,
                tau_ph: 1.0,
                tau_d: default_arrival(&moved.protocol),
            },
            30,
            5,
            0.7,
            &Executor::new(1).unwrap(),
        )
        .unwrap();
        assert_eq!(a.r_auc_values[0], expect.roc.r_auc);
    }

    #[test]
    fn bisection_brackets_the_threshold() {
        let exec = Executor::new(1).unwrap();
        let base = cheap_base();
        let found = min_detectable_amplitude(&base, &cw(1.0), (0.0, 0.4), 0.7, 0.05, 200, 11, &exec).unwrap();
        let (lo, hi) = found.bracket;
        assert!(hi - lo < 0.05 * found.amplitude);
        // re-evaluating the final bracket with the same seeds reproduces
        // the recorded values, which straddle the target
        let r = |a: f64| signal_contrast(&base, &cw(a), 200, 11, 0.7, &exec).unwrap().roc.r_auc;
        assert!(r(lo) < 0.7 && r(hi) >= 0.7);
        for &(a, auc) in &found.evaluations {
            assert_eq!(r(a), auc);
        }
    }

    #[test]
    fn bracket_must_straddle() {
        let exec = Executor::new(1).unwrap();
        match min_detectable_amplitude(&cheap_base(), &cw(1.0), (0.4, 0.8), 0.7, 0.05, 100, 11, &exec) {
            Err(Error::BracketFailure { auc_lo, auc_hi, .. }) => assert!(auc_lo >= 0.7 && auc_hi >= 0.7),
            other => panic!("{other:?}"),
        }
        assert!(min_detectable_amplitude(&cheap_base(), &cw(1.0), (0.1, 0.05), 0.7, 0.05, 10, 1, &exec).is_err());
    }

    #[test]
    fn linear_range_detection() {
        let x = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let y = [0.5, 0.6, 0.65, 0.75, 0.95, 1.0, 1.0];
        // slope 0.05 up to 4, then saturation bends the line
        let end = linear_range_end(&x, &[0.5, 0.6, 0.65, 0.75, 0.95, 0.99, 1.0], 0.02).unwrap();
        assert_eq!(end, 8.0);
        assert_eq!(linear_range_end(&x, &y, 0.02), Some(8.0));
        let straight: Vec<f64> = x.iter().map(|a| 0.5 + 0.01 * a).collect();
        assert_eq!(linear_range_end(&x, &straight, 0.02), Some(32.0));
        assert_eq!(linear_range_end(&[0.0], &[0.5], 0.02), None);
    }

    #[test]
    fn photon_response_at_zero_photons() {
        let base = cheap_base();
        let pulse = SignalSpec::GaussianPulse {
            n_ph: 1.0,
            i_ph: 0.02,
            omega_ph: 1.0,
            tau_ph: 5.0,
            tau_d: default_arrival(&base.protocol),
        };
        let r = photon_response(&base, &pulse, &[0.0, 1.0, 50.0], 0.02, 100, 2, &Executor::new(1).unwrap()).unwrap();
        assert_eq!(r.r_auc_values[0], 0.5);
        assert!(r.r_auc_values[2] > r.r_auc_values[1]);
        assert_eq!(r.n_ph_max, r.linear_range_end);
        assert!(photon_response(&base, &cw(0.1), &[1.0], 0.02, 10, 2, &Executor::new(1).unwrap()).is_err());
    }
}
