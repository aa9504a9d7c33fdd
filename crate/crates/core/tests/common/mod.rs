//! Property checks shared by the integration tests and the acceptance runner.
//! Each returns the measured quantity; the callers own the thresholds.

#![allow(dead_code)]

use jjsim_core::dynamics::{
    normalized_potential, step_with_increments, BiasProtocol, InitialCondition, JunctionParams, PhaseState, TrialSetup,
};
use jjsim_core::ensemble::{fd_escape_rate, histogram, run_ensemble, scd_from_rate, EnsembleSpec, Executor};
use jjsim_core::metrics::auc;
use jjsim_core::signal::SignalSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// RMS endpoint error at steps `dt` and `dt/2` against a reference
/// integration at `dt/32`, every level driven by the same Brownian path.
/// Returns `(err(dt), err(dt/2))`.
pub fn strong_errors(paths: usize, seed: u64) -> (f64, f64) {
    let params = JunctionParams::new(0.1, 0.05).unwrap();
    let (v, dt, tau_end): (f64, f64, f64) = (0.05, 0.2, 10.0);
    let refine = 32usize;
    let fine = dt / refine as f64;
    let fine_steps = (tau_end / fine).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sq = [0.0f64; 2];
    for _ in 0..paths {
        // half-step increments of the finest grid
        let dw: Vec<f64> = (0..2 * fine_steps)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * (0.5 * fine).sqrt())
            .collect();
        let run = |m: usize| {
            let h = m as f64 * fine;
            let mut s = PhaseState {
                tau: 0.0,
                phi: 0.1,
                phi_dot: 0.0,
            };
            for chunk in dw.chunks(2 * m) {
                let first = chunk[..m].iter().sum();
                let second = chunk[m..].iter().sum();
                s = step_with_increments(&s, &params, v, h, &SignalSpec::None, [first, second]);
            }
            s.phi
        };
        let reference = run(1);
        sq[0] += (run(refine) - reference).powi(2);
        sq[1] += (run(refine / 2) - reference).powi(2);
    }
    let n = paths as f64;
    ((sq[0] / n).sqrt(), (sq[1] / n).sqrt())
}

/// Worst relative energy drift of the undamped, noiseless pendulum over
/// `τ = 100` at `dt = 0.01`.
pub fn energy_drift(phi0: f64) -> f64 {
    let params = JunctionParams { beta: 0.0, theta: 0.0 };
    let energy = |s: &PhaseState| normalized_potential(s.phi, 0.0) + 0.5 * s.phi_dot * s.phi_dot;
    let mut s = PhaseState {
        tau: 0.0,
        phi: phi0,
        phi_dot: 0.0,
    };
    let e0 = energy(&s);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        s = step_with_increments(&s, &params, 0.0, 0.01, &SignalSpec::None, [0.0, 0.0]);
        worst = worst.max((energy(&s) - e0).abs() / e0);
    }
    worst
}

/// Stationary phase variance at a held bias `i_b`, sampled along `paths`
/// trajectories after a burn-in. Returns `(measured, θ/√(1−i_b²))`.
pub fn equilibrium_variance(i_b: f64, theta: f64, paths: usize, seed: u64) -> (f64, f64) {
    let params = JunctionParams::new(0.5, theta).unwrap();
    // a vanishing sweep rate holds the bias
    let v = 1e-12;
    let dt: f64 = 0.01;
    let half = (0.5 * dt).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..paths {
        let mut s = PhaseState {
            tau: i_b / v,
            phi: i_b.asin(),
            phi_dot: 0.0,
        };
        for k in 0..20_000 {
            let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            s = step_with_increments(&s, &params, v, dt, &SignalSpec::None, [z[0] * half, z[1] * half]);
            // burn-in of 20 relaxation times, then one sample per time unit
            if k >= 4_000 && k % 100 == 0 {
                sum += s.phi;
                sum2 += s.phi * s.phi;
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    (sum2 / count as f64 - mean * mean, theta / (1.0 - i_b * i_b).sqrt())
}

/// Mann–Whitney area `P(test < reference)` by explicit enumeration of all
/// pairs, ties ½.
pub fn brute_force_auc(reference: &[f64], test: &[f64]) -> f64 {
    let mut score = 0.0;
    for &r in reference {
        for &t in test {
            if t < r {
                score += 1.0;
            } else if r == t {
                score += 0.5;
            }
        }
    }
    score / (reference.len() * test.len()) as f64
}

/// Largest gap between the library AUC and the pairwise count over
/// `cases` random 20+20 samples drawn on a coarse grid so ties occur.
pub fn auc_oracle_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let shift = rng.random_range(-0.5..0.5);
        let a: Vec<f64> = (0..20).map(|_| (rng.random::<f64>() * 16.0).floor() / 16.0).collect();
        let b: Vec<f64> = (0..20).map(|_| (rng.random::<f64>() * 16.0).floor() / 16.0 + shift).collect();
        let (raw, _) = auc(&a, &b).unwrap();
        worst = worst.max((raw - brute_force_auc(&a, &b)).abs());
    }
    worst
}

/// Samples switching currents from a rate `Γ(i)` by inverting the survival
/// function on a fine grid.
pub fn sample_from_rate(rate: impl Fn(f64) -> f64, v: f64, n: usize, seed: u64) -> Vec<f64> {
    let h = 1e-5;
    let mut grid = vec![(0.0, 0.0)];
    let (mut acc, mut i) = (0.0, 0.0);
    while acc < 50.0 {
        acc += 0.5 * (rate(i) + rate(i + h)) * h / v;
        i += h;
        grid.push((i, acc));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let target = -(1.0 - rng.random::<f64>()).ln();
            let k = grid.partition_point(|&(_, a)| a < target);
            grid[k.min(grid.len() - 1)].0
        })
        .collect()
}

/// Total-variation distance between a histogram and the density predicted
/// by the escape rate inverted from the same values.
pub fn fd_roundtrip_tv(values: &[f64], v: f64) -> f64 {
    let h = histogram(values, None).unwrap();
    let curve = fd_escape_rate(values, v, Some(h.densities.len())).unwrap();
    let predicted = scd_from_rate(&curve, v).unwrap();
    (0..h.densities.len())
        .map(|k| 0.5 * (predicted.get(k).copied().unwrap_or(0.0) - h.densities[k]).abs() * h.bin_width(k))
        .sum()
}

/// A Kramers-like rate, exponential in the bias.
pub fn exponential_rate(i: f64) -> f64 {
    1e-7 * (60.0 * (i - 0.8)).exp()
}

/// Strongly damped, fast sweep: a few thousand steps per trial.
pub fn cheap_setup(kappa: f64, theta: f64, phi0: f64) -> TrialSetup {
    let params = JunctionParams::new(0.05, theta).unwrap();
    TrialSetup::new(
        params,
        BiasProtocol::from_kappa(kappa, params.beta).unwrap(),
        InitialCondition::at_rest(phi0),
        SignalSpec::None,
    )
}

/// Serialized ensembles of the same spec run on 1 and on `workers` threads.
pub fn reruns(spec: &EnsembleSpec, workers: usize) -> (String, String) {
    let one = run_ensemble(spec, "rerun", &Executor::new(1).unwrap()).unwrap();
    let many = run_ensemble(spec, "rerun", &Executor::new(workers).unwrap()).unwrap();
    (serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap())
}
