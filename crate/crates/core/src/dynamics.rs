//! Noise-driven phase dynamics of a current-biased junction under a linear
//! bias sweep, and detection of the escape from the zero-voltage state.
//!
//! The phase obeys
//!
//! ```text
//! φ'' + β φ' + sin φ = v τ + i_s(τ) + i_n(τ),   ⟨i_n(τ) i_n(τ')⟩ = D δ(τ − τ'),
//! ```
//!
//! with `D = 2βθ` and `θ = k_B T / E_J0`. Time is measured in units of the
//! inverse plasma frequency and currents in units of the critical current.
//!
//! # Integrator
//!
//! The noise is additive and enters only the velocity equation, so each step
//! is a symmetric splitting: a Wiener kick over the first half step, an
//! RK4 step of the deterministic flow, and a Wiener kick over the second half
//! step. The two half-step increments are the "pair of draws" consumed per
//! step. The scheme converges with strong order 1 in `dt` and keeps the
//! noiseless pendulum accurate to `O(dt⁴)`, which matters for the
//! non-equilibrium regime where escape is decided by the preserved
//! oscillation energy of the initial state.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::kernel::{lane_step, split_step, ForcingTrack, LaneBlock, Phase, LANES, RESYNC_INTERVAL};
use crate::signal::SignalSpec;

/// Dimensionless junction and environment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    /// Dissipation coefficient `β = 1/(R C ω_J)`.
    pub beta: f64,
    /// Dimensionless temperature `θ = k_B T / E_J0`.
    pub theta: f64,
}

impl JunctionParams {
    pub fn new(beta: f64, theta: f64) -> Result<Self> {
        let p = JunctionParams { beta, theta };
        p.validate()?;
        Ok(p)
    }

    /// Builds the parameters from the noise intensity `D = 2βθ`.
    pub fn from_noise_intensity(beta: f64, noise_intensity: f64) -> Result<Self> {
        ensure(beta > 0.0 && beta.is_finite(), "beta", beta, "beta > 0")?;
        ensure(
            noise_intensity >= 0.0 && noise_intensity.is_finite(),
            "noise_intensity",
            noise_intensity,
            "noise_intensity >= 0",
        )?;
        Self::new(beta, noise_intensity / (2.0 * beta))
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.beta > 0.0 && self.beta.is_finite(), "beta", self.beta, "beta > 0")?;
        ensure(self.theta >= 0.0 && self.theta.is_finite(), "theta", self.theta, "theta >= 0")
    }

    /// `D = 2βθ`.
    #[inline]
    pub fn noise_intensity(&self) -> f64 {
        2.0 * self.beta * self.theta
    }
}

/// Linear bias sweep `i_b(τ) = v τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasProtocol {
    pub v: f64,
    /// Bias at which integration begins; the trial starts at `τ = i_start / v`.
    pub i_start: f64,
    /// Trials still trapped at this bias are censored.
    pub i_cap: f64,
    pub dt: f64,
}

impl BiasProtocol {
    pub const DEFAULT_I_CAP: f64 = 1.5;
    pub const DEFAULT_DT: f64 = 0.01;

    pub fn new(v: f64) -> Result<Self> {
        let p = BiasProtocol {
            v,
            i_start: 0.0,
            i_cap: Self::DEFAULT_I_CAP,
            dt: Self::DEFAULT_DT,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sweep with `v = κ β`.
    pub fn from_kappa(kappa: f64, beta: f64) -> Result<Self> {
        Self::new(kappa * beta)
    }

    pub fn kappa(&self, params: &JunctionParams) -> f64 {
        self.v / params.beta
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.v > 0.0 && self.v.is_finite(), "v", self.v, "v > 0")?;
        ensure(
            (0.0..1.0).contains(&self.i_start),
            "i_start",
            self.i_start,
            "0 <= i_start < 1",
        )?;
        ensure(self.i_cap > 1.0 && self.i_cap.is_finite(), "i_cap", self.i_cap, "i_cap > 1")?;
        ensure(self.dt > 0.0 && self.dt.is_finite(), "dt", self.dt, "dt > 0")
    }

    #[inline]
    pub fn start_tau(&self) -> f64 {
        self.i_start / self.v
    }

    /// Number of steps between `i_start` and `i_cap`.
    pub fn max_steps(&self) -> u64 {
        ((self.i_cap - self.i_start) / (self.v * self.dt)).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub phi0: f64,
    #[serde(default)]
    pub phi_dot0: f64,
}

impl InitialCondition {
    pub fn at_rest(phi0: f64) -> Self {
        InitialCondition { phi0, phi_dot0: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.phi0.is_finite(), "phi0", self.phi0, "phi0 finite")?;
        ensure(self.phi_dot0.is_finite(), "phi_dot0", self.phi_dot0, "phi_dot0 finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub tau: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl PhaseState {
    pub fn is_finite(&self) -> bool {
        self.tau.is_finite() && self.phi.is_finite() && self.phi_dot.is_finite()
    }
}

/// Outcome of one bias sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Switching current `v · tau_sw`. For a censored trial, the cap.
    pub i_sw: f64,
    pub tau_sw: f64,
    /// `false` when the trial reached `i_cap` still trapped.
    pub switched: bool,
    pub seed: u64,
    /// Integration steps taken.
    pub steps: u64,
}

/// Phase excursion that marks the finite-voltage (running) state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchCriterion {
    pub phase_excursion: f64,
}

impl Default for SwitchCriterion {
    fn default() -> Self {
        SwitchCriterion {
            phase_excursion: 4.0 * PI,
        }
    }
}

impl SwitchCriterion {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.phase_excursion > 0.0 && self.phase_excursion.is_finite(),
            "phase_excursion",
            self.phase_excursion,
            "phase_excursion > 0",
        )
    }
}

/// Tilted washboard `u(φ) = 1 − cos φ − i_b φ` in units of `E_J0`.
#[inline]
pub fn normalized_potential(phi: f64, i_b: f64) -> f64 {
    1.0 - phi.cos() - i_b * phi
}

/// Well depth `Δu = 2[√(1−i_b²) − i_b·arccos i_b]` in units of `E_J0`.
pub fn barrier_height(i_b: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&i_b), "i_b", i_b, "0 <= i_b <= 1")?;
    Ok(2.0 * ((1.0 - i_b * i_b).sqrt() - i_b * i_b.acos()))
}

/// Minimum of the well that contains `phi` at bias `i_b` (`|i_b| < 1`).
pub fn well_minimum(phi: f64, i_b: f64) -> f64 {
    let base = i_b.asin();
    base + 2.0 * PI * ((phi - base) / (2.0 * PI)).round()
}

/// Deterministic right-hand side `v τ + i_s(τ) − sin φ − β φ'`.
#[inline]
pub fn drift(state: &PhaseState, params: &JunctionParams, protocol: &BiasProtocol, signal: &SignalSpec) -> f64 {
    protocol.v * state.tau + signal.value(state.tau) - state.phi.sin() - params.beta * state.phi_dot
}

/// Advances the state by `dt` with explicit half-step Wiener increments
/// `(W(τ+dt/2) − W(τ), W(τ+dt) − W(τ+dt/2))` of a unit Wiener process.
///
/// Feeding the same underlying Brownian path at different `dt` (coarse
/// increments as sums of fine ones) gives pathwise-consistent refinements.
pub fn step_with_increments(
    state: &PhaseState,
    params: &JunctionParams,
    v: f64,
    dt: f64,
    signal: &SignalSpec,
    increments: [f64; 2],
) -> PhaseState {
    let sigma = params.noise_intensity().sqrt();
    let t = state.tau;
    let f = |tau: f64| v * tau + signal.value(tau);
    let next = split_step(
        Phase::new(state.phi, state.phi_dot),
        params.beta,
        dt,
        [f(t), f(t + 0.5 * dt), f(t + dt)],
        [sigma * increments[0], sigma * increments[1]],
    );
    PhaseState {
        tau: t + dt,
        phi: next.phi,
        phi_dot: next.phi_dot,
    }
}

/// Advances the state by `protocol.dt` using two independent standard
/// normal draws, one per half step. The total velocity kick has standard
/// deviation `√(D·dt)`.
pub fn step(
    state: &PhaseState,
    params: &JunctionParams,
    protocol: &BiasProtocol,
    signal: &SignalSpec,
    gaussian_draws: [f64; 2],
) -> PhaseState {
    let scale = (0.5 * protocol.dt).sqrt();
    step_with_increments(
        state,
        params,
        protocol.v,
        protocol.dt,
        signal,
        [gaussian_draws[0] * scale, gaussian_draws[1] * scale],
    )
}

/// True once the phase has run `criterion.phase_excursion` past the
/// minimum of the well it started in.
#[inline]
pub fn detect_switch(state: &PhaseState, start_minimum: f64, criterion: &SwitchCriterion) -> bool {
    state.phi - start_minimum >= criterion.phase_excursion
}

/// Per-trial seed derived from the ensemble seed and the trial index.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    // splitmix64 finalizer over a Weyl-sequence offset of the index
    let mut z = master_seed ^ trial_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The noise stream of a trial. ChaCha is counter-based, so distinct seeds
/// give independent streams no matter which thread consumes them.
pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Everything needed to integrate one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub params: JunctionParams,
    pub protocol: BiasProtocol,
    pub init: InitialCondition,
    pub signal: SignalSpec,
    #[serde(default)]
    pub criterion: SwitchCriterion,
}

impl TrialSetup {
    pub fn new(
        params: JunctionParams,
        protocol: BiasProtocol,
        init: InitialCondition,
        signal: SignalSpec,
    ) -> Self {
        TrialSetup {
            params,
            protocol,
            init,
            signal,
            criterion: SwitchCriterion::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.protocol.validate()?;
        self.init.validate()?;
        self.signal.validate()?;
        self.criterion.validate()
    }
}

/// Integrates one sweep with the noise stream of `seed`.
pub fn run_trial(setup: &TrialSetup, seed: u64) -> Result<SwitchEvent> {
    run_trial_observed(setup, seed, |_| {})
}

/// [`run_trial`] that hands every accepted state, starting with the initial
/// one, to `observe`.
pub fn run_trial_observed<F: FnMut(&PhaseState)>(
    setup: &TrialSetup,
    seed: u64,
    mut observe: F,
) -> Result<SwitchEvent> {
    let mut sweep = Sweep::new(setup, seed);
    observe(&sweep.state());
    loop {
        let outcome = sweep.advance();
        observe(&sweep.state());
        if let Some(outcome) = outcome {
            return outcome;
        }
    }
}

/// Runs one trial per seed, integrating up to [`LANES`] of them side by side
/// on the calling thread. Each result is bit-identical to `run_trial` on its
/// seed.
pub fn run_trials(setup: &TrialSetup, seeds: &[u64]) -> Vec<Result<SwitchEvent>> {
    let lane_step = lane_step();
    let mut results: Vec<Option<Result<SwitchEvent>>> = vec![None; seeds.len()];
    let mut lanes: [Option<(usize, Sweep)>; LANES] = std::array::from_fn(|_| None);
    let mut next = 0;
    let mut refill = |lane: &mut Option<(usize, Sweep)>| {
        *lane = (next < seeds.len()).then(|| (next, Sweep::new(setup, seeds[next])));
        next += 1;
    };
    lanes.iter_mut().for_each(&mut refill);
    let mut block = LaneBlock::default();
    let mut live = [false; LANES];
    loop {
        for (l, lane) in lanes.iter_mut().enumerate() {
            live[l] = false;
            while let Some((index, sweep)) = lane {
                match sweep.prepare() {
                    Ok((forcing, kicks)) => {
                        block.load(l, sweep.phase, forcing, kicks);
                        live[l] = true;
                        break;
                    }
                    Err(censored) => {
                        results[*index] = Some(Ok(censored));
                        refill(lane);
                    }
                }
            }
        }
        if !live.contains(&true) {
            break;
        }
        let stepped = lane_step(&block, setup.params.beta, setup.protocol.dt);
        for (l, lane) in lanes.iter_mut().enumerate() {
            if !live[l] {
                continue;
            }
            let Some((index, sweep)) = lane else { continue };
            if let Some(outcome) = sweep.complete(stepped[l]) {
                results[*index] = Some(outcome);
                refill(lane);
            }
        }
    }
    results.into_iter().map(|r| r.expect("every trial completes")).collect()
}

/// Standard normals drawn ahead in one batch; same sequence as drawing them
/// one by one.
const NORMAL_BATCH: usize = 64;

/// In-flight integration of one sweep.
struct Sweep {
    rng: ChaCha8Rng,
    normals: [f64; NORMAL_BATCH],
    /// Next unused entry of `normals`.
    drawn: usize,
    seed: u64,
    phase: Phase,
    track: ForcingTrack,
    f_start: f64,
    /// Steps taken so far.
    n: u64,
    beta: f64,
    v: f64,
    dt: f64,
    kick: f64,
    tau0: f64,
    threshold: f64,
    max_steps: u64,
}

impl Sweep {
    fn new(setup: &TrialSetup, seed: u64) -> Self {
        let TrialSetup {
            params,
            protocol,
            init,
            ref signal,
            criterion,
        } = *setup;
        let dt = protocol.dt;
        let tau0 = protocol.start_tau();
        let track = ForcingTrack::new(protocol.v, tau0, dt, signal);
        Sweep {
            rng: trial_rng(seed),
            normals: [0.0; NORMAL_BATCH],
            drawn: NORMAL_BATCH,
            seed,
            phase: Phase::new(init.phi0, init.phi_dot0),
            f_start: track.value(),
            track,
            n: 0,
            beta: params.beta,
            v: protocol.v,
            dt,
            kick: (params.noise_intensity() * 0.5 * dt).sqrt(),
            tau0,
            threshold: well_minimum(init.phi0, protocol.i_start) + criterion.phase_excursion,
            max_steps: protocol.max_steps(),
        }
    }

    fn state(&self) -> PhaseState {
        PhaseState {
            tau: self.tau0 + self.n as f64 * self.dt,
            phi: self.phase.phi,
            phi_dot: self.phase.phi_dot,
        }
    }

    /// Takes one step; returns the outcome once the trial is over.
    fn advance(&mut self) -> Option<Result<SwitchEvent>> {
        match self.prepare() {
            Ok((forcing, kicks)) => {
                let next = split_step(self.phase, self.beta, self.dt, forcing, kicks);
                self.complete(next)
            }
            Err(censored) => Some(Ok(censored)),
        }
    }

    /// Forcing samples and noise kicks of the next step, or the censored
    /// outcome once the bias cap is reached.
    #[inline(always)]
    fn prepare(&mut self) -> std::result::Result<([f64; 3], [f64; 2]), SwitchEvent> {
        let n = self.n;
        if n >= self.max_steps {
            let tau_sw = self.tau0 + n as f64 * self.dt;
            return Err(SwitchEvent {
                i_sw: self.v * tau_sw,
                tau_sw,
                switched: false,
                seed: self.seed,
                steps: n,
            });
        }
        if n.is_multiple_of(RESYNC_INTERVAL) && n > 0 {
            self.phase.resync();
            self.track.resync();
            self.f_start = self.track.value();
        }
        if self.drawn == NORMAL_BATCH {
            for z in self.normals.iter_mut() {
                *z = self.rng.sample(StandardNormal);
            }
            self.drawn = 0;
        }
        let z1 = self.normals[self.drawn];
        let z2 = self.normals[self.drawn + 1];
        self.drawn += 2;
        let f_mid = self.track.advance();
        let f_end = self.track.advance();
        Ok(([self.f_start, f_mid, f_end], [self.kick * z1, self.kick * z2]))
    }

    /// Accepts the stepped phase; returns the outcome if the trial ended.
    #[inline(always)]
    fn complete(&mut self, next: Phase) -> Option<Result<SwitchEvent>> {
        let n = self.n;
        let prev = self.phase;
        self.f_start = self.track.value();
        self.phase = next;
        self.n = n + 1;
        if !(next.phi.is_finite() && next.phi_dot.is_finite()) {
            return Some(Err(Error::NonFinite {
                seed: self.seed,
                tau: self.tau0 + self.n as f64 * self.dt,
                phi: next.phi,
                phi_dot: next.phi_dot,
            }));
        }
        if next.phi >= self.threshold {
            // linear interpolation of the threshold crossing inside the step
            let frac = ((self.threshold - prev.phi) / (next.phi - prev.phi)).clamp(0.0, 1.0);
            let tau_sw = self.tau0 + (n as f64 + frac) * self.dt;
            return Some(Ok(SwitchEvent {
                i_sw: self.v * tau_sw,
                tau_sw,
                switched: true,
                seed: self.seed,
                steps: n + 1,
            }));
        }
        None
    }
}
