//! Hot loop of a single trial.
//!
//! Transcendental calls dominate a naive step (four `sin` per RK4 step plus
//! the drive signal at two half-step times). Here every stage angle is a
//! small offset from a base angle whose sine and cosine are known, so the
//! stage values come from angle addition with a short Taylor series. Base
//! values are refreshed exactly with `sin_cos` every [`RESYNC_INTERVAL`]
//! steps, which bounds the accumulated rounding to a few ulp.

use crate::signal::SignalSpec;

pub(crate) const RESYNC_INTERVAL: u64 = 64;

/// Offsets larger than this fall back to a libm call.
const SMALL_ANGLE: f64 = 0.1;

// Taylor coefficients.
const S3: f64 = -1.0 / 6.0;
const S5: f64 = 1.0 / 120.0;
const S7: f64 = -1.0 / 5040.0;
const S9: f64 = 1.0 / 362_880.0;
const C2: f64 = -0.5;
const C4: f64 = 1.0 / 24.0;
const C6: f64 = -1.0 / 720.0;
const C8: f64 = 1.0 / 40_320.0;
const C10: f64 = -1.0 / 3_628_800.0;

/// `(sin δ, cos δ)`; truncation error below 1e-18 for `|δ| ≤ 0.1`.
#[inline(always)]
fn small_sin_cos(d: f64) -> (f64, f64) {
    if d.abs() > SMALL_ANGLE {
        return d.sin_cos();
    }
    let d2 = d * d;
    let s = d * (1.0 + d2 * (S3 + d2 * (S5 + d2 * (S7 + d2 * S9))));
    let c = 1.0 + d2 * (C2 + d2 * (C4 + d2 * (C6 + d2 * (C8 + d2 * C10))));
    (s, c)
}

/// `sin(a + δ)` from `sin a`, `cos a`.
#[inline(always)]
fn sin_offset(sin_a: f64, cos_a: f64, d: f64) -> f64 {
    let (sd, cd) = small_sin_cos(d);
    sin_a * cd + cos_a * sd
}

/// Phase, velocity and the sine/cosine of the phase.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Phase {
    pub phi: f64,
    pub phi_dot: f64,
    pub sin: f64,
    pub cos: f64,
}

impl Phase {
    #[inline]
    pub fn new(phi: f64, phi_dot: f64) -> Self {
        let (sin, cos) = phi.sin_cos();
        Phase {
            phi,
            phi_dot,
            sin,
            cos,
        }
    }

    #[inline]
    pub fn resync(&mut self) {
        let (s, c) = self.phi.sin_cos();
        self.sin = s;
        self.cos = c;
    }
}

/// One step: half-step Wiener kick, RK4 over the deterministic flow, second
/// half-step kick. `forcing` holds `v τ + i_s(τ)` at the start, midpoint and
/// end of the step; `kicks` are the velocity increments of both halves.
#[inline(always)]
pub(crate) fn split_step(p: Phase, beta: f64, dt: f64, forcing: [f64; 3], kicks: [f64; 2]) -> Phase {
    let h = dt;
    let hh = 0.5 * dt;
    let [f0, fm, f1] = forcing;
    let (s, c) = (p.sin, p.cos);
    let w = p.phi_dot + kicks[0];

    let k1p = w;
    let k1v = f0 - s - beta * k1p;
    let k2p = w + hh * k1v;
    let k2v = fm - sin_offset(s, c, hh * k1p) - beta * k2p;
    let k3p = w + hh * k2v;
    let k3v = fm - sin_offset(s, c, hh * k2p) - beta * k3p;
    let k4p = w + h * k3v;
    let k4v = f1 - sin_offset(s, c, h * k3p) - beta * k4p;

    let sixth = h / 6.0;
    let dphi = sixth * (k1p + 2.0 * (k2p + k3p) + k4p);
    let w_next = w + sixth * (k1v + 2.0 * (k2v + k3v) + k4v) + kicks[1];
    let (sd, cd) = small_sin_cos(dphi);
    Phase {
        phi: p.phi + dphi,
        phi_dot: w_next,
        sin: s * cd + c * sd,
        cos: c * cd - s * sd,
    }
}

/// Trials integrated side by side by [`split_step_lanes`].
pub(crate) const LANES: usize = 8;

/// Step inputs for a block of trials, one array slot per lane.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LaneBlock {
    pub phi: [f64; LANES],
    pub phi_dot: [f64; LANES],
    pub sin: [f64; LANES],
    pub cos: [f64; LANES],
    pub forcing: [[f64; LANES]; 3],
    pub kicks: [[f64; LANES]; 2],
}

impl LaneBlock {
    #[inline(always)]
    pub fn load(&mut self, lane: usize, p: Phase, forcing: [f64; 3], kicks: [f64; 2]) {
        self.phi[lane] = p.phi;
        self.phi_dot[lane] = p.phi_dot;
        self.sin[lane] = p.sin;
        self.cos[lane] = p.cos;
        for (row, f) in self.forcing.iter_mut().zip(forcing) {
            row[lane] = f;
        }
        self.kicks[0][lane] = kicks[0];
        self.kicks[1][lane] = kicks[1];
    }

    fn phase(&self, lane: usize) -> Phase {
        Phase {
            phi: self.phi[lane],
            phi_dot: self.phi_dot[lane],
            sin: self.sin[lane],
            cos: self.cos[lane],
        }
    }
}

/// Taylor branch of [`small_sin_cos`] without the range check.
#[inline(always)]
fn poly_sin_cos(d: f64) -> (f64, f64) {
    let d2 = d * d;
    let s = d * (1.0 + d2 * (S3 + d2 * (S5 + d2 * (S7 + d2 * S9))));
    let c = 1.0 + d2 * (C2 + d2 * (C4 + d2 * (C6 + d2 * (C8 + d2 * C10))));
    (s, c)
}

/// [`split_step`] over every lane of `block`. The body is branch free so it
/// vectorizes; lanes with an offset beyond the Taylor range are redone with
/// the scalar step. Each lane is bit-identical to `split_step` because both
/// evaluate the same operations in the same order (Rust never fuses
/// multiply-add on its own).
#[inline(always)]
fn lanes_generic(block: &LaneBlock, beta: f64, dt: f64) -> [Phase; LANES] {
    let h = dt;
    let hh = 0.5 * dt;
    let sixth = h / 6.0;
    let mut phi = [0.0; LANES];
    let mut phi_dot = [0.0; LANES];
    let mut sin = [0.0; LANES];
    let mut cos = [0.0; LANES];
    let mut reach = [0.0f64; LANES];
    for l in 0..LANES {
        let (s, c) = (block.sin[l], block.cos[l]);
        let [f0, fm, f1] = [block.forcing[0][l], block.forcing[1][l], block.forcing[2][l]];
        let w = block.phi_dot[l] + block.kicks[0][l];

        let k1p = w;
        let k1v = f0 - s - beta * k1p;
        let k2p = w + hh * k1v;
        let d2 = hh * k1p;
        let (sd, cd) = poly_sin_cos(d2);
        let k2v = fm - (s * cd + c * sd) - beta * k2p;
        let k3p = w + hh * k2v;
        let d3 = hh * k2p;
        let (sd, cd) = poly_sin_cos(d3);
        let k3v = fm - (s * cd + c * sd) - beta * k3p;
        let k4p = w + h * k3v;
        let d4 = h * k3p;
        let (sd, cd) = poly_sin_cos(d4);
        let k4v = f1 - (s * cd + c * sd) - beta * k4p;

        let dphi = sixth * (k1p + 2.0 * (k2p + k3p) + k4p);
        phi_dot[l] = w + sixth * (k1v + 2.0 * (k2v + k3v) + k4v) + block.kicks[1][l];
        let (sd, cd) = poly_sin_cos(dphi);
        phi[l] = block.phi[l] + dphi;
        sin[l] = s * cd + c * sd;
        cos[l] = c * cd - s * sd;
        reach[l] = d2.abs().max(d3.abs()).max(d4.abs()).max(dphi.abs());
    }
    std::array::from_fn(|l| {
        // NaN reach also takes the scalar path
        if reach[l] <= SMALL_ANGLE {
            Phase {
                phi: phi[l],
                phi_dot: phi_dot[l],
                sin: sin[l],
                cos: cos[l],
            }
        } else {
            let forcing = [block.forcing[0][l], block.forcing[1][l], block.forcing[2][l]];
            split_step(block.phase(l), beta, dt, forcing, [block.kicks[0][l], block.kicks[1][l]])
        }
    })
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn lanes_avx512(block: &LaneBlock, beta: f64, dt: f64) -> [Phase; LANES] {
    lanes_generic(block, beta, dt)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn lanes_avx2(block: &LaneBlock, beta: f64, dt: f64) -> [Phase; LANES] {
    lanes_generic(block, beta, dt)
}

fn lanes_baseline(block: &LaneBlock, beta: f64, dt: f64) -> [Phase; LANES] {
    lanes_generic(block, beta, dt)
}

pub(crate) type LaneStep = fn(&LaneBlock, f64, f64) -> [Phase; LANES];

/// The widest lane step the running CPU supports.
pub(crate) fn lane_step() -> LaneStep {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime
            return |b, beta, dt| unsafe { lanes_avx512(b, beta, dt) };
        }
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime
            return |b, beta, dt| unsafe { lanes_avx2(b, beta, dt) };
        }
    }
    lanes_baseline
}

/// `(sin, cos)` of an angle advanced by a fixed increment per call.
#[derive(Debug, Clone, Copy)]
struct Rotor {
    sin: f64,
    cos: f64,
    step_sin: f64,
    step_cos: f64,
}

impl Rotor {
    fn new(angle: f64, increment: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        let (step_sin, step_cos) = increment.sin_cos();
        Rotor {
            sin,
            cos,
            step_sin,
            step_cos,
        }
    }

    fn set(&mut self, angle: f64) {
        let (s, c) = angle.sin_cos();
        self.sin = s;
        self.cos = c;
    }

    #[inline(always)]
    fn advance(&mut self) {
        let s = self.sin * self.step_cos + self.cos * self.step_sin;
        let c = self.cos * self.step_cos - self.sin * self.step_sin;
        self.sin = s;
        self.cos = c;
    }
}

#[derive(Debug, Clone, Copy)]
enum Track {
    None,
    Wave {
        amplitude: f64,
        omega: f64,
        carrier: Rotor,
    },
    Pulse {
        amplitude: f64,
        omega: f64,
        tau_d: f64,
        tau_ph: f64,
        /// Envelope at the current grid point.
        envelope: f64,
        /// Ratio envelope(next)/envelope(current).
        ratio: f64,
        /// Ratio of successive ratios, `exp(−δ²)` with `δ = (dt/2)/τ_ph`.
        ratio_step: f64,
        carrier: Rotor,
    },
}

/// The forcing `v τ + i_s(τ)` sampled on the half-step grid
/// `τ_k = τ₀ + k·dt/2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ForcingTrack {
    v: f64,
    tau0: f64,
    half_dt: f64,
    /// Current half-step index.
    k: u64,
    track: Track,
}

impl ForcingTrack {
    pub fn new(v: f64, tau0: f64, dt: f64, signal: &SignalSpec) -> Self {
        let half_dt = 0.5 * dt;
        let track = match *signal {
            SignalSpec::None => Track::None,
            SignalSpec::ContinuousWave { i_mw, omega_mw } => Track::Wave {
                amplitude: i_mw,
                omega: omega_mw,
                carrier: Rotor::new(omega_mw * tau0, omega_mw * half_dt),
            },
            SignalSpec::GaussianPulse {
                n_ph,
                i_ph,
                omega_ph,
                tau_ph,
                tau_d,
            } => {
                let delta = half_dt / tau_ph;
                let mut t = Track::Pulse {
                    amplitude: n_ph.sqrt() * i_ph,
                    omega: omega_ph,
                    tau_d,
                    tau_ph,
                    envelope: 0.0,
                    ratio: 0.0,
                    ratio_step: (-delta * delta).exp(),
                    carrier: Rotor::new(0.0, omega_ph * half_dt),
                };
                Self::sync_track(&mut t, tau0, half_dt);
                t
            }
        };
        ForcingTrack {
            v,
            tau0,
            half_dt,
            k: 0,
            track,
        }
    }

    #[inline(always)]
    fn tau(&self) -> f64 {
        self.tau0 + self.k as f64 * self.half_dt
    }

    fn sync_track(track: &mut Track, tau: f64, half_dt: f64) {
        match track {
            Track::None => {}
            Track::Wave { omega, carrier, .. } => carrier.set(*omega * tau),
            Track::Pulse {
                omega,
                tau_d,
                tau_ph,
                envelope,
                ratio,
                carrier,
                ..
            } => {
                let x = (tau - *tau_d) / *tau_ph;
                let delta = half_dt / *tau_ph;
                *envelope = (-0.5 * x * x).exp();
                *ratio = (-(x * delta + 0.5 * delta * delta)).exp();
                carrier.set(*omega * (tau - *tau_d));
            }
        }
    }

    /// Recomputes the signal exactly at the current grid point.
    pub fn resync(&mut self) {
        let tau = self.tau();
        Self::sync_track(&mut self.track, tau, self.half_dt);
    }

    /// Forcing at the current grid point.
    #[inline(always)]
    pub fn value(&self) -> f64 {
        let ramp = self.v * self.tau();
        match self.track {
            Track::None => ramp,
            Track::Wave {
                amplitude, carrier, ..
            } => ramp + amplitude * carrier.sin,
            Track::Pulse {
                amplitude,
                envelope,
                carrier,
                ..
            } => ramp + amplitude * envelope * carrier.cos,
        }
    }

    /// Moves to the next half-step grid point and returns the forcing there.
    #[inline(always)]
    pub fn advance(&mut self) -> f64 {
        self.k += 1;
        match &mut self.track {
            Track::None => {}
            Track::Wave { carrier, .. } => carrier.advance(),
            Track::Pulse {
                envelope,
                ratio,
                ratio_step,
                carrier,
                ..
            } => {
                *envelope *= *ratio;
                *ratio *= *ratio_step;
                carrier.advance();
            }
        }
        self.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_angle_matches_libm() {
        for &d in &[0.0, 1e-8, -3e-4, 0.01, 0.05, -0.0999, 0.1, 0.3, -2.0] {
            let (s, c) = small_sin_cos(d);
            assert!((s - d.sin()).abs() < 2e-17, "sin {d}");
            assert!((c - d.cos()).abs() < 2e-16, "cos {d}");
        }
    }

    #[test]
    fn tracked_phase_stays_close_to_exact() {
        let mut p = Phase::new(0.3, 0.0);
        for n in 0..RESYNC_INTERVAL * 4 {
            p = split_step(p, 0.01, 0.01, [0.5, 0.5, 0.5], [1e-4, -2e-4]);
            assert!((p.sin - p.phi.sin()).abs() < 1e-14, "step {n}");
            assert!((p.cos - p.phi.cos()).abs() < 1e-14, "step {n}");
        }
    }

    fn track_error(signal: SignalSpec, tau0: f64) -> f64 {
        let dt = 0.01;
        let v = 1e-3;
        let mut track = ForcingTrack::new(v, tau0, dt, &signal);
        let mut worst: f64 = 0.0;
        for k in 1..=2 * RESYNC_INTERVAL {
            let got = track.advance();
            let tau = tau0 + k as f64 * 0.5 * dt;
            worst = worst.max((got - v * tau - signal.value(tau)).abs());
        }
        worst
    }

    #[test]
    fn wave_track_follows_closed_form() {
        let cw = SignalSpec::ContinuousWave {
            i_mw: 0.003,
            omega_mw: 1.0,
        };
        assert!(track_error(cw, 0.0) < 1e-17, "{}", track_error(cw, 0.0));
        // at large τ the reference angle itself carries ulp(τ) rounding
        assert!(track_error(cw, 12345.678) < 0.003 * 1e-11, "{}", track_error(cw, 12345.678));
    }

    #[test]
    fn pulse_track_follows_closed_form() {
        let pulse = SignalSpec::GaussianPulse {
            n_ph: 9.0,
            i_ph: 0.005,
            omega_ph: 1.0,
            tau_ph: 1.0,
            tau_d: 1.0,
        };
        // the envelope recurrence accumulates O(k²) ulp between resyncs
        assert!(track_error(pulse, 0.0) < 0.015 * 1e-11, "{}", track_error(pulse, 0.0));
        let wide = SignalSpec::GaussianPulse {
            n_ph: 1.0,
            i_ph: 0.005,
            omega_ph: 1.0,
            tau_ph: 356.0,
            tau_d: 581.0,
        };
        assert!(track_error(wide, 100.0) < 0.005 * 1e-11, "{}", track_error(wide, 100.0));
        assert!(track_error(wide, 0.0) < 0.005 * 1e-11, "{}", track_error(wide, 0.0));
    }

    #[test]
    fn lane_step_is_bit_identical_to_scalar() {
        let mut block = LaneBlock::default();
        let mut expected = Vec::new();
        for l in 0..LANES {
            let x = l as f64;
            // the last two lanes run fast enough to leave the Taylor range
            let speed = if l >= 6 { 40.0 * x } else { 0.3 * x - 1.0 };
            let p = Phase::new(0.7 * x - 2.0, speed);
            let forcing = [0.1 * x, 0.1 * x + 1e-6, 0.1 * x + 2e-6];
            let kicks = [1e-5 * x, -3e-5];
            block.load(l, p, forcing, kicks);
            expected.push(split_step(p, 1e-3, 0.01, forcing, kicks));
        }
        let mut variants: Vec<LaneStep> = vec![lanes_baseline, lane_step()];
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            variants.push(|b, beta, dt| unsafe { lanes_avx2(b, beta, dt) });
        }
        for f in variants {
            let got = f(&block, 1e-3, 0.01);
            for l in 0..LANES {
                let (a, b) = (got[l], expected[l]);
                assert_eq!(
                    [a.phi, a.phi_dot, a.sin, a.cos].map(f64::to_bits),
                    [b.phi, b.phi_dot, b.sin, b.cos].map(f64::to_bits),
                    "lane {l}"
                );
            }
        }
    }
}
