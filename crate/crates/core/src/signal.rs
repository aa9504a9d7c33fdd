//! Microwave drive signals injected into the junction and the conversions
//! between their dimensionless amplitudes and laboratory units.
//!
//! All signal amplitudes are in units of the critical current `I_c`, all
//! times in units of the inverse plasma frequency `1/ω_J`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Elementary charge, C (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Beyond this many e-folds the Gaussian envelope underflows to exactly zero,
/// so the pulse can be skipped without changing a single bit of the result.
const ENVELOPE_CUTOFF: f64 = 750.0;

/// The signal `i_s(τ)` added to the bias current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    #[default]
    None,
    /// `i_mw · sin(omega_mw · τ)`.
    ContinuousWave { i_mw: f64, omega_mw: f64 },
    /// `√n_ph · i_ph · exp(−(τ−τ_d)²/(2τ_ph²)) · cos(omega_ph (τ−τ_d))`.
    ///
    /// `n_ph` is real-valued so that searches can bisect on it.
    GaussianPulse {
        n_ph: f64,
        i_ph: f64,
        omega_ph: f64,
        tau_ph: f64,
        tau_d: f64,
    },
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignalSpec::None => Ok(()),
            SignalSpec::ContinuousWave { i_mw, omega_mw } => {
                ensure(i_mw >= 0.0 && i_mw.is_finite(), "i_mw", i_mw, "i_mw >= 0")?;
                ensure(omega_mw > 0.0 && omega_mw.is_finite(), "omega_mw", omega_mw, "omega_mw > 0")
            }
            SignalSpec::GaussianPulse {
                n_ph,
                i_ph,
                omega_ph,
                tau_ph,
                tau_d,
            } => {
                ensure(n_ph >= 0.0 && n_ph.is_finite(), "n_ph", n_ph, "n_ph >= 0")?;
                ensure(i_ph >= 0.0 && i_ph.is_finite(), "i_ph", i_ph, "i_ph >= 0")?;
                ensure(omega_ph > 0.0 && omega_ph.is_finite(), "omega_ph", omega_ph, "omega_ph > 0")?;
                ensure(tau_ph > 0.0 && tau_ph.is_finite(), "tau_ph", tau_ph, "tau_ph > 0")?;
                ensure(tau_d.is_finite(), "tau_d", tau_d, "tau_d finite")
            }
        }
    }

    /// Evaluates `i_s(τ)`.
    #[inline]
    pub fn value(&self, tau: f64) -> f64 {
        match *self {
            SignalSpec::None => 0.0,
            SignalSpec::ContinuousWave { i_mw, omega_mw } => i_mw * (omega_mw * tau).sin(),
            SignalSpec::GaussianPulse {
                n_ph,
                i_ph,
                omega_ph,
                tau_ph,
                tau_d,
            } => {
                let x = (tau - tau_d) / tau_ph;
                let exponent = 0.5 * x * x;
                if exponent > ENVELOPE_CUTOFF {
                    return 0.0;
                }
                n_ph.sqrt() * i_ph * (-exponent).exp() * (omega_ph * (tau - tau_d)).cos()
            }
        }
    }

    /// Same signal with its strength scaled to `amplitude`: `i_mw` for a
    /// continuous wave, `n_ph` for a pulse. `None` is returned unchanged.
    pub fn with_strength(&self, amplitude: f64) -> SignalSpec {
        match *self {
            SignalSpec::None => SignalSpec::None,
            SignalSpec::ContinuousWave { omega_mw, .. } => SignalSpec::ContinuousWave {
                i_mw: amplitude,
                omega_mw,
            },
            SignalSpec::GaussianPulse {
                i_ph,
                omega_ph,
                tau_ph,
                tau_d,
                ..
            } => SignalSpec::GaussianPulse {
                n_ph: amplitude,
                i_ph,
                omega_ph,
                tau_ph,
                tau_d,
            },
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, SignalSpec::None)
    }
}

/// Free function form of [`SignalSpec::value`].
#[inline]
pub fn signal_value(spec: &SignalSpec, tau: f64) -> f64 {
    spec.value(tau)
}

/// Laboratory parameters of a junction and its microwave feed line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalDevice {
    /// Critical current, A.
    pub i_c: f64,
    /// Junction capacitance, F.
    pub capacitance: f64,
    /// Source impedance of the microwave line, Ω.
    pub r_mw: f64,
    /// Coupling efficiency in (0, 1].
    pub chi: f64,
}

impl PhysicalDevice {
    pub fn new(i_c: f64, capacitance: f64, r_mw: f64, chi: f64) -> Result<Self> {
        let device = PhysicalDevice {
            i_c,
            capacitance,
            r_mw,
            chi,
        };
        device.validate()?;
        Ok(device)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.i_c > 0.0 && self.i_c.is_finite(), "i_c", self.i_c, "i_c > 0")?;
        ensure(
            self.capacitance > 0.0 && self.capacitance.is_finite(),
            "capacitance",
            self.capacitance,
            "capacitance > 0",
        )?;
        ensure(self.r_mw > 0.0 && self.r_mw.is_finite(), "r_mw", self.r_mw, "r_mw > 0")?;
        ensure(self.chi > 0.0 && self.chi <= 1.0, "chi", self.chi, "0 < chi <= 1")
    }

    /// Plasma frequency `√(2e·I_c/(ħ·C))`, rad/s.
    pub fn omega_j(&self) -> f64 {
        (2.0 * ELEMENTARY_CHARGE * self.i_c / (HBAR * self.capacitance)).sqrt()
    }

    /// Josephson energy `ħ·I_c/(2e)`, J.
    pub fn e_j0(&self) -> f64 {
        HBAR * self.i_c / (2.0 * ELEMENTARY_CHARGE)
    }

    /// Capacitance that places the plasma frequency at `omega_j` for the
    /// given critical current.
    pub fn capacitance_for_plasma_frequency(i_c: f64, omega_j: f64) -> f64 {
        2.0 * ELEMENTARY_CHARGE * i_c / (HBAR * omega_j * omega_j)
    }
}

/// Single-photon pulse amplitude `√(ħ·ω_ph·ω_J²/(R·I_c²·τ_ph))` in units of
/// `I_c`, with `omega_ph` and `tau_ph` taken in normalized units and `R` the
/// feed-line impedance `r_mw`.
pub fn pulse_amplitude(device: &PhysicalDevice, omega_ph: f64, tau_ph: f64) -> Result<f64> {
    device.validate()?;
    ensure(omega_ph > 0.0 && omega_ph.is_finite(), "omega_ph", omega_ph, "omega_ph > 0")?;
    ensure(tau_ph > 0.0 && tau_ph.is_finite(), "tau_ph", tau_ph, "tau_ph > 0")?;
    let omega_j = device.omega_j();
    Ok((HBAR * omega_ph * omega_j * omega_j / (device.r_mw * device.i_c * device.i_c * tau_ph)).sqrt())
}

/// Minimum detectable power `i_mw²·I_c²·R_MW/(2χ)`, W.
pub fn min_detectable_power(i_mw: f64, device: &PhysicalDevice) -> f64 {
    i_mw * i_mw * device.i_c * device.i_c * device.r_mw / (2.0 * device.chi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(n_ph: f64) -> SignalSpec {
        SignalSpec::GaussianPulse {
            n_ph,
            i_ph: 0.005,
            omega_ph: 1.0,
            tau_ph: 1.0,
            tau_d: 100.0,
        }
    }

    #[test]
    fn none_is_zero_everywhere() {
        for tau in [-1e6, 0.0, 3.7, 1e9] {
            assert_eq!(SignalSpec::None.value(tau), 0.0);
        }
    }

    #[test]
    fn cw_vanishes_at_origin() {
        let cw = SignalSpec::ContinuousWave {
            i_mw: 0.003,
            omega_mw: 1.0,
        };
        assert_eq!(cw.value(0.0), 0.0);
        assert!((cw.value(std::f64::consts::FRAC_PI_2) - 0.003).abs() < 1e-15);
    }

    #[test]
    fn pulse_peak_and_tail() {
        let p = pulse(4.0);
        assert!((p.value(100.0) - 0.01).abs() < 1e-15);
        // five widths out: envelope e^{-12.5}, carrier cos(5)
        let expected = 0.01 * (-12.5f64).exp() * 5f64.cos();
        assert!((p.value(105.0) - expected).abs() < 1e-18);
        assert!(((-12.5f64).exp() - 3.7e-6).abs() < 0.05e-6);
    }

    #[test]
    fn pulse_envelope_is_symmetric() {
        let p = SignalSpec::GaussianPulse {
            n_ph: 2.0,
            i_ph: 0.01,
            omega_ph: 0.7,
            tau_ph: 3.0,
            tau_d: 50.0,
        };
        for dx in [0.1, 1.0, 2.5, 7.0] {
            assert!((p.value(50.0 + dx) - p.value(50.0 - dx)).abs() < 1e-17);
        }
    }

    #[test]
    fn far_tail_cutoff_is_exact() {
        let p = pulse(1.0);
        // well past underflow the closed form already gives exactly zero
        let tau = 100.0 + 40.0;
        let x: f64 = 40.0;
        assert_eq!((-0.5 * x * x).exp() * 0.005, 0.0);
        assert_eq!(p.value(tau), 0.0);
    }

    #[test]
    fn squared_envelope_integral_scales_with_photon_number() {
        // ∫ (√n·i·e^{-x²/2})² dτ = n·i²·τ_ph·√π ; trapezoid on a wide grid
        let integral = |n: f64| {
            let tau_ph = 2.0;
            let h = 1e-3;
            let mut acc = 0.0;
            let steps = (40.0 * tau_ph / h) as usize;
            for k in 0..=steps {
                let tau = -20.0 * tau_ph + k as f64 * h;
                let x = tau / tau_ph;
                let env = n.sqrt() * 0.005 * (-0.5 * x * x).exp();
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                acc += w * env * env;
            }
            acc * h
        };
        let one = integral(1.0);
        let exact = 0.005f64.powi(2) * 2.0 * std::f64::consts::PI.sqrt();
        assert!((one - exact).abs() / exact < 1e-6);
        for n in [2.0, 7.0, 15.0] {
            assert!((integral(n) / one - n).abs() / n < 1e-6);
        }
    }

    #[test]
    fn with_strength_replaces_the_right_field() {
        let cw = SignalSpec::ContinuousWave {
            i_mw: 0.1,
            omega_mw: 2.0,
        };
        assert_eq!(
            cw.with_strength(0.3),
            SignalSpec::ContinuousWave {
                i_mw: 0.3,
                omega_mw: 2.0
            }
        );
        assert_eq!(pulse(1.0).with_strength(9.0), pulse(9.0));
    }

    #[test]
    fn validation_rejects_bad_pulses() {
        let bad = SignalSpec::GaussianPulse {
            n_ph: 1.0,
            i_ph: 0.005,
            omega_ph: 1.0,
            tau_ph: 0.0,
            tau_d: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(SignalSpec::ContinuousWave {
            i_mw: -1.0,
            omega_mw: 1.0
        }
        .validate()
        .is_err());
    }

    /// Device whose plasma frequency maps τ_ph = 356 onto 5 ns.
    fn working_point_device() -> PhysicalDevice {
        let i_c = 0.975e-6;
        let omega_j = 356.0 / 5e-9;
        PhysicalDevice::new(
            i_c,
            PhysicalDevice::capacitance_for_plasma_frequency(i_c, omega_j),
            50.0,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn derived_quantities_are_consistent() {
        let d = working_point_device();
        assert!((d.omega_j() - 356.0 / 5e-9).abs() / d.omega_j() < 1e-12);
        assert!((d.e_j0() - HBAR * d.i_c / (2.0 * ELEMENTARY_CHARGE)).abs() < 1e-40);
    }

    #[test]
    fn single_photon_amplitude_matches_working_point() {
        // 5.7 nA against a 0.975 µA critical current
        let d = working_point_device();
        let i_ph = pulse_amplitude(&d, 1.0, 356.0).unwrap();
        let reference = 5.7e-9 / 0.975e-6;
        assert!((i_ph - reference).abs() / reference < 0.05, "i_ph = {i_ph}");
        assert!((i_ph - 0.005).abs() < 0.001);
    }

    #[test]
    fn pulse_amplitude_scaling() {
        let d = working_point_device();
        let base = pulse_amplitude(&d, 1.0, 100.0).unwrap();
        assert!((pulse_amplitude(&d, 1.0, 400.0).unwrap() - base / 2.0).abs() < 1e-15);
        assert!((pulse_amplitude(&d, 2.0, 100.0).unwrap() - base * 2f64.sqrt()).abs() < 1e-15);
        assert!(pulse_amplitude(&d, 0.0, 100.0).is_err());
        assert!(pulse_amplitude(&d, 1.0, -1.0).is_err());
    }

    #[test]
    fn min_power_closed_form() {
        let d = PhysicalDevice::new(1.0, 1e-12, 100.0, 0.5).unwrap();
        let p = min_detectable_power(2.91e-4, &d);
        assert!((p - 8.4681e-6).abs() / 8.4681e-6 < 1e-9);
        assert_eq!(min_detectable_power(0.0, &d), 0.0);
        assert!((min_detectable_power(5.82e-4, &d) / p - 4.0).abs() < 1e-12);
        let scaled = PhysicalDevice { i_c: 1e-9, ..d };
        assert!((min_detectable_power(2.91e-4, &scaled) - 8.4681e-6 * 1e-18).abs() < 1e-30);
    }

    #[test]
    fn device_validation() {
        assert!(PhysicalDevice::new(1e-6, 1e-12, 50.0, 1.5).is_err());
        assert!(PhysicalDevice::new(-1e-6, 1e-12, 50.0, 0.5).is_err());
    }
}
