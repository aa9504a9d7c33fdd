//! Experiment configuration files.
//!
//! A config is flat sectioned `key = value` text (TOML). Loading parses,
//! fills every default explicitly and validates, so the echo written into a
//! result bundle is itself a complete, loadable config.

use std::path::{Path, PathBuf};

use jjsim_core::campaign::{
    default_kappa_grid, default_phi0_grid, DEFAULT_BRACKET_TOLERANCE, DEFAULT_LINEARITY_TOLERANCE, DEFAULT_N_PH_GRID,
};
use jjsim_core::dynamics::{BiasProtocol, InitialCondition, JunctionParams, SwitchCriterion, TrialSetup};
use jjsim_core::ensemble::digest_of;
use jjsim_core::metrics::DEFAULT_DETECTION_THRESHOLD;
use jjsim_core::signal::SignalSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Above this many trials raw samples are dropped from bundles by default.
pub const KEEP_SAMPLES_LIMIT: u64 = 100_000;

/// Trial count selected by `--full`.
pub const FULL_TRIALS: u64 = 10_000;


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CampaignKind {
    Scd,
    Roc,
    SweepKappa,
    SweepPhi0,
    MinAmplitude,
    PhotonResponse,
    ThermalRobustness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Junction {
    pub beta: f64,
    /// `D = 2βθ`; give this or `theta`.
    pub noise_intensity: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bias {
    /// Give `kappa` (`v = κβ`) or `v`.
    pub kappa: Option<f64>,
    pub v: Option<f64>,
    pub i_start: Option<f64>,
    pub i_cap: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub phi0: Option<f64>,
    pub phi_dot0: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    #[default]
    None,
    ContinuousWave,
    GaussianPulse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signal {
    #[serde(default)]
    pub kind: SignalKind,
    pub i_mw: Option<f64>,
    pub omega_mw: Option<f64>,
    pub n_ph: Option<f64>,
    pub i_ph: Option<f64>,
    pub omega_ph: Option<f64>,
    pub tau_ph: Option<f64>,
    /// Defaults to `1/(2v)`.
    pub tau_d: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Switch {
    pub phase_excursion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub n_trials: u64,
    /// Mandatory; seeds are never generated on the user's behalf.
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    #[serde(rename = "type")]
    pub kind: CampaignKind,
    pub detection_threshold: Option<f64>,
    /// roc: overrides applied to the reference arm only.
    pub reference_phi0: Option<f64>,
    pub reference_noise_intensity: Option<f64>,
    pub kappa_grid: Option<Vec<f64>>,
    pub phi0_grid: Option<Vec<f64>>,
    /// min-amplitude: search bracket, defaulting to `[0, configured strength]`.
    pub bracket: Option<[f64; 2]>,
    pub target: Option<f64>,
    pub rel_tolerance: Option<f64>,
    pub n_ph_grid: Option<Vec<f64>>,
    pub linearity_tolerance: Option<f64>,
    /// thermal-robustness: `[D₁, D₂]`, defaulting to `[D, 2D]`.
    pub noise_levels: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub directory: Option<PathBuf>,
    pub keep_samples: Option<bool>,
    pub histogram_bins: Option<usize>,
}

/// A complete experiment definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub junction: Junction,
    pub bias: Bias,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub signal: Signal,
    #[serde(default)]
    pub switch: Switch,
    pub ensemble: Ensemble,
    pub campaign: Campaign,
    #[serde(default)]
    pub output: Output,
}

fn invalid(field: &str, value: impl std::fmt::Display, constraint: &str) -> CliError {
    CliError::Config(format!("invalid {field}: {value} violates `{constraint}`"))
}

fn check(ok: bool, field: &str, value: f64, constraint: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, value, constraint))
    }
}

fn required(value: Option<f64>, field: &str, kind: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing {field}: required for {kind}")))
}

/// Two ways of giving the same quantity must agree.
fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl ExperimentConfig {
    /// Parses config text and resolves it.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        raw.resolve()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Fills every default explicitly and validates the result.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let beta = self.junction.beta;
        check(beta > 0.0 && beta.is_finite(), "junction.beta", beta, "beta > 0")?;
        let d = match (self.junction.noise_intensity, self.junction.theta) {
            (Some(d), Some(theta)) if !agree(d, 2.0 * beta * theta) => {
                return Err(invalid("junction.theta", theta, "noise_intensity = 2*beta*theta"))
            }
            (Some(d), _) => d,
            (None, Some(theta)) => 2.0 * beta * theta,
            (None, None) => return Err(CliError::Config("missing junction.noise_intensity (or junction.theta)".into())),
        };
        check(d >= 0.0 && d.is_finite(), "junction.noise_intensity", d, "noise_intensity >= 0")?;
        self.junction.noise_intensity = Some(d);
        self.junction.theta = Some(d / (2.0 * beta));

        let v = match (self.bias.kappa, self.bias.v) {
            (Some(k), Some(v)) if !agree(v, k * beta) => return Err(invalid("bias.v", v, "v = kappa*beta")),
            (_, Some(v)) => v,
            (Some(k), None) => k * beta,
            (None, None) => return Err(CliError::Config("missing bias.kappa (or bias.v)".into())),
        };
        check(v > 0.0 && v.is_finite(), "bias.v", v, "v > 0")?;
        self.bias.v = Some(v);
        self.bias.kappa = Some(v / beta);
        self.bias.i_start.get_or_insert(0.0);
        self.bias.i_cap.get_or_insert(BiasProtocol::DEFAULT_I_CAP);
        self.bias.dt.get_or_insert(BiasProtocol::DEFAULT_DT);

        self.initial.phi0.get_or_insert(0.0);
        self.initial.phi_dot0.get_or_insert(0.0);
        self.switch.phase_excursion.get_or_insert(SwitchCriterion::default().phase_excursion);

        let s = &mut self.signal;
        match s.kind {
            SignalKind::None => {}
            SignalKind::ContinuousWave => {
                s.omega_mw.get_or_insert(1.0);
            }
            SignalKind::GaussianPulse => {
                s.n_ph.get_or_insert(1.0);
                s.omega_ph.get_or_insert(1.0);
                s.tau_d.get_or_insert(0.5 / v);
            }
        }

        if self.ensemble.master_seed.is_none() {
            return Err(CliError::Config(
                "missing ensemble.master_seed: seeds are mandatory and never auto-generated".into(),
            ));
        }
        check(self.ensemble.n_trials >= 1, "ensemble.n_trials", self.ensemble.n_trials as f64, "n_trials >= 1")?;

        let kind = self.campaign.kind;
        let c = &mut self.campaign;
        let threshold = *c.detection_threshold.get_or_insert(DEFAULT_DETECTION_THRESHOLD);
        check((0.5..=1.0).contains(&threshold), "campaign.detection_threshold", threshold, "0.5 <= threshold <= 1")?;
        match kind {
            CampaignKind::Scd | CampaignKind::Roc => {}
            CampaignKind::SweepKappa => {
                c.kappa_grid.get_or_insert_with(default_kappa_grid);
            }
            CampaignKind::SweepPhi0 => {
                c.phi0_grid.get_or_insert_with(default_phi0_grid);
            }
            CampaignKind::MinAmplitude => {
                let strength = match self.signal.kind {
                    SignalKind::ContinuousWave => self.signal.i_mw,
                    SignalKind::GaussianPulse => self.signal.n_ph,
                    SignalKind::None => {
                        return Err(CliError::Config("min-amplitude needs a signal: set signal.kind".into()))
                    }
                };
                if c.bracket.is_none() {
                    c.bracket = Some([0.0, required(strength, "signal strength", "the default bracket")?]);
                }
                c.target.get_or_insert(DEFAULT_DETECTION_THRESHOLD);
                c.rel_tolerance.get_or_insert(DEFAULT_BRACKET_TOLERANCE);
            }
            CampaignKind::PhotonResponse => {
                if self.signal.kind != SignalKind::GaussianPulse {
                    return Err(CliError::Config("photon-response needs signal.kind = \"gaussian_pulse\"".into()));
                }
                c.n_ph_grid.get_or_insert_with(|| DEFAULT_N_PH_GRID.to_vec());
                c.linearity_tolerance.get_or_insert(DEFAULT_LINEARITY_TOLERANCE);
            }
            CampaignKind::ThermalRobustness => {
                c.noise_levels.get_or_insert([d, 2.0 * d]);
            }
        }
        if let Some(g) = c.kappa_grid.as_ref().filter(|g| g.is_empty()) {
            return Err(invalid("campaign.kappa_grid", g.len(), "grid nonempty"));
        }
        if let Some(g) = c.phi0_grid.as_ref().filter(|g| g.is_empty()) {
            return Err(invalid("campaign.phi0_grid", g.len(), "grid nonempty"));
        }
        if let Some(g) = c.n_ph_grid.as_ref() {
            if g.is_empty() {
                return Err(invalid("campaign.n_ph_grid", g.len(), "grid nonempty"));
            }
            for &n in g {
                check(n >= 0.0, "campaign.n_ph_grid", n, "n_ph >= 0")?;
            }
        }
        if let Some([lo, hi]) = c.bracket {
            check(lo >= 0.0, "campaign.bracket", lo, "bracket[0] >= 0")?;
            check(hi > lo, "campaign.bracket", hi, "bracket[1] > bracket[0]")?;
        }
        if let Some(levels) = c.noise_levels {
            for l in levels {
                check(l >= 0.0, "campaign.noise_levels", l, "noise level >= 0")?;
            }
        }
        if let Some(n) = self.output.histogram_bins {
            check(n >= 1, "output.histogram_bins", n as f64, "histogram_bins >= 1")?;
        }
        self.output.keep_samples.get_or_insert(self.ensemble.n_trials <= KEEP_SAMPLES_LIMIT);

        // the core types carry the remaining constraints
        self.setup().map_err(|e| CliError::Config(e.to_string()))?.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(self)
    }

    pub fn master_seed(&self) -> u64 {
        self.ensemble.master_seed.expect("resolved configs carry a seed")
    }

    pub fn n_trials(&self) -> u64 {
        self.ensemble.n_trials
    }

    /// Base trial setup of a resolved config.
    pub fn setup(&self) -> jjsim_core::Result<TrialSetup> {
        let params = JunctionParams::from_noise_intensity(self.junction.beta, self.junction.noise_intensity.unwrap_or(0.0))?;
        let protocol = BiasProtocol {
            v: self.bias.v.unwrap_or(0.0),
            i_start: self.bias.i_start.unwrap_or(0.0),
            i_cap: self.bias.i_cap.unwrap_or(BiasProtocol::DEFAULT_I_CAP),
            dt: self.bias.dt.unwrap_or(BiasProtocol::DEFAULT_DT),
        };
        let init = InitialCondition {
            phi0: self.initial.phi0.unwrap_or(0.0),
            phi_dot0: self.initial.phi_dot0.unwrap_or(0.0),
        };
        let s = &self.signal;
        let signal = match s.kind {
            SignalKind::None => SignalSpec::None,
            SignalKind::ContinuousWave => SignalSpec::ContinuousWave {
                i_mw: s.i_mw.unwrap_or(f64::NAN),
                omega_mw: s.omega_mw.unwrap_or(1.0),
            },
            SignalKind::GaussianPulse => SignalSpec::GaussianPulse {
                n_ph: s.n_ph.unwrap_or(1.0),
                i_ph: s.i_ph.unwrap_or(f64::NAN),
                omega_ph: s.omega_ph.unwrap_or(1.0),
                tau_ph: s.tau_ph.unwrap_or(f64::NAN),
                tau_d: s.tau_d.unwrap_or(0.5 / protocol.v),
            },
        };
        let mut setup = TrialSetup::new(params, protocol, init, signal);
        setup.criterion = SwitchCriterion {
            phase_excursion: self.switch.phase_excursion.unwrap_or(setup.criterion.phase_excursion),
        };
        Ok(setup)
    }

    /// Content hash of everything that determines results; the output
    /// location and sample persistence are excluded.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = Output::default();
        digest_of(&c)
    }

    /// Applies `--full`.
    pub fn with_full_trials(mut self) -> Self {
        self.ensemble.n_trials = FULL_TRIALS;
        self
    }
}

/// Reads and resolves a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
