//! Single-trial replay with a trajectory dump.

use std::fmt::Write as _;

use jjsim_core::dynamics::{run_trial_observed, trial_seed, JunctionParams, PhaseState, SwitchEvent, TrialSetup};
use jjsim_core::signal::SignalSpec;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignKind, ExperimentConfig};
use crate::CliError;

/// Which ensemble of a comparison the trial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// The configured setup, signal included.
    Test,
    /// The signal-off arm, with any roc reference overrides.
    Reference,
}

pub fn arm_setup(config: &ExperimentConfig, arm: Arm) -> Result<TrialSetup, CliError> {
    let base = config.setup()?;
    Ok(match arm {
        Arm::Test => base,
        Arm::Reference => {
            let mut s = TrialSetup {
                signal: SignalSpec::None,
                ..base
            };
            if config.campaign.kind == CampaignKind::Roc {
                if let Some(phi0) = config.campaign.reference_phi0 {
                    s.init.phi0 = phi0;
                }
                if let Some(d) = config.campaign.reference_noise_intensity {
                    s.params = JunctionParams::from_noise_intensity(base.params.beta, d)?;
                }
            }
            s
        }
    })
}

/// Re-runs trial `index` of the configured ensemble and returns its event
/// with the trajectory `(τ, φ, φ̇, i_b)` kept every `stride` steps. The
/// final state is always kept.
pub fn replay_trial(config: &ExperimentConfig, index: u64, arm: Arm, stride: u64) -> Result<(SwitchEvent, String), CliError> {
    if stride == 0 {
        return Err(CliError::Config("invalid stride: 0 violates `stride >= 1`".into()));
    }
    let setup = arm_setup(config, arm)?;
    let seed = trial_seed(config.master_seed(), index);
    let v = setup.protocol.v;
    let arm_name = match arm {
        Arm::Test => "test",
        Arm::Reference => "reference",
    };
    let mut out = format!(
        "# trajectory trial_index={index} trial_seed={seed} arm={arm_name} config_digest={} master_seed={}\n# columns: tau (1/omega_J)  phi (rad)  phi_dot (omega_J)  i_b (units of I_c)\n",
        config.digest(),
        config.master_seed(),
    );
    let row = |s: &PhaseState| format!("{} {} {} {}\n", s.tau, s.phi, s.phi_dot, v * s.tau);
    let mut k = 0u64;
    let mut unwritten = None;
    let event = run_trial_observed(&setup, seed, |s| {
        if k.is_multiple_of(stride) {
            out.push_str(&row(s));
            unwritten = None;
        } else {
            unwritten = Some(*s);
        }
        k += 1;
    })?;
    if let Some(s) = unwritten {
        out.push_str(&row(&s));
    }
    let _ = writeln!(
        out,
        "# switched={} i_sw={} tau_sw={} steps={}",
        event.switched, event.i_sw, event.tau_sw, event.steps
    );
    Ok((event, out))
}
