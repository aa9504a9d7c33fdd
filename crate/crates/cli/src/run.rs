//! Campaign dispatch.

use std::time::Instant;

use jjsim_core::campaign::{
    contrast, min_detectable_amplitude, photon_response, sweep_kappa, sweep_phi0, thermal_robustness, Contrast,
};
use jjsim_core::dynamics::{JunctionParams, TrialSetup};
use jjsim_core::ensemble::{fd_escape_rate, histogram, run_ensemble, scd_from_rate, EnsembleSpec, Executor, ScdSample};
use jjsim_core::signal::SignalSpec;

use crate::bundle::{EscapeCheck, LabeledHistogram, ResultBundle, Telemetry};
use crate::config::{CampaignKind, ExperimentConfig};
use crate::CliError;

/// Runs the campaign named by `config` on `workers` threads (0 selects the
/// machine parallelism).
pub fn run(config: &ExperimentConfig, workers: usize) -> Result<ResultBundle, CliError> {
    let exec = Executor::new(workers)?;
    let started = Instant::now();
    let mut bundle = ResultBundle::new(config);
    let base = config.setup()?;
    let n = config.n_trials();
    let seed = config.master_seed();
    let c = &config.campaign;
    let threshold = c.detection_threshold.unwrap_or(0.7);

    match c.kind {
        CampaignKind::Scd => {
            let sample = run_ensemble(&EnsembleSpec::new(base, n, seed), "scd", &exec)?;
            bundle.metrics.escape = escape_check(&sample, base.protocol.v, config.output.histogram_bins)?;
            add_sample(&mut bundle, config, sample)?;
        }
        CampaignKind::Roc => {
            let mut reference = TrialSetup {
                signal: SignalSpec::None,
                ..base
            };
            if let Some(phi0) = c.reference_phi0 {
                reference.init.phi0 = phi0;
            }
            if let Some(d) = c.reference_noise_intensity {
                reference.params = JunctionParams::from_noise_intensity(base.params.beta, d)?;
            }
            let result = contrast(&reference, &base, n, seed, threshold, &exec)?;
            bundle.metrics.detected = Some(result.roc.decision);
            add_contrast(&mut bundle, config, result)?;
        }
        CampaignKind::ThermalRobustness => {
            let [d1, d2] = c.noise_levels.expect("resolved");
            let result = thermal_robustness(&base, d1, d2, n, seed, &exec)?;
            add_contrast(&mut bundle, config, result)?;
        }
        CampaignKind::SweepKappa => {
            let grid = c.kappa_grid.as_deref().expect("resolved");
            let s = sweep_kappa(&base, grid, &base.signal, n, seed, &exec)?;
            bundle.metrics.censored_count = s.censored_count;
            bundle.sweep = Some(s);
        }
        CampaignKind::SweepPhi0 => {
            let grid = c.phi0_grid.as_deref().expect("resolved");
            let s = sweep_phi0(&base, grid, &base.signal, n, seed, &exec)?;
            bundle.metrics.censored_count = s.censored_count;
            bundle.sweep = Some(s);
        }
        CampaignKind::MinAmplitude => {
            let [lo, hi] = c.bracket.expect("resolved");
            let target = c.target.expect("resolved");
            let tol = c.rel_tolerance.expect("resolved");
            let search = min_detectable_amplitude(&base, &base.signal, (lo, hi), target, tol, n, seed, &exec)?;
            bundle.metrics.censored_count = search.censored_count;
            bundle.amplitude = Some(search);
        }
        CampaignKind::PhotonResponse => {
            let grid = c.n_ph_grid.as_deref().expect("resolved");
            let tol = c.linearity_tolerance.expect("resolved");
            let r = photon_response(&base, &base.signal, grid, tol, n, seed, &exec)?;
            bundle.metrics.censored_count = r.censored_count;
            bundle.response = Some(r);
        }
    }

    bundle.telemetry = Some(Telemetry {
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        workers: exec.workers(),
        total_steps: bundle.samples.iter().map(|s| s.total_steps).sum(),
    });
    Ok(bundle)
}

fn add_sample(bundle: &mut ResultBundle, config: &ExperimentConfig, mut sample: ScdSample) -> Result<(), CliError> {
    bundle.metrics.censored_count += sample.censored_count;
    if !sample.values.is_empty() {
        bundle.histograms.push(LabeledHistogram {
            label: sample.label.clone(),
            histogram: histogram(&sample.values, config.output.histogram_bins)?,
        });
    }
    if config.output.keep_samples == Some(false) {
        sample.values.clear();
    }
    bundle.samples.push(sample);
    Ok(())
}

fn add_contrast(bundle: &mut ResultBundle, config: &ExperimentConfig, c: Contrast) -> Result<(), CliError> {
    bundle.metrics.roc = Some(c.roc);
    add_sample(bundle, config, c.reference)?;
    add_sample(bundle, config, c.test)
}

/// Inverts the sample into an escape rate and compares the density that
/// rate predicts with the sample's own histogram.
fn escape_check(sample: &ScdSample, v: f64, bins: Option<usize>) -> Result<Option<EscapeCheck>, CliError> {
    if sample.values.len() < 2 {
        return Ok(None);
    }
    let h = histogram(&sample.values, bins)?;
    let rate = fd_escape_rate(&sample.values, v, Some(h.densities.len()))?;
    let predicted_density = scd_from_rate(&rate, v)?;
    let total_variation = (0..h.densities.len())
        .map(|k| 0.5 * (predicted_density.get(k).copied().unwrap_or(0.0) - h.densities[k]).abs() * h.bin_width(k))
        .sum();
    Ok(Some(EscapeCheck {
        rate,
        predicted_density,
        total_variation,
    }))
}
