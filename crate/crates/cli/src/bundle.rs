//! Result bundles: everything a campaign produced, in one JSON document.

use std::io::Write;
use std::path::{Path, PathBuf};

use jjsim_core::campaign::{AmplitudeSearch, PhotonResponse, SweepResult};
use jjsim_core::ensemble::{Histogram, RateCurve, ScdSample};
use jjsim_core::metrics::RocResult;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignKind, ExperimentConfig};
use crate::CliError;

pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledHistogram {
    pub label: String,
    pub histogram: Histogram,
}

/// Escape rate inverted from an SCD and the density it predicts back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeCheck {
    pub rate: RateCurve,
    pub predicted_density: Vec<f64>,
    /// Total-variation distance between the histogram and the prediction.
    pub total_variation: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub roc: Option<RocResult>,
    /// The detect() decision of a detection campaign.
    pub detected: Option<bool>,
    pub escape: Option<EscapeCheck>,
    pub censored_count: u64,
}

/// Not reproducible run facts, excluded from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub wall_clock_seconds: f64,
    pub workers: usize,
    /// Integration steps of the ensembles kept in the bundle.
    pub total_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub config_digest: String,
    pub master_seed: u64,
    pub campaign: CampaignKind,
    pub config: ExperimentConfig,
    /// Ensembles; `values` is emptied when samples are not kept.
    pub samples: Vec<ScdSample>,
    pub histograms: Vec<LabeledHistogram>,
    pub metrics: Metrics,
    pub sweep: Option<SweepResult>,
    pub response: Option<PhotonResponse>,
    pub amplitude: Option<AmplitudeSearch>,
    pub telemetry: Option<Telemetry>,
}

impl ResultBundle {
    pub fn new(config: &ExperimentConfig) -> Self {
        ResultBundle {
            config_digest: config.digest(),
            master_seed: config.master_seed(),
            campaign: config.campaign.kind,
            config: config.clone(),
            samples: Vec::new(),
            histograms: Vec::new(),
            metrics: Metrics::default(),
            sweep: None,
            response: None,
            amplitude: None,
            telemetry: None,
        }
    }

    /// The bundle with telemetry removed, for reproducibility checks.
    pub fn without_telemetry(&self) -> Self {
        ResultBundle {
            telemetry: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundles serialize")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let path = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io {
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            path,
        })
    }

    /// Writes `bundle.json` into `dir`, which is created if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(BUNDLE_FILE);
        write_atomic(&path, self.to_json().as_bytes())?;
        Ok(path)
    }
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}
