//! Plain-text plot data emitted from result bundles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundle::{write_atomic, ResultBundle};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Histogram,
    Roc,
    Sweep,
    Response,
}

fn header(bundle: &ResultBundle, what: &str, columns: &str) -> String {
    format!(
        "# {what} campaign={} config_digest={} master_seed={}\n# columns: {columns}\n",
        serde_json::to_value(bundle.campaign).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        bundle.config_digest,
        bundle.master_seed,
    )
}

fn axis_units(axis: &str) -> &'static str {
    match axis {
        "kappa" => "kappa (v/beta, dimensionless)",
        "phi0" => "phi0 (rad)",
        _ => "axis",
    }
}

/// `(file name, contents)` for every file of the requested kind.
pub fn plot_files(bundle: &ResultBundle, which: PlotKind) -> Result<Vec<(String, String)>, CliError> {
    let mut files = Vec::new();
    match which {
        PlotKind::Histogram => {
            if bundle.histograms.is_empty() {
                return Err(CliError::MissingProduct("histogram"));
            }
            for h in &bundle.histograms {
                let mut out = header(
                    bundle,
                    &format!("histogram label={}", h.label),
                    "bin_center (i_sw, units of I_c)  density (per unit I_c)  bin_width (units of I_c)",
                );
                for (k, c) in h.histogram.centers().iter().enumerate() {
                    let _ = writeln!(out, "{c} {} {}", h.histogram.densities[k], h.histogram.bin_width(k));
                }
                files.push((format!("histogram_{}.txt", h.label), out));
            }
        }
        PlotKind::Roc => {
            let roc = bundle.metrics.roc.as_ref().ok_or(CliError::MissingProduct("roc"))?;
            let mut out = header(
                bundle,
                &format!("roc r_auc={} auc_raw={} d_kc={}", roc.r_auc, roc.auc_raw, roc.d_kc),
                "false_positive_rate  true_positive_rate",
            );
            for p in &roc.points {
                let _ = writeln!(out, "{} {}", p.fpr, p.tpr);
            }
            files.push(("roc.txt".into(), out));
        }
        PlotKind::Sweep => {
            let s = bundle.sweep.as_ref().ok_or(CliError::MissingProduct("sweep"))?;
            let mut out = header(
                bundle,
                &format!("sweep best_{}={} best_r_auc={}", s.axis_name, s.best_axis_value(), s.best_value),
                &format!("{}  r_auc", axis_units(&s.axis_name)),
            );
            for (x, r) in s.axis_values.iter().zip(&s.r_auc_values) {
                let _ = writeln!(out, "{x} {r}");
            }
            files.push(("sweep.txt".into(), out));
        }
        PlotKind::Response => {
            let r = bundle.response.as_ref().ok_or(CliError::MissingProduct("response"))?;
            let mut out = header(
                bundle,
                &format!("response n_ph_max={} linear_range_end={}", r.n_ph_max, r.linear_range_end),
                "n_ph (photons per pulse)  r_auc",
            );
            for (n, a) in r.n_ph_values.iter().zip(&r.r_auc_values) {
                let _ = writeln!(out, "{n} {a}");
            }
            files.push(("response.txt".into(), out));
        }
    }
    Ok(files)
}

/// Writes the plot files into `dir` and returns their paths.
pub fn emit_plot_data(bundle: &ResultBundle, which: PlotKind, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in plot_files(bundle, which)? {
        let path = dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
