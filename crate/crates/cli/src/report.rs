//! `mnac capacity`: optimal rate and identification cost per SNR point.

use std::path::{Path, PathBuf};

use mnac::capacity::{cost_report, optimize_rate, CostReport};

use crate::config::ExperimentConfig;
use crate::format::format_real;
use crate::io::write_atomic;
use crate::CliError;

pub const CAPACITY_HEADER: [&str; 10] = [
    "ell",
    "k",
    "snr_db",
    "capacity",
    "gamma_star",
    "q_star",
    "n_required",
    "n_gaussian",
    "alpha",
    "lower_bound",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub report: CostReport,
}

impl CapacityRow {
    pub fn fields(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            r.ell.to_string(),
            r.k.to_string(),
            format_real(self.snr_db),
            format_real(r.c_star),
            format_real(r.gamma_star),
            format_real(r.q_star),
            format_real(r.n_required),
            format_real(r.gaussian_baseline),
            format_real(r.alpha),
            format_real(r.sublinear_lower_bound),
        ]
    }
}

pub fn capacity_path(cfg: &ExperimentConfig, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}_capacity.csv", cfg.name()))
}

/// Computes every row before writing, so a failure leaves no file behind.
pub fn run_capacity(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(PathBuf, Vec<CapacityRow>), CliError> {
    let (ell, k) = (cfg.network.ell, cfg.network.k);
    let rows = cfg
        .channel_points()?
        .into_iter()
        .map(|params| {
            let best = optimize_rate(&params, k);
            let report = cost_report(ell, k, &params, &best, cfg.run.alpha)?;
            Ok(CapacityRow {
                snr_db: params.snr_db(),
                report,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut text = CAPACITY_HEADER.join(",");
    text.push('\n');
    for row in &rows {
        text.push_str(&row.fields().join(","));
        text.push('\n');
    }
    let path = capacity_path(cfg, out_dir);
    write_atomic(&path, text.as_bytes())?;
    Ok((path, rows))
}
