//! `mnac sweep`: Monte Carlo success probabilities over an `(snr, n)` grid.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use mnac::metrics::{monte_carlo_many, DecoderSpec, MonteCarloOptions, RecoveryCriterion};

use crate::config::ExperimentConfig;
use crate::format::format_real;
use crate::io::write_atomic;
use crate::table::Table;
use crate::CliError;

pub const SWEEP_HEADER: [&str; 13] = [
    "ell",
    "k",
    "n",
    "snr_db",
    "q_sp",
    "gamma",
    "decoder",
    "criterion",
    "zeta",
    "trials",
    "successes",
    "success_prob",
    "stderr",
];

/// Columns identifying a cell for resumption: ell, k, n, snr_db, decoder, criterion.
const KEY_COLUMNS: [usize; 6] = [0, 1, 2, 3, 6, 7];

type Row = Vec<String>;

fn key_of(row: &[String]) -> Vec<String> {
    KEY_COLUMNS.iter().map(|&i| row[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub path: PathBuf,
    /// Cells (one `(snr, n)` pair) that had to be simulated.
    pub computed_cells: usize,
    pub reused_rows: usize,
    /// `decoder @ (ell, k, n, snr_db)` for each infeasible combination.
    pub infeasible: Vec<String>,
}

/// Seed for one `(ell, k, n)` cell. SNR, decoder and criterion are left out so
/// that they are compared on common random numbers.
pub fn cell_seed(seed: u64, ell: usize, k: usize, n: usize) -> u64 {
    [ell as u64, k as u64, n as u64]
        .iter()
        .fold(splitmix(seed), |h, &v| splitmix(h ^ v))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn sweep_path(cfg: &ExperimentConfig, out_dir: &Path) -> PathBuf {
    out_dir.join(format!("{}.csv", cfg.name()))
}

pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepSummary, CliError> {
    let decoders = cfg.decoder_specs()?;
    let criteria = cfg.criteria()?;
    if cfg.sweep.n.is_empty() {
        return Err(CliError::Config("sweep.n must be a non-empty list".into()));
    }
    let ops = cfg.operating_points()?;
    let path = sweep_path(cfg, out_dir);

    let mut existing: Vec<Row> = Vec::new();
    if path.exists() {
        let table = Table::read(&path)?;
        table.require_header(&SWEEP_HEADER)?;
        existing = table.rows;
    }
    let mut known: HashMap<Vec<String>, Row> =
        existing.iter().map(|r| (key_of(r), r.clone())).collect();

    let (ell, k) = (cfg.network.ell, cfg.network.k);
    let mut planned: Vec<Vec<String>> = Vec::new();
    let mut summary = SweepSummary {
        path: path.clone(),
        computed_cells: 0,
        reused_rows: 0,
        infeasible: Vec::new(),
    };

    for op in &ops {
        for &n in &cfg.sweep.n {
            let net = cfg.network(n, op.q_sp)?;
            let prefix = [
                ell.to_string(),
                k.to_string(),
                n.to_string(),
                format_real(op.params.snr_db()),
                format_real(op.q_sp),
                format_real(op.params.threshold()),
            ];
            let row_key = |d: &DecoderSpec, c: &RecoveryCriterion| {
                vec![
                    prefix[0].clone(),
                    prefix[1].clone(),
                    prefix[2].clone(),
                    prefix[3].clone(),
                    d.to_string(),
                    c.to_string(),
                ]
            };
            let mut missing = Vec::new();
            for d in &decoders {
                let keys: Vec<_> = criteria.iter().map(|c| row_key(d, c)).collect();
                planned.extend(keys.iter().cloned());
                let have = keys.iter().filter(|key| known.contains_key(*key)).count();
                summary.reused_rows += have;
                if keys
                    .iter()
                    .any(|key| known.get(key).is_some_and(|r| r[9] == "0"))
                {
                    summary.infeasible.push(format!(
                        "{d} @ (ell={ell}, k={k}, n={n}, snr_db={})",
                        prefix[3]
                    ));
                }
                if have < keys.len() {
                    missing.push(*d);
                }
            }
            if missing.is_empty() {
                continue;
            }

            let mut feasible = Vec::new();
            for d in missing {
                if let Err(e) = d.check_feasible(ell, k) {
                    summary.infeasible.push(format!(
                        "{d} @ (ell={ell}, k={k}, n={n}, snr_db={}): {e}",
                        prefix[3]
                    ));
                    for c in &criteria {
                        let mut row: Row = prefix.to_vec();
                        row.extend([
                            d.to_string(),
                            c.to_string(),
                            format_real(c.zeta()),
                            "0".into(),
                            "0".into(),
                            "nan".into(),
                            "nan".into(),
                        ]);
                        known.insert(key_of(&row), row);
                    }
                } else {
                    feasible.push(d);
                }
            }
            if !feasible.is_empty() {
                let records = monte_carlo_many(
                    &net,
                    &op.params,
                    &feasible,
                    &criteria,
                    cfg.run.trials,
                    cell_seed(cfg.run.seed, ell, k, n),
                    MonteCarloOptions {
                        fixed_codebook: cfg.run.fixed_codebook,
                    },
                )?;
                for r in records {
                    let mut row: Row = prefix.to_vec();
                    row.extend([
                        r.decoder.to_string(),
                        r.criterion.to_string(),
                        format_real(r.criterion.zeta()),
                        r.trials.to_string(),
                        r.successes.to_string(),
                        format_real(r.success_prob),
                        format_real(r.stderr),
                    ]);
                    known.insert(key_of(&row), row);
                }
            }
            summary.computed_cells += 1;
            write_rows(&path, &planned, &existing, &known)?;
        }
    }
    // also covers the case where every row was already present
    write_rows(&path, &planned, &existing, &known)?;
    Ok(summary)
}

/// Planned rows in config order, then rows from an earlier file that the
/// current config does not mention.
fn write_rows(
    path: &Path,
    planned: &[Vec<String>],
    existing: &[Row],
    known: &HashMap<Vec<String>, Row>,
) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    out.write_record(SWEEP_HEADER).map_err(csv_err)?;
    let mut written = std::collections::HashSet::new();
    for key in planned {
        if let Some(row) = known.get(key) {
            if written.insert(key.clone()) {
                out.write_record(row).map_err(csv_err)?;
            }
        }
    }
    for row in existing {
        if written.insert(key_of(row)) {
            out.write_record(row).map_err(csv_err)?;
        }
    }
    let bytes = out.into_inner().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    write_atomic(path, &bytes)
}
