//! `mnac plot`: static SVG figures from sweep and capacity CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::format::format_real;
use crate::io::write_atomic;
use crate::report::CAPACITY_HEADER;
use crate::sweep::SWEEP_HEADER;
use crate::table::Table;
use crate::CliError;

pub const N_LABEL: &str = "Number of channel-uses, n";
pub const SUCCESS_LABEL: &str = "Probability of successful identification";
const SNR_LABEL: &str = "SNR (dB)";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fixed y range; derived from the data when `None`.
    pub y_range: Option<(f64, f64)>,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    /// Success level defining the empirical identification cost.
    pub target_success: f64,
    pub cost_decoder: String,
    pub cost_criterion: String,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            target_success: 0.95,
            cost_decoder: "bp_st".into(),
            cost_criterion: "exact".into(),
        }
    }
}

/// Smallest `n` at which the success curve reaches `target`, interpolating
/// linearly from the previous grid point. `points` must be sorted by `n`.
pub fn empirical_cost(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let hit = points.iter().position(|&(_, p)| p >= target)?;
    if hit == 0 {
        return Some(points[0].0);
    }
    let (n0, p0) = points[hit - 1];
    let (n1, p1) = points[hit];
    Some(n0 + (target - p0) / (p1 - p0) * (n1 - n0))
}

struct SweepPoint {
    ell: String,
    k: String,
    n: f64,
    snr: f64,
    decoder: String,
    criterion: String,
    success: f64,
}

fn sweep_points(table: &Table) -> Result<Vec<SweepPoint>, CliError> {
    let col: Vec<usize> = SWEEP_HEADER
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_, _>>()?;
    let mut points = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let success = table.real(r, col[11])?;
        // infeasible marker rows carry no estimate
        if success.is_nan() {
            continue;
        }
        points.push(SweepPoint {
            ell: row[col[0]].clone(),
            k: row[col[1]].clone(),
            n: table.real(r, col[2])?,
            snr: table.real(r, col[3])?,
            decoder: row[col[6]].clone(),
            criterion: row[col[7]].clone(),
            success,
        });
    }
    Ok(points)
}

/// One figure per `(ell, k, criterion)`, one curve per `(decoder, snr)`.
pub fn sweep_figures(table: &Table) -> Result<Vec<(String, Figure)>, CliError> {
    let mut groups: BTreeMap<(String, String, String), BTreeMap<(String, u64), Vec<(f64, f64)>>> =
        BTreeMap::new();
    let mut snr_of: BTreeMap<u64, f64> = BTreeMap::new();
    for p in sweep_points(table)? {
        let snr_key = p.snr.to_bits();
        snr_of.insert(snr_key, p.snr);
        groups
            .entry((p.ell, p.k, p.criterion))
            .or_default()
            .entry((p.decoder, snr_key))
            .or_default()
            .push((p.n, p.success));
    }
    let stem = file_stem(&table.path);
    Ok(groups
        .into_iter()
        .map(|((ell, k, criterion), curves)| {
            let series = curves
                .into_iter()
                .map(|((decoder, snr_key), mut points)| {
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let label = format!("{decoder}, {} dB", format_real(snr_of[&snr_key]));
                    Series { label, points }
                })
                .collect();
            let name = format!("{stem}_l{ell}_k{k}_{}", sanitize(&criterion));
            let figure = Figure {
                title: format!("({ell}, {k}), {criterion}"),
                x_label: N_LABEL.into(),
                y_label: SUCCESS_LABEL.into(),
                y_range: Some((0.0, 1.0)),
                series,
            };
            (name, figure)
        })
        .collect())
}

/// Theory cost against SNR, overlaid with the empirical cost read off the sweeps.
pub fn cost_figure(
    capacity: &Table,
    sweeps: &[Table],
    opts: &PlotOptions,
) -> Result<(String, Figure), CliError> {
    let snr_col = capacity.column("snr_db")?;
    let n_col = capacity.column("n_required")?;
    for c in CAPACITY_HEADER {
        capacity.column(c)?;
    }
    let mut theory = Vec::new();
    for r in 0..capacity.rows.len() {
        theory.push((capacity.real(r, snr_col)?, capacity.real(r, n_col)?));
    }
    theory.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut curves: BTreeMap<u64, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    for table in sweeps {
        for p in sweep_points(table)? {
            if p.decoder == opts.cost_decoder && p.criterion == opts.cost_criterion {
                curves
                    .entry(p.snr.to_bits())
                    .or_insert((p.snr, Vec::new()))
                    .1
                    .push((p.n, p.success));
            }
        }
    }
    let mut empirical: Vec<(f64, f64)> = curves
        .into_values()
        .filter_map(|(snr, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            empirical_cost(&pts, opts.target_success).map(|n| (snr, n))
        })
        .collect();
    empirical.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut series = vec![Series {
        label: "minimum cost n(l)".into(),
        points: theory,
    }];
    if !empirical.is_empty() {
        series.push(Series {
            label: format!(
                "{} at {}",
                opts.cost_decoder,
                format_real(opts.target_success)
            ),
            points: empirical,
        });
    }
    let name = format!("{}_cost", file_stem(&capacity.path));
    Ok((
        name,
        Figure {
            title: "Identification cost".into(),
            x_label: SNR_LABEL.into(),
            y_label: N_LABEL.into(),
            y_range: None,
            series,
        },
    ))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into())
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn num(x: f64) -> String {
    format!("{x:.2}")
}

/// Deterministic SVG 1.1 rendering.
pub fn render_svg(fig: &Figure) -> String {
    let all = || fig.series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = padded_range(all().map(|p| p.0));
    let (y_lo, y_hi) = fig
        .y_range
        .unwrap_or_else(|| padded_range(all().map(|p| p.1)));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        WIDTH, HEIGHT, WIDTH, HEIGHT
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
        num(LEFT + plot_w / 2.0),
        num(TOP / 2.0 + 5.0),
        escape(&fig.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(LEFT),
        num(TOP),
        num(plot_w),
        num(plot_h)
    );
    for t in ticks(x_lo, x_hi) {
        let x = num(sx(t));
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#dddddd"/>"##,
            num(TOP),
            num(TOP + plot_h)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            num(TOP + plot_h + 16.0),
            format_real(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = num(sy(t));
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            num(LEFT),
            num(LEFT + plot_w)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(LEFT - 6.0),
            num(sy(t) + 4.0),
            format_real(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(LEFT + plot_w / 2.0),
        num(HEIGHT - 16.0),
        escape(&fig.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        num(20.0),
        num(TOP + plot_h / 2.0),
        num(20.0),
        num(TOP + plot_h / 2.0),
        escape(&fig.y_label)
    );
    for (i, series) in fig.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for &(x, y) in &series.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#,
                num(sx(x)),
                num(sy(y))
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.5"/>"#,
            num(lx),
            num(ly),
            num(lx + 20.0),
            num(ly)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            num(lx + 26.0),
            num(ly + 4.0),
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Renders every figure the inputs support and returns the files written.
pub fn run_plot(
    inputs: &[PathBuf],
    out_dir: &Path,
    opts: &PlotOptions,
) -> Result<Vec<PathBuf>, CliError> {
    let mut sweeps = Vec::new();
    let mut capacities = Vec::new();
    for path in inputs {
        let table = Table::read(path)?;
        if table.has_column("success_prob") {
            sweep_points(&table)?;
            sweeps.push(table);
        } else if table.has_column("capacity") {
            capacities.push(table);
        } else {
            return Err(CliError::Schema {
                path: path.clone(),
                reason: "missing column `success_prob` (sweep) or `capacity` (capacity report)"
                    .into(),
            });
        }
    }
    let mut figures = Vec::new();
    for table in &sweeps {
        figures.extend(sweep_figures(table)?);
    }
    for table in &capacities {
        figures.push(cost_figure(table, &sweeps, opts)?);
    }
    // render everything before touching the output directory
    let rendered: Vec<(PathBuf, String)> = figures
        .iter()
        .map(|(name, fig)| (out_dir.join(format!("{name}.svg")), render_svg(fig)))
        .collect();
    for (path, svg) in &rendered {
        write_atomic(path, svg.as_bytes())?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_crossing_interpolates() {
        let pts = [(250.0, 0.0), (500.0, 0.5), (750.0, 0.9), (1000.0, 1.0)];
        let n = empirical_cost(&pts, 0.95).unwrap();
        assert!((n - 875.0).abs() < 1e-9);
        assert_eq!(empirical_cost(&pts, 0.0), Some(250.0));
        assert_eq!(empirical_cost(&pts[..2], 0.95), None);
    }

    #[test]
    fn ticks_use_round_steps() {
        assert_eq!(
            ticks(0.0, 1.0),
            vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
        );
        let t = ticks(120.0, 3130.0);
        assert_eq!(t, vec![1000.0, 2000.0, 3000.0]);
    }

    #[test]
    fn svg_escapes_labels() {
        let fig = Figure {
            title: "a < b & c".into(),
            x_label: N_LABEL.into(),
            y_label: SUCCESS_LABEL.into(),
            y_range: Some((0.0, 1.0)),
            series: vec![Series {
                label: "x".into(),
                points: vec![(1.0, 0.5)],
            }],
        };
        let svg = render_svg(&fig);
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains(N_LABEL) && svg.contains(SUCCESS_LABEL));
        assert_eq!(svg, render_svg(&fig));
    }
}
