//! CSV records and SVG BER plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Algorithm, SweepResult};

/// Header row written by [`emit_csv`].
pub const CSV_HEADER: &str =
    "experiment,algorithm,N,K,T_t,T_d,rho_c,rho,layers_or_iters,snr_db,ber,stderr,bits_total,trials_failed,flops_total,seed";

/// One CSV row. `rho` is only set for JED-ADMM and `layers_or_iters` only
/// for iterative detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub experiment: String,
    pub algorithm: Algorithm,
    #[serde(rename = "N")]
    pub n_rx: usize,
    #[serde(rename = "K")]
    pub n_tx: usize,
    #[serde(rename = "T_t")]
    pub t_pilot: usize,
    #[serde(rename = "T_d")]
    pub t_data: usize,
    pub rho_c: f64,
    pub rho: Option<f64>,
    pub layers_or_iters: Option<usize>,
    pub snr_db: f64,
    pub ber: f64,
    pub stderr: f64,
    pub bits_total: u64,
    pub trials_failed: usize,
    pub flops_total: u64,
    pub seed: u64,
}

/// Flattens sweep results into rows, in result then SNR order.
pub fn to_records(results: &[SweepResult]) -> Vec<CsvRecord> {
    let mut rows = Vec::new();
    for r in results {
        let c = &r.config;
        let ch = &c.scenario.channel;
        for p in &r.points {
            rows.push(CsvRecord {
                experiment: c.experiment.clone(),
                algorithm: c.algorithm,
                n_rx: ch.n_rx,
                n_tx: ch.n_tx,
                t_pilot: c.scenario.t_pilot,
                t_data: c.scenario.t_data,
                rho_c: ch.rho_c,
                rho: p.rho,
                layers_or_iters: c.algorithm.is_iterative().then_some(c.iterations),
                snr_db: p.snr_db,
                ber: p.ber,
                stderr: p.stderr,
                bits_total: p.bits_total,
                trials_failed: p.trials_failed,
                flops_total: p.flops.total_flops,
                seed: c.seed,
            });
        }
    }
    rows
}

/// Writes all points as CSV. Nothing is written when there are no points.
pub fn emit_csv(results: &[SweepResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows = to_records(results);
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no results to write".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            origin: path.display().to_string(),
            message: format!("{other:?}"),
        },
    })?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse {
            origin: path.display().to_string(),
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-scale BER against SNR, one series per result. Points with zero
/// errors or no successful trials are left out of the curves.
pub fn emit_plot(results: &[SweepResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let svg = render_svg(results)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn render_svg(results: &[SweepResult]) -> Result<String> {
    let plotted = |p: &super::BerPoint| p.ber > 0.0 && p.snr_db.is_finite();
    let pts: Vec<_> = results.iter().flat_map(|r| r.points.iter()).filter(|p| plotted(p)).collect();
    if results.iter().all(|r| r.points.is_empty()) {
        return Err(Error::InvalidArgument("no results to plot".into()));
    }
    let (w, h) = (760.0, 500.0);
    let (left, right, top, bottom) = (70.0, 250.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let snrs = || results.iter().flat_map(|r| r.points.iter()).map(|p| p.snr_db).filter(|s| s.is_finite());
    let mut x0 = snrs().fold(f64::INFINITY, f64::min);
    let mut x1 = snrs().fold(f64::NEG_INFINITY, f64::max);
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let lo = pts.iter().map(|p| p.ber).fold(1.0, f64::min);
    let d0 = lo.log10().floor().min(-1.0);
    let d1 = 0.0;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |b: f64| top + (d1 - b.log10()) / (d1 - d0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let title: Vec<&str> = results.iter().map(|r| r.config.experiment.as_str()).collect();
    let mut title_unique = title.clone();
    title_unique.dedup();
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        xml_escape(&title_unique.join(", "))
    );
    for d in (d0 as i32)..=(d1 as i32) {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let step = ((x1 - x0) / 8.0).max(1.0).ceil();
    let mut x = (x0 / step).ceil() * step;
    while x <= x1 + 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{:.2}" stroke="#eee"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
            top + ph,
            top + ph + 16.0
        );
        x += step;
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">BER</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, r) in results.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = r
            .points
            .iter()
            .filter(|p| plotted(p))
            .map(|p| format!("{:.2},{:.2}", sx(p.snr_db), sy(p.ber)))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            xml_escape(&r.config.series_label())
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
