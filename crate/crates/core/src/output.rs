//! CSV and SVG writers for sweep results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{SweepKind, SweepResult};

/// Parsed CSV: metadata, header and numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// CSV text: `# key=value` lines, a header, then one row per point with
/// every float in round-trippable `{:.16e}` form.
pub fn to_csv(result: &SweepResult, extra_metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in result.metadata.iter().chain(extra_metadata) {
        let _ = writeln!(out, "# {}={}", k, v.replace('\n', " "));
    }
    out.push_str(&result.columns().join(","));
    out.push('\n');
    for row in &result.rows {
        let vals: Vec<String> = SweepResult::row_values(row).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&vals.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, result: &SweepResult, extra_metadata: &[(String, String)]) -> Result<()> {
    fs::write(path, to_csv(result, extra_metadata)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let bad = |line: usize, msg: String| Error::InvalidArgument(format!("csv line {line}: {msg}"));
    let mut metadata = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta.trim().split_once('=').ok_or_else(|| bad(i + 1, "metadata without `=`".into()))?;
            metadata.push((k.to_string(), v.to_string()));
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(cols) => {
                let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                let vals = vals.map_err(|e| bad(i + 1, e.to_string()))?;
                if vals.len() != cols.len() {
                    return Err(bad(i + 1, format!("{} fields, header has {}", vals.len(), cols.len())));
                }
                rows.push(vals);
            }
        }
    }
    Ok(CsvTable {
        metadata,
        columns: columns.ok_or_else(|| bad(0, "missing header".into()))?,
        rows,
    })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 110.0;
const MT: f64 = 30.0;
const MB: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5e-3, hi + 0.5e-3)
    } else {
        (lo, hi)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let (x0, x1, y0, y1) = (ML, W - MR, H - MB, MT);
    let _ = writeln!(
        out,
        "<path d=\"M{x0},{y1} L{x0},{y0} L{x1},{y0}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y0 - f * (y0 - y1);
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>",
            y0 + 16.0,
            x.0 + f * (x.1 - x.0)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.4}</text>",
            x0 - 6.0,
            py + 4.0,
            y.0 + f * (y.1 - y.0)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn scale(v: f64, (lo, hi): (f64, f64), a: f64, b: f64) -> f64 {
    a + (v - lo) / (hi - lo) * (b - a)
}

/// One polyline per series, keyed on `params[0]`, with `params[1]` on x.
fn line_plot(result: &SweepResult, title: &str, series_label: &str) -> String {
    let names = result.kind.parameter_names();
    let xr = span(result.rows.iter().map(|r| r.params[1]));
    let yr = span(result.rows.iter().map(|r| r.fidelity));
    let mut keys: Vec<f64> = Vec::new();
    for r in &result.rows {
        if !keys.contains(&r.params[0]) {
            keys.push(r.params[0]);
        }
    }
    let mut out = header(title);
    axes(&mut out, names[1], "fidelity", xr, yr);
    for (i, key) in keys.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r.params[0] == *key)
            .map(|r| {
                format!(
                    "{:.2},{:.2}",
                    scale(r.params[1], xr, ML, W - MR),
                    scale(r.fidelity, yr, H - MB, MT)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"series\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        let ly = MT + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{series_label} = {key}</text>",
            W - MR + 8.0,
            W - MR + 26.0,
            W - MR + 30.0,
            ly + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Viridis-like ramp from dark blue to yellow.
fn color(t: f64) -> String {
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let (a, b) = (stops[i], stops[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// One cell per row on the (params[0], params[1]) lattice.
fn heatmap(result: &SweepResult, title: &str) -> String {
    let names = result.kind.parameter_names();
    let mut xs: Vec<f64> = result.rows.iter().map(|r| r.params[0]).collect();
    let mut ys: Vec<f64> = result.rows.iter().map(|r| r.params[1]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let xr = span(xs.iter().copied());
    let yr = span(ys.iter().copied());
    let fr = span(result.rows.iter().map(|r| r.fidelity));
    let cw = (W - ML - MR) / xs.len().max(1) as f64;
    let ch = (H - MT - MB) / ys.len().max(1) as f64;
    let mut out = header(title);
    for r in &result.rows {
        let ix = xs.iter().position(|x| *x == r.params[0]).unwrap_or(0);
        let iy = ys.iter().position(|y| *y == r.params[1]).unwrap_or(0);
        let _ = writeln!(
            out,
            "<rect class=\"cell\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"><title>{} = {}, {} = {}: F = {:.6}</title></rect>",
            ML + ix as f64 * cw,
            H - MB - (iy + 1) as f64 * ch,
            cw + 0.05,
            ch + 0.05,
            color((r.fidelity - fr.0) / (fr.1 - fr.0)),
            names[0],
            r.params[0],
            names[1],
            r.params[1],
            r.fidelity
        );
    }
    axes(&mut out, names[0], names[1], xr, yr);
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let _ = writeln!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>",
            W - MR + 16.0,
            H - MB - (k + 1) as f64 * (H - MT - MB) / 11.0,
            (H - MT - MB) / 11.0 + 0.05,
            color(t)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\">{:.4}</text>\n<text x=\"{:.1}\" y=\"{:.1}\">{:.4}</text>\n<text x=\"{:.1}\" y=\"{:.1}\">F</text>",
        W - MR + 34.0,
        H - MB,
        fr.0,
        W - MR + 34.0,
        MT + 10.0,
        fr.1,
        W - MR + 20.0,
        MT - 6.0
    );
    out.push_str("</svg>\n");
    out
}

/// Detuning sweeps become one fidelity curve per κ; state and coupling
/// sweeps become heatmaps; convergence plots fidelity against the varied
/// parameter.
pub fn to_svg(result: &SweepResult) -> Result<String> {
    if result.rows.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot: sweep has no rows".into()));
    }
    Ok(match result.kind {
        SweepKind::Detuning => line_plot(result, "Transfer fidelity vs detuning ratio", "κ⁻¹ [μs]"),
        SweepKind::StateGrid => heatmap(result, "Transfer fidelity over input states"),
        SweepKind::Coupling => heatmap(result, "Transfer fidelity vs coupling inhomogeneity"),
        SweepKind::Convergence => convergence_plot(result),
    })
}

fn convergence_plot(result: &SweepResult) -> String {
    let xr = (0.0, (result.rows.len().max(2) - 1) as f64);
    let yr = span(result.rows.iter().map(|r| r.fidelity));
    let mut out = header("Fidelity across truncation and step size");
    axes(&mut out, "run index", "fidelity", xr, yr);
    for (i, r) in result.rows.iter().enumerate() {
        let (x, y) = (scale(i as f64, xr, ML, W - MR), scale(r.fidelity, yr, H - MB, MT));
        let _ = writeln!(
            out,
            "<circle class=\"point\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"#1f77b4\"><title>N = {}, dt = {} ps: F = {:.9}</title></circle>",
            r.params[0], r.params[1], r.fidelity
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, result: &SweepResult) -> Result<()> {
    fs::write(path, to_svg(result)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SweepRow;

    fn sample(kind: SweepKind, grid: &[(f64, f64)]) -> SweepResult {
        let metadata = vec![("sweep".into(), kind.to_string()), ("n_photon".into(), "3".into())];
        SweepResult {
            kind,
            rows: grid
                .iter()
                .enumerate()
                .map(|(i, (a, b))| SweepRow {
                    params: vec![*a, *b],
                    fidelity: 0.99 + 1e-4 * i as f64 + 1.0 / 3.0 * 1e-9,
                    peak_photons: 0.02,
                    max_trace_error: 1e-13,
                    min_eigenvalue: -1e-17,
                    t1_ns: 25.0,
                    t2_ns: 5.0,
                })
                .collect(),
            metadata,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = sample(SweepKind::Detuning, &[(0.1, 4.0), (0.1, 5.0), (1.0, 4.0), (1.0, 5.0)]);
        let t = parse_csv(&to_csv(&r, &[("extra".into(), "x=1".into())])).unwrap();
        assert_eq!(t.columns, r.columns());
        assert_eq!(t.meta("sweep"), Some("detuning"));
        assert_eq!(t.meta("extra"), Some("x=1"));
        for (row, parsed) in r.rows.iter().zip(&t.rows) {
            assert_eq!(&SweepResult::row_values(row), parsed);
        }
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        assert!(parse_csv("a,b\n1,2,3\n").is_err());
        assert!(parse_csv("# only=meta\n").is_err());
    }

    #[test]
    fn heatmap_has_one_cell_per_point() {
        let grid: Vec<(f64, f64)> = (0..3).flat_map(|a| (0..4).map(move |b| (a as f64, b as f64))).collect();
        let svg = to_svg(&sample(SweepKind::StateGrid, &grid)).unwrap();
        assert_eq!(svg.matches("class=\"cell\"").count(), 12);
    }

    #[test]
    fn line_plot_has_one_series_per_kappa() {
        let r = sample(SweepKind::Detuning, &[(0.1, 4.0), (0.1, 5.0), (1.0, 4.0), (1.0, 5.0), (10.0, 4.0), (10.0, 5.0)]);
        let svg = to_svg(&r).unwrap();
        assert_eq!(svg.matches("class=\"series\"").count(), 3);
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn empty_result_is_an_error() {
        assert!(to_svg(&sample(SweepKind::Coupling, &[])).is_err());
    }
}
