//! Per-curve CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use super::{Curve, SweepResult};
use crate::corpus::{read_text_file, write_text};
use crate::error::{Error, Result};
use crate::fmt::{parse_opt, sig9};

pub const CURVE_HEADER: &str =
    "fraction_percent,dprime_mean,dprime_min,dprime_max,lwlrap_mean,lwlrap_min,lwlrap_max";

fn curve_csv(curve: &Curve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.fraction_percent,
            sig9(p.dprime.mean),
            sig9(p.dprime.min),
            sig9(p.dprime.max),
            sig9(p.lwlrap.mean),
            sig9(p.lwlrap.min),
            sig9(p.lwlrap.max),
        );
    }
    out
}

/// Parses a curve CSV into rows of seven values (`NaN` for `NA`).
pub fn read_curve_csv(path: &Path) -> Result<Vec<[f64; 7]>> {
    let text = read_text_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Header {
            path: path.to_path_buf(),
            reason: "unexpected curve header".into(),
        });
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::parse(path, i + 2, format!("expected 7 fields, got {}", fields.len())));
            }
            let mut row = [0.0; 7];
            for (slot, f) in row.iter_mut().zip(&fields) {
                *slot = if *f == "NA" {
                    f64::NAN
                } else {
                    parse_opt(f).ok_or_else(|| Error::parse(path, i + 2, format!("bad number `{f}`")))?
                };
            }
            Ok(row)
        })
        .collect()
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 60.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Both metrics against discard percentage, d' on the left axis and lwlrap
/// on the right. The 0% baseline is drawn as a square.
pub fn render_svg(curve: &Curve) -> String {
    let pts: Vec<_> = curve.points.iter().filter(|p| !p.all_failed()).collect();
    let xmax = pts.iter().map(|p| p.fraction_percent).fold(1.0, f64::max);
    let (d_lo, d_hi) = range(pts.iter().map(|p| p.dprime.mean));
    let (l_lo, l_hi) = range(pts.iter().map(|p| p.lwlrap.mean));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + pw * x / xmax;
    let sy = |v: f64, lo: f64, hi: f64| TOP + ph * (1.0 - (v - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{} corpus, {} model</title>"#, curve.size, curve.capacity);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let x = LEFT + pw * f;
        let y = TOP + ph * (1.0 - f);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, TOP + ph + 15.0, xmax * f);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" fill="steelblue">{:.3}</text>"#, LEFT - 4.0, d_lo + (d_hi - d_lo) * f);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" fill="darkorange">{:.3}</text>"#, W - RIGHT + 4.0, l_lo + (l_hi - l_lo) * f);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">discarded implicit negatives (%)</text>"#, LEFT + pw / 2.0, H - 10.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.1}" fill="steelblue" transform="rotate(-90 14 {:.1})" text-anchor="middle">d'</text>"#, TOP + ph / 2.0, TOP + ph / 2.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="darkorange" transform="rotate(90 {:.1} {:.1})" text-anchor="middle">lwlrap</text>"#, W - 14.0, TOP + ph / 2.0, W - 14.0, TOP + ph / 2.0);

    for (color, lo, hi, get) in [
        ("steelblue", d_lo, d_hi, (|p: &super::OperatingPoint| p.dprime.mean) as fn(&super::OperatingPoint) -> f64),
        ("darkorange", l_lo, l_hi, |p: &super::OperatingPoint| p.lwlrap.mean),
    ] {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| get(p).is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.fraction_percent), sy(get(p), lo, hi)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        for p in &pts {
            let v = get(p);
            if !v.is_finite() {
                continue;
            }
            let (x, y) = (sx(p.fraction_percent), sy(v, lo, hi));
            if p.fraction_percent == 0.0 {
                let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{color}"/>"#, x - 4.0, y - 4.0);
            } else {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<size>_<capacity>.csv` and `.svg` for every curve into `dir`.
pub fn emit_curves(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for curve in &result.curves {
        let stem = format!("{}_{}", curve.size, curve.capacity);
        write_text(&dir.join(format!("{stem}.csv")), curve_csv(curve))?;
        write_text(&dir.join(format!("{stem}.svg")), render_svg(curve))?;
    }
    Ok(())
}
