//! CSV and SVG output for risk curves.

use std::fmt::Write as _;
use std::path::Path;

use super::{RiskCurve, RiskRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "code,B,mean_risk,std_risk,n_trials,lower_bound,upper_bound";

/// Render a curve as CSV. Floats use Rust's shortest round-trip scientific
/// form, so parsing the output recovers every value exactly.
pub fn write_csv(curve: &RiskCurve) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &curve.rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{},{:e},{:e}",
            r.code, r.bits, r.mean_risk, r.std_risk, r.n_trials, r.lower_bound, r.upper_bound
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn emit_csv(curve: &RiskCurve, path: &Path) -> Result<()> {
    if curve.rows.is_empty() {
        return Err(Error::Config("refusing to write an empty curve".into()));
    }
    std::fs::write(path, write_csv(curve))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<RiskCurve> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected CSV header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!("line {}: expected 7 fields, got {}", i + 2, fields.len())));
        }
        let num = |j: usize| -> Result<f64> {
            fields[j].parse().map_err(|_| Error::Parse(format!("line {}: bad number `{}`", i + 2, fields[j])))
        };
        rows.push(RiskRow {
            code: fields[0].to_string(),
            bits: num(1)?,
            mean_risk: num(2)?,
            std_risk: num(3)?,
            n_trials: fields[4]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad trial count `{}`", i + 2, fields[4])))?,
            lower_bound: num(5)?,
            upper_bound: num(6)?,
        });
    }
    Ok(RiskCurve { rows })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Risk-versus-budget line chart: one solid line per code plus the dashed
/// minimax lower bound.
pub fn write_svg(curve: &RiskCurve, log_y: bool) -> Result<String> {
    if curve.rows.is_empty() {
        return Err(Error::Config("cannot plot an empty curve".into()));
    }
    let mut codes: Vec<&str> = Vec::new();
    for r in &curve.rows {
        if !codes.contains(&r.code.as_str()) {
            codes.push(&r.code);
        }
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for r in &curve.rows {
        if !lower.iter().any(|(b, _)| *b == r.bits) {
            lower.push((r.bits, r.lower_bound));
        }
    }
    lower.sort_by(|a, b| a.0.total_cmp(&b.0));

    let ys = curve.rows.iter().flat_map(|r| [r.mean_risk, r.lower_bound]);
    let ys: Vec<f64> = if log_y { ys.filter(|y| *y > 0.0).collect() } else { ys.collect() };
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let (mut y_lo, mut y_hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
        (lo.min(ty(*y)), hi.max(ty(*y)))
    });
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if !log_y {
        y_lo = y_lo.min(0.0);
    }
    if y_hi - y_lo < 1e-12 {
        y_hi = y_lo + 1.0;
    }
    let (x_lo, x_hi) = curve.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.bits), hi.max(r.bits))
    });
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |b: f64| MARGIN + (b - x_lo) / x_span * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (ty(y) - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);
    let path = |pts: &[(f64, f64)]| -> String {
        pts.iter()
            .filter(|(_, y)| !log_y || *y > 0.0)
            .map(|(b, y)| format!("{:.2},{:.2}", px(*b), py(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(w, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for (b, _) in &lower {
        let _ = writeln!(w, r#"<text x="{:.2}" y="{}" text-anchor="middle">{b}</text>"#, px(*b), y0 + 18.0);
    }
    for k in 0..=4 {
        let t = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let label = if log_y { format!("1e{t:.1}") } else { format!("{t:.3}") };
        let y = HEIGHT - MARGIN - k as f64 / 4.0 * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(w, r#"<text x="{}" y="{y:.2}" text-anchor="end">{label}</text>"#, x0 - 6.0);
    }
    let _ = writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">bits per dimension B</text>"#, WIDTH / 2.0, HEIGHT - 15.0);
    let risk_label = if log_y { "risk (log scale)" } else { "risk" };
    let _ = writeln!(w, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{risk_label}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    let _ = writeln!(w, r#"<polyline fill="none" stroke="gray" stroke-dasharray="6 4" points="{}"/>"#, path(&lower));
    for (i, code) in codes.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = curve.for_code(code).map(|r| (r.bits, r.mean_risk)).collect();
        let _ = writeln!(w, r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#, path(&pts));
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(w, r#"<text x="{}" y="{ly}" fill="{colour}">{code}</text>"#, WIDTH - MARGIN - 80.0);
    }
    let ly = MARGIN + 16.0 * codes.len() as f64;
    let _ = writeln!(w, r#"<text x="{}" y="{ly}" fill="gray">lower bound</text>"#, WIDTH - MARGIN - 80.0);
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_svg(curve: &RiskCurve, path: &Path, log_y: bool) -> Result<()> {
    std::fs::write(path, write_svg(curve, log_y)?)?;
    Ok(())
}
