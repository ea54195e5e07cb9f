//! Minimal SVG line plot for group-size sweeps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One curve: a label and per-seed series of equal length.
pub struct Series {
    pub label: String,
    pub runs: Vec<Vec<f64>>,
}

fn mean_std(runs: &[Vec<f64>], i: usize) -> (f64, f64) {
    let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(i).copied()).collect();
    let n = vals.len().max(1) as f64;
    let m = vals.iter().sum::<f64>() / n;
    let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Mean curve per series with a ±1 std band across runs.
pub fn reward_curves(title: &str, series: &[Series]) -> String {
    let steps = series.iter().flat_map(|s| s.runs.iter().map(Vec::len)).max().unwrap_or(0);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let bands: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| (0..steps).map(|i| mean_std(&s.runs, i)).collect())
        .collect();
    for (m, sd) in bands.iter().flatten() {
        lo = lo.min(m - sd);
        hi = hi.max(m + sd);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (steps.max(2) - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">step</text>"#, WIDTH / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" text-anchor="end" font-size="10">{lo:.3}</text><text x="{MARGIN}" y="{}" text-anchor="end" font-size="10">{hi:.3}</text>"#,
        HEIGHT - MARGIN + 12.0,
        MARGIN - 4.0
    );
    for (k, (ser, band)) in series.iter().zip(&bands).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if band.is_empty() {
            continue;
        }
        let mut poly = String::new();
        for (i, (m, sd)) in band.iter().enumerate() {
            let _ = write!(poly, "{:.2},{:.2} ", x(i), y(m + sd));
        }
        for (i, (m, sd)) in band.iter().enumerate().rev() {
            let _ = write!(poly, "{:.2},{:.2} ", x(i), y(m - sd));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.trim_end());
        let line: Vec<String> = band.iter().enumerate().map(|(i, (m, _))| format!("{:.2},{:.2}", x(i), y(*m))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 80.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
