use super::{BenchReport, MethodResult};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// One polyline of an SVG chart.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Minimal SVG line chart. With `log_y`, values are plotted as log10 and
/// non-positive or non-finite points are skipped.
pub fn svg_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>], log_y: bool) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let tf = |v: f64| if log_y { if v > 0.0 && v.is_finite() { Some(v.log10()) } else { None } } else { v.is_finite().then_some(v) };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.x.iter().zip(s.y).filter_map(|(&x, &y)| tf(y).map(|y| (x, y))).collect())
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.3e}") };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.4}</text>"#, sx(fx), h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{ylab}</text>"#, m - 4.0, sy(fy) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, w / 2.0, h - 16.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{ylabel}</text>"#, h / 2.0, h / 2.0);
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let col = COLORS[i % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{col}">{}</text>"#, w - m + 4.0, m + 14.0 * i as f64, ser.label);
    }
    s.push_str("</svg>\n");
    s
}

fn curve_csv(r: &MethodResult) -> String {
    let mut s = String::from("order,np,nq,l2l2,l1l1,linflinf,unstable\n");
    for c in &r.curve {
        let _ = writeln!(s, "{},{},{},{:e},{:e},{:e},{}", c.order, c.np, c.nq, c.l2l2, c.l1l1, c.linf, c.unstable as u8);
    }
    s
}

/// Writes report.csv, curves/<method>.csv, plots/<method>.svg, plots/all.svg and
/// meta.json into `dir`.
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    mkdir(&dir.join("curves"))?;
    mkdir(&dir.join("plots"))?;
    let mut table = String::from("method,morscore,offline_s,online_s,unstable_orders,min_error\n");
    for r in &report.methods {
        let unstable = r.curve.iter().filter(|c| c.unstable).count();
        let min = r.curve.iter().map(|c| c.l2l2).fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            table,
            "{},{:.6},{:.3},{:.3},{},{:e}",
            r.method, r.morscore, r.offline_seconds, r.online_seconds, unstable, min
        );
        write(&dir.join("curves").join(format!("{}.csv", r.method)), &curve_csv(r))?;
        let x: Vec<f64> = r.curve.iter().map(|c| c.order as f64).collect();
        let y: Vec<f64> = r.curve.iter().map(|c| c.l2l2).collect();
        let svg = svg_chart(
            &format!("{} (MORscore {:.3})", r.method, r.morscore),
            "reduced order",
            "relative L2xL2 error",
            &[Series { label: &r.method, x: &x, y: &y }],
            true,
        );
        write(&dir.join("plots").join(format!("{}.svg", r.method)), &svg)?;
    }
    write(&dir.join("report.csv"), &table)?;
    let xs: Vec<Vec<f64>> = report.methods.iter().map(|r| r.curve.iter().map(|c| c.order as f64).collect()).collect();
    let ys: Vec<Vec<f64>> = report.methods.iter().map(|r| r.curve.iter().map(|c| c.l2l2).collect()).collect();
    let series: Vec<Series<'_>> = report
        .methods
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(r, (x, y))| Series { label: &r.method, x, y })
        .collect();
    write(&dir.join("plots").join("all.svg"), &svg_chart("error decay", "reduced order", "relative L2xL2 error", &series, true))?;
    let meta = serde_json::to_string_pretty(&report.meta).map_err(|e| Error::Invalid(e.to_string()))?;
    write(&dir.join("meta.json"), &meta)
}

/// Writes a trajectory as CSV (t, outputs…) and an SVG chart of the outputs.
pub fn write_solution(t: &[f64], y: &nalgebra::DMatrix<f64>, labels: &[String], csv: &Path, svg: Option<&Path>) -> Result<()> {
    let mut s = String::from("t");
    for l in labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (k, tk) in t.iter().enumerate() {
        let _ = write!(s, "{tk}");
        for i in 0..y.nrows() {
            let _ = write!(s, ",{:e}", y[(i, k)]);
        }
        s.push('\n');
    }
    write(csv, &s)?;
    if let Some(svg) = svg {
        let rows: Vec<Vec<f64>> = (0..y.nrows()).map(|i| y.row(i).iter().copied().collect()).collect();
        let series: Vec<Series<'_>> =
            labels.iter().zip(&rows).map(|(l, r)| Series { label: l, x: t, y: r }).collect();
        write(svg, &svg_chart("outputs", "t [s]", "value", &series, false))?;
    }
    Ok(())
}
