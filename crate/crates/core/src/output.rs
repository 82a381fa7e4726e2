//! Trajectory CSV, SVG plots and the text summary.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{Experiment, SummaryRow};
use crate::trajectory::Trajectory;

pub const CSV_HEADER: &str = "step,max_x,attention_bus,alpha_s,event,u_norm,violation";

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
/// Polylines are thinned to about this many points.
const MAX_POINTS: usize = 2000;

/// Nine significant digits.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (t.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &t.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            sig9(r.max_x),
            r.attention_bus,
            sig9(r.alpha_s),
            r.events,
            sig9(r.u_norm),
            u8::from(r.violation)
        );
    }
    out
}

pub fn emit_csv(t: &Trajectory, path: &Path) -> Result<()> {
    std::fs::write(path, trajectory_csv(t)).map_err(|e| Error::io(path, e))
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        MARGIN_L + (x - self.x0) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - MARGIN_B - (y - self.y0) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line plot with a dashed horizontal limit and a legend.
pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], limit: f64) -> String {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, limit, limit);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
    }
    let pad = 0.05 * (y1 - y0).max(1e-6);
    let frame = Frame { x0, x1, y0: y0 - pad, y1: y1 + pad };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#, (MARGIN_L + WIDTH - MARGIN_R) / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN_L, WIDTH - MARGIN_R, MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, right - left, bottom - top);
    for t in nice_ticks(frame.x0, frame.x1) {
        let px = frame.px(t);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.1}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, bottom + 18.0, tick_label(t));
    }
    for t in nice_ticks(frame.y0, frame.y1) {
        let py = frame.py(t);
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, py + 4.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
    let ly = frame.py(limit);
    let _ = writeln!(s, r##"<line x1="{left}" y1="{ly:.2}" x2="{right}" y2="{ly:.2}" stroke="#777777" stroke-dasharray="6,4"/>"##);

    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let stride = points.len().div_ceil(MAX_POINTS).max(1);
        let mut thinned: Vec<&(f64, f64)> = points.iter().step_by(stride).collect();
        if let Some(last) = points.last() {
            if !std::ptr::eq(*thinned.last().unwrap_or(&last), last) {
                thinned.push(last);
            }
        }
        if thinned.len() == 1 {
            let (x, y) = *thinned[0];
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, frame.px(x), frame.py(y));
        } else {
            let path: Vec<String> = thinned.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ky = top + 16.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{ky:.1}" x2="{:.1}" y2="{ky:.1}" stroke="{color}" stroke-width="2"/>"#, right + 12.0, right + 32.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, right + 38.0, ky + 4.0, escape(name));
    }
    let ky = top + 16.0 + 18.0 * series.len() as f64;
    let _ = writeln!(s, r##"<line x1="{:.1}" y1="{ky:.1}" x2="{:.1}" y2="{ky:.1}" stroke="#777777" stroke-dasharray="6,4"/>"##, right + 12.0, right + 32.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">limit</text>"#, right + 38.0, ky + 4.0);
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn kv(nominal_kv: f64, x: f64) -> f64 {
    nominal_kv * (1.0 + x)
}

/// Max voltage against step for each trajectory.
pub fn max_voltage_svg(trajectories: &[&Trajectory], x_bar: f64, nominal_kv: f64) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = trajectories
        .iter()
        .map(|t| (t.method.clone(), t.records.iter().map(|r| (r.step as f64, kv(nominal_kv, r.max_x))).collect()))
        .collect();
    line_plot_svg("Maximum voltage", "step", "max voltage (kV)", &series, kv(nominal_kv, x_bar))
}

pub fn emit_svg(trajectories: &[&Trajectory], x_bar: f64, nominal_kv: f64, path: &Path) -> Result<()> {
    std::fs::write(path, max_voltage_svg(trajectories, x_bar, nominal_kv)).map_err(|e| Error::io(path, e))
}

/// Final voltage at each bus for each trajectory.
pub fn profile_svg(trajectories: &[&Trajectory], x_bar: f64, nominal_kv: f64) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = trajectories
        .iter()
        .map(|t| {
            let x = t.final_x();
            (t.method.clone(), x.iter().enumerate().map(|(k, v)| ((k + 1) as f64, kv(nominal_kv, *v))).collect())
        })
        .collect();
    line_plot_svg("Voltage profile", "bus", "voltage (kV)", &series, kv(nominal_kv, x_bar))
}

pub fn format_summary(ex: &Experiment) -> String {
    format_rows(&ex.summary(), ex.nominal_kv, &ex.name, ex.setup.estimate.relative_error)
}

pub fn format_rows(rows: &[SummaryRow], nominal_kv: f64, name: &str, relative_error: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {name}  (model error {:.1}%)", 100.0 * relative_error);
    let _ = writeln!(s, "{:<14} {:>12} {:>10} {:>8} {:>11} {:>12}  note", "method", "max_x (pu)", "max (kV)", "steps", "violations", "objective");
    for r in rows {
        let max_pu = r.final_max_x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        let max_kv = r.final_max_x.map(|v| format!("{:.3}", kv(nominal_kv, v))).unwrap_or_else(|| "-".into());
        let steps = r.steps_to_convergence.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let obj = r.objective.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:<14} {:>12} {:>10} {:>8} {:>11} {:>12}  {}", r.method.name(), max_pu, max_kv, steps, r.violation_steps, obj, r.note);
    }
    s
}

/// Writes `<method>.csv` for every successful method, `max_voltage.svg`,
/// `profile.svg` and `summary.txt` into `dir`.
pub fn write_experiment(ex: &Experiment, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut all = Vec::new();
    for r in &ex.results {
        if let Ok(t) = &r.outcome {
            emit_csv(t, &dir.join(format!("{}.csv", r.method.name())))?;
            all.push(t);
        }
    }
    let x_bar = ex.setup.config.x_bar.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let iterative: Vec<&Trajectory> =
        ex.results.iter().filter(|r| r.method.iterative()).filter_map(|r| r.outcome.as_ref().ok()).collect();
    if !iterative.is_empty() {
        emit_svg(&iterative, x_bar, ex.nominal_kv, &dir.join("max_voltage.svg"))?;
    }
    if !all.is_empty() {
        let p = dir.join("profile.svg");
        std::fs::write(&p, profile_svg(&all, x_bar, ex.nominal_kv)).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join("summary.txt");
    std::fs::write(&p, format_summary(ex)).map_err(|e| Error::io(&p, e))
}
