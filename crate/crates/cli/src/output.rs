use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nozzle_core::{DiscreteField, FreeBoundaryCurves, ShearProfile, VelocityField};
use serde::Serialize;

/// 17 significant digits: enough to read every `f64` back exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated table with a header row and LF line endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn field_csv(field: &DiscreteField, vel: &VelocityField) -> Csv {
    let g = &field.grid;
    let mut csv = Csv::new(&["x1", "x2", "psi", "u1", "u2"]);
    for i in 0..g.nx {
        for j in 0..g.ns {
            let n = g.index(i, j);
            csv.row(&[num(g.x1[i]), num(g.x2(i, j)), num(field.psi[n]), num(vel.u1[n]), num(vel.u2[n])]);
        }
    }
    csv
}

/// Rows of a field dump, in the order they were written.
pub fn read_field_csv(path: &Path) -> Result<Vec<[f64; 5]>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    if lines.next() != Some("x1,x2,psi,u1,u2") {
        bail!("{}: unexpected header", path.display());
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let cells: Vec<f64> = line
                .split(',')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("{}: line {}", path.display(), k + 2))?;
            <[f64; 5]>::try_from(cells).map_err(|c| anyhow::anyhow!("line {}: {} cells", k + 2, c.len()))
        })
        .collect()
}

pub fn free_boundary_csv(curves: &FreeBoundaryCurves) -> Csv {
    let mut csv = Csv::new(&["x1", "h0", "h1", "lower", "upper", "lower_contact", "upper_contact"]);
    for i in 0..curves.x1.len() {
        csv.row(&[
            num(curves.x1[i]),
            num(curves.h0[i]),
            num(curves.h1[i]),
            num(curves.lower[i]),
            num(curves.upper[i]),
            u8::from(curves.lower_contact[i]).to_string(),
            u8::from(curves.upper_contact[i]).to_string(),
        ]);
    }
    csv
}

pub fn profile_csv(profile: &ShearProfile) -> Csv {
    let mut csv = Csv::new(&["x2", "phi", "dphi"]);
    for k in 0..profile.nodes.len() {
        csv.row(&[num(profile.nodes[k]), num(profile.values[k]), num(profile.slopes[k])]);
    }
    csv
}

pub fn trace_csv(trace: &[f64]) -> Csv {
    let mut csv = Csv::new(&["sweep", "energy"]);
    for (k, e) in trace.iter().enumerate() {
        csv.row(&[k.to_string(), num(*e)]);
    }
    csv
}

/// Nine significant digits, without an exponent.
fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".into();
    }
    let decimals = (8 - v.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

const WIDTH: f64 = 1000.0;
const MARGIN: f64 = 20.0;

/// Static SVG of the walls, ψ contours at `kQ/10` and the free boundaries.
pub fn plot_svg(field: &DiscreteField, curves: Option<&FreeBoundaryCurves>) -> String {
    let g = &field.grid;
    let q = field.consts.q();
    let y_min = g.h0.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = g.h1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (WIDTH - 2.0 * MARGIN) / (2.0 * g.half_length);
    let height = (y_max - y_min) * scale + 2.0 * MARGIN;
    let map = |x: f64, y: f64| (MARGIN + (x + g.half_length) * scale, height - MARGIN - (y - y_min) * scale);
    let polyline = |xs: &[f64], ys: &[f64]| {
        let mut d = String::new();
        for (k, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let (px, py) = map(x, y);
            let _ = write!(d, "{}{},{}", if k == 0 { "M" } else { " L" }, sig9(px), sig9(py));
        }
        d
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        sig9(WIDTH),
        sig9(height),
        sig9(WIDTH),
        sig9(height)
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for level in 1..10 {
        let target = q * level as f64 / 10.0;
        let mut d = String::new();
        for (a, b) in contour_segments(field, target) {
            let (ax, ay) = map(a[0], a[1]);
            let (bx, by) = map(b[0], b[1]);
            let _ = write!(d, "M{},{} L{},{} ", sig9(ax), sig9(ay), sig9(bx), sig9(by));
        }
        let _ = writeln!(svg, r##"<path d="{}" fill="none" stroke="#3060c0" stroke-width="1"/>"##, d.trim_end());
    }
    if let Some(c) = curves {
        for ys in [&c.lower, &c.upper] {
            let _ = writeln!(
                svg,
                r##"<path d="{}" fill="none" stroke="#c03020" stroke-width="1.5" stroke-dasharray="6 3"/>"##,
                polyline(&c.x1, ys)
            );
        }
    }
    for ys in [&g.h0, &g.h1] {
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="black" stroke-width="2"/>"#, polyline(&g.x1, ys));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Marching squares on the logical grid; crossings are placed by linear
/// interpolation between the physical positions of the cell corners.
fn contour_segments(field: &DiscreteField, level: f64) -> Vec<([f64; 2], [f64; 2])> {
    let g = &field.grid;
    let pos = |i: usize, j: usize| [g.x1[i], g.x2(i, j)];
    let mut out = Vec::new();
    for i in 0..g.nx - 1 {
        for j in 0..g.ns - 1 {
            // Corners counter-clockwise from bottom-left.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v = c.map(|(a, b)| field.value(a, b));
            let mut points = Vec::with_capacity(4);
            for e in 0..4 {
                let (p, r) = (e, (e + 1) % 4);
                if (v[p] < level) != (v[r] < level) {
                    let t = (level - v[p]) / (v[r] - v[p]);
                    let (a, b) = (pos(c[p].0, c[p].1), pos(c[r].0, c[r].1));
                    points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
            for pair in points.chunks_exact(2) {
                out.push((pair[0], pair[1]));
            }
        }
    }
    out
}
