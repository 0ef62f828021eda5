//! Nozzle walls, truncated computational grids and lateral boundary data.

mod grid;
mod spline;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{boundary_data, build_grid, BoundaryData, CurvilinearGrid};
pub use spline::ClampedSpline;

/// `((1 + cos πt)/2)²` on `|t| < 1`; vanishes with three derivatives at `|t| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    fn eval(&self, x: f64) -> [f64; 3] {
        let w = self.half_width;
        let t = (x - self.center) / w;
        if t.abs() >= 1.0 {
            return [0.0; 3];
        }
        let (sin, cos) = (PI * t).sin_cos();
        let u = 0.5 * (1.0 + cos);
        let du = -0.5 * PI * sin / w;
        let ddu = -0.5 * PI * PI * cos / (w * w);
        let a = self.amplitude;
        [a * u * u, a * 2.0 * u * du, a * 2.0 * (du * du + u * ddu)]
    }

    /// `∫ bump dx = 3/4 · amplitude · half_width`.
    pub fn area(&self) -> f64 {
        0.75 * self.amplitude * self.half_width
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// Quintic smooth step `6t⁵ - 15t⁴ + 10t³` from 0 to `rise` over `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub rise: f64,
    pub start: f64,
    pub end: f64,
}

impl Ramp {
    fn eval(&self, x: f64) -> [f64; 3] {
        if x <= self.start {
            return [0.0; 3];
        }
        if x >= self.end {
            return [self.rise, 0.0, 0.0];
        }
        let l = self.end - self.start;
        let t = (x - self.start) / l;
        let s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        let ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        let dds = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
        [self.rise * s, self.rise * ds / l, self.rise * dds / (l * l)]
    }
}

/// One wall of the nozzle as a function of x₁.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Blend { base: f64, bumps: Vec<Bump>, ramps: Vec<Ramp> },
    Spline(ClampedSpline),
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve::Blend { base: value, bumps: Vec::new(), ramps: Vec::new() }
    }

    /// Value, first and second derivative at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        match self {
            Curve::Blend { base, bumps, ramps } => {
                let mut out = [*base, 0.0, 0.0];
                for part in bumps.iter().map(|b| b.eval(x)).chain(ramps.iter().map(|r| r.eval(x))) {
                    for k in 0..3 {
                        out[k] += part[k];
                    }
                }
                out
            }
            Curve::Spline(s) => s.eval(x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    // Points where the curve stops being smooth or changes shape.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Curve::Blend { bumps, ramps, .. } => bumps
                .iter()
                .flat_map(|b| {
                    let (l, r) = b.support();
                    [l, b.center, r]
                })
                .chain(ramps.iter().flat_map(|r| [r.start, r.end]))
                .collect(),
            Curve::Spline(s) => s.knots().to_vec(),
        }
    }
}

/// A nozzle `{h0(x₁) < x₂ < h1(x₁)}` that is the unit strip for
/// `x₁ <= underline_l` and the strip `(a, b)` for `x₁ >= bar_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct NozzleGeometry {
    pub name: String,
    pub lower: Curve,
    pub upper: Curve,
    pub underline_l: f64,
    pub bar_l: f64,
    pub a: f64,
    pub b: f64,
}

/// Sampled bounds on wall derivatives over the non-flat section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    pub max_slope: f64,
    pub max_curvature: f64,
    /// Largest second derivative estimated by divided differences of the slope.
    pub max_divided_curvature: f64,
}

impl NozzleGeometry {
    pub fn h0(&self, x1: f64) -> f64 {
        self.lower.value(x1)
    }

    pub fn h1(&self, x1: f64) -> f64 {
        self.upper.value(x1)
    }

    pub fn height(&self, x1: f64) -> f64 {
        self.h1(x1) - self.h0(x1)
    }

    /// `L₀ = max(bar_L, -underline_L)`, the smallest admissible truncation.
    pub fn flat_threshold(&self) -> f64 {
        self.bar_l.max(-self.underline_l)
    }

    fn sample_points(&self) -> Vec<f64> {
        let (lo, hi) = (self.underline_l - 1.0, self.bar_l + 1.0);
        let n = 4000;
        let mut xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        xs.extend(self.lower.breakpoints());
        xs.extend(self.upper.breakpoints());
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Checks the wall ordering, flatness and far-field heights.
    pub fn validate(&self) -> Result<()> {
        if !(self.underline_l < 0.0 && self.bar_l > 0.0) {
            return Err(Error::Validation(format!(
                "flatness thresholds must satisfy underline_L < 0 < bar_L, got {} and {}",
                self.underline_l, self.bar_l
            )));
        }
        if !(0.0 <= self.a && self.a < self.b && self.b <= 1.0) {
            return Err(Error::Validation(format!(
                "downstream heights must satisfy 0 <= a < b <= 1, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        for x in self.sample_points() {
            let l = self.lower.eval(x);
            let u = self.upper.eval(x);
            if l.iter().chain(&u).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("wall is not finite at x1 = {x}")));
            }
            if u[0] <= l[0] {
                return Err(Error::Validation(format!("h1 <= h0 at x1 = {x} (h0 = {}, h1 = {})", l[0], u[0])));
            }
            let (want_l, want_u) = if x <= self.underline_l {
                (0.0, 1.0)
            } else if x >= self.bar_l {
                (self.a, self.b)
            } else {
                continue;
            };
            if (l[0] - want_l).abs() > 1e-12 || (u[0] - want_u).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "walls are not flat at x1 = {x}: expected ({want_l}, {want_u}), got ({}, {})",
                    l[0], u[0]
                )));
            }
        }
        Ok(())
    }

    pub fn regularity(&self) -> RegularityReport {
        let xs = self.sample_points();
        let mut report = RegularityReport { max_slope: 0.0, max_curvature: 0.0, max_divided_curvature: 0.0 };
        for curve in [&self.lower, &self.upper] {
            let evals: Vec<[f64; 3]> = xs.iter().map(|&x| curve.eval(x)).collect();
            for (k, e) in evals.iter().enumerate() {
                report.max_slope = report.max_slope.max(e[1].abs());
                report.max_curvature = report.max_curvature.max(e[2].abs());
                if k > 0 && xs[k] > xs[k - 1] {
                    let dd = (e[1] - evals[k - 1][1]) / (xs[k] - xs[k - 1]);
                    report.max_divided_curvature = report.max_divided_curvature.max(dd.abs());
                }
            }
        }
        report
    }

    /// True when the walls are `h0 ≡ 0`, `h1 ≡ 1` on the sampled range.
    pub fn is_straight(&self) -> bool {
        self.sample_points().into_iter().all(|x| self.h0(x).abs() <= 1e-12 && (self.h1(x) - 1.0).abs() <= 1e-12)
    }
}

/// A preset parameter: a number or an `(x₁, h)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Table(Vec<[f64; 2]>),
}

pub type PresetParams = BTreeMap<String, ParamValue>;

pub const PRESET_NAMES: [&str; 5] = ["straight", "symmetric-bump", "bottom-bump", "top-flat-bottom-bump", "sampled"];

struct ParamReader<'a> {
    params: &'a PresetParams,
    used: BTreeSet<&'static str>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a PresetParams) -> Self {
        ParamReader { params, used: BTreeSet::new() }
    }

    fn number(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.used.insert(key);
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(Error::Validation(format!("parameter `{key}` must be a finite number, got {other:?}"))),
        }
    }

    fn table(&mut self, key: &'static str) -> Result<&'a [[f64; 2]]> {
        self.used.insert(key);
        match self.params.get(key) {
            Some(ParamValue::Table(t)) => Ok(t),
            Some(_) => Err(Error::Validation(format!("parameter `{key}` must be a table of [x1, h] pairs"))),
            None => Err(Error::Validation(format!("missing table parameter `{key}`"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.params.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::Validation(format!("unknown geometry parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

fn bump_from(reader: &mut ParamReader, amplitude: f64) -> Result<Bump> {
    let amplitude = reader.number("amplitude", amplitude)?;
    let center = reader.number("center", 0.0)?;
    let half_width = reader.number("width", 2.0)?;
    if half_width <= 0.0 {
        return Err(Error::Validation(format!("bump width must be positive, got {half_width}")));
    }
    Ok(Bump { amplitude, center, half_width })
}

/// Builds one of the named nozzle shapes and validates it.
///
/// * `straight`: the unit strip.
/// * `symmetric-bump`: `h0 = -A·β`, `h1 = 1 + A·β` (params `amplitude` = 0.2, `center`, `width`).
/// * `top-flat-bottom-bump`: `h1 ≡ 1`, `h0 = A·β` (`amplitude` = -0.2).
/// * `bottom-bump`: `h0 = A·β + a·S`, `h1 = 1 + (b-1)·S` with a smooth step `S`
///   over `[ramp_start, ramp_end]` (defaults to the bump support).
/// * `sampled`: clamped cubic splines through the `lower` and `upper` tables.
pub fn preset_geometry(name: &str, params: &PresetParams) -> Result<NozzleGeometry> {
    let mut reader = ParamReader::new(params);
    let geom = match name {
        "straight" => NozzleGeometry {
            name: name.into(),
            lower: Curve::constant(0.0),
            upper: Curve::constant(1.0),
            underline_l: -1.0,
            bar_l: 1.0,
            a: 0.0,
            b: 1.0,
        },
        "symmetric-bump" => {
            let bump = bump_from(&mut reader, 0.2)?;
            let (l, r) = bump.support();
            NozzleGeometry {
                name: name.into(),
                lower: Curve::Blend {
                    base: 0.0,
                    bumps: vec![Bump { amplitude: -bump.amplitude, ..bump }],
                    ramps: vec![],
                },
                upper: Curve::Blend { base: 1.0, bumps: vec![bump], ramps: vec![] },
                underline_l: l,
                bar_l: r,
                a: 0.0,
                b: 1.0,
            }
        }
        "top-flat-bottom-bump" => {
            let bump = bump_from(&mut reader, -0.2)?;
            let (l, r) = bump.support();
            NozzleGeometry {
                name: name.into(),
                lower: Curve::Blend { base: 0.0, bumps: vec![bump], ramps: vec![] },
                upper: Curve::constant(1.0),
                underline_l: l,
                bar_l: r,
                a: 0.0,
                b: 1.0,
            }
        }
        "bottom-bump" => {
            let bump = bump_from(&mut reader, -0.2)?;
            let (l, r) = bump.support();
            let a = reader.number("a", 0.0)?;
            let b = reader.number("b", 1.0)?;
            let start = reader.number("ramp_start", l)?;
            let end = reader.number("ramp_end", r)?;
            if end <= start {
                return Err(Error::Validation(format!("ramp_end {end} must exceed ramp_start {start}")));
            }
            NozzleGeometry {
                name: name.into(),
                lower: Curve::Blend { base: 0.0, bumps: vec![bump], ramps: vec![Ramp { rise: a, start, end }] },
                upper: Curve::Blend { base: 1.0, bumps: vec![], ramps: vec![Ramp { rise: b - 1.0, start, end }] },
                underline_l: l.min(start),
                bar_l: r.max(end),
                a,
                b,
            }
        }
        "sampled" => {
            let lower = ClampedSpline::new(reader.table("lower")?)?;
            let upper = ClampedSpline::new(reader.table("upper")?)?;
            if lower.first_value().abs() > 1e-12 || (upper.first_value() - 1.0).abs() > 1e-12 {
                return Err(Error::Validation("sampled walls must start at h0 = 0 and h1 = 1".into()));
            }
            NozzleGeometry {
                name: name.into(),
                underline_l: lower.first_x().min(upper.first_x()),
                bar_l: lower.last_x().max(upper.last_x()),
                a: lower.last_value(),
                b: upper.last_value(),
                lower: Curve::Spline(lower),
                upper: Curve::Spline(upper),
            }
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown geometry preset `{other}` (expected one of {PRESET_NAMES:?})"
            )))
        }
    };
    reader.finish()?;
    geom.validate()?;
    Ok(geom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> PresetParams {
        pairs.iter().map(|(k, v)| (k.to_string(), ParamValue::Number(*v))).collect()
    }

    #[test]
    fn straight_is_the_unit_strip() {
        let g = preset_geometry("straight", &PresetParams::new()).unwrap();
        for x in [-50.0, -1.0, 0.0, 3.3, 100.0] {
            assert_eq!(g.h0(x), 0.0);
            assert_eq!(g.h1(x), 1.0);
        }
        assert!(g.is_straight());
    }

    #[test]
    fn symmetric_bump_peak() {
        let g = preset_geometry("symmetric-bump", &params(&[("amplitude", 0.2)])).unwrap();
        assert!((g.h0(0.0) + 0.2).abs() < 1e-15);
        assert!((g.h1(0.0) - 1.2).abs() < 1e-15);
        for x in [-1.3, 0.4, 1.9] {
            assert!((g.h1(x) - (1.0 - g.h0(x))).abs() < 1e-15);
        }
        assert!(!g.is_straight());
    }

    #[test]
    fn top_flat_bottom_bump() {
        let g = preset_geometry("top-flat-bottom-bump", &params(&[("amplitude", -0.2)])).unwrap();
        let xs: Vec<f64> = (0..=400).map(|k| -3.0 + 6.0 * k as f64 / 400.0).collect();
        assert!(xs.iter().all(|&x| g.h1(x) == 1.0));
        let min = xs.iter().map(|&x| g.h0(x)).fold(f64::INFINITY, f64::min);
        assert!((min + 0.2).abs() < 1e-12);
    }

    #[test]
    fn flat_tails() {
        let g = preset_geometry("bottom-bump", &params(&[("amplitude", 0.1), ("a", 0.2), ("b", 0.8), ("width", 1.5)]))
            .unwrap();
        for k in 0..100 {
            let x = g.underline_l - 0.05 * k as f64;
            assert!(g.h0(x).abs() <= 1e-12 && (g.h1(x) - 1.0).abs() <= 1e-12);
            let x = g.bar_l + 0.05 * k as f64;
            assert!((g.h0(x) - 0.2).abs() <= 1e-12 && (g.h1(x) - 0.8).abs() <= 1e-12);
        }
        assert_eq!(g.flat_threshold(), 1.5);
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = Bump { amplitude: 0.3, center: 0.2, half_width: 1.1 };
        let h = 1e-5;
        for k in 0..50 {
            let x = -1.0 + 2.4 * k as f64 / 50.0;
            let e = b.eval(x);
            let fd1 = (b.eval(x + h)[0] - b.eval(x - h)[0]) / (2.0 * h);
            let fd2 = (b.eval(x + h)[1] - b.eval(x - h)[1]) / (2.0 * h);
            assert!((e[1] - fd1).abs() < 1e-8);
            assert!((e[2] - fd2).abs() < 1e-7);
        }
    }

    #[test]
    fn crossing_walls_are_rejected_with_location() {
        let err = preset_geometry("symmetric-bump", &params(&[("amplitude", -0.6)])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("h1 <= h0 at x1 ="), "{msg}");
    }

    #[test]
    fn unknown_keys_and_presets_are_rejected() {
        assert!(preset_geometry("straight", &params(&[("amplitude", 0.1)])).is_err());
        assert!(preset_geometry("funnel", &PresetParams::new()).is_err());
        assert!(preset_geometry("bottom-bump", &params(&[("a", 0.5), ("b", 0.4)])).is_err());
    }

    #[test]
    fn sampled_tables() {
        let mut p = PresetParams::new();
        p.insert("lower".into(), ParamValue::Table(vec![[-2.0, 0.0], [0.0, -0.15], [2.0, 0.1]]));
        p.insert("upper".into(), ParamValue::Table(vec![[-2.0, 1.0], [2.0, 0.9]]));
        let g = preset_geometry("sampled", &p).unwrap();
        assert_eq!((g.a, g.b), (0.1, 0.9));
        assert!((g.h0(0.0) + 0.15).abs() < 1e-14);
        assert!(g.regularity().max_curvature.is_finite());

        p.insert("lower".into(), ParamValue::Table(vec![[-2.0, 0.1], [2.0, 0.1]]));
        assert!(preset_geometry("sampled", &p).is_err());
    }
}
