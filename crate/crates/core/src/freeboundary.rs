//! Boundaries of the stagnation regions `{ψ = 0}` and `{ψ = Q}` and
//! measurements of their regularity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::minimizer::DiscreteField;

/// Per-column graphs `h̃₀ = sup{x₂ : ψ = 0}` and `h̃₁ = inf{x₂ : ψ = Q}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBoundaryCurves {
    pub eps_fb: f64,
    pub half_length: f64,
    pub x1: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// True where `h̃₀` lies within one cell of `h0`.
    pub lower_contact: Vec<bool>,
    pub upper_contact: Vec<bool>,
}

impl FreeBoundaryCurves {
    /// Area between the walls and the free boundaries (trapezoidal in x₁).
    pub fn stagnation_area(&self) -> f64 {
        let gap: Vec<f64> =
            (0..self.x1.len()).map(|i| (self.lower[i] - self.h0[i]) + (self.h1[i] - self.upper[i])).collect();
        gap.windows(2).zip(self.x1.windows(2)).map(|(g, x)| 0.5 * (g[0] + g[1]) * (x[1] - x[0])).sum()
    }

    /// Columns at distance at least 1 from the lateral sides.
    pub fn inner_columns(&self) -> impl Iterator<Item = usize> + '_ {
        let limit = self.half_length - 1.0;
        (0..self.x1.len()).filter(move |&i| self.x1[i].abs() <= limit + 1e-12)
    }
}

// Zero of the line through (x1, √v1), (x2, √v2), kept inside [lo, hi];
// falls back to linear interpolation of `v - eps` between `lo` and `x1`.
fn sqrt_crossing(lo: f64, v_lo: f64, x1: f64, v1: f64, next: Option<(f64, f64)>, eps: f64) -> f64 {
    if let Some((x2, v2)) = next {
        let (s1, s2) = (v1.max(0.0).sqrt(), v2.max(0.0).sqrt());
        if s2 > s1 && s1 > 0.0 {
            let x = x1 - s1 * (x2 - x1) / (s2 - s1);
            return x.clamp(lo.min(x1), lo.max(x1));
        }
    }
    let t = ((eps - v_lo) / (v1 - v_lo)).clamp(0.0, 1.0);
    lo + t * (x1 - lo)
}

/// Extracts both free boundaries; a column decreasing by more than `eps_fb`
/// between neighbouring nodes is rejected.
pub fn extract_free_boundaries(field: &DiscreteField, eps_fb: f64) -> Result<FreeBoundaryCurves> {
    extract_free_boundaries_with(field, eps_fb, eps_fb)
}

/// As [`extract_free_boundaries`] with a separate tolerance for column monotonicity.
///
/// The sub-cell position is the zero of the line through `√ψ` at the first
/// two wet nodes (`√(Q - ψ)` for the upper boundary), which is exact for
/// quadratic detachment.
pub fn extract_free_boundaries_with(field: &DiscreteField, eps_fb: f64, eps_mono: f64) -> Result<FreeBoundaryCurves> {
    let g = &field.grid;
    let q = field.consts.q();
    let ns = g.ns;
    let mut curves = FreeBoundaryCurves {
        eps_fb,
        half_length: g.half_length,
        x1: g.x1.clone(),
        h0: g.h0.clone(),
        h1: g.h1.clone(),
        lower: vec![0.0; g.nx],
        upper: vec![0.0; g.nx],
        lower_contact: vec![true; g.nx],
        upper_contact: vec![true; g.nx],
    };
    for i in 0..g.nx {
        let col = field.column(i);
        if let Some(j) = (0..ns - 1).find(|&j| col[j] - col[j + 1] > eps_mono) {
            return Err(Error::NonMonotone { column: i, x1: g.x1[i], drop: col[j] - col[j + 1] });
        }
        let x2: Vec<f64> = (0..ns).map(|j| g.x2(i, j)).collect();
        let cell = g.height(i) * g.hs;

        let j0 = col.iter().take_while(|&&v| v <= eps_fb).count().max(1) - 1;
        curves.lower[i] = if j0 == 0 || j0 + 1 >= ns {
            x2[j0]
        } else {
            let next = (j0 + 2 < ns).then(|| (x2[j0 + 2], col[j0 + 2]));
            sqrt_crossing(x2[j0], col[j0], x2[j0 + 1], col[j0 + 1], next, eps_fb)
        };

        let dry_top = col.iter().rev().take_while(|&&v| v >= q - eps_fb).count().max(1);
        let j1 = ns - dry_top;
        curves.upper[i] = if j1 + 1 == ns || j1 == 0 {
            x2[j1]
        } else {
            let gap = |j: usize| q - col[j];
            let next = (j1 >= 2).then(|| (x2[j1 - 2], gap(j1 - 2)));
            sqrt_crossing(x2[j1], gap(j1), x2[j1 - 1], gap(j1 - 1), next, eps_fb)
        };
        if curves.upper[i] < curves.lower[i] {
            curves.upper[i] = curves.lower[i];
        }
        curves.lower_contact[i] = curves.lower[i] - g.h0[i] <= cell * (1.0 + 1e-9);
        curves.upper_contact[i] = g.h1[i] - curves.upper[i] <= cell * (1.0 + 1e-9);
    }
    Ok(curves)
}

/// Growth of ψ away from one free-boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub x1: f64,
    pub x2: f64,
    /// Fitted exponent in `ψ ≈ C d^p`.
    pub p: f64,
    pub c: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub probes: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthDiagnostics {
    pub probe_radii: [f64; 2],
    pub points: Vec<GrowthPoint>,
    /// Free-boundary abscissae skipped for lack of probes.
    pub skipped: Vec<f64>,
}

impl GrowthDiagnostics {
    pub fn exponent_range(&self) -> Option<(f64, f64)> {
        range(self.points.iter().map(|p| p.p))
    }

    /// Smallest and largest `ψ / d²` over all probes.
    pub fn ratio_range(&self) -> Option<(f64, f64)> {
        let lo = range(self.points.iter().map(|p| p.min_ratio))?.0;
        let hi = range(self.points.iter().map(|p| p.max_ratio))?.1;
        Some((lo, hi))
    }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
}

const MIN_PROBES: usize = 4;

/// Fits `log ψ = log C + p log d` around detached points of both free
/// boundaries, `d` being the distance to the free-boundary polyline, using
/// wet nodes with `r_min <= d <= r_max` inside a 45° cone about the normal.
pub fn growth_fit(field: &DiscreteField, curves: &FreeBoundaryCurves, probe_radii: [f64; 2]) -> GrowthDiagnostics {
    let g = &field.grid;
    let q = field.consts.q();
    let [r_min, r_max] = probe_radii;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let reach = ((r_max / g.hx).ceil() as usize) + 2;
    for upper in [false, true] {
        let (fb, contact) =
            if upper { (&curves.upper, &curves.upper_contact) } else { (&curves.lower, &curves.lower_contact) };
        for i in curves.inner_columns() {
            if contact[i] || i == 0 || i + 1 == g.nx {
                continue;
            }
            let z = [g.x1[i], fb[i]];
            let slope = (fb[i + 1] - fb[i - 1]) / (2.0 * g.hx);
            // Unit normal pointing into the wet region.
            let sign = if upper { -1.0 } else { 1.0 };
            let norm = slope.hypot(1.0);
            let normal = [-slope * sign / norm, sign / norm];
            let (lo, hi) = (i.saturating_sub(reach), (i + reach).min(g.nx - 1));
            let mut samples = Vec::new();
            let mut ratios = (f64::INFINITY, 0.0f64);
            for k in lo..=hi {
                for j in 0..g.ns {
                    let psi = field.value(k, j);
                    let gap = if upper { q - psi } else { psi };
                    if gap <= curves.eps_fb {
                        continue;
                    }
                    let x = [g.x1[k], g.x2(k, j)];
                    let rel = [x[0] - z[0], x[1] - z[1]];
                    let dist_z = rel[0].hypot(rel[1]);
                    if dist_z == 0.0
                        || (rel[0] * normal[0] + rel[1] * normal[1]) < dist_z * std::f64::consts::FRAC_1_SQRT_2
                    {
                        continue;
                    }
                    let d = (lo..hi)
                        .map(|m| segment_distance(x, [g.x1[m], fb[m]], [g.x1[m + 1], fb[m + 1]]))
                        .fold(f64::INFINITY, f64::min);
                    if d < r_min || d > r_max {
                        continue;
                    }
                    let ratio = gap / (d * d);
                    ratios = (ratios.0.min(ratio), ratios.1.max(ratio));
                    samples.push((d.ln(), gap.ln()));
                }
            }
            if samples.len() < MIN_PROBES {
                skipped.push(z[0]);
                continue;
            }
            let m = samples.len() as f64;
            let mx = samples.iter().map(|s| s.0).sum::<f64>() / m;
            let my = samples.iter().map(|s| s.1).sum::<f64>() / m;
            let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
            let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
            if sxx <= 0.0 {
                skipped.push(z[0]);
                continue;
            }
            let p = sxy / sxx;
            let log_c = my - p * mx;
            let residual = (samples.iter().map(|s| (s.1 - log_c - p * s.0).powi(2)).sum::<f64>() / m).sqrt();
            points.push(GrowthPoint {
                x1: z[0],
                x2: z[1],
                p,
                c: log_c.exp(),
                residual,
                probes: samples.len(),
                min_ratio: ratios.0,
                max_ratio: ratios.1,
            });
        }
    }
    GrowthDiagnostics { probe_radii, points, skipped }
}

/// Divided-difference slopes of the free boundaries and their continuity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeProfile {
    /// Slope of `h̃₀` on each interval `[x1[i], x1[i+1]]`.
    pub lower_slopes: Vec<f64>,
    pub upper_slopes: Vec<f64>,
    /// Largest jump between adjacent slopes over the inner columns.
    pub lower_max_jump: f64,
    pub upper_max_jump: f64,
    /// Largest `|h̃' - h'|` at columns where the contact flag changes.
    pub lower_tangency_gap: f64,
    pub upper_tangency_gap: f64,
}

pub fn slope_profile(curves: &FreeBoundaryCurves) -> SlopeProfile {
    let slopes = |v: &[f64]| -> Vec<f64> {
        v.windows(2).zip(curves.x1.windows(2)).map(|(y, x)| (y[1] - y[0]) / (x[1] - x[0])).collect()
    };
    let inner: Vec<usize> = curves.inner_columns().collect();
    let max_jump = |s: &[f64]| {
        inner.iter().filter(|&&i| i >= 1 && i < s.len()).map(|&i| (s[i] - s[i - 1]).abs()).fold(0.0, f64::max)
    };
    let gap = |fb_slopes: &[f64], wall: &[f64], contact: &[bool]| {
        let wall_slopes = slopes(wall);
        (1..contact.len())
            .filter(|&i| contact[i] != contact[i - 1])
            .map(|i| (fb_slopes[i - 1] - wall_slopes[i - 1]).abs())
            .fold(0.0, f64::max)
    };
    let lower_slopes = slopes(&curves.lower);
    let upper_slopes = slopes(&curves.upper);
    SlopeProfile {
        lower_max_jump: max_jump(&lower_slopes),
        upper_max_jump: max_jump(&upper_slopes),
        lower_tangency_gap: gap(&lower_slopes, &curves.h0, &curves.lower_contact),
        upper_tangency_gap: gap(&upper_slopes, &curves.h1, &curves.upper_contact),
        lower_slopes,
        upper_slopes,
    }
}
