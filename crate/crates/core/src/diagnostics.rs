//! Velocity recovery, flux conservation, far-field behaviour and the
//! energy excess `ζ(N) = E_N - N J̄₁ - N J̄_{b-a}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::NozzleGeometry;
use crate::minimizer::{discrete_energy, DiscreteField};
use crate::profile1d::{big_f, build_shear_profile, f_hat, FlowConstants, ShearProfile};

/// Nodal velocity `(u₁, u₂) = (∂_{x₂}ψ, -∂_{x₁}ψ)` and vorticity on the wet set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityField {
    #[serde(skip)]
    pub u1: Vec<f64>,
    #[serde(skip)]
    pub u2: Vec<f64>,
    /// `Δ_h ψ` at wet free nodes, 0 elsewhere.
    #[serde(skip)]
    pub vorticity: Vec<f64>,
    /// Dry free nodes whose stencil neighbours are all dry.
    #[serde(skip)]
    pub stagnation: Vec<bool>,
    pub min_u1: f64,
    /// Smallest `u₁` over wet nodes whose stencil is entirely wet.
    pub min_wet_u1: f64,
    pub max_stagnation_speed: f64,
    /// Max `|ω - f(ψ)|` over wet nodes whose stencil is entirely wet.
    pub vorticity_residual: f64,
    /// Max of the discrete divergence `∂_{x₁}u₁ + ∂_{x₂}u₂` over the same nodes.
    pub divergence: f64,
}

fn wet_mask(field: &DiscreteField, eps_fb: f64) -> Vec<bool> {
    let q = field.consts.q();
    field.psi.iter().map(|&t| t > eps_fb && t < q - eps_fb).collect()
}

fn stencil_all(mask: &[bool], field: &DiscreteField, i: usize, j: usize, want: bool) -> bool {
    let g = &field.grid;
    (0..9).all(|s| mask[g.index(i + s / 3 - 1, j + s % 3 - 1)] == want)
}

pub fn velocity_field(field: &DiscreteField, eps_fb: f64) -> VelocityField {
    let g = &field.grid;
    let (gx, gy) = g.physical_gradient(&field.psi);
    let u1 = gy;
    let u2: Vec<f64> = gx.iter().map(|v| -v).collect();
    let wet = wet_mask(field, eps_fb);
    let (d11, _) = g.physical_gradient(&u1);
    let (_, d22) = g.physical_gradient(&u2);
    let mut vorticity = vec![0.0; g.len()];
    let mut stagnation = vec![false; g.len()];
    let mut out = VelocityField {
        u1: Vec::new(),
        u2: Vec::new(),
        vorticity: Vec::new(),
        stagnation: Vec::new(),
        min_u1: u1.iter().copied().fold(f64::INFINITY, f64::min),
        min_wet_u1: f64::INFINITY,
        max_stagnation_speed: 0.0,
        vorticity_residual: 0.0,
        divergence: 0.0,
    };
    for i in 1..g.nx - 1 {
        for j in 1..g.ns - 1 {
            let n = g.index(i, j);
            if field.fixed[n] {
                continue;
            }
            if wet[n] {
                let omega = -g.apply_stencil(&field.psi, i, j) / g.weights[n];
                vorticity[n] = omega;
                if stencil_all(&wet, field, i, j, true) {
                    let f = f_hat(field.psi[n], &field.consts);
                    out.vorticity_residual = out.vorticity_residual.max((omega - f).abs());
                    out.min_wet_u1 = out.min_wet_u1.min(u1[n]);
                    out.divergence = out.divergence.max((d11[n] + d22[n]).abs());
                }
            } else if stencil_all(&wet, field, i, j, false) {
                stagnation[n] = true;
                out.max_stagnation_speed = out.max_stagnation_speed.max(u1[n].hypot(u2[n]));
            }
        }
    }
    out.u1 = u1;
    out.u2 = u2;
    out.vorticity = vorticity;
    out.stagnation = stagnation;
    out
}

/// `∫_{h0}^{h1} u₁ dx₂` in every column by the trapezoidal rule.
pub fn flux_per_column(field: &DiscreteField, vel: &VelocityField) -> Vec<f64> {
    let g = &field.grid;
    (0..g.nx)
        .map(|i| {
            let h = g.height(i) * g.hs;
            let col = &vel.u1[i * g.ns..(i + 1) * g.ns];
            let inner: f64 = col[1..g.ns - 1].iter().sum();
            h * (inner + 0.5 * (col[0] + col[g.ns - 1]))
        })
        .collect()
}

/// Largest relative deviation of the column fluxes from `Q`.
pub fn flux_deviation(flux: &[f64], consts: &FlowConstants) -> f64 {
    flux.iter().map(|v| (v - consts.q()).abs() / consts.q()).fold(0.0, f64::max)
}

/// Energy per unit length of the nodal interpolant of `φ̄_d` in a flat
/// column with `ns` rows, as the two-dimensional discretisation measures it.
pub fn discrete_column_energy(profile: &ShearProfile, consts: &FlowConstants, ns: usize) -> f64 {
    let d = profile.d;
    let hs = 1.0 / (ns - 1) as f64;
    let v: Vec<f64> = (0..ns).map(|j| profile.interpolate(j as f64 * hs * d)).collect();
    let gradient: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (2.0 * d * hs);
    let potential: f64 = v
        .iter()
        .enumerate()
        .map(|(j, &t)| if j == 0 || j + 1 == ns { 0.5 } else { 1.0 } * big_f(t, consts))
        .sum::<f64>()
        * hs
        * d;
    gradient + potential
}

/// One solve of an N-sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldEntry {
    pub n: f64,
    pub energy: f64,
    pub zeta: f64,
    /// `(x₁, max_j |ψ - φ̄₁|)` over columns left of the non-flat section.
    pub left_deviation: Vec<(f64, f64)>,
    /// `(x₁, max_j |ψ - φ̄_{b-a}(x₂ - a)|)` right of it.
    pub right_deviation: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarFieldReport {
    pub shear_energy_left: f64,
    pub shear_energy_right: f64,
    pub entries: Vec<FarFieldEntry>,
    /// Allowed rise of ζ between consecutive entries.
    pub tolerance: Vec<f64>,
    pub zeta_nonincreasing: bool,
    /// Largest `|ζ(N) - ζ(N')|` over the sweep.
    pub zeta_spread: f64,
}

fn matches_geometry(field: &DiscreteField, geom: &NozzleGeometry) -> bool {
    let g = &field.grid;
    (0..g.nx).all(|i| {
        let x = g.x1[i];
        (g.h0[i] - geom.h0(x)).abs() <= 1e-12 && (g.h1[i] - geom.h1(x)).abs() <= 1e-12
    })
}

/// ζ(N) and the lateral relaxation profiles over a sweep of truncations.
///
/// ζ may rise between consecutive `N` by at most the change of the discrete
/// shear-column energy error, `ΔN (|J^h₁ - J̄₁| + |J^h_{b-a} - J̄_{b-a}|)`,
/// plus `tol · Q · area` for the solver residual.
pub fn far_field_report(
    fields: &[DiscreteField],
    geom: &NozzleGeometry,
    consts: &FlowConstants,
    tol: f64,
) -> Result<FarFieldReport> {
    if fields.is_empty() {
        return Err(Error::Domain("far-field report needs at least one solve".into()));
    }
    if let Some(k) = fields.iter().position(|f| !matches_geometry(f, geom)) {
        return Err(Error::Domain(format!("solve {k} was computed on a different geometry")));
    }
    let left = build_shear_profile(1.0, consts, 2001)?;
    let right = build_shear_profile(geom.b - geom.a, consts, 2001)?;
    let (j_left, j_right) = (left.energy, right.energy);
    let mut order: Vec<usize> = (0..fields.len()).collect();
    order.sort_by(|&a, &b| fields[a].grid.half_length.total_cmp(&fields[b].grid.half_length));

    let mut entries = Vec::new();
    for &k in &order {
        let field = &fields[k];
        let g = &field.grid;
        let n = g.half_length;
        let energy = discrete_energy(field);
        let mut left_dev = Vec::new();
        let mut right_dev = Vec::new();
        for i in 2..g.nx - 2 {
            let x = g.x1[i];
            let (profile, offset, out) = if x <= geom.underline_l {
                (&left, 0.0, &mut left_dev)
            } else if x >= geom.bar_l {
                (&right, geom.a, &mut right_dev)
            } else {
                continue;
            };
            let dev = (0..g.ns)
                .map(|j| (field.value(i, j) - profile.interpolate(g.x2(i, j) - offset)).abs())
                .fold(0.0, f64::max);
            out.push((x, dev));
        }
        entries.push(FarFieldEntry {
            n,
            energy,
            zeta: energy - n * j_left - n * j_right,
            left_deviation: left_dev,
            right_deviation: right_dev,
        });
    }

    let mut tolerance = Vec::new();
    let mut monotone = true;
    for w in order.windows(2) {
        let (fa, fb) = (&fields[w[0]], &fields[w[1]]);
        let dn = fb.grid.half_length - fa.grid.half_length;
        let ns = fb.grid.ns;
        let column_error = (discrete_column_energy(&left, consts, ns) - j_left).abs()
            + (discrete_column_energy(&right, consts, ns) - j_right).abs();
        tolerance.push(dn * column_error + tol * consts.q() * fb.grid.area());
    }
    for (k, w) in entries.windows(2).enumerate() {
        if w[1].zeta > w[0].zeta + tolerance[k] {
            monotone = false;
        }
    }
    let zetas = entries.iter().map(|e| e.zeta);
    let spread = zetas.clone().fold(f64::NEG_INFINITY, f64::max) - zetas.fold(f64::INFINITY, f64::min);
    Ok(FarFieldReport {
        shear_energy_left: j_left,
        shear_energy_right: j_right,
        entries,
        tolerance,
        zeta_nonincreasing: monotone,
        zeta_spread: spread,
    })
}

/// Max over rows of the variation of ψ along x₁ on the straight strip.
pub fn strip_liouville_check(field: &DiscreteField) -> Result<f64> {
    let g = &field.grid;
    if !(g.h0.iter().all(|&v| v == 0.0) && g.h1.iter().all(|&v| v == 1.0)) {
        return Err(Error::Domain("the Liouville check applies to the straight strip only".into()));
    }
    Ok((0..g.ns)
        .map(|j| {
            let row = (0..g.nx).map(|i| field.value(i, j));
            let hi = row.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = row.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max))
}
