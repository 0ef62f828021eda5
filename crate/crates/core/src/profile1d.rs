//! The vorticity nonlinearity and the one-dimensional shear-flow family.
//!
//! A flow of flux `Q` entering with the Poiseuille profile `ū₁(s) = 6Qs(1-s)`
//! carries vorticity `f(ψ) = 6Q(1 - 2κ(ψ))` along each streamline, where
//! `κ(ψ)` inverts `ψ = Q(3κ² - 2κ³)`. Its primitive `F`, extended by zero
//! outside `[0, Q]`, is the potential in the stream-function energy.
//!
//! The x₁-independent solutions of `ψ'' = f(ψ)` on a channel of height `d`
//! are obtained from the Poiseuille profile through the change of variables
//! `θ_d(s) = ∫₀ˢ ū₁ / √(ū₁² + 𝔠²)`, with `𝔠 = 𝔠(d)` fixed by `θ_d(1) = d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, GL5_NODES, GL5_WEIGHTS};

/// Inputs this far outside `[0, Q]` (relative to `Q`) are rejected instead of clamped.
pub const CLAMP_TOL: f64 = 1e-10;

const QUAD_TOL: f64 = 1e-14;

/// The flux `Q` and the Poiseuille profile it determines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConstants {
    q: f64,
}

impl FlowConstants {
    pub fn new(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::Domain(format!("flux Q must be positive and finite, got {q}")));
        }
        Ok(FlowConstants { q })
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Poiseuille velocity `ū₁(s) = 6Qs(1-s)`.
    #[inline]
    pub fn poiseuille(&self, s: f64) -> f64 {
        6.0 * self.q * s * (1.0 - s)
    }

    /// Poiseuille stream function `φ̄₁(s) = Q(3s² - 2s³)`, the inverse of κ.
    #[inline]
    pub fn poiseuille_stream(&self, s: f64) -> f64 {
        self.q * s * s * (3.0 - 2.0 * s)
    }

    /// `φ₁`: the Poiseuille stream function extended by 0 below and `Q` above the unit strip.
    pub fn poiseuille_stream_extended(&self, x2: f64) -> f64 {
        if x2 <= 0.0 {
            0.0
        } else if x2 >= 1.0 {
            self.q
        } else {
            self.poiseuille_stream(x2)
        }
    }
}

// Root of k²(3 - 2k) = tau on [0, 1/2] for tau in [0, 1/2].
fn kappa_lower(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    // Leading-order root of the square-root branch, corrected once.
    let k0 = (tau / 3.0).sqrt();
    let mut k = (tau / (3.0 - 2.0 * k0)).sqrt().min(0.5);
    for _ in 0..100 {
        let g = k * k * (3.0 - 2.0 * k) - tau;
        if g > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let dg = 6.0 * k * (1.0 - k);
        let mut next = k - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 2.0 * f64::EPSILON * next {
            return next;
        }
        k = next;
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    k
}

pub(crate) fn kappa_unit(tau: f64) -> f64 {
    if tau > 0.5 {
        1.0 - kappa_lower(1.0 - tau)
    } else {
        kappa_lower(tau)
    }
}

fn clamp_stream_value(t: f64, consts: &FlowConstants) -> Result<f64> {
    let q = consts.q();
    if !t.is_finite() || t < -CLAMP_TOL * q || t > q * (1.0 + CLAMP_TOL) {
        return Err(Error::Domain(format!("stream value {t} outside [0, {q}]")));
    }
    Ok(t.clamp(0.0, q))
}

/// κ(t): the unique `κ ∈ [0, 1]` with `Q(3κ² - 2κ³) = t`.
pub fn kappa(t: f64, consts: &FlowConstants) -> Result<f64> {
    let t = clamp_stream_value(t, consts)?;
    Ok(kappa_unit(t / consts.q()))
}

/// κ without the domain check; `t` is clamped to `[0, Q]`.
#[inline]
pub(crate) fn kappa_clamped(t: f64, q: f64) -> f64 {
    kappa_unit((t / q).clamp(0.0, 1.0))
}

/// `f(t) = 6Q(1 - 2κ(t))`.
pub fn f_of_psi(t: f64, consts: &FlowConstants) -> Result<f64> {
    Ok(6.0 * consts.q() * (1.0 - 2.0 * kappa(t, consts)?))
}

/// `f̂`: f on `[0, Q]` (one-sided values 6Q and -6Q at the ends), 0 outside.
pub fn f_hat(t: f64, consts: &FlowConstants) -> f64 {
    let q = consts.q();
    if !(0.0..=q).contains(&t) {
        0.0
    } else {
        6.0 * q * (1.0 - 2.0 * kappa_unit(t / q))
    }
}

/// `F(t) = ū₁(κ(t))² / 2` on `(0, Q)`, zero elsewhere.
pub fn big_f(t: f64, consts: &FlowConstants) -> f64 {
    let q = consts.q();
    if t <= 0.0 || t >= q {
        0.0
    } else {
        big_f_of_kappa(kappa_unit(t / q), q)
    }
}

#[inline]
pub(crate) fn big_f_of_kappa(k: f64, q: f64) -> f64 {
    let u = 6.0 * q * k * (1.0 - k);
    0.5 * u * u
}

/// `θ'(s) = ū₁(s) / √(ū₁(s)² + c²)`.
fn stretch_rate(s: f64, c: f64, consts: &FlowConstants) -> f64 {
    let u = consts.poiseuille(s);
    if c == 0.0 {
        1.0
    } else {
        u / u.hypot(c)
    }
}

/// Channel height reached by the shear solution with initial slope `c`,
/// `∫₀¹ ū₁ / √(ū₁² + c²)`.
pub fn lifespan(c: f64, consts: &FlowConstants) -> Result<f64> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!("initial slope must be finite and >= 0, got {c}")));
    }
    if c == 0.0 {
        return Ok(1.0);
    }
    // Symmetric about s = 1/2.
    let half = quadrature::integrate(|s| stretch_rate(s, c, consts), 0.0, 0.5, 0.5 * QUAD_TOL)?;
    Ok(2.0 * half)
}

/// 𝔠(d): the initial slope of the shear solution on a channel of height `d`.
pub fn c_of_d(d: f64, consts: &FlowConstants) -> Result<f64> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::Domain(format!("channel height must lie in (0, 1], got {d}")));
    }
    if d == 1.0 {
        return Ok(0.0);
    }
    // lifespan(c) <= Q/c, so the root lies below 2Q/d.
    let hi = 2.0 * consts.q() / d;
    quadrature::bisect(|c| Ok(lifespan(c, consts)? - d), 0.0, hi, 4.0 * f64::EPSILON * hi)
}

/// The shear solution `φ̄_d` of `ψ'' = f(ψ)`, `ψ(0) = 0`, `ψ(d) = Q`,
/// evaluated through its Poiseuille parametrisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearSolution {
    d: f64,
    c: f64,
    consts: FlowConstants,
}

impl ShearSolution {
    pub fn new(d: f64, consts: &FlowConstants) -> Result<Self> {
        let c = c_of_d(d, consts)?;
        Ok(ShearSolution { d, c, consts: *consts })
    }

    pub fn height(&self) -> f64 {
        self.d
    }

    /// 𝔠(d), which is also `φ̄_d'(0)`.
    pub fn initial_slope(&self) -> f64 {
        self.c
    }

    pub fn consts(&self) -> &FlowConstants {
        &self.consts
    }

    /// `θ_d(s)` for a Poiseuille parameter `s ∈ [0, 1]`.
    pub fn theta(&self, s: f64) -> Result<f64> {
        if self.c == 0.0 {
            return Ok(s);
        }
        quadrature::integrate(|t| stretch_rate(t, self.c, &self.consts), 0.0, s, QUAD_TOL)
    }

    fn theta_between(&self, a: f64, b: f64) -> Result<f64> {
        if self.c == 0.0 {
            return Ok(b - a);
        }
        quadrature::integrate(|t| stretch_rate(t, self.c, &self.consts), a, b, QUAD_TOL)
    }

    /// The Poiseuille parameter `s` with `θ_d(s) = y`.
    pub fn parameter_at(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        if y >= self.d {
            return Ok(1.0);
        }
        if self.c == 0.0 {
            return Ok(y);
        }
        // Safeguarded Newton; θ is increasing with θ' vanishing only at s = 0, 1.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut s = y / self.d;
        let mut theta_s = self.theta(s)?;
        for _ in 0..100 {
            let g = theta_s - y;
            if g.abs() <= 1e-15 * self.d {
                return Ok(s);
            }
            if g > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let rate = stretch_rate(s, self.c, &self.consts);
            let mut next = s - g / rate;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 {
                return Ok(next);
            }
            theta_s += self.theta_between(s, next)?;
            s = next;
            if hi - lo <= 1e-15 {
                break;
            }
        }
        Ok(s)
    }

    /// `φ̄_d(y)`, extended by 0 for `y <= 0` and by `Q` for `y >= d`.
    pub fn value(&self, y: f64) -> Result<f64> {
        Ok(self.consts.poiseuille_stream(self.parameter_at(y)?))
    }

    /// `φ̄_d'(y) = √(ū₁(s)² + 𝔠²)` with `s = θ_d⁻¹(y)`, on `[0, d]`.
    pub fn slope(&self, y: f64) -> Result<f64> {
        let s = self.parameter_at(y)?;
        Ok(self.consts.poiseuille(s).hypot(self.c))
    }

    /// `J̄_d`, by quadrature of `(ū₁² + 𝔠²/2) θ'` over the Poiseuille parameter.
    pub fn energy(&self) -> Result<f64> {
        let c = self.c;
        let consts = self.consts;
        let integrand = move |s: f64| {
            let u = consts.poiseuille(s);
            (u * u + 0.5 * c * c) * stretch_rate(s, c, &consts)
        };
        let tol = QUAD_TOL * consts.q() * consts.q();
        Ok(2.0 * quadrature::integrate(integrand, 0.0, 0.5, 0.5 * tol)?)
    }
}

/// `J̄_d` for a channel of height `d`.
pub fn shear_energy(d: f64, consts: &FlowConstants) -> Result<f64> {
    ShearSolution::new(d, consts)?.energy()
}

/// A sampled one-dimensional profile: either `φ̄_d` on `[0, d]`
/// or a (possibly truncated) solution `φ_c` of the Cauchy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub q: f64,
    /// Height reached (`φ = Q` at `d` when `complete`).
    pub d: f64,
    /// Initial slope `φ'(0)`.
    pub c: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    /// One-dimensional energy of the samples.
    pub energy: f64,
    /// False when the Cauchy march stopped at `x_max` before reaching `Q`.
    pub complete: bool,
}

impl ShearProfile {
    fn consts(&self) -> FlowConstants {
        FlowConstants { q: self.q }
    }

    fn segment(&self, y: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.total_cmp(&y)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Cubic Hermite interpolation of the samples. Outside the sampled range
    /// the profile is continued by 0 on the left and by its last value on the right.
    pub fn interpolate(&self, y: f64) -> f64 {
        let n = self.nodes.len();
        if y <= self.nodes[0] {
            return if y < self.nodes[0] { 0.0 } else { self.values[0] };
        }
        if y >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.segment(y);
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let h = x1 - x0;
        let t = (y - x0) / h;
        hermite(self.values[k], self.values[k + 1], self.slopes[k] * h, self.slopes[k + 1] * h, t).0
    }

    /// `max |φ'² - 2F(φ) - c²|` over the nodes.
    pub fn energy_identity_residual(&self) -> f64 {
        let consts = self.consts();
        self.values
            .iter()
            .zip(&self.slopes)
            .map(|(&v, &p)| (p * p - 2.0 * big_f(v, &consts) - self.c * self.c).abs())
            .fold(0.0, f64::max)
    }

    /// `max |φ(x) - (Q - φ(d - x))|` over the nodes.
    pub fn symmetry_residual(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| (v - (self.q - self.interpolate(self.d - x))).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest slope over interior nodes.
    pub fn min_interior_slope(&self) -> f64 {
        let n = self.slopes.len();
        self.slopes[1..n - 1].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

// Cubic Hermite basis on [0, 1]; m0, m1 are slopes scaled by the interval length.
// Returns (value, d/dt).
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, t: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
    let dv = (6.0 * t2 - 6.0 * t) * p0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) * p1
        + (3.0 * t2 - 2.0 * t) * m1;
    (v, dv)
}

/// Samples `φ̄_d` at the images `θ_d(s_k)` of `n_nodes` equispaced Poiseuille
/// parameters. Values come from mass conservation between the two
/// parametrisations, `∫₀^{θ_d(s)} ū_{1,d} = ∫₀ˢ ū₁`, slopes from `√(ū₁² + 𝔠²)`.
pub fn build_shear_profile(d: f64, consts: &FlowConstants, n_nodes: usize) -> Result<ShearProfile> {
    if n_nodes < 3 {
        return Err(Error::Domain(format!("need at least 3 nodes, got {n_nodes}")));
    }
    let sol = ShearSolution::new(d, consts)?;
    let c = sol.initial_slope();
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut values = Vec::with_capacity(n_nodes);
    let mut slopes = Vec::with_capacity(n_nodes);
    let mut y = 0.0;
    let mut prev_s = 0.0;
    for k in 0..n_nodes {
        let s = k as f64 / (n_nodes - 1) as f64;
        y += sol.theta_between(prev_s, s)?;
        prev_s = s;
        nodes.push(y);
        values.push(consts.poiseuille_stream(s));
        slopes.push(consts.poiseuille(s).hypot(c));
    }
    let end = nodes[n_nodes - 1];
    if (end - d).abs() > 1e-9 * d {
        return Err(Error::Internal(format!("profile of height {d} ends at {end}")));
    }
    nodes[n_nodes - 1] = d;
    let mut profile = ShearProfile { q: consts.q(), d, c, nodes, values, slopes, energy: 0.0, complete: true };
    profile.energy = energy_1d(&profile);
    Ok(profile)
}

/// Below this distance (relative to Q) from 0 or Q the march uses the local
/// quadratic expansion `φ ≈ c x + 3Q x²` instead of the energy identity.
const TAYLOR_BAND: f64 = 1e-6;

/// Integrates the Cauchy problem `ψ'' = f(ψ)`, `ψ(0) = 0`, `ψ'(0) = c` by
/// marching `ψ' = √(c² + 2F(ψ))` with classical Runge–Kutta steps of length
/// `step` (subdivided where the slope varies quickly). Stops on reaching `Q`
/// or `x_max`.
pub fn cauchy_solve(c: f64, consts: &FlowConstants, step: f64, x_max: f64) -> Result<ShearProfile> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!("initial slope must be finite and >= 0, got {c}")));
    }
    if !(step.is_finite() && step > 0.0 && x_max > 0.0) {
        return Err(Error::Domain(format!("invalid step {step} or x_max {x_max}")));
    }
    let q = consts.q();
    let band = TAYLOR_BAND * q;
    let rate = |v: f64| (c * c + 2.0 * big_f(v, consts)).sqrt();
    // d(rate)/dψ = f/rate, the stiffness of the march.
    let stiffness = |v: f64| f_hat(v, consts).abs() / rate(v).max(f64::MIN_POSITIVE);
    let rk4 = |v: f64, h: f64| {
        let k1 = rate(v);
        let k2 = rate(v + 0.5 * h * k1);
        let k3 = rate(v + 0.5 * h * k2);
        let k4 = rate(v + h * k3);
        v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    // Distance covered by φ ≈ c x + 3Q x² while rising by `band`.
    let taylor_run = (-c + (c * c + 12.0 * q * band).sqrt()) / (6.0 * q);

    let mut nodes = vec![0.0];
    let mut values = vec![0.0];
    let mut slopes = vec![c];
    let mut x = taylor_run.min(x_max);
    let mut v = if x < taylor_run { c * x + 3.0 * q * x * x } else { band };
    nodes.push(x);
    values.push(v);
    slopes.push(rate(v));

    let mut complete = false;
    'march: while x < x_max {
        let target = (x + step).min(x_max);
        while x < target {
            let remaining = target - x;
            let h = remaining.min(0.1 / stiffness(v).max(1e-300));
            let next = rk4(v, h);
            if next >= q - band {
                // Shrink the last sub-step onto φ = Q - band by secant iteration.
                let (mut lo, mut hi) = (0.0, h);
                let mut tau = h * (q - band - v) / (next - v);
                for _ in 0..60 {
                    let val = rk4(v, tau);
                    if (val - (q - band)).abs() <= 1e-15 * q {
                        break;
                    }
                    if val > q - band {
                        hi = tau;
                    } else {
                        lo = tau;
                    }
                    tau = 0.5 * (lo + hi);
                }
                x += tau;
                v = q - band;
                nodes.push(x);
                values.push(v);
                slopes.push(rate(v));
                // Near Q, Q - φ ≈ c δ + 3Q δ² with δ the distance left to travel.
                let delta = (-c + (c * c + 12.0 * q * band).sqrt()) / (6.0 * q);
                x += delta;
                nodes.push(x);
                values.push(q);
                slopes.push(c);
                complete = true;
                break 'march;
            }
            v = next;
            x = if h == remaining { target } else { x + h };
        }
        nodes.push(x);
        values.push(v);
        slopes.push(rate(v));
    }

    let mut profile = ShearProfile { q, d: x, c, nodes, values, slopes, energy: 0.0, complete };
    profile.energy = energy_1d(&profile);
    Ok(profile)
}

/// `∫ (φ'²/2 + F(φ))` over the sampled range, using the cubic Hermite
/// interpolant of the samples and five Gauss points per segment.
pub fn energy_1d(profile: &ShearProfile) -> f64 {
    let consts = profile.consts();
    let mut total = 0.0;
    for k in 0..profile.nodes.len() - 1 {
        let h = profile.nodes[k + 1] - profile.nodes[k];
        if h <= 0.0 {
            continue;
        }
        let (p0, p1) = (profile.values[k], profile.values[k + 1]);
        let (m0, m1) = (profile.slopes[k] * h, profile.slopes[k + 1] * h);
        let mut seg = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            let (v, dv) = hermite(p0, p1, m0, m1, 0.5 * (1.0 + x));
            let slope = dv / h;
            seg += w * (0.5 * slope * slope + big_f(v, &consts));
        }
        total += 0.5 * h * seg;
    }
    total
}

/// Number of sign changes of `φ₁(· - s) - φ₂(·)` over the range where both
/// profiles lie strictly inside `(0, Q)`, sampled densely.
pub fn intersection_count(p1: &ShearProfile, p2: &ShearProfile, shift: f64) -> Result<usize> {
    if (p1.q - p2.q).abs() > 1e-12 * p1.q.max(p2.q) {
        return Err(Error::Domain(format!("profiles carry different fluxes {} and {}", p1.q, p2.q)));
    }
    if !(shift.is_finite() && shift >= 0.0) {
        return Err(Error::Domain(format!("shift must be >= 0, got {shift}")));
    }
    let q = p1.q;
    let lo = shift.max(0.0);
    let hi = (shift + p1.d).min(p2.d);
    if hi <= lo {
        return Ok(0);
    }
    const SAMPLES: usize = 8000;
    let zero = 1e-12 * q;
    let mut last_sign = 0i8;
    let mut changes = 0;
    for k in 1..SAMPLES {
        let x = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let v1 = p1.interpolate(x - shift);
        let v2 = p2.interpolate(x);
        if !(v1 > 0.0 && v1 < q && v2 > 0.0 && v2 < q) {
            continue;
        }
        let diff = v1 - v2;
        if diff.abs() <= zero {
            continue;
        }
        let sign = if diff > 0.0 { 1 } else { -1 };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> FlowConstants {
        FlowConstants::new(1.0).unwrap()
    }

    #[test]
    fn kappa_reference_values() {
        let c = FlowConstants::new(2.5).unwrap();
        assert_eq!(kappa(0.0, &c).unwrap(), 0.0);
        assert_eq!(kappa(2.5, &c).unwrap(), 1.0);
        assert_relative_eq!(kappa(1.25, &c).unwrap(), 0.5, epsilon = 1e-15);
        // Q(3·0.2² - 2·0.2³) = 0.104 Q
        assert_relative_eq!(kappa(0.104 * 2.5, &c).unwrap(), 0.2, epsilon = 1e-14);
    }

    #[test]
    fn kappa_rejects_out_of_range() {
        let c = unit();
        assert!(matches!(kappa(-1e-3, &c), Err(Error::Domain(_))));
        assert!(matches!(kappa(1.001, &c), Err(Error::Domain(_))));
        assert!(matches!(kappa(f64::NAN, &c), Err(Error::Domain(_))));
        // Within the clamp tolerance.
        assert_eq!(kappa(-1e-12, &c).unwrap(), 0.0);
        assert_eq!(kappa(1.0 + 1e-12, &c).unwrap(), 1.0);
    }

    #[test]
    fn f_reference_values() {
        let c = FlowConstants::new(0.7).unwrap();
        assert_relative_eq!(f_of_psi(0.0, &c).unwrap(), 4.2);
        assert!(f_of_psi(0.35, &c).unwrap().abs() < 1e-14);
        assert_relative_eq!(f_of_psi(0.104 * 0.7, &c).unwrap(), 3.6 * 0.7, epsilon = 1e-13);
        assert_eq!(f_hat(-0.1, &c), 0.0);
        assert_eq!(f_hat(0.8, &c), 0.0);
        assert_relative_eq!(f_hat(0.7, &c), -4.2);
    }

    #[test]
    fn big_f_reference_values() {
        let c = FlowConstants::new(1.3).unwrap();
        assert_eq!(big_f(0.0, &c), 0.0);
        assert_eq!(big_f(1.3, &c), 0.0);
        assert_eq!(big_f(-1.0, &c), 0.0);
        assert_eq!(big_f(5.0, &c), 0.0);
        assert_relative_eq!(big_f(0.65, &c), 9.0 / 8.0 * 1.69, max_relative = 1e-14);
    }

    #[test]
    fn f_is_derivative_of_big_f() {
        let c = unit();
        let h = 1e-6;
        for k in 1..100 {
            let t = 0.01 + 0.98 * k as f64 / 100.0;
            let fd = (big_f(t + h, &c) - big_f(t - h, &c)) / (2.0 * h);
            let f = f_of_psi(t, &c).unwrap();
            assert!((fd - f).abs() <= 1e-5 * f.abs().max(1e-3), "t={t}: {fd} vs {f}");
        }
    }

    #[test]
    fn c_of_d_values() {
        let c = unit();
        assert_eq!(c_of_d(1.0, &c).unwrap(), 0.0);
        let half = c_of_d(0.5, &c).unwrap();
        assert!(half > 0.0);
        assert_relative_eq!(lifespan(half, &c).unwrap(), 0.5, epsilon = 1e-13);
        // d -> 0: c d -> Q.
        let small = c_of_d(1e-3, &c).unwrap();
        assert!((small * 1e-3 - 1.0).abs() < 0.01);
        assert!(matches!(c_of_d(0.0, &c), Err(Error::Domain(_))));
        assert!(matches!(c_of_d(1.5, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn unit_profile_is_the_poiseuille_cubic() {
        let c = FlowConstants::new(2.0).unwrap();
        let p = build_shear_profile(1.0, &c, 51).unwrap();
        for (&x, &v) in p.nodes.iter().zip(&p.values) {
            assert_relative_eq!(v, 2.0 * (3.0 * x * x - 2.0 * x * x * x), epsilon = 1e-14);
        }
        assert_eq!(p.slopes[0], 0.0);
        assert_relative_eq!(p.energy, 6.0 * 4.0 / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn profile_slope_at_zero_is_c() {
        let c = unit();
        for d in [0.3, 0.6, 0.9] {
            let p = build_shear_profile(d, &c, 21).unwrap();
            assert_relative_eq!(p.slopes[0], c_of_d(d, &c).unwrap());
            assert!(p.energy_identity_residual() < 1e-12);
            assert!(p.symmetry_residual() < 1e-6, "{}", p.symmetry_residual());
            assert!(p.min_interior_slope() > 0.0);
        }
    }

    #[test]
    fn narrower_profile_lies_above() {
        let c = unit();
        let narrow = ShearSolution::new(0.5, &c).unwrap();
        for k in 1..50 {
            let y = 0.5 * k as f64 / 50.0;
            assert!(narrow.value(y).unwrap() > c.poiseuille_stream(y));
        }
    }

    #[test]
    fn sampled_energy_matches_parametric_energy() {
        let c = unit();
        for d in [0.25, 0.5, 0.8] {
            let p = build_shear_profile(d, &c, 801).unwrap();
            let exact = shear_energy(d, &c).unwrap();
            assert_relative_eq!(p.energy, exact, max_relative = 1e-8);
        }
        assert_relative_eq!(shear_energy(1.0, &c).unwrap(), 1.2, max_relative = 1e-13);
    }

    #[test]
    fn cauchy_matches_boundary_value_solution() {
        let c = unit();
        let d = 0.6;
        let sol = ShearSolution::new(d, &c).unwrap();
        let p = cauchy_solve(sol.initial_slope(), &c, 1e-3, 2.0).unwrap();
        assert!(p.complete);
        assert!((p.d - d).abs() < 1e-6, "end {} vs {d}", p.d);
        for k in (0..p.nodes.len()).step_by(37) {
            let x = p.nodes[k];
            if x < d {
                assert!((p.values[k] - sol.value(x).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cauchy_zero_slope_reaches_q_at_one() {
        let c = unit();
        let p = cauchy_solve(0.0, &c, 1e-3, 2.0).unwrap();
        assert!(p.complete);
        assert!((p.d - 1.0).abs() < 1e-5, "end at {}", p.d);
        // Slope 3Q/2 where the profile crosses Q/2.
        let k = p.values.iter().position(|&v| v >= 0.5).unwrap();
        assert!((p.slopes[k] - 1.5).abs() < 5e-3);
        assert!((p.interpolate(0.5) - 0.5).abs() < 1e-6);
        assert!(matches!(cauchy_solve(-1.0, &c, 1e-3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cauchy_truncates_at_x_max() {
        let c = unit();
        let p = cauchy_solve(0.0, &c, 1e-2, 0.3).unwrap();
        assert!(!p.complete);
        assert!((p.d - 0.3).abs() < 1e-12);
    }

    #[test]
    fn intersections() {
        let c = unit();
        let p1 = build_shear_profile(0.5, &c, 401).unwrap();
        let p2 = build_shear_profile(1.0, &c, 401).unwrap();
        assert_eq!(intersection_count(&p1, &p2, 0.0).unwrap(), 0);
        assert_eq!(intersection_count(&p1, &p2, 0.25).unwrap(), 1);
        assert_eq!(intersection_count(&p2, &p2, 0.0).unwrap(), 0);
        let other = build_shear_profile(1.0, &FlowConstants::new(2.0).unwrap(), 11).unwrap();
        assert!(matches!(intersection_count(&p1, &other, 0.0), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn kappa_round_trip(q in 0.01f64..100.0, u in 0.0f64..=1.0) {
            let c = FlowConstants::new(q).unwrap();
            let t = u * q;
            let k = kappa(t, &c).unwrap();
            prop_assert!((0.0..=1.0).contains(&k));
            prop_assert!((c.poiseuille_stream(k) - t).abs() <= 1e-12 * q);
        }

        #[test]
        fn f_is_odd_about_half_flux(u in 0.0f64..=1.0) {
            let c = FlowConstants::new(3.0).unwrap();
            let t = 3.0 * u;
            prop_assert!((f_of_psi(t, &c).unwrap() + f_of_psi(3.0 - t, &c).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn big_f_is_concave(a in 0.0f64..1.0, b in 0.0f64..1.0, lam in 0.0f64..=1.0) {
            let c = unit();
            let mid = big_f(lam * a + (1.0 - lam) * b, &c);
            prop_assert!(mid + 1e-13 >= lam * big_f(a, &c) + (1.0 - lam) * big_f(b, &c));
        }
    }
}
