//! Box-constrained minimization of the discrete stream-function energy
//! `E_N(ψ) = ∫ |∇ψ|²/2 + F(ψ)` over `0 <= ψ <= Q` with Dirichlet data.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Unconverged};
use crate::geometry::{BoundaryData, CurvilinearGrid};
use crate::profile1d::{big_f_of_kappa, build_shear_profile, kappa_clamped, FlowConstants, ShearProfile};

/// Nodal stream function on a grid, with the Dirichlet nodes marked.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub grid: Arc<CurvilinearGrid>,
    pub consts: FlowConstants,
    pub psi: Vec<f64>,
    pub fixed: Vec<bool>,
}

impl DiscreteField {
    /// Wraps nodal values, checking the box constraint and the boundary data.
    pub fn new(
        grid: Arc<CurvilinearGrid>,
        consts: FlowConstants,
        boundary: &BoundaryData,
        psi: Vec<f64>,
    ) -> Result<Self> {
        if psi.len() != grid.len() || boundary.fixed.len() != grid.len() {
            return Err(Error::Validation(format!(
                "field has {} values for a grid of {} nodes",
                psi.len(),
                grid.len()
            )));
        }
        let q = consts.q();
        if let Some(k) = psi.iter().position(|v| !(0.0..=q).contains(v)) {
            return Err(Error::Validation(format!("value {} at node {k} lies outside [0, {q}]", psi[k])));
        }
        if let Some(k) = (0..psi.len()).find(|&k| boundary.fixed[k] && psi[k] != boundary.values[k]) {
            return Err(Error::Validation(format!(
                "boundary node {k} holds {} instead of {}",
                psi[k], boundary.values[k]
            )));
        }
        Ok(DiscreteField { grid, consts, psi, fixed: boundary.fixed.clone() })
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.psi[self.grid.index(i, j)]
    }

    /// Values of column `i` from the lower to the upper wall.
    pub fn column(&self, i: usize) -> &[f64] {
        let ns = self.grid.ns;
        &self.psi[i * ns..(i + 1) * ns]
    }
}

/// Node visiting order within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    /// Column by column, bottom to top, strictly serial.
    Lexicographic,
    /// Parity colouring of `(i, j)`; the nine-point stencil needs four colours,
    /// and nodes of one colour are updated concurrently.
    RedBlack,
}

/// Starting field for the iteration; boundary nodes always carry the data.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// The shear profile of the local height in every column.
    ColumnShear,
    /// Discrete harmonic extension of the boundary data.
    HarmonicExtension,
    /// `ψ = Qσ`.
    SigmaLinear,
    /// User-supplied nodal values in `[0, Q]`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Threshold on the max-norm of the projected gradient per unit weight.
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepOrder,
    /// Relaxation factor in `(0, 2)`; estimated from the grid when absent.
    pub omega: Option<f64>,
    pub init: Initialization,
    /// Run every sweep on the calling thread.
    pub deterministic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 200_000,
            sweep: SweepOrder::RedBlack,
            omega: None,
            init: Initialization::ColumnShear,
            deterministic: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Validation(format!("solver tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Validation("solver max_iter must be at least 1".into()));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::Validation(format!("omega must lie in (0, 2), got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub energy: f64,
    pub projected_gradient: f64,
    pub converged: bool,
    pub omega: f64,
    pub sweep: SweepOrder,
    /// Energy after initialization followed by the energy after each sweep.
    pub energy_trace: Vec<f64>,
}

impl SolveReport {
    /// Largest increase between consecutive trace entries (0 for a descending trace).
    pub fn max_energy_increase(&self) -> f64 {
        self.energy_trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// `½ ψᵀKψ + Σ w F(ψ)`.
pub fn discrete_energy(field: &DiscreteField) -> f64 {
    let q = field.consts.q();
    let potential: f64 =
        field.psi.iter().zip(&field.grid.weights).map(|(&t, &w)| w * big_f_of_kappa(kappa_clamped(t, q), q)).sum();
    field.grid.dirichlet_energy(&field.psi) + potential
}

#[inline]
fn f_of_kappa(k: f64, q: f64) -> f64 {
    6.0 * q * (1.0 - 2.0 * k)
}

#[inline]
fn stream_of_kappa(k: f64, q: f64) -> f64 {
    q * k * k * (3.0 - 2.0 * k)
}

/// `∂E/∂ψ` at free nodes, `Kψ + w f̂(ψ)`; zero at Dirichlet nodes.
pub fn energy_gradient(field: &DiscreteField) -> Vec<f64> {
    let g = &field.grid;
    let q = field.consts.q();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.nx {
        for j in 0..g.ns {
            let n = g.index(i, j);
            if field.fixed[n] {
                continue;
            }
            let t = field.psi[n];
            let f = if (0.0..=q).contains(&t) { f_of_kappa(kappa_clamped(t, q), q) } else { 0.0 };
            out[n] = g.apply_stencil(&field.psi, i, j) + g.weights[n] * f;
        }
    }
    out
}

fn projected(g: f64, t: f64, q: f64) -> f64 {
    if t <= 0.0 {
        g.min(0.0)
    } else if t >= q {
        g.max(0.0)
    } else {
        g
    }
}

/// Max over free nodes of the projected gradient divided by the node weight.
pub fn projected_gradient_norm(field: &DiscreteField) -> f64 {
    let grad = energy_gradient(field);
    let q = field.consts.q();
    (0..grad.len())
        .filter(|&n| !field.fixed[n])
        .map(|n| projected(grad[n] / field.grid.weights[n], field.psi[n], q).abs())
        .fold(0.0, f64::max)
}

/// The exact minimizer of `e(t) = ½at² + rt + wF(t)` over `[0, Q]`, as
/// `(κ, e)`. `e` is convex exactly on `κ(1-κ) >= 2w/a` and concave outside,
/// so the candidates are the two ends and the critical point of the convex part.
fn local_minimizer(a: f64, r: f64, w: f64, q: f64, guess: f64) -> (f64, f64) {
    let e_of = |k: f64| {
        let t = stream_of_kappa(k, q);
        0.5 * a * t * t + r * t + w * big_f_of_kappa(k, q)
    };
    let mut best = (0.0, 0.0);
    let top = e_of(1.0);
    if top < best.1 {
        best = (1.0, top);
    }
    let disc = 1.0 - 8.0 * w / a;
    if disc <= 0.0 {
        return best;
    }
    let k0 = 0.5 * (1.0 - disc.sqrt());
    let k1 = 1.0 - k0;
    let g = |k: f64| a * stream_of_kappa(k, q) + r + w * f_of_kappa(k, q);
    let (g0, g1) = (g(k0), g(k1));
    if !(g0 < 0.0 && g1 > 0.0) {
        return best;
    }
    let (mut lo, mut hi) = (k0, k1);
    let mut k = guess.clamp(k0, k1);
    for _ in 0..60 {
        let gk = g(k);
        if gk == 0.0 {
            break;
        }
        if gk < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let dg = 6.0 * a * q * k * (1.0 - k) - 12.0 * q * w;
        let mut next = k - gk / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - k).abs() <= 4.0 * f64::EPSILON;
        k = next;
        if done || hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
    }
    let e = e_of(k);
    if e < best.1 {
        best = (k, e);
    }
    best
}

// `t(x) - t(y)` for `t(k) = Q(3k² - 2k³)`, factored to avoid cancellation.
#[inline]
fn stream_gap(x: f64, y: f64, q: f64) -> f64 {
    q * (x - y) * (3.0 * (x + y) - 2.0 * (x * x + x * y + y * y))
}

/// `e(t(k)) - e(t(k*))` for the node energy `e` with `e'(t(k*)) = 0`.
/// Both the quadratic and the potential part are written as products with
/// `k - k*`, so the difference keeps its relative accuracy as `k → k*`.
#[inline]
fn excess_energy(a: f64, w: f64, q: f64, k: f64, ks: f64) -> f64 {
    let d = stream_gap(k, ks, q);
    let (p, ps) = (k * (1.0 - k), ks * (1.0 - ks));
    let chord = 18.0 * q * q * (1.0 - k - ks) * (p + ps)
        - f_of_kappa(ks, q) * q * (3.0 * (k + ks) - 2.0 * (k * k + k * ks + ks * ks));
    0.5 * a * d * d + w * (k - ks) * chord
}

struct Solver<'a> {
    grid: &'a CurvilinearGrid,
    fixed: &'a [bool],
    q: f64,
    omega: f64,
    psi: Vec<f64>,
    kappa: Vec<f64>,
}

impl Solver<'_> {
    // New (κ, ψ) for node (i, j) given the current neighbours.
    #[inline]
    fn update(&self, i: usize, j: usize) -> (f64, f64) {
        let g = self.grid;
        let n = g.index(i, j);
        let row = &g.stencil[n];
        let a = row[4];
        let r = g.apply_stencil(&self.psi, i, j) - a * self.psi[n];
        let w = g.weights[n];
        let q = self.q;
        let k_old = self.kappa[n];
        let (k_star, _) = local_minimizer(a, r, w, q, k_old);
        let t_star = stream_of_kappa(k_star, q);
        if self.omega != 1.0 && k_star > 0.0 && k_star < 1.0 {
            let t_old = self.psi[n];
            let t_rel = t_old + self.omega * (t_star - t_old);
            if t_rel > 0.0 && t_rel < q {
                let k_rel = kappa_clamped(t_rel, q);
                if excess_energy(a, w, q, k_rel, k_star) <= excess_energy(a, w, q, k_old, k_star) {
                    return (k_rel, t_rel);
                }
            }
        }
        (k_star, t_star)
    }

    fn sweep_lexicographic(&mut self) {
        let g = self.grid;
        for i in 1..g.nx - 1 {
            for j in 1..g.ns - 1 {
                let n = g.index(i, j);
                if self.fixed[n] {
                    continue;
                }
                let (k, t) = self.update(i, j);
                self.kappa[n] = k;
                self.psi[n] = t;
            }
        }
    }

    fn sweep_coloured(&mut self, colours: &[Vec<(usize, usize)>], parallel: bool) {
        for nodes in colours {
            let updates: Vec<(f64, f64)> = if parallel {
                nodes.par_iter().map(|&(i, j)| self.update(i, j)).collect()
            } else {
                nodes.iter().map(|&(i, j)| self.update(i, j)).collect()
            };
            for (&(i, j), (k, t)) in nodes.iter().zip(updates) {
                let n = self.grid.index(i, j);
                self.kappa[n] = k;
                self.psi[n] = t;
            }
        }
    }

    fn energy(&self) -> f64 {
        let q = self.q;
        let potential: f64 = self.kappa.iter().zip(&self.grid.weights).map(|(&k, &w)| w * big_f_of_kappa(k, q)).sum();
        self.grid.dirichlet_energy(&self.psi) + potential
    }

    fn projected_gradient(&self) -> f64 {
        let g = self.grid;
        let mut worst = 0.0f64;
        for i in 1..g.nx - 1 {
            for j in 1..g.ns - 1 {
                let n = g.index(i, j);
                if self.fixed[n] {
                    continue;
                }
                let w = g.weights[n];
                let grad = g.apply_stencil(&self.psi, i, j) / w + f_of_kappa(self.kappa[n], self.q);
                worst = worst.max(projected(grad, self.psi[n], self.q).abs());
            }
        }
        worst
    }
}

/// Over-relaxation factor from the smallest expected eigenvalue `(π/2N)²`
/// of the linearised operator against the largest diagonal scale.
pub fn estimate_omega(grid: &CurvilinearGrid) -> f64 {
    let h = grid.h1.iter().zip(&grid.h0).map(|(a, b)| a - b).sum::<f64>() / grid.nx as f64;
    let lambda = (std::f64::consts::PI / (2.0 * grid.half_length)).powi(2);
    let diag = 2.0 / (grid.hx * grid.hx) + 2.0 / (grid.hs * h).powi(2);
    (2.0 / (1.0 + (2.0 * lambda / diag).sqrt())).clamp(1.0, 1.99)
}

fn column_shear_start(grid: &CurvilinearGrid, consts: &FlowConstants) -> Result<Vec<f64>> {
    let q = consts.q();
    let mut psi = vec![0.0; grid.len()];
    let mut cache: Vec<(f64, ShearProfile)> = Vec::new();
    for i in 0..grid.nx {
        let h = grid.height(i);
        let profile = if h < 1.0 - 1e-12 {
            match cache.iter().find(|(d, _)| *d == h) {
                Some((_, p)) => Some(p.clone()),
                None => {
                    let p = build_shear_profile(h, consts, 201)?;
                    cache.push((h, p.clone()));
                    Some(p)
                }
            }
        } else {
            None
        };
        // Wider columns carry the unit-height profile centred in the column.
        let offset = 0.5 * (h - 1.0).max(0.0);
        for j in 0..grid.ns {
            let y = grid.sigma[j] * h;
            psi[grid.index(i, j)] = match &profile {
                Some(p) => p.interpolate(y).clamp(0.0, q),
                None => consts.poiseuille_stream_extended(y - offset),
            };
        }
    }
    Ok(psi)
}

fn harmonic_start(grid: &CurvilinearGrid, boundary: &BoundaryData, q: f64) -> Vec<f64> {
    let mut psi = boundary.values.clone();
    for i in 1..grid.nx - 1 {
        for j in 1..grid.ns - 1 {
            psi[grid.index(i, j)] = q * grid.sigma[j];
        }
    }
    let omega = estimate_omega(grid);
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for i in 1..grid.nx - 1 {
            for j in 1..grid.ns - 1 {
                let n = grid.index(i, j);
                if boundary.fixed[n] {
                    continue;
                }
                let a = grid.stencil[n][4];
                let res = grid.apply_stencil(&psi, i, j);
                let delta = -omega * res / a;
                psi[n] += delta;
                change = change.max(delta.abs());
            }
        }
        if change <= 1e-13 * q {
            break;
        }
    }
    psi.iter_mut().for_each(|v| *v = v.clamp(0.0, q));
    psi
}

fn initial_field(
    grid: &CurvilinearGrid,
    boundary: &BoundaryData,
    consts: &FlowConstants,
    init: &Initialization,
) -> Result<Vec<f64>> {
    let q = consts.q();
    let mut psi = match init {
        Initialization::ColumnShear => column_shear_start(grid, consts)?,
        Initialization::HarmonicExtension => harmonic_start(grid, boundary, q),
        Initialization::SigmaLinear => (0..grid.len()).map(|n| q * grid.sigma[n % grid.ns]).collect(),
        Initialization::Custom(values) => {
            if values.len() != grid.len() {
                return Err(Error::Validation(format!(
                    "initial field has {} values for {} nodes",
                    values.len(),
                    grid.len()
                )));
            }
            if let Some(v) = values.iter().find(|v| !(0.0..=q).contains(*v)) {
                return Err(Error::Validation(format!("initial value {v} lies outside [0, {q}]")));
            }
            values.clone()
        }
    };
    for (n, v) in psi.iter_mut().enumerate() {
        if boundary.fixed[n] {
            *v = boundary.values[n];
        }
    }
    Ok(psi)
}

/// Projected nonlinear Gauss–Seidel with energy-safeguarded over-relaxation.
///
/// Each node update minimizes the energy exactly in that node over `[0, Q]`;
/// the over-relaxed value replaces it only if the node energy does not rise,
/// so the total energy never increases. Stops when the projected gradient
/// per unit weight falls below `config.tol`.
pub fn solve_minimizer(
    grid: Arc<CurvilinearGrid>,
    boundary: &BoundaryData,
    consts: &FlowConstants,
    config: &SolverConfig,
) -> Result<(DiscreteField, SolveReport)> {
    config.validate()?;
    if boundary.fixed.len() != grid.len() {
        return Err(Error::Validation("boundary data does not match the grid".into()));
    }
    let q = consts.q();
    let psi = initial_field(&grid, boundary, consts, &config.init)?;
    let kappa = psi.iter().map(|&t| kappa_clamped(t, q)).collect();
    let omega = config.omega.unwrap_or_else(|| estimate_omega(&grid));
    let mut solver = Solver { grid: &grid, fixed: &boundary.fixed, q, omega, psi, kappa };
    let colours: Vec<Vec<(usize, usize)>> = (0..4)
        .map(|c| {
            (1..grid.nx - 1)
                .flat_map(|i| (1..grid.ns - 1).map(move |j| (i, j)))
                .filter(|&(i, j)| (i % 2) * 2 + j % 2 == c && !boundary.fixed[grid.index(i, j)])
                .collect()
        })
        .collect();
    let mut trace = vec![solver.energy()];
    let mut pg = solver.projected_gradient();
    let mut iterations = 0;
    while pg > config.tol && iterations < config.max_iter {
        match config.sweep {
            SweepOrder::Lexicographic => solver.sweep_lexicographic(),
            SweepOrder::RedBlack => solver.sweep_coloured(&colours, !config.deterministic),
        }
        iterations += 1;
        trace.push(solver.energy());
        pg = solver.projected_gradient();
    }
    let energy = *trace.last().expect("trace starts with the initial energy");
    let report = SolveReport {
        iterations,
        energy,
        projected_gradient: pg,
        converged: pg <= config.tol,
        omega,
        sweep: config.sweep,
        energy_trace: trace,
    };
    let field = DiscreteField { grid: grid.clone(), consts: *consts, psi: solver.psi, fixed: boundary.fixed.clone() };
    if !report.converged {
        return Err(Error::NotConverged(Box::new(Unconverged { field, report })));
    }
    Ok((field, report))
}

/// Largest decrease of ψ along x₂ between vertically adjacent nodes, as a
/// divided difference in physical units (0 for monotone columns).
pub fn monotonicity_defect(field: &DiscreteField) -> f64 {
    let g = &field.grid;
    let mut worst = 0.0f64;
    for i in 0..g.nx {
        let col = field.column(i);
        let dx2 = g.height(i) * g.hs;
        for j in 0..g.ns - 1 {
            worst = worst.max((col[j] - col[j + 1]) / dx2);
        }
    }
    worst
}

/// Residual of `Δψ = f(ψ)` on the wet set `ε < ψ < Q - ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElResidual {
    pub eps_fb: f64,
    /// `Δ_h ψ - f(ψ)` at wet free nodes, 0 elsewhere.
    #[serde(skip)]
    pub residual: Vec<f64>,
    #[serde(skip)]
    pub wet: Vec<bool>,
    pub wet_nodes: usize,
    pub max: f64,
    /// Root mean square over the wet nodes.
    pub l2: f64,
    /// Max over wet nodes whose whole stencil is wet.
    pub max_interior: f64,
    /// Max of `|∇ψ|` over dry free nodes adjacent to the wet set.
    pub collar_gradient: f64,
}

pub fn el_residual(field: &DiscreteField, eps_fb: f64) -> ElResidual {
    let g = &field.grid;
    let q = field.consts.q();
    let wet: Vec<bool> = field.psi.iter().map(|&t| t > eps_fb && t < q - eps_fb).collect();
    let mut residual = vec![0.0; g.len()];
    let (mut max, mut sum_sq, mut count, mut max_interior) = (0.0f64, 0.0, 0usize, 0.0f64);
    let (gx, gy) = g.physical_gradient(&field.psi);
    let mut collar = 0.0f64;
    for i in 1..g.nx - 1 {
        for j in 1..g.ns - 1 {
            let n = g.index(i, j);
            if field.fixed[n] {
                continue;
            }
            let neighbours_wet = (0..9).all(|s| wet[g.index(i + s / 3 - 1, j + s % 3 - 1)]);
            if wet[n] {
                let k = kappa_clamped(field.psi[n], q);
                let r = -g.apply_stencil(&field.psi, i, j) / g.weights[n] - f_of_kappa(k, q);
                residual[n] = r;
                max = max.max(r.abs());
                sum_sq += r * r;
                count += 1;
                if neighbours_wet {
                    max_interior = max_interior.max(r.abs());
                }
            } else {
                let touches_wet = (0..9).any(|s| wet[g.index(i + s / 3 - 1, j + s % 3 - 1)]);
                if touches_wet {
                    collar = collar.max(gx[n].hypot(gy[n]));
                }
            }
        }
    }
    ElResidual {
        eps_fb,
        residual,
        wet,
        wet_nodes: count,
        max,
        l2: if count > 0 { (sum_sq / count as f64).sqrt() } else { 0.0 },
        max_interior,
        collar_gradient: collar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_data, build_grid, preset_geometry, PresetParams};

    fn unit() -> FlowConstants {
        FlowConstants::new(1.0).unwrap()
    }

    #[test]
    fn local_minimizer_matches_brute_force() {
        let q = 1.3;
        let cases = [(40.0, -30.0, 0.01), (5.0, 1.0, 0.5), (9.0, -6.0, 0.9), (400.0, -200.0, 0.05)];
        for (a, r, w) in cases {
            let (k, e) = local_minimizer(a, r, w, q, 0.5);
            let brute = (0..=200_000)
                .map(|m| {
                    let kk = m as f64 / 200_000.0;
                    let t = stream_of_kappa(kk, q);
                    0.5 * a * t * t + r * t + w * big_f_of_kappa(kk, q)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(e <= brute + 1e-12, "{a} {r} {w}: {e} vs {brute}");
            assert!((0.0..=1.0).contains(&k));
        }
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 1.0, 9, 9).unwrap());
        let field = DiscreteField {
            grid: grid.clone(),
            consts: unit(),
            psi: vec![0.0; grid.len()],
            fixed: vec![false; grid.len()],
        };
        assert_eq!(discrete_energy(&field), 0.0);
    }

    #[test]
    fn midvalue_flat_field_has_zero_force() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 1.0, 9, 9).unwrap());
        let field = DiscreteField {
            grid: grid.clone(),
            consts: unit(),
            psi: vec![0.5; grid.len()],
            fixed: vec![false; grid.len()],
        };
        let grad = energy_gradient(&field);
        assert!(grad[grid.index(4, 4)].abs() < 1e-14);
    }

    #[test]
    fn rejects_infeasible_fields() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 1.0, 9, 9).unwrap());
        let bd = boundary_data(&geom, &grid, &unit()).unwrap();
        let mut psi = bd.values.clone();
        psi[grid.index(4, 4)] = 1.5;
        assert!(DiscreteField::new(grid.clone(), unit(), &bd, psi).is_err());
        let cfg = SolverConfig { tol: 0.0, ..SolverConfig::default() };
        assert!(solve_minimizer(grid, &bd, &unit(), &cfg).is_err());
    }

    #[test]
    fn small_solve_converges_and_descends() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 2.0, 33, 17).unwrap());
        let bd = boundary_data(&geom, &grid, &unit()).unwrap();
        let cfg = SolverConfig { init: Initialization::SigmaLinear, tol: 1e-9, ..SolverConfig::default() };
        let (field, report) = solve_minimizer(grid.clone(), &bd, &unit(), &cfg).unwrap();
        assert!(report.converged);
        assert!(report.max_energy_increase() <= 1e-12 * report.energy);
        assert!((discrete_energy(&field) - report.energy).abs() <= 1e-12 * report.energy);
        let mut worst = 0.0f64;
        for i in 0..grid.nx {
            for j in 0..grid.ns {
                worst = worst.max((field.value(i, j) - unit().poiseuille_stream(grid.sigma[j])).abs());
            }
        }
        assert!(worst < 2e-3, "{worst}");
    }

    #[test]
    fn max_iter_reports_failure_with_trace() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 2.0, 33, 17).unwrap());
        let bd = boundary_data(&geom, &grid, &unit()).unwrap();
        let cfg = SolverConfig { init: Initialization::SigmaLinear, max_iter: 3, ..SolverConfig::default() };
        match solve_minimizer(grid, &bd, &unit(), &cfg) {
            Err(Error::NotConverged(state)) => {
                assert_eq!(state.report.iterations, 3);
                assert_eq!(state.report.energy_trace.len(), 4);
                assert!(!state.report.converged);
            }
            other => panic!("expected a convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn orderings_agree() {
        let geom = preset_geometry("straight", &PresetParams::new()).unwrap();
        let grid = Arc::new(build_grid(&geom, 2.0, 25, 13).unwrap());
        let bd = boundary_data(&geom, &grid, &unit()).unwrap();
        let base = SolverConfig { init: Initialization::HarmonicExtension, tol: 1e-10, ..SolverConfig::default() };
        let (a, _) = solve_minimizer(grid.clone(), &bd, &unit(), &base).unwrap();
        let lex = SolverConfig { sweep: SweepOrder::Lexicographic, ..base };
        let (b, _) = solve_minimizer(grid, &bd, &unit(), &lex).unwrap();
        let diff = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }
}
