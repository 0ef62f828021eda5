use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use log::{info, warn};
use nozzle_core::{
    boundary_data, build_grid, build_shear_profile, c_of_d, el_residual, extract_free_boundaries, far_field_report,
    flux_deviation, flux_per_column, growth_fit, monotonicity_defect, shear_energy, slope_profile, solve_minimizer,
    strip_liouville_check, velocity_field, DiscreteField, ElResidual, Error, FlowConstants, FreeBoundaryCurves,
    NozzleGeometry, RegularityReport, SolveReport, SolverConfig, SweepOrder, Unconverged, VelocityField,
};
use serde::Serialize;

use crate::config::{ConfigError, Format, RunConfig, SCHEMA};
use crate::output::{field_csv, free_boundary_csv, num, plot_svg, profile_csv, trace_csv, write_json, Csv};

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub serial: bool,
}

/// Whether every invariant of a run held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value <= limit }
    }

    fn holds(name: &str, pass: bool) -> Self {
        Check { name: name.into(), value: f64::from(u8::from(pass)), limit: 1.0, pass }
    }
}

fn outcome(checks: &[Check]) -> Outcome {
    let failures: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    Outcome { passed: failures.is_empty(), failures }
}

fn output_dir(cfg: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Everything `validate-config` can check without solving.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    let consts = cfg.flow_constants()?;
    cfg.solver_config(false)?;
    cfg.eps_fb(&consts)?;
    cfg.probe_radii()?;
    if cfg.geometry.is_some() {
        let geom = cfg.geometry()?;
        cfg.grid_block(&geom)?;
        if !cfg.diagnostics.n_sweep.is_empty() {
            cfg.sweep_plan(&geom)?;
        }
    }
    if cfg.shear.is_some() {
        cfg.shear_heights()?;
    }
    if cfg.geometry.is_none() && cfg.shear.is_none() {
        return Err(ConfigError("config has neither a geometry nor a shear block".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ShearRow {
    d: f64,
    c: f64,
    energy: f64,
    sampled_energy: f64,
    energy_identity_residual: f64,
    symmetry_residual: f64,
    min_interior_slope: f64,
}

#[derive(Debug, Serialize)]
struct ShearSummary {
    schema: u32,
    q: f64,
    nodes: usize,
    profiles: Vec<ShearRow>,
    checks: Vec<Check>,
    passed: bool,
}

/// Tabulates the shear profiles of the `shear.d` heights.
pub fn run_shear(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    let consts = cfg.flow_constants()?;
    let (heights, nodes) = cfg.shear_heights()?;
    let dir = output_dir(cfg, opts)?;
    let q = consts.q();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &d in heights {
        let profile = build_shear_profile(d, &consts, nodes)?;
        let c = c_of_d(d, &consts)?;
        let energy = shear_energy(d, &consts)?;
        let row = ShearRow {
            d,
            c,
            energy,
            sampled_energy: profile.energy,
            energy_identity_residual: profile.energy_identity_residual(),
            symmetry_residual: profile.symmetry_residual(),
            min_interior_slope: profile.min_interior_slope(),
        };
        let slope2 = profile.slopes.iter().fold(0.0f64, |m, s| m.max(s * s));
        checks.push(Check::at_most(&format!("d={d}: energy identity"), row.energy_identity_residual, 1e-8 * slope2));
        checks.push(Check::at_most(&format!("d={d}: symmetry"), row.symmetry_residual, 1e-6 * q));
        checks.push(Check::holds(&format!("d={d}: increasing"), row.min_interior_slope > 0.0));
        if d == 1.0 {
            checks.push(Check::at_most("d=1: c", c.abs(), 0.0));
            checks.push(Check::at_most("d=1: J - 6Q^2/5", (energy - 1.2 * q * q).abs(), 1e-8 * q * q));
        }
        if cfg.output.wants(Format::Csv) {
            profile_csv(&profile).write(&dir.join(format!("shear_d{d}.csv")))?;
        }
        rows.push(row);
    }
    let mut sorted: Vec<&ShearRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.d.total_cmp(&b.d));
    sorted.dedup_by(|a, b| a.d == b.d);
    if sorted.len() >= 2 {
        checks.push(Check::holds("c decreasing in d", sorted.windows(2).all(|w| w[1].c < w[0].c)));
        checks.push(Check::holds("J decreasing in d", sorted.windows(2).all(|w| w[1].energy < w[0].energy)));
    }
    if cfg.output.wants(Format::Csv) {
        let mut table = Csv::new(&["d", "c", "energy"]);
        for r in &rows {
            table.row(&[num(r.d), num(r.c), num(r.energy)]);
        }
        table.write(&dir.join("shear_table.csv"))?;
    }
    let result = outcome(&checks);
    if cfg.output.wants(Format::Json) {
        let summary = ShearSummary { schema: SCHEMA, q, nodes, profiles: rows, checks, passed: result.passed };
        write_json(&dir.join("shear_summary.json"), &summary)?;
    }
    Ok(result)
}

#[derive(Debug, Serialize)]
struct GeometrySummary {
    preset: String,
    flat_threshold: f64,
    a: f64,
    b: f64,
    regularity: RegularityReport,
}

#[derive(Debug, Serialize)]
struct GridSummary {
    n: f64,
    nx: usize,
    ns: usize,
    hx: f64,
    hs: f64,
    area: f64,
}

#[derive(Debug, Serialize)]
struct SolverSummary {
    tol: f64,
    iterations: usize,
    energy: f64,
    projected_gradient: f64,
    converged: bool,
    omega: f64,
    sweep: SweepOrder,
    max_energy_increase: f64,
}

#[derive(Debug, Serialize)]
struct GrowthSummary {
    probe_radii: [f64; 2],
    points: usize,
    skipped: usize,
    exponent_range: Option<(f64, f64)>,
    ratio_range: Option<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct FreeBoundarySummary {
    stagnation_area: f64,
    lower_min: f64,
    upper_max: f64,
    detached_lower_columns: usize,
    detached_upper_columns: usize,
    growth: GrowthSummary,
    lower_max_slope_jump: f64,
    upper_max_slope_jump: f64,
    lower_tangency_gap: f64,
    upper_tangency_gap: f64,
}

#[derive(Debug, Serialize)]
struct DiagnosticsSummary {
    eps_fb: f64,
    monotonicity_defect: f64,
    flux_deviation: f64,
    velocity: VelocityField,
    euler_lagrange: ElResidual,
    free_boundary: Option<FreeBoundarySummary>,
    liouville_variation: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    schema: u32,
    status: &'static str,
    geometry: GeometrySummary,
    grid: GridSummary,
    solver: SolverSummary,
    diagnostics: DiagnosticsSummary,
    checks: Vec<Check>,
    passed: bool,
}

struct Solved {
    field: DiscreteField,
    report: SolveReport,
}

fn solve_one(
    geom: &NozzleGeometry,
    consts: &FlowConstants,
    n: f64,
    nx: usize,
    ns: usize,
    cfg: &SolverConfig,
) -> Result<Solved> {
    let grid = Arc::new(build_grid(geom, n, nx, ns)?);
    let bd = boundary_data(geom, &grid, consts)?;
    info!("solving {} at N = {n} on {nx}x{ns}", geom.name);
    match solve_minimizer(grid, &bd, consts, cfg) {
        Ok((field, report)) => {
            info!("converged after {} sweeps, energy {:.12e}", report.iterations, report.energy);
            Ok(Solved { field, report })
        }
        Err(Error::NotConverged(state)) => {
            warn!("not converged after {} sweeps", state.report.iterations);
            let Unconverged { field, report } = *state;
            Ok(Solved { field, report })
        }
        Err(e) => Err(e.into()),
    }
}

fn analyse(
    solved: &Solved,
    geom: &NozzleGeometry,
    cfg: &RunConfig,
    tol: f64,
) -> Result<(SolveSummary, VelocityField, Option<FreeBoundaryCurves>)> {
    let field = &solved.field;
    let report = &solved.report;
    let g = &field.grid;
    let consts = field.consts;
    let q = consts.q();
    let eps_fb = cfg.eps_fb(&consts)?;
    let h_max = (0..g.nx).map(|i| g.height(i)).fold(0.0, f64::max);
    let h = g.hx.max(g.hs * h_max);
    let eps_mono = 10.0 * tol + h * h * q;

    let vel = velocity_field(field, eps_fb);
    let flux = flux_deviation(&flux_per_column(field, &vel), &consts);
    let defect = monotonicity_defect(field);
    let rise = report.max_energy_increase();
    let mut checks = vec![
        Check::holds("converged", report.converged),
        Check::at_most("energy trace rise", rise, 1e-12 * report.energy_trace[0].abs().max(1.0)),
        Check::at_most("decrease in x2", defect, eps_mono),
    ];
    let liouville = if geom.is_straight() { Some(strip_liouville_check(field)?) } else { None };
    if let Some(v) = liouville {
        checks.push(Check::at_most("x1-variation on the strip", v, 5e-3 * q));
    }
    let curves = match extract_free_boundaries(field, eps_fb) {
        Ok(c) => Some(c),
        Err(e @ Error::NonMonotone { .. }) => {
            warn!("{e}");
            checks.push(Check::holds("free boundaries extracted", false));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let free_boundary = curves.as_ref().map(|c| {
        let growth = growth_fit(field, c, cfg.diagnostics.probe_radii);
        let slopes = slope_profile(c);
        FreeBoundarySummary {
            stagnation_area: c.stagnation_area(),
            lower_min: c.lower.iter().copied().fold(f64::INFINITY, f64::min),
            upper_max: c.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            detached_lower_columns: c.lower_contact.iter().filter(|&&t| !t).count(),
            detached_upper_columns: c.upper_contact.iter().filter(|&&t| !t).count(),
            growth: GrowthSummary {
                probe_radii: growth.probe_radii,
                points: growth.points.len(),
                skipped: growth.skipped.len(),
                exponent_range: growth.exponent_range(),
                ratio_range: growth.ratio_range(),
            },
            lower_max_slope_jump: slopes.lower_max_jump,
            upper_max_slope_jump: slopes.upper_max_jump,
            lower_tangency_gap: slopes.lower_tangency_gap,
            upper_tangency_gap: slopes.upper_tangency_gap,
        }
    });
    let result = outcome(&checks);
    let summary = SolveSummary {
        schema: SCHEMA,
        status: if report.converged { "converged" } else { "not-converged" },
        geometry: GeometrySummary {
            preset: geom.name.clone(),
            flat_threshold: geom.flat_threshold(),
            a: geom.a,
            b: geom.b,
            regularity: geom.regularity(),
        },
        grid: GridSummary { n: g.half_length, nx: g.nx, ns: g.ns, hx: g.hx, hs: g.hs, area: g.area() },
        solver: SolverSummary {
            tol,
            iterations: report.iterations,
            energy: report.energy,
            projected_gradient: report.projected_gradient,
            converged: report.converged,
            omega: report.omega,
            sweep: report.sweep,
            max_energy_increase: rise,
        },
        diagnostics: DiagnosticsSummary {
            eps_fb,
            monotonicity_defect: defect,
            flux_deviation: flux,
            velocity: vel.clone(),
            euler_lagrange: el_residual(field, eps_fb),
            free_boundary,
            liouville_variation: liouville,
        },
        checks,
        passed: result.passed,
    };
    Ok((summary, vel, curves))
}

fn write_solve(
    dir: &Path,
    cfg: &RunConfig,
    solved: &Solved,
    analysis: &(SolveSummary, VelocityField, Option<FreeBoundaryCurves>),
) -> Result<()> {
    let (summary, vel, curves) = analysis;
    if cfg.output.wants(Format::Csv) {
        field_csv(&solved.field, vel).write(&dir.join("field.csv"))?;
        trace_csv(&solved.report.energy_trace).write(&dir.join("energy_trace.csv"))?;
        if let Some(c) = curves {
            free_boundary_csv(c).write(&dir.join("free_boundary.csv"))?;
        }
    }
    if cfg.output.wants(Format::Json) {
        write_json(&dir.join("summary.json"), summary)?;
    }
    if cfg.output.wants(Format::Svg) {
        let svg = plot_svg(&solved.field, curves.as_ref());
        fs::write(dir.join("plot.svg"), svg).context("writing plot.svg")?;
    }
    Ok(())
}

/// One solve on the `grid` block with full diagnostics.
pub fn run_solve(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    let consts = cfg.flow_constants()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid_block(&geom)?;
    let solver = cfg.solver_config(opts.serial)?;
    cfg.eps_fb(&consts)?;
    cfg.probe_radii()?;
    let dir = output_dir(cfg, opts)?;
    let solved = solve_one(&geom, &consts, grid.n, grid.nx, grid.ns, &solver)?;
    let analysis = analyse(&solved, &geom, cfg, solver.tol)?;
    write_solve(&dir, cfg, &solved, &analysis)?;
    Ok(outcome(&analysis.0.checks))
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    n: f64,
    nx: usize,
    status: &'static str,
    energy: f64,
    zeta: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    schema: u32,
    preset: String,
    shear_energy_left: f64,
    shear_energy_right: f64,
    entries: Vec<SweepEntry>,
    allowed_rise: Vec<f64>,
    zeta_nonincreasing: bool,
    zeta_spread: f64,
    /// `nonincreasing`, or `constant` on the straight strip.
    criterion: &'static str,
    verdict: bool,
    failed_solves: Vec<f64>,
    passed: bool,
}

/// Solves at every truncation of `diagnostics.n_sweep` and reports ζ(N).
pub fn run_sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    let consts = cfg.flow_constants()?;
    let geom = cfg.geometry()?;
    let plan = cfg.sweep_plan(&geom)?;
    let solver = cfg.solver_config(opts.serial)?;
    cfg.eps_fb(&consts)?;
    cfg.probe_radii()?;
    let dir = output_dir(cfg, opts)?;
    let mut fields = Vec::new();
    let mut statuses = Vec::new();
    let mut failed_solves = Vec::new();
    for &(n, nx) in &plan {
        let solved = solve_one(&geom, &consts, n, nx, cfg.grid.ns, &solver)?;
        let analysis = analyse(&solved, &geom, cfg, solver.tol)?;
        let sub = dir.join(format!("n-{n}"));
        fs::create_dir_all(&sub)?;
        if cfg.output.wants(Format::Json) {
            write_json(&sub.join("summary.json"), &analysis.0)?;
        }
        if cfg.output.wants(Format::Csv) {
            if let Some(c) = &analysis.2 {
                free_boundary_csv(c).write(&sub.join("free_boundary.csv"))?;
            }
        }
        if !analysis.0.passed {
            failed_solves.push(n);
        }
        statuses.push(analysis.0.status);
        fields.push(solved.field);
    }
    let report = far_field_report(&fields, &geom, &consts, solver.tol)?;
    let (criterion, verdict) = if geom.is_straight() {
        ("constant", report.zeta_spread <= report.tolerance.iter().sum::<f64>())
    } else {
        ("nonincreasing", report.zeta_nonincreasing)
    };
    if cfg.output.wants(Format::Csv) {
        let mut csv = Csv::new(&["n", "energy", "zeta", "allowed_rise"]);
        for (k, e) in report.entries.iter().enumerate() {
            let allowed = if k == 0 { 0.0 } else { report.tolerance[k - 1] };
            csv.row(&[num(e.n), num(e.energy), num(e.zeta), num(allowed)]);
        }
        csv.write(&dir.join("zeta.csv"))?;
    }
    let passed = verdict && failed_solves.is_empty();
    let mut failures: Vec<String> = failed_solves.iter().map(|n| format!("solve at N = {n}")).collect();
    if !verdict {
        failures.push(format!("zeta not {criterion}"));
    }
    if cfg.output.wants(Format::Json) {
        let summary = SweepSummary {
            schema: SCHEMA,
            preset: geom.name.clone(),
            shear_energy_left: report.shear_energy_left,
            shear_energy_right: report.shear_energy_right,
            entries: report
                .entries
                .iter()
                .zip(&plan)
                .zip(&statuses)
                .map(|((e, &(_, nx)), &status)| SweepEntry { n: e.n, nx, status, energy: e.energy, zeta: e.zeta })
                .collect(),
            allowed_rise: report.tolerance.clone(),
            zeta_nonincreasing: report.zeta_nonincreasing,
            zeta_spread: report.zeta_spread,
            criterion,
            verdict,
            failed_solves,
            passed,
        };
        write_json(&dir.join("sweep_summary.json"), &summary)?;
    }
    Ok(Outcome { passed, failures })
}
