//! Stream-function model of steady incompressible Euler flow through a
//! two-dimensional nozzle with stagnation regions.
//!
//! The flow enters with the Poiseuille profile, so the vorticity is a known
//! function `f` of the stream function. Solutions are obtained as
//! box-constrained minimizers of `∫ |∇ψ|²/2 + F(ψ)` over a truncated nozzle,
//! and the sets where `ψ` sticks to `0` or `Q` are the stagnation regions.

pub mod diagnostics;
pub mod error;
pub mod freeboundary;
pub mod geometry;
pub mod minimizer;
pub mod profile1d;
pub mod quadrature;

pub use diagnostics::{
    discrete_column_energy, far_field_report, flux_deviation, flux_per_column, strip_liouville_check, velocity_field,
    FarFieldEntry, FarFieldReport, VelocityField,
};
pub use error::{Error, Result, Unconverged};
pub use freeboundary::{
    extract_free_boundaries, extract_free_boundaries_with, growth_fit, slope_profile, FreeBoundaryCurves,
    GrowthDiagnostics, GrowthPoint, SlopeProfile,
};
pub use geometry::{
    boundary_data, build_grid, preset_geometry, BoundaryData, Curve, CurvilinearGrid, NozzleGeometry, ParamValue,
    PresetParams, RegularityReport, PRESET_NAMES,
};
pub use minimizer::{
    discrete_energy, el_residual, energy_gradient, estimate_omega, monotonicity_defect, projected_gradient_norm,
    solve_minimizer, DiscreteField, ElResidual, Initialization, SolveReport, SolverConfig, SweepOrder,
};
pub use profile1d::{
    big_f, build_shear_profile, c_of_d, cauchy_solve, energy_1d, f_hat, f_of_psi, intersection_count, kappa, lifespan,
    shear_energy, FlowConstants, ShearProfile, ShearSolution,
};
