use std::fmt;
use std::path::{Path, PathBuf};

use nozzle_core::{
    preset_geometry, FlowConstants, Initialization, NozzleGeometry, PresetParams, SolverConfig, SweepOrder,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

/// A configuration problem, reported with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(key: &str, msg: impl fmt::Display) -> Result<T, ConfigError> {
    Err(ConfigError(format!("{key}: {msg}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub flow: FlowBlock,
    pub geometry: Option<GeometryBlock>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub diagnostics: DiagnosticsBlock,
    pub shear: Option<ShearBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBlock {
    pub q: f64,
}

impl Default for FlowBlock {
    fn default() -> Self {
        FlowBlock { q: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub preset: String,
    #[serde(default)]
    pub params: PresetParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    /// Half-length of the truncated nozzle.
    pub n: f64,
    pub nx: usize,
    pub ns: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { n: 5.0, nx: 161, ns: 41 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    ColumnShear,
    HarmonicExtension,
    SigmaLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: SweepOrder,
    pub omega: Option<f64>,
    pub init: InitKind,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverBlock { tol: d.tol, max_iter: d.max_iter, sweep: d.sweep, omega: d.omega, init: InitKind::ColumnShear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsBlock {
    /// Free-boundary threshold; `max(1e-6 Q, 10 tol)` when absent.
    pub eps_fb: Option<f64>,
    pub probe_radii: [f64; 2],
    pub n_sweep: Vec<f64>,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        DiagnosticsBlock { eps_fb: None, probe_radii: [0.05, 0.2], n_sweep: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearBlock {
    pub d: Vec<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    201
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: PathBuf::from("nozzle-out"), formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

impl OutputBlock {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().to_string()))?;
        if cfg.schema != SCHEMA {
            return err("schema", format!("unsupported version {}, expected {SCHEMA}", cfg.schema));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn flow_constants(&self) -> Result<FlowConstants, ConfigError> {
        FlowConstants::new(self.flow.q).or_else(|e| err("flow.q", e))
    }

    pub fn geometry(&self) -> Result<NozzleGeometry, ConfigError> {
        let Some(block) = &self.geometry else {
            return err("geometry", "missing block");
        };
        preset_geometry(&block.preset, &block.params).or_else(|e| err("geometry", e))
    }

    pub fn solver_config(&self, serial: bool) -> Result<SolverConfig, ConfigError> {
        let s = &self.solver;
        let init = match s.init {
            InitKind::ColumnShear => Initialization::ColumnShear,
            InitKind::HarmonicExtension => Initialization::HarmonicExtension,
            InitKind::SigmaLinear => Initialization::SigmaLinear,
        };
        let cfg = SolverConfig {
            tol: s.tol,
            max_iter: s.max_iter,
            sweep: s.sweep,
            omega: s.omega,
            init,
            deterministic: serial,
        };
        cfg.validate().or_else(|e| err("solver", e))?;
        Ok(cfg)
    }

    pub fn eps_fb(&self, consts: &FlowConstants) -> Result<f64, ConfigError> {
        let eps = self.diagnostics.eps_fb.unwrap_or((1e-6 * consts.q()).max(10.0 * self.solver.tol));
        if !(eps > 0.0 && eps < 0.5 * consts.q()) {
            return err("diagnostics.eps_fb", format!("must lie in (0, Q/2), got {eps}"));
        }
        Ok(eps)
    }

    pub fn probe_radii(&self) -> Result<[f64; 2], ConfigError> {
        let [lo, hi] = self.diagnostics.probe_radii;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return err("diagnostics.probe_radii", format!("need 0 < r_min < r_max, got [{lo}, {hi}]"));
        }
        Ok([lo, hi])
    }

    pub fn grid_block(&self, geom: &NozzleGeometry) -> Result<&GridBlock, ConfigError> {
        let g = &self.grid;
        check_truncation("grid.n", g.n, geom)?;
        if g.nx < 8 || g.ns < 8 {
            return err("grid", format!("nx and ns must be at least 8, got {} x {}", g.nx, g.ns));
        }
        Ok(g)
    }

    /// Heights of the shear profiles to tabulate.
    pub fn shear_heights(&self) -> Result<(&[f64], usize), ConfigError> {
        let Some(block) = &self.shear else {
            return err("shear", "missing block");
        };
        if block.d.is_empty() {
            return err("shear.d", "list is empty");
        }
        for (k, &d) in block.d.iter().enumerate() {
            if !(d > 0.0 && d <= 1.0) {
                return err(&format!("shear.d[{k}]"), format!("height must lie in (0, 1], got {d}"));
            }
        }
        if block.nodes < 3 {
            return err("shear.nodes", format!("need at least 3, got {}", block.nodes));
        }
        Ok((&block.d, block.nodes))
    }

    /// Truncations of an N-sweep and the column count of each, keeping the
    /// `grid` block's column spacing.
    pub fn sweep_plan(&self, geom: &NozzleGeometry) -> Result<Vec<(f64, usize)>, ConfigError> {
        let list = &self.diagnostics.n_sweep;
        if list.len() < 2 {
            return err("diagnostics.n_sweep", format!("need at least 2 entries, got {}", list.len()));
        }
        for (k, &n) in list.iter().enumerate() {
            check_truncation(&format!("diagnostics.n_sweep[{k}]"), n, geom)?;
        }
        if self.grid.nx < 2 {
            return err("grid.nx", "must be at least 2");
        }
        let hx = 2.0 * self.grid.n / (self.grid.nx - 1) as f64;
        Ok(list.iter().map(|&n| (n, (2.0 * n / hx).round() as usize + 1)).collect())
    }
}

fn check_truncation(key: &str, n: f64, geom: &NozzleGeometry) -> Result<(), ConfigError> {
    let l0 = geom.flat_threshold();
    if !(n.is_finite() && n >= l0) {
        return err(key, format!("N = {n} is below the flat threshold L0 = {l0}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_blocks() {
        let cfg = RunConfig::from_toml("schema = 1\n[geometry]\npreset = \"straight\"\n").unwrap();
        assert_eq!(cfg.grid, GridBlock::default());
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.eps_fb(&cfg.flow_constants().unwrap()).unwrap(), 1e-6);
        assert!(cfg.output.wants(Format::Svg));
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let e = RunConfig::from_toml("schema = 1\n[grid]\nnx = 10\nny = 4\n").unwrap_err();
        assert!(e.0.contains("ny"), "{e}");
        assert!(e.0.contains("line 4"), "{e}");
    }

    #[test]
    fn wrong_schema() {
        let e = RunConfig::from_toml("schema = 2\n").unwrap_err();
        assert!(e.0.starts_with("schema"), "{e}");
    }

    #[test]
    fn sweep_keeps_column_spacing() {
        let text = "schema = 1\n[geometry]\npreset = \"straight\"\n[grid]\nn = 2.0\nnx = 65\nns = 9\n\
                    [diagnostics]\nn_sweep = [2.0, 4.0]\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let geom = cfg.geometry().unwrap();
        assert_eq!(cfg.sweep_plan(&geom).unwrap(), vec![(2.0, 65), (4.0, 129)]);
    }
}
