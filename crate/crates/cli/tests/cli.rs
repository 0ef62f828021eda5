use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use nozzle_cli::output::read_field_csv;
use nozzle_cli::RunConfig;
use nozzle_core::{boundary_data, build_grid, discrete_energy, DiscreteField};
use serde_json::Value;
use tempfile::TempDir;

const SMALL_BUMP: &str = r#"
schema = 1

[geometry]
preset = "symmetric-bump"

[grid]
n = 3.0
nx = 49
ns = 17
"#;

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join(format!("{sub}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("{sub}-out"));
    let output = Command::new(env!("CARGO_BIN_EXE_nozzle"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn shear_at_unit_height() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run(tmp.path(), "shear", "schema = 1\n[shear]\nd = [1.0]\n", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("shear_table.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], 0.0);
    assert!((rows[0][2] - 1.2).abs() <= 1e-8);
    let profile = csv_rows(&out.join("shear_d1.csv"));
    assert_eq!(profile.len(), 201);
    assert_eq!(profile[200][1], 1.0);
}

#[test]
fn shear_table_is_decreasing() {
    let tmp = TempDir::new().unwrap();
    let config =
        "schema = 1\n[flow]\nq = 2.0\n[shear]\nd = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]\nnodes = 101\n";
    let (o, out) = run(tmp.path(), "shear", config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("shear_table.csv"));
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1] && w[1][2] < w[0][2]));
    assert!((rows[8][2] - 1.2 * 4.0).abs() <= 1e-8 * 4.0);
    let summary = json(&out.join("shear_summary.json"));
    assert_eq!(summary["passed"], Value::Bool(true));
}

#[test]
fn empty_height_list_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run(tmp.path(), "shear", "schema = 1\n[shear]\nd = []\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shear.d"), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_its_line() {
    let tmp = TempDir::new().unwrap();
    let config = "schema = 1\n[geometry]\npreset = \"straight\"\n[solver]\ntolerance = 1e-8\n";
    let (o, _) = run(tmp.path(), "validate-config", config, &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("tolerance") && msg.contains("line 5"), "{msg}");
}

#[test]
fn crossing_walls_name_the_abscissa() {
    let tmp = TempDir::new().unwrap();
    let config = r#"
schema = 1
[geometry]
preset = "sampled"
[geometry.params]
lower = [[-2.0, 0.0], [0.0, 0.6], [2.0, 0.0]]
upper = [[-2.0, 1.0], [0.0, 0.5], [2.0, 1.0]]
"#;
    let (o, _) = run(tmp.path(), "validate-config", config, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h1 <= h0 at x1 ="), "{}", stderr(&o));
}

#[test]
fn validate_accepts_a_good_config() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run(tmp.path(), "validate-config", SMALL_BUMP, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).ends_with("ok\n"));
}

#[test]
fn sweep_lists_are_checked() {
    let tmp = TempDir::new().unwrap();
    let short = format!("{SMALL_BUMP}[diagnostics]\nn_sweep = [1.0, 4.0]\n");
    let (o, _) = run(tmp.path(), "sweep", &short, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("below the flat threshold"), "{}", stderr(&o));
    let single = format!("{SMALL_BUMP}[diagnostics]\nn_sweep = [4.0]\n");
    let (o, _) = run(tmp.path(), "sweep", &single, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 2 entries"), "{}", stderr(&o));
}

#[test]
fn truncation_below_flat_threshold() {
    let tmp = TempDir::new().unwrap();
    let config = SMALL_BUMP.replace("n = 3.0", "n = 1.5");
    let (o, _) = run(tmp.path(), "solve", &config, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.n"), "{}", stderr(&o));
}

#[test]
fn field_dump_round_trips_the_energy() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run(tmp.path(), "solve", SMALL_BUMP, &["--serial"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_field_csv(&out.join("field.csv")).unwrap();

    let cfg = RunConfig::from_toml(SMALL_BUMP).unwrap();
    let consts = cfg.flow_constants().unwrap();
    let geom = cfg.geometry().unwrap();
    let grid = Arc::new(build_grid(&geom, cfg.grid.n, cfg.grid.nx, cfg.grid.ns).unwrap());
    let bd = boundary_data(&geom, &grid, &consts).unwrap();
    assert_eq!(rows.len(), grid.len());
    let psi: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let field = DiscreteField::new(grid, consts, &bd, psi).unwrap();
    let energy = discrete_energy(&field);
    let reported = json(&out.join("summary.json"))["solver"]["energy"].as_f64().unwrap();
    assert!((energy - reported).abs() <= 1e-12 * reported.abs());
}

#[test]
fn serial_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, out_a) = run(tmp.path(), "solve", SMALL_BUMP, &["--serial"]);
    let first: Vec<(String, Vec<u8>)> = {
        let mut files: Vec<_> = fs::read_dir(&out_a)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    fs::rename(&out_a, tmp.path().join("first")).unwrap();
    let (b, out_b) = run(tmp.path(), "solve", SMALL_BUMP, &["--serial"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(first.len(), 5);
    for (name, bytes) in &first {
        assert_eq!(&fs::read(out_b.join(name)).unwrap(), bytes, "{name} differs");
    }
}

#[test]
fn straight_strip_summary() {
    let tmp = TempDir::new().unwrap();
    let config = "schema = 1\n[geometry]\npreset = \"straight\"\n[grid]\nn = 2.0\nnx = 41\nns = 11\n\
                  [solver]\ninit = \"sigma-linear\"\n";
    let (o, out) = run(tmp.path(), "solve", config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    assert!(s["diagnostics"]["liouville_variation"].as_f64().unwrap() <= 5e-3);
    assert_eq!(s["diagnostics"]["free_boundary"]["stagnation_area"].as_f64(), Some(0.0));
    assert!(fs::read_to_string(out.join("plot.svg")).unwrap().starts_with("<?xml"));
}

#[test]
fn bump_summary_has_stagnation() {
    let tmp = TempDir::new().unwrap();
    let config = SMALL_BUMP.replace("nx = 49\nns = 17", "nx = 97\nns = 25");
    let (o, out) = run(tmp.path(), "solve", &config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("summary.json"));
    let fb = &s["diagnostics"]["free_boundary"];
    assert!(fb["stagnation_area"].as_f64().unwrap() > 0.0);
    let h = s["grid"]["hx"].as_f64().unwrap().max(s["grid"]["hs"].as_f64().unwrap() * 1.4);
    assert!(fb["lower_min"].as_f64().unwrap() >= -2.0 * h);
    assert!(fb["upper_max"].as_f64().unwrap() <= 1.0 + 2.0 * h);
}

#[test]
fn unconverged_solve_still_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let config = format!("{SMALL_BUMP}[solver]\nmax_iter = 3\n");
    let (o, out) = run(tmp.path(), "solve", &config, &[]);
    assert_eq!(o.status.code(), Some(1));
    let s = json(&out.join("summary.json"));
    assert_eq!(s["status"], "not-converged");
    assert!(out.join("field.csv").exists());
}

#[test]
fn straight_sweep_is_constant() {
    let tmp = TempDir::new().unwrap();
    let config = "schema = 1\n[geometry]\npreset = \"straight\"\n[grid]\nn = 4.0\nnx = 33\nns = 11\n\
                  [diagnostics]\nn_sweep = [4.0, 6.0, 8.0]\n";
    let (o, out) = run(tmp.path(), "sweep", config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&out.join("sweep_summary.json"));
    assert_eq!(s["criterion"], "constant");
    assert_eq!(s["verdict"], true);
    assert_eq!(csv_rows(&out.join("zeta.csv")).len(), 3);
    assert!(out.join("n-6").join("summary.json").exists());
}

#[test]
fn bump_sweep_is_nonincreasing() {
    let tmp = TempDir::new().unwrap();
    let config = "schema = 1\n[geometry]\npreset = \"symmetric-bump\"\n[grid]\nn = 6.0\nnx = 49\nns = 13\n\
                  [diagnostics]\nn_sweep = [6.0, 8.0, 10.0]\n";
    let (o, out) = run(tmp.path(), "sweep", config, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("zeta.csv"));
    assert!(rows.windows(2).all(|w| w[1][2] <= w[0][2] + w[1][3]));
}
