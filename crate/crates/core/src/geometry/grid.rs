use crate::error::{Error, Result};
use crate::profile1d::{FlowConstants, ShearSolution};
use crate::quadrature;

use super::NozzleGeometry;

/// The truncated nozzle `Ω_N = Ω ∩ {|x₁| < N}` mapped onto the rectangle
/// `[-N, N] × [0, 1]` by `x₂ = h0(x₁) + σ (h1 - h0)(x₁)`.
///
/// Nodes are stored column by column: node `(i, j)` sits at `x₁ = x1[i]`,
/// `σ = sigma[j]` and has index `i * ns + j`.
#[derive(Debug, Clone)]
pub struct CurvilinearGrid {
    pub half_length: f64,
    pub nx: usize,
    pub ns: usize,
    pub hx: f64,
    pub hs: f64,
    pub x1: Vec<f64>,
    pub sigma: Vec<f64>,
    pub h0: Vec<f64>,
    pub h1: Vec<f64>,
    pub dh0: Vec<f64>,
    pub dh1: Vec<f64>,
    /// Nine-point stiffness rows; entry `(di + 1) * 3 + (dj + 1)` couples
    /// node `(i, j)` to `(i + di, j + dj)`.
    pub stencil: Vec<[f64; 9]>,
    /// Per-cell 4×4 stiffness over the corners `(i, j), (i+1, j), (i, j+1), (i+1, j+1)`.
    pub(crate) cells: Vec<[[f64; 4]; 4]>,
    /// Lumped quadrature weights; they sum to the area of `Ω_N`.
    pub weights: Vec<f64>,
}

/// Dirichlet data on the four sides of `Ω_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub fixed: Vec<bool>,
    /// Prescribed values on fixed nodes, 0 elsewhere.
    pub values: Vec<f64>,
}

pub(crate) const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

impl CurvilinearGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ns + j
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ns
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn height(&self, i: usize) -> f64 {
        self.h1[i] - self.h0[i]
    }

    /// Physical `x₂` of node `(i, j)`.
    #[inline]
    pub fn x2(&self, i: usize, j: usize) -> f64 {
        self.h0[i] + self.sigma[j] * self.height(i)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ns
    }

    /// `s = (h0' + σ H') / H`, so that `∂σ/∂x₁ = -s` at node `(i, j)`.
    #[inline]
    pub fn shear_coefficient(&self, i: usize, j: usize) -> f64 {
        let dh = self.dh1[i] - self.dh0[i];
        (self.dh0[i] + self.sigma[j] * dh) / self.height(i)
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Derivatives `(∂_ξ v, ∂_σ v)` at every node: central differences inside,
    /// second-order one-sided differences on the edges.
    pub fn mapped_derivatives(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dxi = vec![0.0; self.len()];
        let mut dsig = vec![0.0; self.len()];
        for i in 0..self.nx {
            for j in 0..self.ns {
                let n = self.index(i, j);
                dxi[n] = diff3(self.nx, i, self.hx, |k| v[self.index(k, j)]);
                dsig[n] = diff3(self.ns, j, self.hs, |k| v[self.index(i, k)]);
            }
        }
        (dxi, dsig)
    }

    /// Physical gradient `(∂_{x₁} v, ∂_{x₂} v)` at every node.
    pub fn physical_gradient(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dxi, mut dsig) = self.mapped_derivatives(v);
        for i in 0..self.nx {
            let h = self.height(i);
            for j in 0..self.ns {
                let n = self.index(i, j);
                let s = self.shear_coefficient(i, j);
                dxi[n] -= s * dsig[n];
                dsig[n] /= h;
            }
        }
        (dxi, dsig)
    }

    /// `½ Σ_cells vᵀ K_c v`.
    pub fn dirichlet_energy(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.nx - 1 {
            for j in 0..self.ns - 1 {
                let k = &self.cells[i * (self.ns - 1) + j];
                let base = v[self.index(i, j)];
                let mut local = [0.0; 4];
                for (a, &(di, dj)) in CORNERS.iter().enumerate() {
                    local[a] = v[self.index(i + di, j + dj)] - base;
                }
                let mut e = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        e += local[a] * k[a][b] * local[b];
                    }
                }
                total += 0.5 * e;
            }
        }
        total
    }

    /// `(K v)` at node `(i, j)`.
    #[inline]
    pub fn apply_stencil(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let row = &self.stencil[self.index(i, j)];
        let mut acc = 0.0;
        for (slot, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let ii = i + slot / 3;
            let jj = j + slot % 3;
            if ii == 0 || jj == 0 || ii > self.nx || jj > self.ns {
                continue;
            }
            acc += c * v[self.index(ii - 1, jj - 1)];
        }
        acc
    }
}

fn diff3<F: Fn(usize) -> f64>(n: usize, k: usize, h: f64, v: F) -> f64 {
    if k == 0 {
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
    } else if k + 1 == n {
        (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
    } else {
        (v(k + 1) - v(k - 1)) / (2.0 * h)
    }
}

// P1 stiffness of a triangle for the quadratic form ∇uᵀ A ∇u.
fn triangle_stiffness(p: [[f64; 2]; 3], a: [[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let (e1, e2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    let det = e1[0] * e2[1] - e2[0] * e1[1];
    let area = 0.5 * det.abs();
    // Rows of the inverse Jacobian are the gradients of λ1 and λ2.
    let g1 = [e2[1] / det, -e2[0] / det];
    let g2 = [-e1[1] / det, e1[0] / det];
    let g = [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2];
    let mut k = [[0.0; 3]; 3];
    for r in 0..3 {
        let ag = [a[0][0] * g[r][0] + a[0][1] * g[r][1], a[1][0] * g[r][0] + a[1][1] * g[r][1]];
        for c in 0..3 {
            k[c][r] = area * (g[c][0] * ag[0] + g[c][1] * ag[1]);
        }
    }
    k
}

/// Stiffness of a `hx × hs` cell with constant metric `a`, averaged over
/// both diagonal triangulations.
fn cell_stiffness(hx: f64, hs: f64, a: [[f64; 2]; 2]) -> [[f64; 4]; 4] {
    let pos = |c: usize| [CORNERS[c].0 as f64 * hx, CORNERS[c].1 as f64 * hs];
    let triangles: [[usize; 3]; 4] = [[0, 1, 3], [0, 3, 2], [0, 1, 2], [1, 3, 2]];
    let mut k = [[0.0; 4]; 4];
    for t in triangles {
        let kt = triangle_stiffness([pos(t[0]), pos(t[1]), pos(t[2])], a);
        for r in 0..3 {
            for c in 0..3 {
                k[t[r]][t[c]] += 0.5 * kt[r][c];
            }
        }
    }
    k
}

/// Builds the mapped grid on `[-N, N]` with `nx` columns and `ns` rows.
pub fn build_grid(geom: &NozzleGeometry, n: f64, nx: usize, ns: usize) -> Result<CurvilinearGrid> {
    let l0 = geom.flat_threshold();
    if !(n.is_finite() && n >= l0) {
        return Err(Error::Domain(format!("truncation N = {n} is below the flatness threshold L0 = {l0}")));
    }
    if nx < 8 || ns < 8 {
        return Err(Error::Domain(format!("grid needs nx, ns >= 8, got {nx} x {ns}")));
    }
    let hx = 2.0 * n / (nx - 1) as f64;
    let hs = 1.0 / (ns - 1) as f64;
    let x1: Vec<f64> = (0..nx).map(|i| -n + i as f64 * hx).collect();
    let sigma: Vec<f64> = (0..ns).map(|j| j as f64 * hs).collect();
    let (mut h0, mut h1, mut dh0, mut dh1) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    for (i, &x) in x1.iter().enumerate() {
        let l = geom.lower.eval(x);
        let u = geom.upper.eval(x);
        if u[0] <= l[0] {
            return Err(Error::Validation(format!("h1 <= h0 at x1 = {x}")));
        }
        h0[i] = l[0];
        h1[i] = u[0];
        dh0[i] = l[1];
        dh1[i] = u[1];
    }

    let mut cells = Vec::with_capacity((nx - 1) * (ns - 1));
    for &x in &x1[..nx - 1] {
        let xc = x + 0.5 * hx;
        let (l, u) = (geom.lower.eval(xc), geom.upper.eval(xc));
        let h = u[0] - l[0];
        for j in 0..ns - 1 {
            let sc = (j as f64 + 0.5) * hs;
            let s = (l[1] + sc * (u[1] - l[1])) / h;
            let a = [[h, -h * s], [-h * s, h * s * s + 1.0 / h]];
            cells.push(cell_stiffness(hx, hs, a));
        }
    }

    let mut stencil = vec![[0.0; 9]; nx * ns];
    for i in 0..nx - 1 {
        for j in 0..ns - 1 {
            let k = &cells[i * (ns - 1) + j];
            for (a, &(ai, aj)) in CORNERS.iter().enumerate() {
                let row = &mut stencil[(i + ai) * ns + j + aj];
                for (b, &(bi, bj)) in CORNERS.iter().enumerate() {
                    let di = bi as isize - ai as isize;
                    let dj = bj as isize - aj as isize;
                    row[((di + 1) * 3 + dj + 1) as usize] += k[a][b];
                }
            }
        }
    }

    // Column measures over dual cells, so the weights integrate H exactly.
    let mut weights = vec![0.0; nx * ns];
    for i in 0..nx {
        let lo = if i == 0 { x1[0] } else { x1[i] - 0.5 * hx };
        let hi = if i + 1 == nx { x1[nx - 1] } else { x1[i] + 0.5 * hx };
        let measure = quadrature::gauss_legendre(|x| geom.height(x), lo, hi, 4);
        for j in 0..ns {
            let cj = if j == 0 || j + 1 == ns { 0.5 } else { 1.0 };
            weights[i * ns + j] = measure * hs * cj;
        }
    }

    Ok(CurvilinearGrid { half_length: n, nx, ns, hx, hs, x1, sigma, h0, h1, dh0, dh1, stencil, cells, weights })
}

/// The Dirichlet data: 0 on the lower wall, `Q` on the upper wall and the
/// shear profile of the local height on each lateral side.
pub fn boundary_data(geom: &NozzleGeometry, grid: &CurvilinearGrid, consts: &FlowConstants) -> Result<BoundaryData> {
    let n = grid.len();
    let mut fixed = vec![false; n];
    let mut values = vec![0.0; n];
    let q = consts.q();
    for i in [0, grid.nx - 1] {
        let x = grid.x1[i];
        let h0 = geom.h0(x);
        let sol = ShearSolution::new(geom.height(x), consts)?;
        for j in 0..grid.ns {
            let idx = grid.index(i, j);
            fixed[idx] = true;
            values[idx] = if j == 0 {
                0.0
            } else if j + 1 == grid.ns {
                q
            } else {
                sol.value(grid.x2(i, j) - h0)?
            };
        }
    }
    for i in 1..grid.nx - 1 {
        let (bottom, top) = (grid.index(i, 0), grid.index(i, grid.ns - 1));
        fixed[bottom] = true;
        fixed[top] = true;
        values[top] = q;
    }
    Ok(BoundaryData { fixed, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{preset_geometry, ParamValue, PresetParams};

    fn straight() -> NozzleGeometry {
        preset_geometry("straight", &PresetParams::new()).unwrap()
    }

    #[test]
    fn straight_grid_is_the_five_point_laplacian() {
        let g = build_grid(&straight(), 2.0, 9, 9).unwrap();
        assert!((g.area() - 4.0).abs() < 1e-14);
        let row = g.stencil[g.index(4, 4)];
        let (rx, rs) = (g.hs / g.hx, g.hx / g.hs);
        let expect = [0.0, -rx, 0.0, -rs, 2.0 * (rx + rs), -rs, 0.0, -rx, 0.0];
        for (a, b) in row.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn stencil_rows_annihilate_constants() {
        let mut p = PresetParams::new();
        p.insert("amplitude".into(), ParamValue::Number(0.25));
        let geom = preset_geometry("symmetric-bump", &p).unwrap();
        let g = build_grid(&geom, 3.0, 31, 12).unwrap();
        let ones = vec![1.0; g.len()];
        for i in 1..g.nx - 1 {
            for j in 1..g.ns - 1 {
                assert!(g.apply_stencil(&ones, i, j).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stencil_matches_cellwise_energy() {
        let mut p = PresetParams::new();
        p.insert("amplitude".into(), ParamValue::Number(-0.2));
        let geom = preset_geometry("top-flat-bottom-bump", &p).unwrap();
        let g = build_grid(&geom, 2.5, 21, 10).unwrap();
        let v: Vec<f64> = (0..g.len()).map(|k| ((k * 37 % 101) as f64 / 101.0).sin()).collect();
        let quad: f64 = (0..g.nx)
            .flat_map(|i| (0..g.ns).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * v[g.index(i, j)] * g.apply_stencil(&v, i, j))
            .sum();
        assert!((quad - g.dirichlet_energy(&v)).abs() < 1e-10 * quad.abs());
    }

    #[test]
    fn bump_area_is_exact() {
        let mut p = PresetParams::new();
        p.insert("amplitude".into(), ParamValue::Number(0.2));
        let geom = preset_geometry("symmetric-bump", &p).unwrap();
        let g = build_grid(&geom, 4.0, 33, 9).unwrap();
        assert!((g.area() - (8.0 + 2.0 * 0.75 * 0.2 * 2.0)).abs() < 1e-10);
    }

    #[test]
    fn truncation_below_threshold_is_rejected() {
        let mut p = PresetParams::new();
        p.insert("width".into(), ParamValue::Number(3.0));
        let geom = preset_geometry("symmetric-bump", &p).unwrap();
        assert!(matches!(build_grid(&geom, 2.0, 20, 20), Err(Error::Domain(_))));
        assert!(build_grid(&geom, 3.0, 7, 20).is_err());
    }

    #[test]
    fn straight_boundary_data() {
        let consts = FlowConstants::new(1.0).unwrap();
        let geom = straight();
        let g = build_grid(&geom, 2.0, 10, 11).unwrap();
        let bd = boundary_data(&geom, &g, &consts).unwrap();
        for j in 0..g.ns {
            let l = bd.values[g.index(0, j)];
            let r = bd.values[g.index(g.nx - 1, j)];
            assert!((l - consts.poiseuille_stream(g.sigma[j])).abs() < 1e-13);
            assert_eq!(l, r);
        }
        assert_eq!(bd.values[g.index(0, 0)], 0.0);
        assert_eq!(bd.values[g.index(0, g.ns - 1)], 1.0);
        assert!(!bd.fixed[g.index(3, 4)]);
    }
}
