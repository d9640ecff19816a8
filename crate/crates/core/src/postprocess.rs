//! Stress recovery by L2 projection, error norms against exact or reference
//! solutions, and observed convergence rates.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assembly::DofMap;
use crate::fem::{cell_rule, edge_rule, edge_trace, MappedPoint};
use crate::mesh::{compensated_sum, QuadMesh};
use crate::model::{symmetric_part, ManufacturedField, MaterialParams, Tensor, Vector};
use crate::solver::DirectFactorization;
use crate::sparse::TripletBuilder;
use crate::{Error, Point, Result};

/// Gauss points per direction used for error norms.
pub const ERROR_QUADRATURE_POINTS: usize = 4;

/// Something to measure a discrete solution against.
pub trait ReferenceSolution: Sync {
    fn displacement(&self, p: Point) -> Vector;
    /// `G[(i, j)] = ∂u_i/∂x_j`
    fn gradient(&self, p: Point) -> Tensor;
    fn stress(&self, material: &MaterialParams, p: Point) -> Tensor {
        material.stress(&symmetric_part(&self.gradient(p)))
    }
}

impl ReferenceSolution for ManufacturedField {
    fn displacement(&self, p: Point) -> Vector {
        ManufacturedField::displacement(self, p)
    }

    fn gradient(&self, p: Point) -> Tensor {
        ManufacturedField::gradient(self, p)
    }
}

/// Displacement value and gradient of a discrete field at a mapped point.
pub fn evaluate(dofmap: &DofMap, values: &[f64], cell: usize, mp: &MappedPoint) -> (Vector, Tensor) {
    let coeffs = dofmap.cell_coefficients(values, cell);
    let mut u = Vector::zeros();
    let mut g = Tensor::zeros();
    for a in 0..4 {
        u += coeffs[a] * mp.values[a];
        g += coeffs[a] * mp.gradients[a].transpose();
    }
    (u, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMass {
    #[default]
    Consistent,
    Lumped,
}

/// Continuous Q1 stress field: `(σxx, σxy, σyy)` at each vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalStressField {
    pub values: Vec<[f64; 3]>,
}

impl NodalStressField {
    pub fn eval(&self, mesh: &QuadMesh, cell: usize, shape_values: &[f64; 4]) -> Tensor {
        let mut s = [0.0; 3];
        for (a, &v) in mesh.cells[cell].iter().enumerate() {
            for k in 0..3 {
                s[k] += shape_values[a] * self.values[v][k];
            }
        }
        Tensor::new(s[0], s[1], s[1], s[2])
    }
}

/// L2-project a per-cell sampled quantity onto continuous Q1 nodal values.
/// `sample(cell, point)` is evaluated at each cell's 2×2 Gauss points.
pub fn project_to_nodes<const N: usize>(
    mesh: &QuadMesh,
    mass: ProjectionMass,
    sample: impl Fn(usize, &MappedPoint) -> [f64; N],
) -> Result<Vec<[f64; N]>> {
    let nv = mesh.num_vertices();
    let rule = cell_rule(2)?;
    let mut triplets = TripletBuilder::with_capacity(nv, nv, 16 * mesh.num_cells());
    let mut lumped = vec![0.0; nv];
    let mut rhs = vec![[0.0; N]; nv];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let geom = mesh.cell_geometry(c);
        for (xi, w) in rule.iter() {
            let mp = geom.eval(xi).map_err(|_| Error::SingularMass)?;
            let wd = w * mp.det;
            let s = sample(c, &mp);
            for a in 0..4 {
                for k in 0..N {
                    rhs[cell[a]][k] += wd * mp.values[a] * s[k];
                }
                for b in 0..4 {
                    let m = wd * mp.values[a] * mp.values[b];
                    lumped[cell[a]] += m;
                    if mass == ProjectionMass::Consistent {
                        triplets.push(cell[a], cell[b], m);
                    }
                }
            }
        }
    }
    let mut out = vec![[0.0; N]; nv];
    match mass {
        ProjectionMass::Lumped => {
            for v in 0..nv {
                if !(lumped[v] > 0.0) {
                    return Err(Error::SingularMass);
                }
                for k in 0..N {
                    out[v][k] = rhs[v][k] / lumped[v];
                }
            }
        }
        ProjectionMass::Consistent => {
            let lu = DirectFactorization::new(&triplets.build(), true).map_err(|_| Error::SingularMass)?;
            for k in 0..N {
                let b: Vec<f64> = rhs.iter().map(|r| r[k]).collect();
                let x = lu.solve(&b).map_err(|_| Error::SingularMass)?;
                for v in 0..nv {
                    out[v][k] = x[v];
                }
            }
        }
    }
    Ok(out)
}

/// Project `σ(u_h)` sampled at 2×2 Gauss points onto a continuous nodal field.
pub fn recover_stress(
    mesh: &QuadMesh,
    material: &MaterialParams,
    values: &[f64],
    dofmap: &DofMap,
    mass: ProjectionMass,
) -> Result<NodalStressField> {
    let values = project_to_nodes::<3>(mesh, mass, |c, mp| {
        let (_, g) = evaluate(dofmap, values, c, mp);
        let s = material.stress(&symmetric_part(&g));
        [s[(0, 0)], s[(0, 1)], s[(1, 1)]]
    })?;
    Ok(NodalStressField { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Broken H1 seminorm `(Σ_K ‖∇(u − u_h)‖²_K)^½`.
    pub disp_h1: f64,
    pub disp_l2: f64,
    /// `(Σ_E h_E⁻¹ ‖⟦u_h⟧‖²_E)^½` over interior edges; zero for conforming fields.
    pub disp_jump: f64,
    pub stress_l2: f64,
    pub mesh_size: f64,
    pub ndofs: usize,
}

/// Broken H1 seminorm and L2 norm of `u − u_h`, cell interiors only.
pub fn displacement_error(mesh: &QuadMesh, dofmap: &DofMap, values: &[f64], exact: Option<&dyn ReferenceSolution>) -> Result<(f64, f64)> {
    displacement_error_with(mesh, dofmap, values, exact, ERROR_QUADRATURE_POINTS)
}

pub fn displacement_error_with(
    mesh: &QuadMesh,
    dofmap: &DofMap,
    values: &[f64],
    exact: Option<&dyn ReferenceSolution>,
    points: usize,
) -> Result<(f64, f64)> {
    let exact = exact.ok_or(Error::MissingExact)?;
    let rule = cell_rule(points)?;
    let mut h1 = Vec::with_capacity(mesh.num_cells());
    let mut l2 = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        let (mut ch1, mut cl2) = (0.0, 0.0);
        for (xi, w) in rule.iter() {
            let mp = geom.eval(xi)?;
            let (u, g) = evaluate(dofmap, values, c, &mp);
            let wd = w * mp.det;
            cl2 += wd * (exact.displacement(mp.physical) - u).norm_squared();
            ch1 += wd * (exact.gradient(mp.physical) - g).norm_squared();
        }
        h1.push(ch1);
        l2.push(cl2);
    }
    Ok((compensated_sum(h1).sqrt(), compensated_sum(l2).sqrt()))
}

/// L2 norm (tensor Frobenius) of `σ(u) − σ_h` for a recovered nodal stress.
pub fn stress_error(
    mesh: &QuadMesh,
    material: &MaterialParams,
    field: &NodalStressField,
    exact: Option<&dyn ReferenceSolution>,
) -> Result<f64> {
    stress_error_with(mesh, material, field, exact, ERROR_QUADRATURE_POINTS)
}

pub fn stress_error_with(
    mesh: &QuadMesh,
    material: &MaterialParams,
    field: &NodalStressField,
    exact: Option<&dyn ReferenceSolution>,
    points: usize,
) -> Result<f64> {
    let exact = exact.ok_or(Error::MissingExact)?;
    let rule = cell_rule(points)?;
    let mut acc = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        let mut e = 0.0;
        for (xi, w) in rule.iter() {
            let mp = geom.eval(xi)?;
            let diff = exact.stress(material, mp.physical) - field.eval(mesh, c, &mp.values);
            e += w * mp.det * diff.norm_squared();
        }
        acc.push(e);
    }
    Ok(compensated_sum(acc).sqrt())
}

/// `(Σ_E h_E⁻¹ ∫_E |u_e − u_f|²)^½` over interior edges.
pub fn jump_seminorm(mesh: &QuadMesh, dofmap: &DofMap, values: &[f64]) -> Result<f64> {
    let rule = edge_rule(2)?;
    let mut acc = Vec::new();
    for (_, edge) in mesh.interior_edges() {
        let second = edge.second.expect("interior edge");
        let mut e = 0.0;
        for (p, w) in rule.iter() {
            let mut trace = [Vector::zeros(); 2];
            for (k, side) in [edge.first, second].into_iter().enumerate() {
                let mp = mesh
                    .cell_geometry(side.cell)
                    .eval(edge_trace(side.local_edge, p.x, side.reversed))?;
                trace[k] = evaluate(dofmap, values, side.cell, &mp).0;
            }
            e += w * 0.5 * edge.length * (trace[0] - trace[1]).norm_squared();
        }
        acc.push(e / edge.length);
    }
    Ok(compensated_sum(acc).sqrt())
}

/// Observed orders `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)`.
pub fn rates(h: &[f64], errors: &[f64]) -> Result<Vec<f64>> {
    if h.len() != errors.len() {
        return Err(Error::InvalidInput("mesh sizes and errors differ in length".into()));
    }
    if h.len() < 2 {
        return Err(Error::InsufficientData("at least two levels are needed for a rate".into()));
    }
    if let Some(i) = errors.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::ZeroError(i));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("mesh sizes must be strictly decreasing".into()));
    }
    Ok(h.windows(2)
        .zip(errors.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    DispH1,
    DispL2,
    StressL2,
}

impl ErrorReport {
    pub fn metric(&self, metric: ErrorMetric) -> f64 {
        match metric {
            ErrorMetric::DispH1 => self.disp_h1,
            ErrorMetric::DispL2 => self.disp_l2,
            ErrorMetric::StressL2 => self.stress_l2,
        }
    }
}

/// Rates between consecutive records (ordered by level).
pub fn convergence_rates(records: &[ErrorReport], metric: ErrorMetric) -> Result<Vec<f64>> {
    let h: Vec<f64> = records.iter().map(|r| r.mesh_size).collect();
    let e: Vec<f64> = records.iter().map(|r| r.metric(metric)).collect();
    rates(&h, &e)
}

/// Per-vertex displacement; discontinuous fields are averaged over incident cells.
pub fn nodal_displacement(mesh: &QuadMesh, dofmap: &DofMap, values: &[f64]) -> Vec<[f64; 2]> {
    let mut sum = vec![[0.0; 2]; mesh.num_vertices()];
    let mut count = vec![0usize; mesh.num_vertices()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let coeffs = dofmap.cell_coefficients(values, c);
        for (a, &v) in cell.iter().enumerate() {
            sum[v][0] += coeffs[a].x;
            sum[v][1] += coeffs[a].y;
            count[v] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &n)| if n == 0 { [0.0; 2] } else { [s[0] / n as f64, s[1] / n as f64] })
        .collect()
}

/// Nodal field text block: `field <name> <ncomponents>` then one row per vertex.
pub fn write_nodal_field<const N: usize>(name: &str, rows: &[[f64; N]]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "field {name} {N}");
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Parse a block written by [`write_nodal_field`]; returns the name and rows.
pub fn read_nodal_field(text: &str) -> Result<(String, Vec<Vec<f64>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty field file".into(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (name, ncomp) = match parts.as_slice() {
        ["field", name, n] => (
            name.to_string(),
            n.parse::<usize>().map_err(|_| Error::Parse {
                line: 1,
                message: format!("invalid component count '{n}'"),
            })?,
        ),
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected 'field <name> <ncomponents>'".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|_| Error::Parse {
            line: i + 1,
            message: "invalid number".into(),
        })?;
        if row.len() != ncomp {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {ncomp} components, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok((name, rows))
}

/// Uniform bucket grid over cell bounding boxes.
#[derive(Debug, Clone)]
pub struct CellLocator {
    origin: Point,
    cell_size: Point,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl CellLocator {
    pub fn new(mesh: &QuadMesh) -> Self {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for v in &mesh.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let n = ((mesh.num_cells() as f64).sqrt().ceil() as usize).max(1);
        let span = (hi - lo).map(|s| if s > 0.0 { s } else { 1.0 });
        let cell_size = span / n as f64;
        let mut buckets = vec![Vec::new(); n * n];
        let clamp = |t: f64| (t.floor().max(0.0) as usize).min(n - 1);
        for (c, cell) in mesh.cells.iter().enumerate() {
            let mut clo = Point::repeat(f64::INFINITY);
            let mut chi = Point::repeat(f64::NEG_INFINITY);
            for &v in cell {
                clo = clo.inf(&mesh.vertices[v]);
                chi = chi.sup(&mesh.vertices[v]);
            }
            let (i0, i1) = (clamp((clo.x - lo.x) / cell_size.x), clamp((chi.x - lo.x) / cell_size.x));
            let (j0, j1) = (clamp((clo.y - lo.y) / cell_size.y), clamp((chi.y - lo.y) / cell_size.y));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * n + i].push(c);
                }
            }
        }
        Self {
            origin: lo,
            cell_size,
            nx: n,
            ny: n,
            buckets,
        }
    }

    fn bucket(&self, p: Point) -> usize {
        let i = (((p.x - self.origin.x) / self.cell_size.x).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p.y - self.origin.y) / self.cell_size.y).floor().max(0.0) as usize).min(self.ny - 1);
        j * self.nx + i
    }

    /// Cell containing `p` and its reference coordinates. Points slightly
    /// outside every cell (round-off on the boundary) are clamped into the
    /// nearest candidate.
    pub fn locate(&self, mesh: &QuadMesh, p: Point) -> Option<(usize, Point)> {
        let candidates = &self.buckets[self.bucket(p)];
        for &c in candidates {
            if let Some(xi) = mesh.cell_geometry(c).inverse_map(p, 1e-10) {
                return Some((c, xi.map(|t| t.clamp(-1.0, 1.0))));
            }
        }
        candidates
            .iter()
            .filter_map(|&c| {
                mesh.cell_geometry(c)
                    .inverse_map(p, 1e-6)
                    .map(|xi| (c, xi.map(|t| t.clamp(-1.0, 1.0))))
            })
            .next()
    }
}

/// Fine-mesh solution standing in for an unknown exact solution.
#[derive(Debug, Clone)]
pub struct SurrogateReference {
    pub mesh: QuadMesh,
    pub dofmap: DofMap,
    pub values: Vec<f64>,
    pub stress: NodalStressField,
    locator: CellLocator,
}

impl SurrogateReference {
    pub fn new(mesh: QuadMesh, dofmap: DofMap, values: Vec<f64>, stress: NodalStressField) -> Self {
        let locator = CellLocator::new(&mesh);
        Self {
            mesh,
            dofmap,
            values,
            stress,
            locator,
        }
    }

    fn at(&self, p: Point) -> (usize, MappedPoint) {
        let (c, xi) = self
            .locator
            .locate(&self.mesh, p)
            .unwrap_or_else(|| panic!("point ({}, {}) lies outside the reference mesh", p.x, p.y));
        let mp = self.mesh.cell_geometry(c).eval(xi).expect("reference mesh cells are valid");
        (c, mp)
    }
}

impl ReferenceSolution for SurrogateReference {
    fn displacement(&self, p: Point) -> Vector {
        let (c, mp) = self.at(p);
        evaluate(&self.dofmap, &self.values, c, &mp).0
    }

    fn gradient(&self, p: Point) -> Tensor {
        let (c, mp) = self.at(p);
        evaluate(&self.dofmap, &self.values, c, &mp).1
    }

    fn stress(&self, _material: &MaterialParams, p: Point) -> Tensor {
        let (c, mp) = self.at(p);
        self.stress.eval(&self.mesh, c, &mp.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{distort, unit_square_mesh, DistortionSpec};

    #[test]
    fn locator_finds_points_on_distorted_mesh() {
        let mesh = distort(&unit_square_mesh(4), &DistortionSpec::new(0.3, 11)).unwrap();
        let locator = CellLocator::new(&mesh);
        for c in 0..mesh.num_cells() {
            let geom = mesh.cell_geometry(c);
            for xi in [Point::new(0.3, -0.7), Point::new(-1.0, 1.0), Point::zeros()] {
                let p = geom.map(xi);
                let (found, back) = locator.locate(&mesh, p).unwrap();
                assert!((mesh.cell_geometry(found).map(back) - p).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rate_examples() {
        let h = [1.0, 0.5, 0.25];
        assert_eq!(rates(&h, &[1.0, 0.5, 0.25]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(rates(&h, &[1.0, 0.25, 0.0625]).unwrap(), vec![2.0, 2.0]);
        assert!(matches!(rates(&h, &[1.0, 0.0, 0.1]), Err(Error::ZeroError(1))));
        assert!(rates(&[1.0], &[1.0]).is_err());
        assert!(rates(&[0.5, 1.0], &[1.0, 0.5]).is_err());
    }

    #[test]
    fn zero_displacement_gives_zero_stress() {
        let mesh = unit_square_mesh(2);
        let dofmap = DofMap::discontinuous(&mesh);
        let m = MaterialParams::from_shear_modulus(1.0, 0.3).unwrap();
        let s = recover_stress(&mesh, &m, &vec![0.0; dofmap.n_dofs], &dofmap, ProjectionMass::Consistent).unwrap();
        assert!(s.values.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn projection_is_idempotent_on_continuous_bilinear_fields() {
        let mesh = distort(&unit_square_mesh(3), &DistortionSpec::new(0.3, 5)).unwrap();
        let nodal: Vec<[f64; 1]> = mesh.vertices.iter().map(|p| [(3.0 * p.x).sin() + p.y * p.y]).collect();
        let projected = project_to_nodes::<1>(&mesh, ProjectionMass::Consistent, |c, mp| {
            [mesh.cells[c].iter().enumerate().map(|(a, &v)| mp.values[a] * nodal[v][0]).sum()]
        })
        .unwrap();
        for (a, b) in nodal.iter().zip(&projected) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_field_text_round_trip() {
        let rows = vec![[1.0, -2.5, 3.0], [0.125, 0.0, 1e-30]];
        let text = write_nodal_field("stress", &rows);
        assert!(text.starts_with("field stress 3\n"));
        let (name, back) = read_nodal_field(&text).unwrap();
        assert_eq!(name, "stress");
        assert_eq!(back, rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    }
}
