//! Global system assembly for the standard Galerkin baselines (Q1, Q1 with
//! selective reduced integration) and the interior penalty family.
//!
//! The interior penalty bilinear form, with `⟦·⟧` the tensor jump, `[·]` the
//! scalar normal jump and `{·}` the average, is
//!
//! ```text
//! a(u, v) = Σ_K ∫_K σ(u):ε(v)
//!         + θ 2μ Σ_E ∫_E ⟦u⟧:{ε(v)}          − 2μ Σ_E ∫_E {ε(u)}:⟦v⟧
//!         + θ λ  Σ_E Q_E[⟦u⟧:{div v 1}]      − λ  Σ_E Q_E[{div u 1}:⟦v⟧]
//!         + k_μ μ Σ_E h_E⁻¹ ∫_E ⟦u⟧:⟦v⟧      + k_λ λ Σ_E h_E⁻¹ Q_E[[u][v]]
//! ```
//!
//! over interior and Dirichlet edges. `∫_E` is the two-point Gauss rule and
//! `Q_E` the `edge_ngp`-point rule: one point gives the under-integrated
//! method, two points the original full-integration one.

use nalgebra::Matrix2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fem::{cell_rule, edge_rule, edge_trace, MappedPoint, QuadratureRule};
use crate::mesh::{BoundaryKind, Edge, QuadMesh};
use crate::model::{BenchmarkProblem, MaterialParams, Tensor, Vector};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodFamily {
    SgQ1,
    SgQ1Sri,
    Ip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub family: MethodFamily,
    /// +1 NIPG, −1 SIPG, 0 IIPG.
    pub theta: i32,
    pub k_mu: f64,
    pub k_lambda: f64,
    /// Gauss points for the λ edge terms: 1 under-integrated, 2 full.
    pub edge_ngp: usize,
}

impl MethodConfig {
    pub fn sg_q1() -> Self {
        Self {
            family: MethodFamily::SgQ1,
            theta: 0,
            k_mu: 0.0,
            k_lambda: 0.0,
            edge_ngp: 2,
        }
    }

    pub fn sg_q1_sri() -> Self {
        Self {
            family: MethodFamily::SgQ1Sri,
            ..Self::sg_q1()
        }
    }

    /// Interior penalty method with the default penalties:
    /// `k_μ = 10, k_λ = 0` for NIPG and `k_μ = k_λ = 10` otherwise.
    pub fn ip(theta: i32, edge_ngp: usize) -> Self {
        Self {
            family: MethodFamily::Ip,
            theta,
            k_mu: 10.0,
            k_lambda: if theta == 1 { 0.0 } else { 10.0 },
            edge_ngp,
        }
    }

    pub fn nipg(edge_ngp: usize) -> Self {
        Self::ip(1, edge_ngp)
    }

    pub fn sipg(edge_ngp: usize) -> Self {
        Self::ip(-1, edge_ngp)
    }

    pub fn iipg(edge_ngp: usize) -> Self {
        Self::ip(0, edge_ngp)
    }

    pub fn with_penalties(mut self, k_mu: f64, k_lambda: f64) -> Self {
        self.k_mu = k_mu;
        self.k_lambda = k_lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == MethodFamily::Ip {
            if !(-1..=1).contains(&self.theta) {
                return Err(Error::ConfigMismatch(format!("theta must be -1, 0 or 1, got {}", self.theta)));
            }
            if !(1..=2).contains(&self.edge_ngp) {
                return Err(Error::ConfigMismatch(format!("edge_ngp must be 1 or 2, got {}", self.edge_ngp)));
            }
            if !(self.k_mu >= 0.0 && self.k_lambda >= 0.0) {
                return Err(Error::ConfigMismatch("penalty parameters must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Short identifier: `sg-q1`, `sg-q1-sri`, or `{nipg,sipg,iipg}-{new,orig}`.
    pub fn id(&self) -> String {
        match self.family {
            MethodFamily::SgQ1 => "sg-q1".into(),
            MethodFamily::SgQ1Sri => "sg-q1-sri".into(),
            MethodFamily::Ip => {
                let variant = match self.theta {
                    1 => "nipg",
                    -1 => "sipg",
                    _ => "iipg",
                };
                let integration = if self.edge_ngp == 1 { "new" } else { "orig" };
                format!("{variant}-{integration}")
            }
        }
    }

    /// Parse an identifier produced by [`MethodConfig::id`], with default penalties.
    pub fn parse(id: &str) -> Result<Self> {
        let config = match id {
            "sg-q1" => Self::sg_q1(),
            "sg-q1-sri" => Self::sg_q1_sri(),
            other => {
                let (variant, integration) = other
                    .split_once('-')
                    .ok_or_else(|| Error::InvalidInput(format!("unknown method '{other}'")))?;
                let theta = match variant {
                    "nipg" => 1,
                    "sipg" => -1,
                    "iipg" => 0,
                    _ => return Err(Error::InvalidInput(format!("unknown method '{other}'"))),
                };
                let ngp = match integration {
                    "new" => 1,
                    "orig" => 2,
                    _ => return Err(Error::InvalidInput(format!("unknown method '{other}'"))),
                };
                Self::ip(theta, ngp)
            }
        };
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLayout {
    /// 8 independent dofs per cell.
    Discontinuous,
    /// 2 dofs per vertex shared between cells.
    Continuous,
}

/// Global index of `(cell, local node a, component k)` at slot `2a + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub layout: DofLayout,
    pub cell_dofs: Vec<[usize; 8]>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn discontinuous(mesh: &QuadMesh) -> Self {
        let cell_dofs = (0..mesh.num_cells()).map(|c| std::array::from_fn(|i| 8 * c + i)).collect();
        Self {
            layout: DofLayout::Discontinuous,
            cell_dofs,
            n_dofs: 8 * mesh.num_cells(),
        }
    }

    pub fn continuous(mesh: &QuadMesh) -> Self {
        let cell_dofs = mesh
            .cells
            .iter()
            .map(|cell| std::array::from_fn(|i| 2 * cell[i / 2] + i % 2))
            .collect();
        Self {
            layout: DofLayout::Continuous,
            cell_dofs,
            n_dofs: 2 * mesh.num_vertices(),
        }
    }

    pub fn for_config(mesh: &QuadMesh, config: &MethodConfig) -> Self {
        match config.family {
            MethodFamily::Ip => Self::discontinuous(mesh),
            _ => Self::continuous(mesh),
        }
    }

    /// Nodal displacement vectors of one cell.
    pub fn cell_coefficients(&self, values: &[f64], cell: usize) -> [Vector; 4] {
        let d = &self.cell_dofs[cell];
        std::array::from_fn(|a| Vector::new(values[d[2 * a]], values[d[2 * a + 1]]))
    }

    /// Nodal interpolant of `field`.
    pub fn interpolate(&self, mesh: &QuadMesh, field: impl Fn(Point) -> Vector) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (c, cell) in mesh.cells.iter().enumerate() {
            for (a, &v) in cell.iter().enumerate() {
                let u = field(mesh.vertices[v]);
                out[self.cell_dofs[c][2 * a]] = u.x;
                out[self.cell_dofs[c][2 * a + 1]] = u.y;
            }
        }
        out
    }
}

pub fn dof_count(mesh: &QuadMesh, config: &MethodConfig) -> usize {
    DofMap::for_config(mesh, config).n_dofs
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofmap: DofMap,
}

impl LinearSystem {
    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs
    }
}

#[derive(Debug, Clone, Default)]
pub struct AssemblyOptions {
    /// Compute local blocks on the rayon pool. The global sum is still taken in
    /// a fixed order, so the result is identical to the sequential one.
    pub parallel: bool,
    /// Visit cells and edges in a seeded random order instead of index order.
    pub shuffle_seed: Option<u64>,
}

/// Local contribution over a set of global dofs.
struct LocalBlock {
    dofs: Vec<usize>,
    /// Row-major `dofs.len()²`, row = test function, column = trial function.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

impl LocalBlock {
    fn new(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Self {
            dofs,
            matrix: vec![0.0; n * n],
            rhs: vec![0.0; n],
        }
    }
}

/// Values and gradients of the 8 vector basis functions at a mapped point.
struct VectorBasis {
    values: [Vector; 8],
    grads: [Tensor; 8],
}

impl VectorBasis {
    fn new(mp: &MappedPoint) -> Self {
        let mut values = [Vector::zeros(); 8];
        let mut grads = [Tensor::zeros(); 8];
        for a in 0..4 {
            for k in 0..2 {
                let i = 2 * a + k;
                values[i][k] = mp.values[a];
                grads[i][(k, 0)] = mp.gradients[a].x;
                grads[i][(k, 1)] = mp.gradients[a].y;
            }
        }
        Self { values, grads }
    }
}

fn sym(g: &Tensor) -> Tensor {
    0.5 * (g + g.transpose())
}

fn ddot(a: &Tensor, b: &Tensor) -> f64 {
    a.component_mul(b).sum()
}

fn outer(v: &Vector, n: &Point) -> Tensor {
    v * n.transpose()
}

/// Cell integrals of `2μ ε(u):ε(v)` (with `mu_rule`), `λ div u div v` (with
/// `lambda_rule`) and `f·v` (with `mu_rule`).
fn cell_block(
    mesh: &QuadMesh,
    dofmap: &DofMap,
    problem: &BenchmarkProblem,
    cell: usize,
    mu_rule: &QuadratureRule,
    lambda_rule: &QuadratureRule,
) -> Result<LocalBlock> {
    let MaterialParams {
        shear_modulus: mu,
        lame_lambda: lambda,
        ..
    } = problem.material;
    let geom = mesh.cell_geometry(cell);
    let mut block = LocalBlock::new(dofmap.cell_dofs[cell].to_vec());
    for (xi, w) in mu_rule.iter() {
        let mp = geom.eval(xi)?;
        let wd = w * mp.det;
        let basis = VectorBasis::new(&mp);
        let eps = basis.grads.map(|g| sym(&g));
        let f = problem.body_force(mp.physical);
        for i in 0..8 {
            block.rhs[i] += wd * f.dot(&basis.values[i]);
            for j in 0..8 {
                block.matrix[8 * i + j] += wd * 2.0 * mu * ddot(&eps[j], &eps[i]);
            }
        }
    }
    for (xi, w) in lambda_rule.iter() {
        let mp = geom.eval(xi)?;
        let wd = w * mp.det;
        let div = VectorBasis::new(&mp).grads.map(|g| g.trace());
        for i in 0..8 {
            for j in 0..8 {
                block.matrix[8 * i + j] += wd * lambda * div[j] * div[i];
            }
        }
    }
    Ok(block)
}

/// Trace quantities of every basis function on one side of an edge.
struct SideTrace {
    values: Vec<Vector>,
    /// `⟦φ⟧`
    jumps: Vec<Tensor>,
    /// `[φ]`
    normal_jumps: Vec<f64>,
    /// `{ε(φ)}`
    avg_strain: Vec<Tensor>,
    /// `{div φ}`
    avg_div: Vec<f64>,
    physical: Point,
}

/// Evaluate the traces of all local basis functions of the edge at parameter `s`.
fn edge_traces(mesh: &QuadMesh, edge: &Edge, s: f64) -> Result<SideTrace> {
    let interior = !edge.is_boundary();
    let avg = if interior { 0.5 } else { 1.0 };
    let n = edge.unit_normal;
    let mut out = SideTrace {
        values: Vec::with_capacity(16),
        jumps: Vec::with_capacity(16),
        normal_jumps: Vec::with_capacity(16),
        avg_strain: Vec::with_capacity(16),
        avg_div: Vec::with_capacity(16),
        physical: Point::zeros(),
    };
    for (k, side) in edge.sides().enumerate() {
        let sign = if k == 0 { 1.0 } else { -1.0 };
        let side_normal = sign * n;
        let xi = edge_trace(side.local_edge, s, side.reversed);
        let mp = mesh.cell_geometry(side.cell).eval(xi)?;
        if k == 0 {
            out.physical = mp.physical;
        }
        let basis = VectorBasis::new(&mp);
        for i in 0..8 {
            let v = basis.values[i];
            out.values.push(v);
            out.jumps.push(outer(&v, &side_normal));
            out.normal_jumps.push(v.dot(&side_normal));
            out.avg_strain.push(avg * sym(&basis.grads[i]));
            out.avg_div.push(avg * basis.grads[i].trace());
        }
    }
    Ok(out)
}

/// Consistency, symmetry and penalty terms on an interior or Dirichlet edge,
/// plus the matching Dirichlet data terms in the right-hand side.
fn ip_edge_block(
    mesh: &QuadMesh,
    dofmap: &DofMap,
    problem: &BenchmarkProblem,
    config: &MethodConfig,
    edge: &Edge,
    full_rule: &QuadratureRule,
    lambda_rule: &QuadratureRule,
) -> Result<LocalBlock> {
    let mu = problem.material.shear_modulus;
    let lambda = problem.material.lame_lambda;
    let theta = config.theta as f64;
    let h = edge.length;
    let half = 0.5 * h;
    let dirichlet = edge.is_boundary();
    let n = edge.unit_normal;

    let dofs: Vec<usize> = edge.sides().flat_map(|s| dofmap.cell_dofs[s.cell]).collect();
    let mut block = LocalBlock::new(dofs);
    let m = block.dofs.len();

    for (p, w) in full_rule.iter() {
        let wq = w * half;
        let t = edge_traces(mesh, edge, p.x)?;
        for i in 0..m {
            for j in 0..m {
                let a = theta * 2.0 * mu * ddot(&t.jumps[j], &t.avg_strain[i]) - 2.0 * mu * ddot(&t.avg_strain[j], &t.jumps[i])
                    + config.k_mu * mu / h * ddot(&t.jumps[j], &t.jumps[i]);
                block.matrix[m * i + j] += wq * a;
            }
        }
        if dirichlet {
            let g = outer(&problem.dirichlet(t.physical), &n);
            for i in 0..m {
                block.rhs[i] += wq * (theta * 2.0 * mu * ddot(&g, &t.avg_strain[i]) + config.k_mu * mu / h * ddot(&g, &t.jumps[i]));
            }
        }
    }

    for (p, w) in lambda_rule.iter() {
        let wq = w * half;
        let t = edge_traces(mesh, edge, p.x)?;
        let div_tensor: Vec<Tensor> = t.avg_div.iter().map(|d| Tensor::identity() * *d).collect();
        for i in 0..m {
            for j in 0..m {
                let a = theta * lambda * ddot(&t.jumps[j], &div_tensor[i]) - lambda * ddot(&div_tensor[j], &t.jumps[i])
                    + config.k_lambda * lambda / h * t.normal_jumps[j] * t.normal_jumps[i];
                block.matrix[m * i + j] += wq * a;
            }
        }
        if dirichlet {
            let gv = problem.dirichlet(t.physical);
            let g = outer(&gv, &n);
            let gn = gv.dot(&n);
            for i in 0..m {
                block.rhs[i] += wq * (theta * lambda * ddot(&g, &div_tensor[i]) + config.k_lambda * lambda / h * gn * t.normal_jumps[i]);
            }
        }
    }
    Ok(block)
}

/// `∫_E h·v` on a Neumann edge.
fn neumann_block(mesh: &QuadMesh, dofmap: &DofMap, problem: &BenchmarkProblem, edge: &Edge, rule: &QuadratureRule) -> Result<LocalBlock> {
    let side = edge.first;
    let geom = mesh.cell_geometry(side.cell);
    let mut block = LocalBlock::new(dofmap.cell_dofs[side.cell].to_vec());
    block.matrix.clear();
    for (p, w) in rule.iter() {
        let mp = geom.eval(edge_trace(side.local_edge, p.x, side.reversed))?;
        let traction = problem.traction(mp.physical, edge.unit_normal);
        let basis = VectorBasis::new(&mp);
        for i in 0..8 {
            block.rhs[i] += w * 0.5 * edge.length * traction.dot(&basis.values[i]);
        }
    }
    Ok(block)
}

fn visiting_order(n: usize, seed: Option<u64>, salt: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ salt));
    }
    order
}

fn map_blocks<F>(order: &[usize], parallel: bool, f: F) -> Result<Vec<LocalBlock>>
where
    F: Fn(usize) -> Result<Option<LocalBlock>> + Sync + Send,
{
    let blocks: Vec<Option<LocalBlock>> = if parallel {
        order.par_iter().map(|&i| f(i)).collect::<Result<_>>()?
    } else {
        order.iter().map(|&i| f(i)).collect::<Result<_>>()?
    };
    Ok(blocks.into_iter().flatten().collect())
}

fn accumulate(n: usize, blocks: impl IntoIterator<Item = LocalBlock>) -> (CsrMatrix, Vec<f64>) {
    let mut triplets = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for block in blocks {
        let m = block.dofs.len();
        for (i, &gi) in block.dofs.iter().enumerate() {
            rhs[gi] += block.rhs[i];
            if block.matrix.is_empty() {
                continue;
            }
            for (j, &gj) in block.dofs.iter().enumerate() {
                let v = block.matrix[m * i + j];
                if v != 0.0 {
                    triplets.push(gi, gj, v);
                }
            }
        }
    }
    (triplets.build(), rhs)
}

fn check_ready(mesh: &QuadMesh) -> Result<()> {
    if !mesh.is_classified() {
        return Err(Error::MeshNotClassified);
    }
    Ok(())
}

/// Assemble the interior penalty system; Dirichlet and Neumann data are imposed weakly.
pub fn assemble_ip(mesh: &QuadMesh, problem: &BenchmarkProblem, config: &MethodConfig, options: &AssemblyOptions) -> Result<LinearSystem> {
    if config.family != MethodFamily::Ip {
        return Err(Error::ConfigMismatch(format!("assemble_ip called with {:?}", config.family)));
    }
    config.validate()?;
    check_ready(mesh)?;
    let dofmap = DofMap::discontinuous(mesh);
    let cell_full = cell_rule(2)?;
    let edge_full = edge_rule(2)?;
    let edge_lambda = edge_rule(config.edge_ngp)?;

    let cell_order = visiting_order(mesh.num_cells(), options.shuffle_seed, 0x9e37_79b9);
    let edge_order = visiting_order(mesh.edges.len(), options.shuffle_seed, 0x7f4a_7c15);
    let cells = map_blocks(&cell_order, options.parallel, |c| {
        cell_block(mesh, &dofmap, problem, c, &cell_full, &cell_full).map(Some)
    })?;
    let edges = map_blocks(&edge_order, options.parallel, |e| {
        let edge = &mesh.edges[e];
        match mesh.marker(e) {
            Some(BoundaryKind::Neumann) => neumann_block(mesh, &dofmap, problem, edge, &edge_full).map(Some),
            _ => ip_edge_block(mesh, &dofmap, problem, config, edge, &edge_full, &edge_lambda).map(Some),
        }
    })?;
    let (matrix, rhs) = accumulate(dofmap.n_dofs, cells.into_iter().chain(edges));
    Ok(LinearSystem { matrix, rhs, dofmap })
}

/// Assemble the conforming Q1 system. With `sri` the `λ div·div` term uses the
/// one-point cell rule. Dirichlet values are imposed strongly: constrained rows
/// become `a_dd u_d = a_dd g_d` and their columns are moved to the right-hand side.
pub fn assemble_sg(mesh: &QuadMesh, problem: &BenchmarkProblem, sri: bool, options: &AssemblyOptions) -> Result<LinearSystem> {
    check_ready(mesh)?;
    let dofmap = DofMap::continuous(mesh);
    let full = cell_rule(2)?;
    let reduced = cell_rule(1)?;
    let lambda_rule = if sri { &reduced } else { &full };
    let edge_full = edge_rule(2)?;

    let cell_order = visiting_order(mesh.num_cells(), options.shuffle_seed, 0x9e37_79b9);
    let edge_order = visiting_order(mesh.edges.len(), options.shuffle_seed, 0x7f4a_7c15);
    let cells = map_blocks(&cell_order, options.parallel, |c| {
        cell_block(mesh, &dofmap, problem, c, &full, lambda_rule).map(Some)
    })?;
    let edges = map_blocks(&edge_order, options.parallel, |e| match mesh.marker(e) {
        Some(BoundaryKind::Neumann) => neumann_block(mesh, &dofmap, problem, &mesh.edges[e], &edge_full).map(Some),
        _ => Ok(None),
    })?;
    let (matrix, mut rhs) = accumulate(dofmap.n_dofs, cells.into_iter().chain(edges));

    let mut fixed: Vec<Option<f64>> = vec![None; dofmap.n_dofs];
    for (v, on_dirichlet) in mesh.dirichlet_vertices().into_iter().enumerate() {
        if on_dirichlet {
            let g = problem.dirichlet(mesh.vertices[v]);
            fixed[2 * v] = Some(g.x);
            fixed[2 * v + 1] = Some(g.y);
        }
    }
    let mut triplets = TripletBuilder::with_capacity(dofmap.n_dofs, dofmap.n_dofs, matrix.nnz());
    for r in 0..matrix.nrows {
        if let Some(g) = fixed[r] {
            let d = matrix.get(r, r);
            triplets.push(r, r, d);
            rhs[r] = d * g;
            continue;
        }
        for (c, v) in matrix.row(r) {
            match fixed[c] {
                Some(g) => rhs[r] -= v * g,
                None => triplets.push(r, c, v),
            }
        }
    }
    Ok(LinearSystem {
        matrix: triplets.build(),
        rhs,
        dofmap,
    })
}

/// Dispatch on the method family.
pub fn assemble(mesh: &QuadMesh, problem: &BenchmarkProblem, config: &MethodConfig, options: &AssemblyOptions) -> Result<LinearSystem> {
    config.validate()?;
    match config.family {
        MethodFamily::SgQ1 => assemble_sg(mesh, problem, false, options),
        MethodFamily::SgQ1Sri => assemble_sg(mesh, problem, true, options),
        MethodFamily::Ip => assemble_ip(mesh, problem, config, options),
    }
}

/// Per-edge values of the λ penalty integrand `[u][v]` contribution for the
/// two traces of a single edge, returned as the local `k_λ λ/h_E Q_E[[φ_j][φ_i]]`
/// block. Exposed for quadrature cross-checks.
pub fn lambda_penalty_block(mesh: &QuadMesh, edge: usize, k_lambda: f64, lambda: f64, ngp: usize) -> Result<Vec<Vec<f64>>> {
    let edge = &mesh.edges[edge];
    let rule = edge_rule(ngp)?;
    let mut block: Option<Vec<Vec<f64>>> = None;
    for (p, w) in rule.iter() {
        let t = edge_traces(mesh, edge, p.x)?;
        let m = t.normal_jumps.len();
        let b = block.get_or_insert_with(|| vec![vec![0.0; m]; m]);
        for i in 0..m {
            for j in 0..m {
                b[i][j] += w * 0.5 * edge.length * k_lambda * lambda / edge.length * t.normal_jumps[j] * t.normal_jumps[i];
            }
        }
    }
    Ok(block.unwrap_or_default())
}

/// Strain at a reference point of a cell for the given global coefficient vector.
pub fn cell_gradient(mesh: &QuadMesh, dofmap: &DofMap, values: &[f64], cell: usize, xi: Point) -> Result<Matrix2<f64>> {
    let mp = mesh.cell_geometry(cell).eval(xi)?;
    let coeffs = dofmap.cell_coefficients(values, cell);
    Ok(coeffs
        .iter()
        .zip(mp.gradients.iter())
        .fold(Tensor::zeros(), |acc, (u, g)| acc + u * g.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{classify_boundary, unit_square_mesh};
    use crate::model::{manufactured_problem, BoundarySetup, ManufacturedField};

    fn problem(field: ManufacturedField) -> BenchmarkProblem {
        let m = MaterialParams::from_shear_modulus(1.0, 0.3).unwrap();
        manufactured_problem(m, field, BoundarySetup::AllDirichlet)
    }

    #[test]
    fn method_ids_round_trip() {
        for id in ["sg-q1", "sg-q1-sri", "nipg-new", "sipg-orig", "iipg-new"] {
            assert_eq!(MethodConfig::parse(id).unwrap().id(), id);
        }
        assert!(MethodConfig::parse("obb-new").is_err());
        let n = MethodConfig::parse("nipg-new").unwrap();
        assert_eq!((n.k_mu, n.k_lambda), (10.0, 0.0));
        let s = MethodConfig::parse("sipg-orig").unwrap();
        assert_eq!((s.k_mu, s.k_lambda, s.edge_ngp), (10.0, 10.0, 2));
    }

    #[test]
    fn dof_counts() {
        let m = unit_square_mesh(1);
        assert_eq!(dof_count(&m, &MethodConfig::sg_q1()), 18);
        assert_eq!(dof_count(&m, &MethodConfig::nipg(1)), 32);
        assert_eq!(dof_count(&unit_square_mesh(3), &MethodConfig::sipg(1)), 512);
    }

    #[test]
    fn config_errors() {
        let mesh = classify_boundary(unit_square_mesh(1), |_| true).unwrap();
        let p = problem(ManufacturedField::Sine);
        let opts = AssemblyOptions::default();
        assert!(matches!(
            assemble_ip(&mesh, &p, &MethodConfig::sg_q1(), &opts),
            Err(Error::ConfigMismatch(_))
        ));
        let mut bad = MethodConfig::sipg(1);
        bad.theta = 2;
        assert!(matches!(assemble_ip(&mesh, &p, &bad, &opts), Err(Error::ConfigMismatch(_))));
        let unclassified = unit_square_mesh(1);
        assert!(matches!(
            assemble_ip(&unclassified, &p, &MethodConfig::sipg(1), &opts),
            Err(Error::MeshNotClassified)
        ));
    }

    #[test]
    fn constant_field_residual_vanishes() {
        let mesh = classify_boundary(unit_square_mesh(2), |_| true).unwrap();
        let field = ManufacturedField::Linear {
            gradient: [[0.0; 2]; 2],
            offset: [0.3, -0.7],
        };
        let p = problem(field);
        for config in [MethodConfig::nipg(1), MethodConfig::sipg(2), MethodConfig::iipg(1)] {
            let sys = assemble_ip(&mesh, &p, &config, &AssemblyOptions::default()).unwrap();
            let c = sys.dofmap.interpolate(&mesh, |x| field.displacement(x));
            let r: Vec<f64> = sys.matrix.mul_vec(&c).iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
            let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(rmax < 1e-10 * sys.matrix.norm_inf() * 0.7, "{} residual {rmax}", config.id());
        }
    }

    #[test]
    fn parallel_assembly_matches_sequential() {
        let mesh = classify_boundary(unit_square_mesh(2), |p| p.x < 1e-12).unwrap();
        let p = problem(ManufacturedField::Sine);
        let config = MethodConfig::iipg(1);
        let a = assemble_ip(&mesh, &p, &config, &AssemblyOptions::default()).unwrap();
        let b = assemble_ip(
            &mesh,
            &p,
            &config,
            &AssemblyOptions {
                parallel: true,
                shuffle_seed: None,
            },
        )
        .unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
    }
}
