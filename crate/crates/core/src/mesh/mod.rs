//! Quadrilateral meshes: construction, edge topology, boundary classification
//! and the mesh measure used for convergence plots.

mod distort;
mod io;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::fem::CellGeometry;
use crate::{Error, Point, Result};

pub use distort::{distort, DistortionSpec};
pub use io::{read_mesh, write_mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

/// One cell's view of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub cell: usize,
    pub local_edge: usize,
    /// The cell traverses this edge from the higher to the lower global vertex index.
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Smaller global vertex index first.
    pub endpoints: [usize; 2],
    pub length: f64,
    pub first: EdgeSide,
    pub second: Option<EdgeSide>,
    /// Outward normal of the first incident cell.
    pub unit_normal: Point,
}

impl Edge {
    pub fn kind(&self) -> EdgeKind {
        if self.second.is_some() {
            EdgeKind::Interior
        } else {
            EdgeKind::Boundary
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }

    pub fn sides(&self) -> impl Iterator<Item = EdgeSide> {
        std::iter::once(self.first).chain(self.second)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex indices.
    pub cells: Vec<[usize; 4]>,
    pub edges: Vec<Edge>,
    /// Marker for each boundary edge, keyed by edge index.
    pub boundary_markers: BTreeMap<usize, BoundaryKind>,
}

impl QuadMesh {
    /// Build a mesh from raw vertices and cells, checking orientation and
    /// extracting the edge topology. Boundary edges start unmarked.
    pub fn new(vertices: Vec<Point>, cells: Vec<[usize; 4]>) -> Result<Self> {
        let mesh = QuadMesh {
            vertices,
            cells,
            edges: Vec::new(),
            boundary_markers: BTreeMap::new(),
        };
        mesh.check_cells()?;
        extract_edges(mesh)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.cells[cell].map(|v| self.vertices[v]))
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| !e.is_boundary())
    }

    pub fn marker(&self, edge: usize) -> Option<BoundaryKind> {
        self.boundary_markers.get(&edge).copied()
    }

    pub fn is_classified(&self) -> bool {
        self.boundary_edges().all(|(i, _)| self.boundary_markers.contains_key(&i))
    }

    pub fn edge_midpoint(&self, edge: &Edge) -> Point {
        0.5 * (self.vertices[edge.endpoints[0]] + self.vertices[edge.endpoints[1]])
    }

    /// Vertices lying on at least one Dirichlet edge.
    pub fn dirichlet_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (&e, &kind) in &self.boundary_markers {
            if kind == BoundaryKind::Dirichlet {
                for v in self.edges[e].endpoints {
                    flags[v] = true;
                }
            }
        }
        flags
    }

    /// Counter-clockwise orientation and positive Jacobian at every cell corner.
    pub fn check_cells(&self) -> Result<()> {
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= self.vertices.len()) {
                return Err(Error::InvariantViolation(format!(
                    "cell {c} references vertex {v} but the mesh has {} vertices",
                    self.vertices.len()
                )));
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    if cell[a] == cell[b] {
                        return Err(Error::InvariantViolation(format!("cell {c} repeats vertex {}", cell[a])));
                    }
                }
            }
            let dets = self.cell_geometry(c).corner_determinants();
            if let Some(d) = dets.iter().find(|d| !(**d > 0.0)) {
                return Err(Error::InvariantViolation(format!(
                    "cell {c} is not counter-clockwise with positive Jacobian (corner det {d:e})"
                )));
            }
        }
        Ok(())
    }
}

/// Mesh of `[0,1]²` with `2^levels × 2^levels` congruent square cells.
pub fn unit_square_mesh(levels: u32) -> QuadMesh {
    let n = 1usize << levels;
    let nf = n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 / nf, j as f64 / nf));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    QuadMesh::new(vertices, cells).expect("structured unit-square mesh is valid")
}

/// Populate `mesh.edges` from the cell list. Edge indices follow first
/// appearance in (cell, local edge) order, so they depend only on `cells`.
/// Existing boundary markers are kept when the edge set is unchanged.
pub fn extract_edges(mut mesh: QuadMesh) -> Result<QuadMesh> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.cells.len() * 2 + 4);
    let mut edges: Vec<Edge> = Vec::with_capacity(mesh.cells.len() * 2 + 4);
    for (c, cell) in mesh.cells.iter().enumerate() {
        for local in 0..4 {
            let (a, b) = (cell[local], cell[(local + 1) % 4]);
            let key = (a.min(b), a.max(b));
            let side = EdgeSide {
                cell: c,
                local_edge: local,
                reversed: a > b,
            };
            match index.get(&key) {
                None => {
                    let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                    let d = pb - pa;
                    let length = d.norm();
                    index.insert(key, edges.len());
                    edges.push(Edge {
                        endpoints: [key.0, key.1],
                        length,
                        first: side,
                        second: None,
                        unit_normal: Point::new(d.y, -d.x) / length,
                    });
                }
                Some(&e) => {
                    if edges[e].second.is_some() {
                        return Err(Error::NonManifold(key.0, key.1));
                    }
                    edges[e].second = Some(side);
                }
            }
        }
    }
    let same_topology = mesh.edges.len() == edges.len()
        && mesh
            .edges
            .iter()
            .zip(&edges)
            .all(|(o, n)| o.endpoints == n.endpoints && o.second.is_some() == n.second.is_some());
    if !same_topology {
        mesh.boundary_markers.clear();
    }
    mesh.edges = edges;
    Ok(mesh)
}

/// Mark every boundary edge Dirichlet when `is_dirichlet(midpoint)` holds,
/// Neumann otherwise.
pub fn classify_boundary(mut mesh: QuadMesh, is_dirichlet: impl Fn(Point) -> bool) -> Result<QuadMesh> {
    let mut markers = BTreeMap::new();
    for (i, e) in mesh.boundary_edges() {
        let kind = if is_dirichlet(mesh.edge_midpoint(e)) {
            BoundaryKind::Dirichlet
        } else {
            BoundaryKind::Neumann
        };
        markers.insert(i, kind);
    }
    if !markers.values().any(|k| *k == BoundaryKind::Dirichlet) {
        return Err(Error::EmptyDirichletSet);
    }
    mesh.boundary_markers = markers;
    Ok(mesh)
}

/// Mesh measure `h`: mean over cells of the mean of both diagonal lengths.
pub fn mesh_size(mesh: &QuadMesh) -> f64 {
    let diagonals = mesh.cells.iter().map(|c| {
        let v = c.map(|i| mesh.vertices[i]);
        0.5 * ((v[2] - v[0]).norm() + (v[3] - v[1]).norm())
    });
    compensated_sum(diagonals) / mesh.cells.len() as f64
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}
