use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_edges, QuadMesh};
use crate::{Error, Point, Result};

/// Redraws allowed per vertex before the distortion is rejected.
pub const MAX_RETRIES: usize = 100;

/// Seeded random vertex perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    /// Displacement bound relative to the smallest incident edge length, in `[0, 1)`.
    pub factor: f64,
    pub seed: u64,
    /// Also slide non-corner boundary vertices along their (straight) boundary.
    #[serde(default)]
    pub move_boundary: bool,
}

impl DistortionSpec {
    pub fn new(factor: f64, seed: u64) -> Self {
        Self {
            factor,
            seed,
            move_boundary: false,
        }
    }
}

enum Freedom {
    Fixed,
    Free,
    Slide(Point),
}

/// Move each free vertex by a random vector of length at most
/// `factor × (shortest edge incident to it in the input mesh)`.
///
/// Vertices are visited in index order. Each draw is a uniform angle in
/// `[0, 2π)` and a uniform radius; a draw that would invert an incident cell
/// is redrawn, up to [`MAX_RETRIES`] times.
pub fn distort(mesh: &QuadMesh, spec: &DistortionSpec) -> Result<QuadMesh> {
    if !(0.0..1.0).contains(&spec.factor) {
        return Err(Error::InvalidInput(format!("distortion factor {} outside [0, 1)", spec.factor)));
    }
    if spec.factor == 0.0 {
        return Ok(mesh.clone());
    }
    let nv = mesh.num_vertices();
    let mut min_len = vec![f64::INFINITY; nv];
    let mut boundary_dirs: Vec<Vec<Point>> = vec![Vec::new(); nv];
    for e in &mesh.edges {
        let [a, b] = e.endpoints;
        min_len[a] = min_len[a].min(e.length);
        min_len[b] = min_len[b].min(e.length);
        if e.is_boundary() {
            let d = (mesh.vertices[b] - mesh.vertices[a]) / e.length;
            boundary_dirs[a].push(d);
            boundary_dirs[b].push(d);
        }
    }
    let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (c, cell) in mesh.cells.iter().enumerate() {
        for &v in cell {
            vertex_cells[v].push(c);
        }
    }

    let freedom: Vec<Freedom> = boundary_dirs
        .iter()
        .map(|dirs| match dirs.as_slice() {
            [] => Freedom::Free,
            [d0, d1] if spec.move_boundary && (d0.x * d1.y - d0.y * d1.x).abs() < 1e-12 => Freedom::Slide(*d0),
            _ => Freedom::Fixed,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = mesh.clone();
    for v in 0..nv {
        if matches!(freedom[v], Freedom::Fixed) || vertex_cells[v].is_empty() {
            continue;
        }
        let bound = spec.factor * min_len[v];
        let origin = out.vertices[v];
        let mut accepted = false;
        for _ in 0..=MAX_RETRIES {
            let step = match freedom[v] {
                Freedom::Slide(t) => t * rng.random_range(-bound..=bound),
                _ => {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let radius = rng.random_range(0.0..=bound);
                    Point::new(radius * angle.cos(), radius * angle.sin())
                }
            };
            out.vertices[v] = origin + step;
            let valid = vertex_cells[v]
                .iter()
                .all(|&c| out.cell_geometry(c).corner_determinants().iter().all(|d| *d > 0.0));
            if valid {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::DistortionRejected {
                vertex: v,
                retries: MAX_RETRIES,
            });
        }
    }
    extract_edges(out)
}
