//! Line-oriented mesh text format.
//!
//! ```text
//! quadmesh 1
//! vertices N
//! x y            # N lines
//! cells M
//! v0 v1 v2 v3    # M lines, 0-based, counter-clockwise
//! boundary K
//! va vb D|N      # K lines, one per boundary edge
//! ```
//!
//! `#` starts a comment. Every boundary edge must carry a marker.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use super::{BoundaryKind, QuadMesh};
use crate::{Error, Point, Result};

pub fn write_mesh(mesh: &QuadMesh) -> Result<String> {
    if !mesh.is_classified() {
        return Err(Error::MeshNotClassified);
    }
    let mut out = String::new();
    out.push_str("quadmesh 1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{} {}", p.x, p.y);
    }
    let _ = writeln!(out, "cells {}", mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(out, "{} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(out, "boundary {}", mesh.boundary_markers.len());
    for (&e, &kind) in &mesh.boundary_markers {
        let [a, b] = mesh.edges[e].endpoints;
        let tag = match kind {
            BoundaryKind::Dirichlet => 'D',
            BoundaryKind::Neumann => 'N',
        };
        let _ = writeln!(out, "{a} {b} {tag}");
    }
    Ok(out)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-empty line with comments stripped, as whitespace-separated tokens.
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok(tokens);
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            message: "unexpected end of input".into(),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            message: message.into(),
        }
    }

    fn parse<T: FromStr>(&self, token: &str, what: &str) -> Result<T> {
        token.parse().map_err(|_| self.err(format!("invalid {what} '{token}'")))
    }

    fn section(&mut self, keyword: &str) -> Result<usize> {
        let t = self.next_tokens()?;
        match t.as_slice() {
            [k, n] if *k == keyword => self.parse(n, "count"),
            _ => Err(self.err(format!("expected '{keyword} <count>'"))),
        }
    }

    fn row<const N: usize>(&mut self) -> Result<[&'a str; N]> {
        let t = self.next_tokens()?;
        <[&str; N]>::try_from(t.as_slice()).map_err(|_| self.err(format!("expected {N} fields, found {}", t.len())))
    }
}

pub fn read_mesh(text: &str) -> Result<QuadMesh> {
    let mut lines = Lines::new(text);
    let header = lines.next_tokens()?;
    if header != ["quadmesh", "1"] {
        return Err(lines.err("expected header 'quadmesh 1'"));
    }

    let nv = lines.section("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let [x, y] = lines.row::<2>()?;
        let p = Point::new(lines.parse(x, "coordinate")?, lines.parse(y, "coordinate")?);
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(lines.err("non-finite coordinate"));
        }
        vertices.push(p);
    }

    let nc = lines.section("cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let row = lines.row::<4>()?;
        let mut cell = [0usize; 4];
        for (slot, tok) in cell.iter_mut().zip(row) {
            *slot = lines.parse(tok, "vertex index")?;
        }
        cells.push(cell);
    }

    let nb = lines.section("boundary")?;
    let mut listed = Vec::with_capacity(nb);
    for _ in 0..nb {
        let [a, b, tag] = lines.row::<3>()?;
        let a: usize = lines.parse(a, "vertex index")?;
        let b: usize = lines.parse(b, "vertex index")?;
        let kind = match tag {
            "D" => BoundaryKind::Dirichlet,
            "N" => BoundaryKind::Neumann,
            other => return Err(lines.err(format!("unknown boundary marker '{other}'"))),
        };
        listed.push((a.min(b), a.max(b), kind));
    }

    let mut mesh = QuadMesh::new(vertices, cells)?;

    let lookup: HashMap<(usize, usize), usize> = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.endpoints[0], e.endpoints[1]), i))
        .collect();
    let mut markers = BTreeMap::new();
    for (a, b, kind) in listed {
        let edge = match lookup.get(&(a, b)) {
            Some(&e) if mesh.edges[e].is_boundary() => e,
            _ => return Err(Error::InvariantViolation(format!("({a}, {b}) is not a boundary edge"))),
        };
        if markers.insert(edge, kind).is_some() {
            return Err(Error::InvariantViolation(format!("boundary edge ({a}, {b}) listed twice")));
        }
    }
    if let Some((_, e)) = mesh.boundary_edges().find(|(i, _)| !markers.contains_key(i)) {
        return Err(Error::InvariantViolation(format!(
            "boundary edge ({}, {}) has no marker",
            e.endpoints[0], e.endpoints[1]
        )));
    }
    if !markers.values().any(|k| *k == BoundaryKind::Dirichlet) {
        return Err(Error::EmptyDirichletSet);
    }
    mesh.boundary_markers = markers;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{classify_boundary, distort, unit_square_mesh, DistortionSpec};

    #[test]
    fn round_trip_preserves_coordinates_bitwise() {
        let m = classify_boundary(unit_square_mesh(2), |p| p.x < 1e-12).unwrap();
        let m = distort(&m, &DistortionSpec::new(0.3, 9)).unwrap();
        let back = read_mesh(&write_mesh(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn clockwise_cell_is_invariant_violation() {
        let text = "quadmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 3 2 1\nboundary 0\n";
        assert!(matches!(read_mesh(text), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn triple_shared_side_is_non_manifold() {
        let text = "quadmesh 1
vertices 6
0 0
1 0
1 1
0 1
1 2
0 2
cells 3
0 1 2 3
3 2 4 5
2 3 0 1
boundary 0
";
        assert!(matches!(read_mesh(text), Err(Error::NonManifold(2, 3))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "quadmesh 1\n# comment\nvertices 2\n0 0\n1 x\n";
        match read_mesh(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unlisted_boundary_edge_is_an_error() {
        let text = "quadmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\nboundary 3\n0 1 D\n1 2 N\n2 3 N\n";
        assert!(matches!(read_mesh(text), Err(Error::InvariantViolation(_))));
        let text = "quadmesh 1\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\nboundary 4\n0 1 N\n1 2 N\n2 3 N\n0 3 N\n";
        assert!(matches!(read_mesh(text), Err(Error::EmptyDirichletSet)));
    }

    #[test]
    fn unclassified_mesh_cannot_be_written() {
        assert!(matches!(write_mesh(&unit_square_mesh(1)), Err(Error::MeshNotClassified)));
    }
}
