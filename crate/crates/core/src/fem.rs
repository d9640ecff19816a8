//! Q1 isoparametric basis on the reference square `[-1,1]²`, the bilinear
//! geometric map, and Gauss–Legendre rules for cells and edges.
//!
//! Reference vertices follow the mesh's counter-clockwise convention:
//!
//! ```text
//!  3 (-1, 1) ──── 2 (1, 1)
//!     │              │
//!  0 (-1,-1) ──── 1 (1,-1)
//! ```
//!
//! Local edge `i` runs from local vertex `i` to vertex `(i + 1) % 4`.

use nalgebra::Matrix2;

use crate::{Error, Point, Result};

/// Reference coordinates of the four Q1 nodes.
pub const REF_VERTICES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Largest number of Gauss points per direction we generate.
pub const MAX_GAUSS_POINTS: usize = 10;

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct Q1Eval {
    pub values: [f64; 4],
    pub ref_gradients: [Point; 4],
}

/// Bilinear shape functions `N_a = ¼(1 + ξ_a ξ)(1 + η_a η)` and their reference gradients.
pub fn q1_basis(xi: Point) -> Q1Eval {
    let mut values = [0.0; 4];
    let mut ref_gradients = [Point::zeros(); 4];
    for (a, [xa, ya]) in REF_VERTICES.iter().enumerate() {
        let fx = 1.0 + xa * xi.x;
        let fy = 1.0 + ya * xi.y;
        values[a] = 0.25 * fx * fy;
        ref_gradients[a] = Point::new(0.25 * xa * fy, 0.25 * ya * fx);
    }
    Q1Eval { values, ref_gradients }
}

/// Quadrature rule on a reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_GAUSS_POINTS {
        return Err(Error::UnsupportedOrder(n));
    }
    // Closed forms for the rules the solver uses on every cell.
    match n {
        1 => return Ok((vec![0.0], vec![2.0])),
        2 => {
            let p = 1.0 / 3f64.sqrt();
            return Ok((vec![-p, p], vec![1.0, 1.0]));
        }
        _ => {}
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product Gauss rule with `n × n` points on the reference square.
pub fn cell_rule(n: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_legendre(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push(Point::new(x[i], x[j]));
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// `n`-point Gauss rule on the reference edge `[-1, 1]`; points are stored as `(s, 0)`.
pub fn edge_rule(n: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_legendre(n)?;
    Ok(QuadratureRule {
        points: x.into_iter().map(|s| Point::new(s, 0.0)).collect(),
        weights: w,
    })
}

/// Map an edge parameter `s ∈ [-1, 1]` to the cell reference boundary.
///
/// `reversed` is true when the cell's local edge direction (vertex `i` → `i+1`)
/// runs against the mesh's canonical edge orientation (low global index → high).
/// With this flag both incident cells see `s = -1` at the same physical endpoint.
pub fn edge_trace(local_edge: usize, s: f64, reversed: bool) -> Point {
    let t = if reversed { -s } else { s };
    let [ax, ay] = REF_VERTICES[local_edge % 4];
    let [bx, by] = REF_VERTICES[(local_edge + 1) % 4];
    let (wa, wb) = (0.5 * (1.0 - t), 0.5 * (1.0 + t));
    Point::new(wa * ax + wb * bx, wa * ay + wb * by)
}

/// Geometry of one bilinear quadrilateral.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub vertices: [Point; 4],
}

/// Bilinear map data at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct MappedPoint {
    pub reference: Point,
    pub physical: Point,
    /// `J[(i, j)] = ∂x_i/∂ξ_j`
    pub jacobian: Matrix2<f64>,
    pub det: f64,
    pub inverse: Matrix2<f64>,
    pub values: [f64; 4],
    /// Physical shape function gradients `J⁻ᵀ ∇̂N_a`.
    pub gradients: [Point; 4],
}

impl CellGeometry {
    pub fn new(vertices: [Point; 4]) -> Self {
        Self { vertices }
    }

    pub fn map(&self, xi: Point) -> Point {
        let q = q1_basis(xi);
        self.vertices.iter().zip(q.values).fold(Point::zeros(), |acc, (v, n)| acc + v * n)
    }

    pub fn jacobian(&self, xi: Point) -> Matrix2<f64> {
        let q = q1_basis(xi);
        let mut j = Matrix2::zeros();
        for (v, g) in self.vertices.iter().zip(q.ref_gradients.iter()) {
            j += v * g.transpose();
        }
        j
    }

    /// Evaluate the map, its Jacobian and the physical gradients at `xi`.
    pub fn eval(&self, xi: Point) -> Result<MappedPoint> {
        let q = q1_basis(xi);
        let mut physical = Point::zeros();
        let mut jacobian = Matrix2::zeros();
        for a in 0..4 {
            physical += self.vertices[a] * q.values[a];
            jacobian += self.vertices[a] * q.ref_gradients[a].transpose();
        }
        let det = jacobian.determinant();
        if !(det > 0.0) {
            return Err(Error::SingularJacobian { det });
        }
        let inverse = Matrix2::new(jacobian[(1, 1)], -jacobian[(0, 1)], -jacobian[(1, 0)], jacobian[(0, 0)]) / det;
        let inv_t = inverse.transpose();
        let gradients = q.ref_gradients.map(|g| inv_t * g);
        Ok(MappedPoint {
            reference: xi,
            physical,
            jacobian,
            det,
            inverse,
            values: q.values,
            gradients,
        })
    }

    /// Physical gradients `∇N_a = J⁻ᵀ ∇̂N_a`.
    pub fn physical_gradients(&self, xi: Point) -> Result<[Point; 4]> {
        Ok(self.eval(xi)?.gradients)
    }

    /// Determinant of the Jacobian at each reference vertex. The determinant is
    /// affine in each reference coordinate, so positivity here implies positivity
    /// on the whole cell.
    pub fn corner_determinants(&self) -> [f64; 4] {
        std::array::from_fn(|a| {
            let p = self.vertices[a];
            let next = self.vertices[(a + 1) % 4] - p;
            let prev = self.vertices[(a + 3) % 4] - p;
            0.25 * (next.x * prev.y - next.y * prev.x)
        })
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        0.5 * (0..4)
            .map(|a| {
                let b = (a + 1) % 4;
                v[a].x * v[b].y - v[b].x * v[a].y
            })
            .sum::<f64>()
    }

    /// Invert the bilinear map by Newton iteration. Returns `None` if it fails
    /// to converge or the solution leaves the reference square by more than `slack`.
    pub fn inverse_map(&self, x: Point, slack: f64) -> Option<Point> {
        let mut xi = Point::zeros();
        for _ in 0..50 {
            let r = self.map(xi) - x;
            let j = self.jacobian(xi);
            let step = j.try_inverse()? * r;
            xi -= step;
            if step.norm() < 1e-14 {
                break;
            }
        }
        let scale = (self.vertices[2] - self.vertices[0])
            .norm()
            .max((self.vertices[3] - self.vertices[1]).norm());
        if (self.map(xi) - x).norm() > 1e-10 * scale.max(1.0) {
            return None;
        }
        let lim = 1.0 + slack;
        (xi.x.abs() <= lim && xi.y.abs() <= lim).then_some(xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodal_and_center_values() {
        let q = q1_basis(Point::new(-1.0, -1.0));
        assert_eq!(q.values, [1.0, 0.0, 0.0, 0.0]);
        let q = q1_basis(Point::zeros());
        assert_eq!(q.values, [0.25; 4]);
    }

    #[test]
    fn unit_square_gradients_are_half_reference() {
        let geom = CellGeometry::new([
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]);
        let xi = Point::new(0.3, -0.7);
        let g = geom.physical_gradients(xi).unwrap();
        let r = q1_basis(xi).ref_gradients;
        for a in 0..4 {
            assert_relative_eq!(g[a], r[a] * 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn translation_leaves_gradients_unchanged() {
        let v = [
            Point::new(0.0, 0.1),
            Point::new(1.2, 0.0),
            Point::new(1.0, 0.9),
            Point::new(-0.1, 1.1),
        ];
        let shift = Point::new(3.5, -2.25);
        let g0 = CellGeometry::new(v);
        let g1 = CellGeometry::new(v.map(|p| p + shift));
        let xi = Point::new(-0.2, 0.4);
        let a = g0.physical_gradients(xi).unwrap();
        let b = g1.physical_gradients(xi).unwrap();
        for k in 0..4 {
            assert_relative_eq!(a[k], b[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn inverted_cell_reports_singular_jacobian() {
        let geom = CellGeometry::new([
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ]);
        assert!(matches!(geom.eval(Point::zeros()), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn unsupported_orders() {
        assert!(matches!(cell_rule(0), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(edge_rule(MAX_GAUSS_POINTS + 1), Err(Error::UnsupportedOrder(_))));
    }

    #[test]
    fn weights_sum_to_reference_measure() {
        for n in 1..=MAX_GAUSS_POINTS {
            let c: f64 = cell_rule(n).unwrap().weights.iter().sum();
            let e: f64 = edge_rule(n).unwrap().weights.iter().sum();
            assert_relative_eq!(c, 4.0, epsilon = 1e-13);
            assert_relative_eq!(e, 2.0, epsilon = 1e-13);
        }
        assert_eq!(edge_rule(1).unwrap().points[0].x, 0.0);
    }

    #[test]
    fn edge_trace_endpoints() {
        for e in 0..4 {
            let a = edge_trace(e, -1.0, false);
            let b = edge_trace(e, 1.0, false);
            assert_eq!([a.x, a.y], REF_VERTICES[e]);
            assert_eq!([b.x, b.y], REF_VERTICES[(e + 1) % 4]);
            assert_eq!(edge_trace(e, -1.0, true), b);
        }
    }

    #[test]
    fn inverse_map_round_trip() {
        let geom = CellGeometry::new([
            Point::new(0.0, 0.1),
            Point::new(1.2, 0.0),
            Point::new(1.0, 0.9),
            Point::new(-0.1, 1.1),
        ]);
        let xi = Point::new(0.37, -0.81);
        let back = geom.inverse_map(geom.map(xi), 1e-9).unwrap();
        assert_relative_eq!(back, xi, epsilon = 1e-12);
        assert!(geom.inverse_map(Point::new(5.0, 5.0), 1e-9).is_none());
    }
}
