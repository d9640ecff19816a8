//! Material law and benchmark problem definitions.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::mesh::{classify_boundary, distort, unit_square_mesh, DistortionSpec, QuadMesh};
use crate::{Error, Point, Result};

pub type Vector = nalgebra::Vector2<f64>;
pub type Tensor = Matrix2<f64>;

/// Isotropic plane-strain material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lame_lambda: f64,
    pub shear_modulus: f64,
}

/// Derive the Lamé parameters from Young's modulus and Poisson's ratio.
pub fn make_material(youngs_modulus: f64, poisson_ratio: f64) -> Result<MaterialParams> {
    if !(youngs_modulus > 0.0) {
        return Err(Error::NonPositive {
            what: "Young's modulus",
            value: youngs_modulus,
        });
    }
    if !(poisson_ratio < 0.5) {
        return Err(Error::IncompressibleLimit(poisson_ratio));
    }
    if !(poisson_ratio > 0.0) {
        return Err(Error::NonPositive {
            what: "Poisson's ratio",
            value: poisson_ratio,
        });
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    Ok(MaterialParams {
        youngs_modulus: e,
        poisson_ratio: nu,
        lame_lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        shear_modulus: e / (2.0 * (1.0 + nu)),
    })
}

impl MaterialParams {
    /// Material with a prescribed shear modulus, `E = 2μ(1 + ν)`.
    pub fn from_shear_modulus(shear_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(shear_modulus > 0.0) {
            return Err(Error::NonPositive {
                what: "shear modulus",
                value: shear_modulus,
            });
        }
        make_material(2.0 * shear_modulus * (1.0 + poisson_ratio), poisson_ratio)
    }

    pub fn stress(&self, strain: &Tensor) -> Tensor {
        stress(self, strain)
    }
}

/// `σ = 2μ ε + λ tr(ε) 1`
pub fn stress(material: &MaterialParams, strain: &Tensor) -> Tensor {
    strain * (2.0 * material.shear_modulus) + Tensor::identity() * (material.lame_lambda * strain.trace())
}

pub fn symmetric_part(grad: &Tensor) -> Tensor {
    0.5 * (grad + grad.transpose())
}

/// Closed-form displacement fields used for manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManufacturedField {
    /// `u = A x + c`
    Linear { gradient: [[f64; 2]; 2], offset: [f64; 2] },
    /// `u = 0.1 (sin πx sin πy, sin πx sin πy)`
    Sine,
    /// `u = 0.1 (∂ψ/∂y, −∂ψ/∂x)` with `ψ = sin²(πx) sin²(πy)`
    DivergenceFree,
    /// Field whose load is the square-plate body force at shear modulus 1:
    /// `u = 0.04 (w + φ(1,1)/(1+λ))` with the solenoidal
    /// `w = (sin 2πy (cos 2πx − 1), sin 2πx (1 − cos 2πy))` and `φ = sin πx sin πy`.
    Plate { lambda: f64 },
}

impl ManufacturedField {
    /// The default linear field `(x + 2y, 3x − y)·10⁻³`.
    pub fn linear() -> Self {
        ManufacturedField::Linear {
            gradient: [[1e-3, 2e-3], [3e-3, -1e-3]],
            offset: [0.0, 0.0],
        }
    }

    /// Look up a catalogue entry by name. `plate` depends on λ.
    pub fn by_name(name: &str, material: &MaterialParams) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            "sine" => Ok(Self::Sine),
            "divergence_free" => Ok(Self::DivergenceFree),
            "plate" => Ok(Self::Plate {
                lambda: material.lame_lambda,
            }),
            other => Err(Error::InvalidInput(format!(
                "unknown manufactured field '{other}' (expected linear, sine, divergence_free or plate)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Sine => "sine",
            Self::DivergenceFree => "divergence_free",
            Self::Plate { .. } => "plate",
        }
    }

    pub fn displacement(&self, p: Point) -> Vector {
        let (x, y) = (p.x, p.y);
        match *self {
            Self::Linear { gradient: a, offset: c } => Vector::new(a[0][0] * x + a[0][1] * y + c[0], a[1][0] * x + a[1][1] * y + c[1]),
            Self::Sine => {
                let phi = (PI * x).sin() * (PI * y).sin();
                Vector::new(0.1 * phi, 0.1 * phi)
            }
            Self::DivergenceFree => {
                let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
                Vector::new(
                    0.1 * PI * sx * sx * (2.0 * PI * y).sin(),
                    -0.1 * PI * (2.0 * PI * x).sin() * sy * sy,
                )
            }
            Self::Plate { lambda } => {
                let t = Trig::new(x, y);
                let p = t.sx * t.sy / (1.0 + lambda);
                Vector::new(0.04 * (t.s2y * (t.c2x - 1.0) + p), 0.04 * (t.s2x * (1.0 - t.c2y) + p))
            }
        }
    }

    /// `∇u` with `G[(i, j)] = ∂u_i/∂x_j`.
    pub fn gradient(&self, p: Point) -> Tensor {
        let (x, y) = (p.x, p.y);
        match *self {
            Self::Linear { gradient: a, .. } => Tensor::new(a[0][0], a[0][1], a[1][0], a[1][1]),
            Self::Sine => {
                let t = Trig::new(x, y);
                let (px, py) = (PI * t.cx * t.sy, PI * t.sx * t.cy);
                0.1 * Tensor::new(px, py, px, py)
            }
            Self::DivergenceFree => {
                let t = Trig::new(x, y);
                0.1 * PI
                    * Tensor::new(
                        PI * t.s2x * t.s2y,
                        2.0 * PI * t.sx * t.sx * t.c2y,
                        -2.0 * PI * t.c2x * t.sy * t.sy,
                        -PI * t.s2x * t.s2y,
                    )
            }
            Self::Plate { lambda } => {
                let t = Trig::new(x, y);
                let k = 1.0 / (1.0 + lambda);
                let (px, py) = (PI * t.cx * t.sy * k, PI * t.sx * t.cy * k);
                0.04 * Tensor::new(
                    -2.0 * PI * t.s2y * t.s2x + px,
                    2.0 * PI * t.c2y * (t.c2x - 1.0) + py,
                    2.0 * PI * t.c2x * (1.0 - t.c2y) + px,
                    2.0 * PI * t.s2x * t.s2y + py,
                )
            }
        }
    }

    /// Second derivatives: `[H_0, H_1]` with `H_i[(j, k)] = ∂²u_i/∂x_j∂x_k`.
    pub fn hessians(&self, p: Point) -> [Tensor; 2] {
        let (x, y) = (p.x, p.y);
        match *self {
            Self::Linear { .. } => [Tensor::zeros(); 2],
            Self::Sine => {
                let t = Trig::new(x, y);
                let h = 0.1 * PI * PI * Tensor::new(-t.sx * t.sy, t.cx * t.cy, t.cx * t.cy, -t.sx * t.sy);
                [h, h]
            }
            Self::DivergenceFree => {
                let t = Trig::new(x, y);
                let p3 = PI * PI * PI;
                let h0_xy = 0.2 * p3 * t.s2x * t.c2y;
                let h0 = Tensor::new(0.2 * p3 * t.c2x * t.s2y, h0_xy, h0_xy, -0.4 * p3 * t.sx * t.sx * t.s2y);
                let h1_xy = -0.2 * p3 * t.c2x * t.s2y;
                let h1 = Tensor::new(0.4 * p3 * t.s2x * t.sy * t.sy, h1_xy, h1_xy, -0.2 * p3 * t.s2x * t.c2y);
                [h0, h1]
            }
            Self::Plate { lambda } => {
                let t = Trig::new(x, y);
                let k = PI * PI / (1.0 + lambda);
                let phi = k * Tensor::new(-t.sx * t.sy, t.cx * t.cy, t.cx * t.cy, -t.sx * t.sy);
                let q = 4.0 * PI * PI;
                let w0 = Tensor::new(
                    -q * t.s2y * t.c2x,
                    -q * t.c2y * t.s2x,
                    -q * t.c2y * t.s2x,
                    -q * t.s2y * (t.c2x - 1.0),
                );
                let w1 = Tensor::new(-q * t.s2x * (1.0 - t.c2y), q * t.c2x * t.s2y, q * t.c2x * t.s2y, q * t.s2x * t.c2y);
                [0.04 * (w0 + phi), 0.04 * (w1 + phi)]
            }
        }
    }

    pub fn strain(&self, p: Point) -> Tensor {
        symmetric_part(&self.gradient(p))
    }

    /// Body force `f = −div σ(u) = −μ Δu − (λ + μ) ∇(div u)`.
    pub fn body_force(&self, material: &MaterialParams, p: Point) -> Vector {
        let h = self.hessians(p);
        let (mu, lambda) = (material.shear_modulus, material.lame_lambda);
        let grad_div = Vector::new(h[0][(0, 0)] + h[1][(0, 1)], h[0][(0, 1)] + h[1][(1, 1)]);
        let laplacian = Vector::new(h[0].trace(), h[1].trace());
        -mu * laplacian - (lambda + mu) * grad_div
    }
}

struct Trig {
    sx: f64,
    sy: f64,
    cx: f64,
    cy: f64,
    s2x: f64,
    s2y: f64,
    c2x: f64,
    c2y: f64,
}

impl Trig {
    fn new(x: f64, y: f64) -> Self {
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let (s2x, c2x) = (2.0 * PI * x).sin_cos();
        let (s2y, c2y) = (2.0 * PI * y).sin_cos();
        Self {
            sx,
            sy,
            cx,
            cy,
            s2x,
            s2y,
            c2x,
            c2y,
        }
    }
}

/// Which part of the unit-square boundary is Dirichlet; the rest is Neumann.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySetup {
    #[default]
    AllDirichlet,
    /// Dirichlet on `x = 0` only.
    LeftDirichlet,
}

impl BoundarySetup {
    pub fn is_dirichlet(&self, midpoint: Point) -> bool {
        match self {
            BoundarySetup::AllDirichlet => true,
            BoundarySetup::LeftDirichlet => midpoint.x.abs() < 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePolicy {
    ClosedForm,
    Manufactured,
    FineMeshSurrogate,
}

/// Shape of the shear load on the free end of the cantilever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TractionProfile {
    /// `t_y = f_max (1 − |2y − 1|)`: zero at both corners, peak at mid-height.
    #[default]
    Tent,
    /// `t_y = f_max y`: zero at the bottom corner, peak at the top.
    Ramp,
}

pub const CANTILEVER_YOUNGS_MODULUS: f64 = 1_500_000.0;
pub const CANTILEVER_MAX_LOAD: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    SquarePlate,
    Cantilever(TractionProfile),
    Manufactured(ManufacturedField),
}

/// A unit-square benchmark: material, loads, boundary data and, when known,
/// the exact displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProblem {
    pub name: String,
    pub material: MaterialParams,
    pub kind: ProblemKind,
    pub boundary: BoundarySetup,
    pub reference_policy: ReferencePolicy,
}

impl BenchmarkProblem {
    pub fn body_force(&self, p: Point) -> Vector {
        match self.kind {
            ProblemKind::SquarePlate => square_plate_force(self.material.lame_lambda, p),
            ProblemKind::Cantilever(_) => Vector::zeros(),
            ProblemKind::Manufactured(field) => field.body_force(&self.material, p),
        }
    }

    /// Prescribed displacement `g` on Γ_D.
    pub fn dirichlet(&self, p: Point) -> Vector {
        match self.kind {
            ProblemKind::Manufactured(field) => field.displacement(p),
            _ => Vector::zeros(),
        }
    }

    /// Prescribed traction on Γ_N at `p` with outward normal `n`.
    pub fn traction(&self, p: Point, n: Point) -> Vector {
        match self.kind {
            ProblemKind::SquarePlate => Vector::zeros(),
            ProblemKind::Cantilever(profile) => {
                if n.x > 0.5 {
                    let y = p.y.clamp(0.0, 1.0);
                    let shape = match profile {
                        TractionProfile::Tent => 1.0 - (2.0 * y - 1.0).abs(),
                        TractionProfile::Ramp => y,
                    };
                    Vector::new(0.0, CANTILEVER_MAX_LOAD * shape)
                } else {
                    Vector::zeros()
                }
            }
            ProblemKind::Manufactured(field) => self.material.stress(&field.strain(p)) * n,
        }
    }

    pub fn exact(&self) -> Option<ManufacturedField> {
        match self.kind {
            ProblemKind::Manufactured(field) => Some(field),
            _ => None,
        }
    }

    /// Unit-square mesh at `level`, distorted by `distortion`, with this
    /// problem's boundary classification.
    pub fn mesh(&self, level: u32, distortion: &DistortionSpec) -> Result<QuadMesh> {
        let mesh = distort(&unit_square_mesh(level), distortion)?;
        let setup = self.boundary;
        classify_boundary(mesh, move |p| setup.is_dirichlet(p))
    }
}

/// Square-plate body force at shear modulus 1.
pub fn square_plate_force(lambda: f64, p: Point) -> Vector {
    let (x, y) = (p.x, p.y);
    let c = 0.04 * PI * PI;
    let shared = -(PI * (x + y)).cos() + 2.0 / (1.0 + lambda) * (PI * x).sin() * (PI * y).sin();
    Vector::new(
        c * (4.0 * (2.0 * PI * y).sin() * (-1.0 + 2.0 * (2.0 * PI * x).cos()) + shared),
        c * (4.0 * (2.0 * PI * x).sin() * (1.0 - 2.0 * (2.0 * PI * y).cos()) + shared),
    )
}

/// Unit square clamped on all sides under the square-plate body force, μ = 1.
pub fn square_plate_problem(poisson_ratio: f64) -> Result<BenchmarkProblem> {
    Ok(BenchmarkProblem {
        name: "square_plate".into(),
        material: MaterialParams::from_shear_modulus(1.0, poisson_ratio)?,
        kind: ProblemKind::SquarePlate,
        boundary: BoundarySetup::AllDirichlet,
        reference_policy: ReferencePolicy::FineMeshSurrogate,
    })
}

/// Problem whose exact solution is `field`; `f`, `g` and the traction are
/// derived from it.
pub fn manufactured_problem(material: MaterialParams, field: ManufacturedField, boundary: BoundarySetup) -> BenchmarkProblem {
    BenchmarkProblem {
        name: format!("manufactured_{}", field.name()),
        material,
        kind: ProblemKind::Manufactured(field),
        boundary,
        reference_policy: ReferencePolicy::Manufactured,
    }
}

/// Unit-square beam clamped at `x = 0` with a shear load on `x = 1`.
pub fn cantilever_problem(poisson_ratio: f64, profile: TractionProfile) -> Result<BenchmarkProblem> {
    Ok(BenchmarkProblem {
        name: "cantilever".into(),
        material: make_material(CANTILEVER_YOUNGS_MODULUS, poisson_ratio)?,
        kind: ProblemKind::Cantilever(profile),
        boundary: BoundarySetup::LeftDirichlet,
        reference_policy: ReferencePolicy::FineMeshSurrogate,
    })
}
