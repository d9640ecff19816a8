mod common;

use proptest::prelude::*;
use quadip::assembly::{assemble, AssemblyOptions, DofMap, MethodConfig};
use quadip::fem::q1_basis;
use quadip::mesh::{distort, mesh_size, unit_square_mesh, DistortionSpec, QuadMesh};
use quadip::model::{BoundarySetup, ManufacturedField, Tensor, Vector};
use quadip::postprocess::{
    convergence_rates, displacement_error, displacement_error_with, rates, recover_stress, stress_error, ErrorMetric, ErrorReport,
    NodalStressField, ProjectionMass, ReferenceSolution,
};
use quadip::solver::{solve, SolveOptions};
use quadip::{Error, Point};

struct Shifted<'a> {
    base: &'a ManufacturedField,
    shift: Vector,
}

impl ReferenceSolution for Shifted<'_> {
    fn displacement(&self, p: Point) -> Vector {
        self.base.displacement(p) + self.shift
    }
    fn gradient(&self, p: Point) -> Tensor {
        self.base.gradient(p)
    }
}

struct Zero;

impl ReferenceSolution for Zero {
    fn displacement(&self, _: Point) -> Vector {
        Vector::zeros()
    }
    fn gradient(&self, _: Point) -> Tensor {
        Tensor::zeros()
    }
}

fn distorted(level: u32, seed: u64) -> QuadMesh {
    distort(&unit_square_mesh(level), &DistortionSpec::new(0.3, seed)).unwrap()
}

#[test]
fn linear_field_gives_exact_constant_stress() {
    let field = ManufacturedField::linear();
    let material = common::material(0.4999);
    let mesh = distorted(3, 2);
    for mass in [ProjectionMass::Consistent, ProjectionMass::Lumped] {
        for dofmap in [DofMap::continuous(&mesh), DofMap::discontinuous(&mesh)] {
            let values = dofmap.interpolate(&mesh, |p| field.displacement(p));
            let stress = recover_stress(&mesh, &material, &values, &dofmap, mass).unwrap();
            let expected = material.stress(&field.strain(Point::zeros()));
            for s in &stress.values {
                let t = Tensor::new(s[0], s[1], s[1], s[2]);
                assert!((t - expected).amax() < 1e-9, "{mass:?}");
            }
            assert!(stress_error(&mesh, &material, &stress, Some(&field)).unwrap() < 1e-9);
        }
    }
}

#[test]
fn interpolant_of_linear_field_has_no_error() {
    let field = common::affine_field();
    let mesh = distorted(3, 9);
    let dofmap = DofMap::discontinuous(&mesh);
    let values = dofmap.interpolate(&mesh, |p| field.displacement(p));
    let (h1, l2) = displacement_error(&mesh, &dofmap, &values, Some(&field)).unwrap();
    assert!(h1 < 1e-10 && l2 < 1e-10);
}

#[test]
fn constant_shift_changes_only_the_l2_error() {
    let field = ManufacturedField::Sine;
    let mesh = distorted(3, 1);
    let dofmap = DofMap::continuous(&mesh);
    let values = dofmap.interpolate(&mesh, |p| field.displacement(p));
    let (h1, _) = displacement_error(&mesh, &dofmap, &values, Some(&field)).unwrap();
    let linear = common::affine_field();
    let lin_values = dofmap.interpolate(&mesh, |p| linear.displacement(p));
    let c = Vector::new(0.3, -0.4);
    let shifted = Shifted { base: &linear, shift: c };
    let (h1s, l2s) = displacement_error(&mesh, &dofmap, &lin_values, Some(&shifted)).unwrap();
    assert!(h1s < 1e-10);
    assert!((l2s - c.norm()).abs() < 1e-10, "{l2s}");
    let sine_shift = Shifted { base: &field, shift: c };
    let (h1b, _) = displacement_error(&mesh, &dofmap, &values, Some(&sine_shift)).unwrap();
    assert!((h1 - h1b).abs() < 1e-14);
}

#[test]
fn missing_reference_is_an_error() {
    let mesh = unit_square_mesh(1);
    let dofmap = DofMap::continuous(&mesh);
    let values = vec![0.0; dofmap.n_dofs];
    assert!(matches!(
        displacement_error(&mesh, &dofmap, &values, None),
        Err(Error::MissingExact)
    ));
}

/// Composite Simpson rule on a `n × n` grid of each reference cell.
fn oracle_errors(mesh: &QuadMesh, dofmap: &DofMap, values: &[f64], exact: &ManufacturedField, n: usize) -> (f64, f64) {
    let w1d: Vec<(f64, f64)> = (0..=2 * n)
        .map(|i| {
            let t = -1.0 + i as f64 / n as f64;
            let w = if i == 0 || i == 2 * n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, w / (3.0 * n as f64))
        })
        .collect();
    let (mut h1, mut l2) = (0.0, 0.0);
    for c in 0..mesh.num_cells() {
        let geom = mesh.cell_geometry(c);
        let coeffs = dofmap.cell_coefficients(values, c);
        for &(s, ws) in &w1d {
            for &(t, wt) in &w1d {
                let xi = Point::new(s, t);
                let q = q1_basis(xi);
                let grads = geom.physical_gradients(xi).unwrap();
                let det = geom.jacobian(xi).determinant();
                let x = geom.map(xi);
                let mut u = Vector::zeros();
                let mut g = Tensor::zeros();
                for a in 0..4 {
                    u += coeffs[a] * q.values[a];
                    g += coeffs[a] * grads[a].transpose();
                }
                l2 += ws * wt * det * (exact.displacement(x) - u).norm_squared();
                h1 += ws * wt * det * (exact.gradient(x) - g).norm_squared();
            }
        }
    }
    (h1.sqrt(), l2.sqrt())
}

#[test]
fn error_norms_match_dense_quadrature() {
    let problem = common::problem(0.3, ManufacturedField::Sine, BoundarySetup::AllDirichlet);
    let mesh = common::mesh(&problem, 2, 0.3, 44);
    let sys = assemble(&mesh, &problem, &MethodConfig::nipg(1), &AssemblyOptions::default()).unwrap();
    let x = solve(&sys, &SolveOptions::default()).unwrap().solution;
    let exact = problem.exact().unwrap();
    let (oh1, ol2) = oracle_errors(&mesh, &sys.dofmap, &x, &exact, 64);
    let (h1, l2) = displacement_error_with(&mesh, &sys.dofmap, &x, Some(&exact), 10).unwrap();
    assert!((h1 - oh1).abs() < 1e-6 * oh1, "{h1} vs {oh1}");
    assert!((l2 - ol2).abs() < 1e-6 * ol2, "{l2} vs {ol2}");
    let (dh1, _) = displacement_error(&mesh, &sys.dofmap, &x, Some(&exact)).unwrap();
    assert!((dh1 - oh1).abs() < 1e-3 * oh1);
}

#[test]
fn stress_error_scales_with_the_field() {
    let mesh = distorted(2, 3);
    let material = common::material(0.3);
    let field = NodalStressField {
        values: (0..mesh.num_vertices()).map(|v| [v as f64 * 0.1, 1.0, -0.5]).collect(),
    };
    let doubled = NodalStressField {
        values: field.values.iter().map(|s| s.map(|x| 2.0 * x)).collect(),
    };
    let a = stress_error(&mesh, &material, &field, Some(&Zero)).unwrap();
    let b = stress_error(&mesh, &material, &doubled, Some(&Zero)).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-12 * a);
}

#[test]
fn rate_examples_and_errors() {
    let r = rates(&[0.5, 0.25, 0.125], &[1.0, 0.25, 0.0625]).unwrap();
    assert!(r.iter().all(|x| (x - 2.0).abs() < 1e-12));
    let r = rates(&[0.5, 0.25], &[1.0, 0.5]).unwrap();
    assert!((r[0] - 1.0).abs() < 1e-12);
    assert!(matches!(rates(&[0.5], &[1.0]), Err(Error::InsufficientData(_))));
    assert!(matches!(rates(&[0.5, 0.25], &[1.0, 0.0]), Err(Error::ZeroError(1))));
    assert!(matches!(rates(&[0.25, 0.5], &[1.0, 0.5]), Err(Error::InvalidInput(_))));
}

#[test]
fn sine_field_errors_converge() {
    let problem = common::problem(0.3, ManufacturedField::Sine, BoundarySetup::AllDirichlet);
    let exact = problem.exact().unwrap();
    let mut reports = Vec::new();
    for level in 2..=5 {
        let mesh = common::mesh(&problem, level, 0.1, 7);
        let sys = assemble(&mesh, &problem, &MethodConfig::sipg(1), &AssemblyOptions::default()).unwrap();
        let x = solve(&sys, &SolveOptions::default()).unwrap().solution;
        let stress = recover_stress(&mesh, &problem.material, &x, &sys.dofmap, ProjectionMass::Consistent).unwrap();
        let (disp_h1, disp_l2) = displacement_error(&mesh, &sys.dofmap, &x, Some(&exact)).unwrap();
        reports.push(ErrorReport {
            disp_h1,
            disp_l2,
            disp_jump: 0.0,
            stress_l2: stress_error(&mesh, &problem.material, &stress, Some(&exact)).unwrap(),
            mesh_size: mesh_size(&mesh),
            ndofs: sys.n_dofs(),
        });
    }
    for w in reports.windows(2) {
        assert!(w[1].stress_l2 < w[0].stress_l2 && w[1].disp_h1 < w[0].disp_h1);
    }
    let h1 = convergence_rates(&reports, ErrorMetric::DispH1).unwrap();
    let l2 = convergence_rates(&reports, ErrorMetric::DispL2).unwrap();
    assert!((h1.last().unwrap() - 1.0).abs() < 0.1, "{h1:?}");
    assert!((l2.last().unwrap() - 2.0).abs() < 0.2, "{l2:?}");
}

proptest! {
    #[test]
    fn rates_are_scale_invariant(
        e in prop::collection::vec(1e-6f64..1.0, 2..6),
        sh in 1e-3f64..1e3,
        se in 1e-3f64..1e3,
    ) {
        let h: Vec<f64> = (0..e.len()).map(|i| 0.5f64.powi(i as i32)).collect();
        let base = rates(&h, &e).unwrap();
        let hs: Vec<f64> = h.iter().map(|x| x * sh).collect();
        let es: Vec<f64> = e.iter().map(|x| x * se).collect();
        let scaled = rates(&hs, &es).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn displacement_error_is_homogeneous(s in -4.0f64..4.0, seed in 0u64..20) {
        let mesh = distorted(2, seed);
        let dofmap = DofMap::discontinuous(&mesh);
        let field = ManufacturedField::Sine;
        let values: Vec<f64> = dofmap.interpolate(&mesh, |p| field.displacement(p) * 0.7);
        let scaled: Vec<f64> = values.iter().map(|v| v * s).collect();
        let (h1, l2) = displacement_error(&mesh, &dofmap, &values, Some(&Zero)).unwrap();
        let (h1s, l2s) = displacement_error(&mesh, &dofmap, &scaled, Some(&Zero)).unwrap();
        prop_assert!((h1s - s.abs() * h1).abs() < 1e-12 * (1.0 + h1));
        prop_assert!((l2s - s.abs() * l2).abs() < 1e-12 * (1.0 + l2));
    }
}
