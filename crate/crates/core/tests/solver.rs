mod common;

use quadip::assembly::{assemble, AssemblyOptions, MethodConfig};
use quadip::model::{BoundarySetup, ManufacturedField};
use quadip::solver::{solve, solve_matrix, SolveOptions, SolverKind};
use quadip::sparse::{norm2, CsrMatrix};
use quadip::Error;

#[test]
fn repeated_solves_are_bit_identical() {
    let problem = common::plate_problem(0.49);
    let mesh = common::mesh(&problem, 4, 0.3, 4);
    for config in [MethodConfig::nipg(1), MethodConfig::sg_q1_sri()] {
        let sys = assemble(&mesh, &problem, &config, &AssemblyOptions::default()).unwrap();
        let a = solve(&sys, &SolveOptions::default()).unwrap();
        let b = solve(&sys, &SolveOptions::default()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.solution), bits(&b.solution), "{}", config.id());
    }
}

#[test]
fn sipg_residual_meets_tolerance() {
    let problem = common::plate_problem(0.3);
    let mesh = common::mesh(&problem, 2, 0.1, 1);
    let sys = assemble(&mesh, &problem, &MethodConfig::sipg(1), &AssemblyOptions::default()).unwrap();
    let report = solve(&sys, &SolveOptions::default()).unwrap();
    assert!(report.relative_residual < 1e-10);
    let ax = sys.matrix.mul_vec(&report.solution);
    let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    assert!(norm2(&r) / norm2(&sys.rhs) < 1e-10);
    assert_eq!(report.stats.nnz, sys.matrix.nnz());
}

#[test]
fn iterative_solver_agrees_with_direct() {
    let problem = common::problem(0.3, ManufacturedField::Sine, BoundarySetup::AllDirichlet);
    let mesh = common::mesh(&problem, 3, 0.0, 0);
    let sys = assemble(&mesh, &problem, &MethodConfig::sg_q1(), &AssemblyOptions::default()).unwrap();
    let direct = solve(&sys, &SolveOptions::default()).unwrap();
    let options = SolveOptions {
        kind: SolverKind::Iterative { max_iterations: 5000 },
        ..SolveOptions::default()
    };
    let iterative = solve(&sys, &options).unwrap();
    assert!(iterative.relative_residual <= 1e-10);
    let diff = direct
        .solution
        .iter()
        .zip(&iterative.solution)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn near_incompressible_direct_solve_is_accepted_at_the_floor() {
    let problem = common::plate_problem(0.49995);
    let mesh = common::mesh(&problem, 5, 0.3, 1);
    let sys = assemble(&mesh, &problem, &MethodConfig::iipg(1), &AssemblyOptions::default()).unwrap();
    let report = solve(&sys, &SolveOptions::default()).unwrap();
    assert!(report.relative_residual <= 1e-10 || report.relative_residual <= 4.0 * report.rounding_floor);
}

#[test]
fn shape_mismatch_is_rejected() {
    let a = CsrMatrix::identity(3);
    assert!(matches!(
        solve_matrix(&a, &[1.0, 2.0], &SolveOptions::default()),
        Err(Error::InvalidInput(_))
    ));
}
