#![allow(dead_code)]

use quadip::mesh::{DistortionSpec, QuadMesh};
use quadip::model::{manufactured_problem, BenchmarkProblem, BoundarySetup, ManufacturedField, MaterialParams};

pub fn material(nu: f64) -> MaterialParams {
    MaterialParams::from_shear_modulus(1.0, nu).unwrap()
}

pub fn affine_field() -> ManufacturedField {
    ManufacturedField::Linear {
        gradient: [[1e-3, 2e-3], [3e-3, -1e-3]],
        offset: [5e-4, -2e-4],
    }
}

pub fn problem(nu: f64, field: ManufacturedField, boundary: BoundarySetup) -> BenchmarkProblem {
    manufactured_problem(material(nu), field, boundary)
}

pub fn plate_problem(nu: f64) -> BenchmarkProblem {
    let m = material(nu);
    manufactured_problem(m, ManufacturedField::Plate { lambda: m.lame_lambda }, BoundarySetup::AllDirichlet)
}

pub fn mesh(problem: &BenchmarkProblem, level: u32, df: f64, seed: u64) -> QuadMesh {
    problem.mesh(level, &DistortionSpec::new(df, seed)).unwrap()
}
