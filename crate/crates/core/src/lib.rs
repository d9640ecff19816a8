//! Interior penalty discontinuous Galerkin and standard Galerkin solvers for
//! plane-strain linear elasticity on general quadrilateral meshes, with
//! selectively under-integrated edge terms for the near-incompressible regime.
//!
//! The pipeline is
//!
//! ```text
//! mesh ─► fem (Q1 basis, quadrature) ─► assembly ─► solver ─► postprocess ─► harness
//!                       ▲
//!                     model (material, benchmark problems)
//! ```
//!
//! Every stage is a pure function of its inputs; running the same experiment
//! twice in sequential mode gives bit-identical output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod model;
pub mod postprocess;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

/// Physical or reference 2D point.
pub type Point = nalgebra::Vector2<f64>;
