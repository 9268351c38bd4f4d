//! Numerical comparison geometry along a single geodesic.
//!
//! Curvature lives in a parallel orthonormal frame of the normal space, so a
//! geodesic is reduced to a symmetric matrix field `R(t)`. On top of that the
//! crate integrates Lagrangian families of Jacobi fields, detects focal
//! points, evaluates Riccati operators and the transverse Jacobi equation,
//! and runs trace comparisons against the constant-curvature model solutions.

pub mod comparison;
pub mod error;
pub mod geometry;
pub mod jacobi;
pub mod linalg;
pub mod registry;
pub mod riccati;
pub mod scenario;
pub mod wilking;

pub use error::{GeomError, Result};
pub use geometry::{
    constant_curvature_model, custom_diagonal_model, custom_matrix_model, product_space_form_model, radial_ric_k_min,
    GeodesicModel, ModelParams, ProductDirection, ScalarFn,
};
pub use jacobi::{
    focal_radius, submanifold_lagrangian, EvaluationKernel, FamilyConfig, FocalEvent, LagrangianFamily, SubmanifoldData,
};
pub use riccati::{riccati_operator, trace_restricted, ModelSolution, RiccatiValue};
pub use wilking::TransverseSplit;
