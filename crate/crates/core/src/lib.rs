//! Pucci extremal operators, structure-condition checks, the parabolic
//! barrier of the strong maximum principle, cylinder geometry, and a monotone
//! explicit solver for fully nonlinear parabolic equations
//! `u_t = F(x, t, u, Du, D²u)`.

pub mod barrier;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod operators;
pub mod solver;
pub mod symmat;

pub use error::{Error, Result};
pub use jet::{Jet, SmoothField};
pub use operators::{
    check_structure_condition, eval_operator, make_operator, CoefficientField, GradientTerm,
    OperatorDescriptor, OperatorKind, OperatorSpec, Principal, ScalarField, StructureReport,
    ZeroGradient,
};
pub use solver::{EvolutionTrace, Grid, GridFunction};
pub use symmat::{eigenvalues, pucci_extremal, pucci_truncated, Ellipticity, Extremal, SymMat};
