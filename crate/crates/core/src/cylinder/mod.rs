//! The normally hyperbolic weakly invariant cylinder: graph solver and
//! certificates.

pub mod certify;
pub mod graph;
pub mod scaled;
pub mod solve;

pub use certify::*;
pub use graph::{Axis, AxisKind, GraphFunction, GraphHeader, GridSizes, TensorField, TensorGrid};
pub use scaled::{remainder_sup, scaled_field, RemainderBound, ScaledChart};
pub use solve::{
    graph_solve, graph_solve_from, transfer_to_h, CylinderSolution, SolveDiagnostics, SolverConfig,
};
