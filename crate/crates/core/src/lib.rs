//! Construction and certification of normally hyperbolic weakly invariant
//! cylinders for `H = h(p) − ε²G(t, q, p)` near a partial resonance.

pub mod averaging;
pub mod cylinder;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod hamiltonian;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod polynomial;
pub mod reduction;
pub mod report;
pub mod restricted;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Mat<f64>;
pub type Series = fourier::FourierSeries<f64>;
pub type Spec = model::HamiltonianSpec<f64>;
pub type Averaged = model::AveragedData<f64>;
pub type NormalForm = averaging::NormalFormH1<f64>;
pub type Reduction = reduction::ReductionData<f64>;
pub type Graph = cylinder::GraphFunction<f64>;
pub type Solution = cylinder::CylinderSolution<f64>;
pub type Restricted = restricted::RestrictedMap<f64>;

pub type Matrix32 = linalg::Mat<f32>;
pub type Spec32 = model::HamiltonianSpec<f32>;
pub type Reduction32 = reduction::ReductionData<f32>;
pub type Graph32 = cylinder::GraphFunction<f32>;
