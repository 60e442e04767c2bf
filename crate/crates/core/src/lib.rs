//! Numerical toolkit for 1D elliptic transmission problems: decomposed
//! intervals, piecewise-polynomial coefficient matrices, broken-space FEM
//! with prescribed interface jumps, Sobolev-scale norms, log-normal
//! coefficient sampling, Monte Carlo estimators, and verification harnesses
//! for operator-inverse norm bounds and sign-changing resolvents.
//!
//! The core is generic over the scalar type through the [`scalar::Real`]
//! trait; `f64` aliases for the main types are exported at the crate root.

pub mod bounds;
pub mod coefficients;
pub mod config;
pub mod domain;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod norms;
pub mod parametric;
pub mod uq;
pub mod poly;
pub mod quadrature;
pub mod runner;
pub mod scalar;
pub mod signchanging;

pub use error::{Error, Result};

/// `f64` aliases for the main types.
pub type Domain = domain::DecomposedInterval<f64>;
pub type Poly = poly::Polynomial<f64>;
pub type Piecewise = poly::PiecewisePoly<f64>;
pub type Coefficients = coefficients::CoefficientField<f64>;
pub type FemMesh = fem::Mesh<f64>;
pub type FemFunction = fem::BrokenFemFunction<f64>;
pub type Data = fem::TransmissionData<f64>;
