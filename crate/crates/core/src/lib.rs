//! Curvature invariants and local homogeneity for Riemannian metrics given
//! in coordinate charts.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`expr`]: the scalar expression language metric components are written in
//! * [`tensor`]: Christoffel symbols, curvature, covariant derivatives, contractions
//! * [`weyl`]: curvature invariants and the vector of invariants sampled over a chart
//! * [`homogeneity`]: constancy verdicts, rank stratification, level sets, Killing checks
//! * [`geometries`]: built-in charts with known answers
//! * [`cli`]: scenario files, reports and CSV output

pub mod expr;
pub mod tensor;
pub mod weyl;
pub mod homogeneity;
pub mod geometries;
pub mod cli;
