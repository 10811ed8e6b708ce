//! Exact graded-symplectic Poisson reduction.
//!
//! Functions on the shifted cotangent bundle `T*[1]R^n` are polynomials in
//! even coordinates tensored with an exterior algebra in odd ones. The
//! degree -1 bracket on them is the Schouten bracket of multivector fields,
//! and a bivector `pi` is encoded by its quadratic function `S`. On top of
//! that sit graph-form submanifold presentations, condition audits for the
//! reduction theorems, the Lie 2-group data of Hamiltonian actions and a
//! small numeric layer for pair groupoids.

pub mod dgla;
pub mod exactpoly;
pub mod expr;
pub mod gradedalg;
pub mod liegroupoid;
pub mod linalg;
pub mod reduction;
pub mod sample;
pub mod subman;
pub mod verdict;

pub use exactpoly::{int, rat, vars, Monomial, PolyError, Polynomial, Rational, Vars};
pub use gradedalg::{GradedContext, GradedError, GradedFunction, PoissonBivector};
pub use verdict::{Verdict, VerdictEntry};
