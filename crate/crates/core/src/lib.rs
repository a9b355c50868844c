//! Location and certification of the maximal fold point of
//! `−Δu = λu^q + u^γ`, `u = 0` on the boundary, with `0 < q < 1 < γ`.
//!
//! Three independent routes produce the fold value λ*: a saddle search on the
//! scaled quotient `λ(u, v)` ([`saddle`]), Newton on the bordered fold system
//! ([`fold`]), and pseudo-arclength continuation with eigenvalue monitoring
//! ([`branches`]). [`oracle`] gives discretization-free values on intervals and
//! disks.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix `f64`.

pub mod banded;
pub mod branches;
pub mod error;
pub mod fold;
pub mod krylov;
pub mod laplace;
pub mod mesh;
pub mod oracle;
pub mod quotient;
pub mod real;
pub mod saddle;

pub use error::{Error, Result};
pub use laplace::{
    apply_laplacian, linearization, second_eigenvalue, smallest_eigenpair, smallest_eigenpair_with, solve,
    DiscreteOperator, EigenOptions, Eigenpair,
};
pub use mesh::{Grid, Mask, ScalarField, Shape};
pub use quotient::{Pairings, Problem, ProblemParams, QuotientEval};
pub use real::Real;

pub type Grid64 = Grid<f64>;
pub type Field64 = ScalarField<f64>;
pub type Params64 = ProblemParams<f64>;
pub type Grid32 = Grid<f32>;
pub type Field32 = ScalarField<f32>;
pub type Params32 = ProblemParams<f32>;
