//! Complex m-Hessian equations on model domains in C^n (n = 1, 2): the
//! Dirichlet problem, the first eigenpair, variational functionals,
//! geometric eigenvalue bounds, a radial shooting oracle and a
//! continuation solver for `sigma_m(u) = C(n, m) psi(z, u)^m`.

pub mod error;
pub mod field;
pub mod geometry;
pub mod hessian;
pub mod linalg;
mod newton;
pub mod dirichlet;
pub mod functionals;
pub mod eigen;
pub mod radial;
pub mod bounds;
pub mod bifurcation;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use geometry::{make_domain, Domain, DomainKind, Grid};
pub use dirichlet::SolverConfig;
