//! Numerical building blocks: root finding, quadrature, quasi-random
//! sampling and convex hulls.

pub mod hull;
pub mod qmc;
pub mod quadrature;
pub mod root;

pub use quadrature::{adaptive_simpson, gauss_legendre, GaussLegendre};
pub use root::{solve_increasing, BisectionOptions};
