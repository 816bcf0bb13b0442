//! Quadrature, root finding and derivative-free maximization.

pub mod chebyshev;
mod optimize;
mod quad;
mod roots;

pub use optimize::{maximize_2d, maximize_unimodal, Box2, Max2d, Multistart};
pub use quad::{integrate, Endpoints, Integral, QuadratureSpec};
pub use roots::{find_root, Bracket};
