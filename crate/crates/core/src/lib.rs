//! Best L1 approximation of single-jump functions by polynomials and Hermite
//! splines, built from canonical sign-change points.

pub mod approx;
pub mod error;
mod exact;
pub mod expr;
pub mod functions;
pub mod hobbyrice;
pub mod linalg;
pub mod lp;
pub mod poly;
pub mod quadrature;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
