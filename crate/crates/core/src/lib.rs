//! Numerics for isolated quadratic minimal cones `C(S^p x S^q)`: link
//! spectrum, the foliation by the minimal hypersurfaces `λ S_±`, Jacobi
//! fields, equivariant Plateau solutions and density diagnostics.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cone;
pub mod error;
pub mod jacobi;
pub mod measures;
pub mod ode;
pub mod plateau;
pub mod profile;
pub mod quad;

pub use cone::{ConeSpec, Region};
pub use error::{Error, Result};
