//! Gradient flows of λ-convex functionals, nonlinear semigroups generated by
//! ω-accretive operators, TL^p optimal transport and Γ-convergence checks over
//! Banach stackings.
//!
//! Points are plain `f64` slices. Spaces carry positive inner-product weights,
//! so `‖x‖² = Σ wᵢ xᵢ²`; unit weights give the Euclidean norm.

pub mod convex;
pub mod energies;
mod error;
pub mod flow;
pub mod linalg;
pub mod semigroup;
pub mod stacking;
pub mod transport;

pub use error::{Error, Result};
