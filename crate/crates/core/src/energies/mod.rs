//! Graph energies, smooth truncations and P₀-convexity checks.

mod graph;
mod p0;

pub use graph::*;
pub use p0::*;

#[cfg(test)]
mod tests;
