//! Numerical lab for the fully fractional heat operator (∂t − Δ)^s.
//!
//! The operator acts on space–time fields u(x, t) through
//! C_{n,s} ∫_{−∞}^t ∫_{R^n} (u(x,t) − u(y,τ)) e^{−|x−y|²/4(t−τ)} (t−τ)^{−(n/2+1+s)} dy dτ.

pub mod cli;
pub mod error;
pub mod field;
pub mod kernel;
pub mod lattice;
pub mod operator;
pub mod quad;
pub mod solver;
pub mod special;
pub mod verification;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use operator::{Evaluation, QuadratureConfig};
pub use special::FracParams;
