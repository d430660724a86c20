//! Exact, spectral and Monte Carlo tools for the symmetric simple
//! exclusion process on `{1, ..., n-1}` with reservoirs of density `rho`
//! at both ends, and for its relaxation from inhomogeneous product
//! initial laws.
//!
//! * [`heat`] solves the discrete heat equation that drives the mean
//!   density profile.
//! * [`product`] measures total variation and entropy between product
//!   Bernoulli laws, including the Gaussian cutoff profile.
//! * [`exact`] evolves the full law of the chain for small `n` and
//!   evaluates entropies, Dirichlet forms and the entropy-production bound.
//! * [`mc`] simulates the chain for larger `n`.

pub mod check;
pub mod error;
pub mod exact;
pub mod fit;
pub mod heat;
pub mod mc;
pub mod product;
pub mod quad;

pub use check::Check;
pub use error::{Error, Result};
