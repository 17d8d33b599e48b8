//! Reduced basis construction for affinely parametrized elliptic PDEs,
//! driven by weak greedy snapshot selection over *random* training sets.
//!
//! The crate is organized around five pieces:
//!
//! - [`params`]: the parameter domain `Y = [-1,1]^d`, sampling measures
//!   (uniform and tensor Chebyshev), and the checkerboard diffusion model.
//! - [`fem`]: a P1 finite element solver on a uniform triangulation of the
//!   unit square with affine operator decomposition `A(y) = A0 + sum y_j A_j`.
//! - [`polytools`]: downward closed multi-index sets, orthonormal tensor
//!   polynomial evaluation, the Christoffel/Nikolskii inequality checks, and
//!   the integer budgets `(m, N)` of the certified greedy algorithm.
//! - [`greedy`]: snapshot selection, V-orthonormal basis maintenance, the
//!   certified and scheduled greedy drivers, and the online reduced solve.
//! - [`experiments`]: seeded experiment sweeps, Monte Carlo inequality
//!   campaigns, CSV/JSON/SVG outputs, and binary basis persistence.

pub mod error;
pub mod experiments;
pub mod fem;
pub mod greedy;
pub mod params;
pub mod polytools;
pub mod stream;

pub use error::{Error, Result};
