//! Downward closed multi-index sets, orthonormal tensor polynomials, the
//! polynomial inequalities behind random-training-set selection, and the
//! certified integer budgets `(m, N)`.

mod budget;
mod inequalities;
mod multiindex;
mod poly;

pub use budget::{chebyshev_alpha, compute_m, compute_n_draws, CertifiedBudget};
pub use inequalities::{nikolskii_check, superlevel_measure, LowerSetPoly};
pub use multiindex::{
    hyperbolic_cross, is_downward_closed, random_downward_closed, DownwardClosedSet, MultiIndex,
};
pub use poly::{chebyshev_eval, christoffel_sum, legendre_eval, PolyBasis};
