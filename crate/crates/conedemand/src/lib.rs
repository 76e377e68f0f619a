//! Consideration-set-constrained linear demand toolkit.
//!
//! A consumer who only evaluates certain combinations of goods (shopping
//! baskets) generates demand confined to the conical hull of those baskets.
//! This crate implements that model end to end:
//!
//! - [`linalg`]: spectral pseudoinverse, weighted projectors, non-negative
//!   least squares, and cone diagnostics. Everything else builds on these.
//! - [`demand`]: unconstrained and basket-constrained demand, Jacobians,
//!   elasticities, and the corner-solution wedge.
//! - [`equilibrium`]: Bertrand and monopoly equilibria under arbitrary
//!   ownership, welfare, and stock-out counterfactuals.
//! - [`copurchase`]: complement/substitute proxy matrices from transaction
//!   logs via a bipartite configuration model null.
//! - [`simulate`]: a seeded Monte Carlo study comparing constrained and
//!   unconstrained choice under monopoly and single-product competition.
//! - [`estimate`]: the econometric pipeline — panel construction, spatial
//!   lags, PCA, two-stage least squares with diagnostics, a non-negativity
//!   control-function correction, and mark-up analytics.

pub mod copurchase;
pub mod demand;
pub mod equilibrium;
pub mod estimate;
pub mod linalg;
pub mod simulate;

#[cfg(test)]
pub(crate) mod testkit;

/// Toolkit-wide error type.
///
/// Variants mirror the failure taxonomy of the public operations: invalid
/// numeric input, violated model assumptions, solver non-convergence, domain
/// errors, and data/identification problems in the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input contained NaN/Inf or had inconsistent dimensions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A model assumption (positive definiteness, sign restrictions) failed.
    #[error("model assumption violated: {0}")]
    ModelAssumption(String),

    /// An iterative solver hit its iteration cap; the message carries the
    /// best iterate's diagnostics.
    #[error("solver did not converge: {0}")]
    Convergence(String),

    /// Division by a quantity that must be nonzero (e.g. zero demand in an
    /// elasticity denominator); lists the offending indices.
    #[error("division domain error: {0}")]
    DivisionDomain(String),

    /// A numerical operation failed in a way that contradicts a structural
    /// guarantee, indicating bad input rather than a solver limitation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed or insufficient data in the estimation pipeline.
    #[error("data error: {0}")]
    Data(String),

    /// Design/instrument rank problems; names the deficient columns.
    #[error("identification error: {0}")]
    Identification(String),

    /// Bad configuration (empty grids, zero draw counts, unknown keys).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
