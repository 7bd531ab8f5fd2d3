//! Numerical tolerances shared across the crate.

/// Algebraic identities (expectations, marginals, deviations).
pub const ALGEBRAIC: f64 = 1e-12;

/// LP feasibility, optimality certificates and equilibrium verdicts.
pub const LP: f64 = 1e-9;

/// Deviation matrices must be row-stochastic to this tolerance.
pub const STOCHASTIC: f64 = 1e-10;

/// Mixture components lighter than this are dropped.
pub const PRUNE_WEIGHT: f64 = 1e-15;
