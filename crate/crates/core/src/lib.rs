//! Constrained Φ-equilibria in generalized games.
//!
//! The crate covers the full pipeline at desk scale: factored games and
//! correlated strategies ([`game`]), polymatrix games and their ε-Nash check
//! ([`polymatrix`]), the two-team gadget that compiles a polymatrix game into
//! a constrained coarse-correlated equilibrium instance ([`reduction`]),
//! LP-certified equilibrium verification ([`equilibrium`], [`lp`]) and the
//! quasi-variational inequality route to product equilibria ([`qvi`]).

pub mod equilibrium;
pub mod error;
pub mod game;
pub mod linalg;
pub mod lp;
pub mod polymatrix;
pub mod qvi;
pub mod reduction;
pub mod tol;

pub use error::{Error, Result};
pub use game::{
    apply_deviation, CostTerm, DeviationKind, DeviationPolytope, FactoredGame, MixtureStrategy, PayoffEdge,
    ProductStrategy, Utilities,
};
pub use linalg::Matrix;
pub use lp::{lp_solve, LinearProgram, LpOutcome, Relation, Sense};
