//! Quasi-variational inequality route to product equilibria.
//!
//! A product strategy `p` is flattened into `z ∈ [0,1]^{ℓn}`. The operator is
//! `F(z) = (−∇_{p_1}u_1, …, −∇_{p_n}u_n)` and the correspondence is
//! `Q_{ν'}(z̃) = {z ∈ [0,1]^{ℓn} : A(z̃)z ≤ b + ν'}` with block-diagonal
//! `A(z̃)` whose `i`-th block stacks the cost rows `D_i(z̃)` over the simplex
//! rows `1^T` and `−1^T`. A point with `z ∈ Q_{ν'}(z)` and gap at least `−ε'`
//! renormalizes to a product strategy that is `ν`-safe and an
//! `ε`-equilibrium against safe coarse deviations.

mod instance;
mod lipschitz;
mod projection;
mod solver;

pub use instance::{
    block_gaps, build_qvi, eval_correspondence, eval_f, flatten, qvi_gap, qvi_parameters, renormalize, unflatten,
    BlockRows, QviInstance, FEASIBILITY_TOL,
};
pub use lipschitz::{lipschitz_probe, mvt_probe, LipschitzReport, MvtReport, SineFamily};
pub use projection::project;
pub use solver::{restore_feasibility, solve_qvi, QviSolution, SolveMethod, SolverConfig, TracePoint};
