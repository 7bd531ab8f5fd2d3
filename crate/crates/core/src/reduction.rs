//! Compiles a polymatrix game into a constrained coarse-correlated
//! equilibrium instance.
//!
//! Every node `i` becomes two players: a left copy `i_L = i` and a right copy
//! `i_R = n + i`. Right players play the original game against the left
//! team; left players get the negated transposed payoffs, so the two teams
//! play a zero-sum game with no intra-team edges. Each left player carries
//! `2k` pair costs on `(i_L, i_R)` whose expectations are `±(m_{iL}(t) −
//! m_{iR}(t))`; keeping all of them below `ν` pins the two copies' marginals
//! together.

use num::{BigRational, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CostTerm, DeviationPolytope, FactoredGame, MixtureStrategy, PayoffEdge, ProductStrategy};
use crate::linalg::Matrix;
use crate::polymatrix::{PolyMatrixGame, StrategyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerPair {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub game: PolyMatrixGame,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedInstance {
    pub game: FactoredGame,
    pub deviations: DeviationPolytope,
    pub eps_prime: f64,
    pub nu: f64,
    pub mapping: Vec<PlayerPair>,
    pub source: Source,
}

/// Target action and sign of left cost `j ∈ 0..2k`: the cost's expectation is
/// `sign · (m_{iL}(target) − m_{iR}(target))`.
pub fn cost_target(j: usize, k: usize) -> (usize, f64) {
    (j % k, if j < k { 1.0 } else { -1.0 })
}

/// Matrix of left cost `j` indexed by `(a_{iL}, a_{iR})`.
pub fn coupling_cost(j: usize, k: usize) -> Matrix {
    let (t, s) = cost_target(j, k);
    Matrix::from_fn(k, k, |a, b| {
        if a == t && b != t {
            s
        } else if b == t && a != t {
            -s
        } else {
            0.0
        }
    })
}

/// `ε' = ε/(4n)` and `ν = ε/(2nk·deg)`. An edgeless graph uses degree 1.
pub fn reduction_parameters(g: &PolyMatrixGame, eps: f64) -> (f64, f64) {
    let n = g.n_players() as f64;
    let k = g.n_actions() as f64;
    let deg = g.degree().max(1) as f64;
    (eps / (4.0 * n), eps / (2.0 * n * k * deg))
}

pub fn reduce(g: &PolyMatrixGame, eps: f64) -> Result<ConstrainedInstance> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let n = g.n_players();
    let k = g.n_actions();
    let mut edges = Vec::with_capacity(2 * g.edges().len());
    for e in g.edges() {
        // Edge (i, j) feeds u_{iR} with A^{i,j} against j_L and u_{jL} with
        // −(A^{i,j})^T against i_R.
        edges.push(PayoffEdge { player: n + e.from, opponent: e.to, matrix: e.matrix.clone() });
        edges.push(PayoffEdge { player: e.to, opponent: n + e.from, matrix: e.matrix.transpose().map(|v| -v) });
    }
    let mut costs = vec![Vec::new(); 2 * n];
    for (i, list) in costs.iter_mut().enumerate().take(n) {
        *list = (0..2 * k).map(|j| CostTerm::Pair { players: [i, n + i], matrix: coupling_cost(j, k) }).collect();
    }
    let game = FactoredGame::edge_factored(2 * n, k, edges, costs)?;
    let (eps_prime, nu) = reduction_parameters(g, eps);
    Ok(ConstrainedInstance {
        game,
        deviations: DeviationPolytope::cce(k),
        eps_prime,
        nu,
        mapping: (0..n).map(|i| PlayerPair { left: i, right: n + i }).collect(),
        source: Source { game: g.clone(), eps },
    })
}

impl ConstrainedInstance {
    pub fn n_source_players(&self) -> usize {
        self.mapping.len()
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        let k = self.game.n_actions();
        if profile.len() != self.game.n_players() || profile.iter().any(|&a| a >= k) {
            return Err(Error::DimensionMismatch(format!(
                "profile {profile:?} for {} players x {k} actions",
                self.game.n_players()
            )));
        }
        Ok(())
    }

    fn edges(&self) -> &[PayoffEdge] {
        match self.game.utilities() {
            crate::game::Utilities::Edges { edges } => edges,
            crate::game::Utilities::Dense { .. } => &[],
        }
    }

    fn is_left(&self, player: usize) -> bool {
        player < self.n_source_players()
    }
}

/// `(u_L(a), u_R(a))`: total utility of each team at a pure profile.
pub fn team_utilities(inst: &ConstrainedInstance, profile: &[usize]) -> Result<(f64, f64)> {
    inst.check_profile(profile)?;
    let (mut left, mut right) = (0.0, 0.0);
    for e in inst.edges() {
        let v = e.matrix[(profile[e.player], profile[e.opponent])];
        if inst.is_left(e.player) {
            left += v;
        } else {
            right += v;
        }
    }
    Ok((left, right))
}

/// Exact team utilities: every payoff is read as the rational number its
/// binary representation denotes, so `u_L + u_R` is computed without rounding.
pub fn team_utilities_exact(inst: &ConstrainedInstance, profile: &[usize]) -> Result<(BigRational, BigRational)> {
    inst.check_profile(profile)?;
    let (mut left, mut right) = (BigRational::zero(), BigRational::zero());
    for e in inst.edges() {
        let v = e.matrix[(profile[e.player], profile[e.opponent])];
        let q = BigRational::from_float(v).ok_or_else(|| Error::Numerical(format!("payoff {v} is not finite")))?;
        if inst.is_left(e.player) {
            left += q;
        } else {
            right += q;
        }
    }
    Ok((left, right))
}

/// `h_i = m_{iR}(z)` for every source node.
pub fn extract_nash(inst: &ConstrainedInstance, z: &MixtureStrategy) -> Result<StrategyProfile> {
    if z.n_players() != inst.game.n_players() || z.n_actions() != inst.game.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "strategy over {} players x {} actions for an instance with {} x {}",
            z.n_players(),
            z.n_actions(),
            inst.game.n_players(),
            inst.game.n_actions()
        )));
    }
    ProductStrategy::new(
        inst.mapping
            .iter()
            .map(|pair| {
                let m = z.player_marginal(pair.right);
                let s: f64 = m.iter().sum();
                m.into_iter().map(|p| p / s).collect()
            })
            .collect(),
    )
}

/// Product strategy playing `x_i` on both copies of every node, so all
/// coupling costs vanish.
pub fn witness_from_nash(inst: &ConstrainedInstance, x: &StrategyProfile) -> Result<MixtureStrategy> {
    if x.n_players() != inst.n_source_players() || x.n_actions() != inst.game.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "profile over {} nodes x {} actions for a source game with {} x {}",
            x.n_players(),
            x.n_actions(),
            inst.n_source_players(),
            inst.game.n_actions()
        )));
    }
    let mut marginals = vec![Vec::new(); inst.game.n_players()];
    for (i, pair) in inst.mapping.iter().enumerate() {
        marginals[pair.left] = x.marginal(i).to_vec();
        marginals[pair.right] = x.marginal(i).to_vec();
    }
    MixtureStrategy::product(marginals)
}
