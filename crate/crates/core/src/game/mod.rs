//! Normal-form games with coupled expected-cost constraints.
//!
//! A [`FactoredGame`] has `n` players with the same `ℓ` actions each. Utilities
//! and costs come in two representations that evaluate identically:
//!
//! * dense tensors over all `ℓ^n` action profiles, indexed with player 0 as
//!   the most significant digit (see [`FactoredGame::profile_index`]);
//! * sums of pairwise matrices (`EdgeFactored` utilities, `PairFactored`
//!   costs), which never materialize the profile space.
//!
//! Every expectation is computed against a product of per-player vectors
//! ("blocks"). Blocks may be sub-stochastic: the same code evaluates the
//! raw iterates of the QVI solver.

mod deviation;
mod mixture;

pub use deviation::{
    apply_deviation, check_stochastic, constant_row_replica, DeviationKind, DeviationPolytope, DeviationRow,
};
pub use mixture::{Component, JointMarginal, MixtureStrategy, ProductStrategy, MARGINAL_PLAYER_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense tensors are limited to `n·log2(ℓ) ≤ 24` bits of profile index.
pub const DENSE_PROFILE_CAP: usize = 1 << 24;

/// One payoff matrix of an edge-factored utility: `player` receives
/// `matrix[a_player][a_opponent]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffEdge {
    pub player: usize,
    pub opponent: usize,
    pub matrix: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Utilities {
    /// `payoffs[i][profile_index]`, each entry in `[0, 1]`.
    Dense { payoffs: Vec<Vec<f64>> },
    /// Player `p`'s utility is the sum of its outgoing edge matrices.
    Edges { edges: Vec<PayoffEdge> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CostTerm {
    /// `values[profile_index]`, each entry in `[-1, 1]`.
    Dense { values: Vec<f64> },
    /// Depends only on the actions of `players[0]` (rows) and `players[1]`
    /// (columns).
    Pair { players: [usize; 2], matrix: Matrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameWire", into = "GameWire")]
pub struct FactoredGame {
    n_players: usize,
    n_actions: usize,
    utilities: Utilities,
    costs: Vec<Vec<CostTerm>>,
}

#[derive(Serialize, Deserialize)]
struct GameWire {
    players: usize,
    actions: usize,
    utilities: Utilities,
    #[serde(default)]
    costs: Vec<Vec<CostTerm>>,
}

impl TryFrom<GameWire> for FactoredGame {
    type Error = Error;
    fn try_from(w: GameWire) -> Result<Self> {
        FactoredGame::new(w.players, w.actions, w.utilities, w.costs)
    }
}

impl From<FactoredGame> for GameWire {
    fn from(g: FactoredGame) -> Self {
        GameWire { players: g.n_players, actions: g.n_actions, utilities: g.utilities, costs: g.costs }
    }
}

/// A payoff function viewed as something to take expectations of.
enum Term<'a> {
    Dense(&'a [f64]),
    /// Sum of `matrix[a_p][a_q]` terms.
    Pairs(Vec<(usize, usize, &'a Matrix)>),
}

/// Number of profiles `ℓ^n` if it fits under the dense cap.
pub fn dense_profile_count(n_players: usize, n_actions: usize) -> Option<usize> {
    let count = n_actions.checked_pow(n_players as u32)?;
    (count <= DENSE_PROFILE_CAP).then_some(count)
}

impl FactoredGame {
    pub fn new(
        n_players: usize,
        n_actions: usize,
        utilities: Utilities,
        mut costs: Vec<Vec<CostTerm>>,
    ) -> Result<Self> {
        if n_players == 0 || n_actions == 0 {
            return Err(Error::InvalidGame("need at least one player and one action".into()));
        }
        if costs.is_empty() {
            costs = vec![Vec::new(); n_players];
        }
        if costs.len() != n_players {
            return Err(Error::InvalidGame(format!(
                "expected cost lists for {n_players} players, got {}",
                costs.len()
            )));
        }
        let game = FactoredGame { n_players, n_actions, utilities, costs };
        game.validate()?;
        Ok(game)
    }

    pub fn dense(
        n_players: usize,
        n_actions: usize,
        payoffs: Vec<Vec<f64>>,
        costs: Vec<Vec<CostTerm>>,
    ) -> Result<Self> {
        FactoredGame::new(n_players, n_actions, Utilities::Dense { payoffs }, costs)
    }

    pub fn edge_factored(
        n_players: usize,
        n_actions: usize,
        edges: Vec<PayoffEdge>,
        costs: Vec<Vec<CostTerm>>,
    ) -> Result<Self> {
        FactoredGame::new(n_players, n_actions, Utilities::Edges { edges }, costs)
    }

    fn validate(&self) -> Result<()> {
        let (n, l) = (self.n_players, self.n_actions);
        let dense_len = || {
            dense_profile_count(n, l)
                .ok_or_else(|| Error::CapExceeded(format!("{l}^{n} profiles exceed the dense tensor cap")))
        };
        match &self.utilities {
            Utilities::Dense { payoffs } => {
                let len = dense_len()?;
                if payoffs.len() != n || payoffs.iter().any(|p| p.len() != len) {
                    return Err(Error::InvalidGame(format!("dense utilities must be {n} tensors of {len} entries")));
                }
                if payoffs.iter().flatten().any(|u| !(0.0..=1.0).contains(u)) {
                    return Err(Error::InvalidGame("dense utilities must lie in [0, 1]".into()));
                }
            }
            Utilities::Edges { edges } => {
                for e in edges {
                    self.check_pair(e.player, e.opponent, &e.matrix)?;
                    if !e.matrix.all_finite() {
                        return Err(Error::InvalidGame("non-finite edge payoff".into()));
                    }
                }
            }
        }
        for term in self.costs.iter().flatten() {
            match term {
                CostTerm::Dense { values } => {
                    if values.len() != dense_len()? {
                        return Err(Error::InvalidGame("dense cost has wrong length".into()));
                    }
                    if values.iter().any(|c| !(-1.0..=1.0).contains(c)) {
                        return Err(Error::InvalidGame("costs must lie in [-1, 1]".into()));
                    }
                }
                CostTerm::Pair { players, matrix } => {
                    self.check_pair(players[0], players[1], matrix)?;
                    if !(matrix.min_entry() >= -1.0 && matrix.max_entry() <= 1.0) {
                        return Err(Error::InvalidGame("costs must lie in [-1, 1]".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_pair(&self, p: usize, q: usize, m: &Matrix) -> Result<()> {
        if p >= self.n_players || q >= self.n_players {
            return Err(Error::InvalidGame(format!("player pair ({p}, {q}) out of range")));
        }
        if p == q {
            return Err(Error::InvalidGame(format!("pair term on a single player {p}")));
        }
        if m.rows() != self.n_actions || m.cols() != self.n_actions {
            return Err(Error::InvalidGame(format!(
                "pair matrix must be {0}x{0}, got {1}x{2}",
                self.n_actions,
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn utilities(&self) -> &Utilities {
        &self.utilities
    }

    pub fn costs(&self, player: usize) -> &[CostTerm] {
        &self.costs[player]
    }

    pub fn n_costs(&self, player: usize) -> usize {
        self.costs[player].len()
    }

    /// Largest number of cost terms of any player.
    pub fn max_costs(&self) -> usize {
        self.costs.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_costs(&self) -> bool {
        self.costs.iter().any(|c| !c.is_empty())
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.utilities, Utilities::Dense { .. })
    }

    /// Same game with every cost term removed.
    pub fn without_costs(&self) -> FactoredGame {
        FactoredGame {
            n_players: self.n_players,
            n_actions: self.n_actions,
            utilities: self.utilities.clone(),
            costs: vec![Vec::new(); self.n_players],
        }
    }

    /// Upper bound on `|u_i(a)|` over players and profiles.
    pub fn utility_bound(&self) -> f64 {
        match &self.utilities {
            Utilities::Dense { payoffs } => payoffs.iter().flatten().fold(0.0, |m, u| m.max(u.abs())),
            Utilities::Edges { edges } => {
                let mut per_player = vec![0.0; self.n_players];
                for e in edges {
                    per_player[e.player] += e.matrix.max_abs();
                }
                per_player.into_iter().fold(0.0, f64::max)
            }
        }
    }

    pub fn profile_index(&self, profile: &[usize]) -> usize {
        profile.iter().fold(0, |idx, &a| idx * self.n_actions + a)
    }

    pub fn profile_of(&self, mut index: usize) -> Vec<usize> {
        let mut profile = vec![0; self.n_players];
        for slot in profile.iter_mut().rev() {
            *slot = index % self.n_actions;
            index /= self.n_actions;
        }
        profile
    }

    /// `ℓ^n` when dense materialization is allowed.
    pub fn n_profiles(&self) -> Option<usize> {
        dense_profile_count(self.n_players, self.n_actions)
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n_players {
            return Err(Error::IndexOutOfRange(format!("player {i} of {}", self.n_players)));
        }
        Ok(())
    }

    fn check_cost(&self, i: usize, j: usize) -> Result<()> {
        self.check_player(i)?;
        if j >= self.costs[i].len() {
            return Err(Error::IndexOutOfRange(format!("cost {j} of player {i} (has {})", self.costs[i].len())));
        }
        Ok(())
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.n_players || profile.iter().any(|&a| a >= self.n_actions) {
            return Err(Error::DimensionMismatch(format!("profile {profile:?}")));
        }
        Ok(())
    }

    fn check_blocks<B: AsRef<[f64]>>(&self, blocks: &[B]) -> Result<()> {
        if blocks.len() != self.n_players || blocks.iter().any(|b| b.as_ref().len() != self.n_actions) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks of length {}",
                self.n_players, self.n_actions
            )));
        }
        Ok(())
    }

    fn check_mixture(&self, z: &MixtureStrategy) -> Result<()> {
        if z.n_players() != self.n_players || z.n_actions() != self.n_actions {
            return Err(Error::DimensionMismatch(format!(
                "strategy over {} players x {} actions, game has {} x {}",
                z.n_players(),
                z.n_actions(),
                self.n_players,
                self.n_actions
            )));
        }
        Ok(())
    }

    fn utility_term(&self, i: usize) -> Term<'_> {
        match &self.utilities {
            Utilities::Dense { payoffs } => Term::Dense(&payoffs[i]),
            Utilities::Edges { edges } => {
                Term::Pairs(edges.iter().filter(|e| e.player == i).map(|e| (e.player, e.opponent, &e.matrix)).collect())
            }
        }
    }

    fn cost_term(&self, i: usize, j: usize) -> Term<'_> {
        match &self.costs[i][j] {
            CostTerm::Dense { values } => Term::Dense(values),
            CostTerm::Pair { players, matrix } => Term::Pairs(vec![(players[0], players[1], matrix)]),
        }
    }

    /// `u_i(a)` for a pure profile.
    pub fn utility(&self, i: usize, profile: &[usize]) -> Result<f64> {
        self.check_player(i)?;
        self.check_profile(profile)?;
        Ok(self.term_value(&self.utility_term(i), profile))
    }

    /// `C_i^j(a)` for a pure profile.
    pub fn cost(&self, i: usize, j: usize, profile: &[usize]) -> Result<f64> {
        self.check_cost(i, j)?;
        self.check_profile(profile)?;
        Ok(self.term_value(&self.cost_term(i, j), profile))
    }

    fn term_value(&self, term: &Term<'_>, profile: &[usize]) -> f64 {
        match term {
            Term::Dense(t) => t[self.profile_index(profile)],
            Term::Pairs(pairs) => pairs.iter().map(|(p, q, m)| m[(profile[*p], profile[*q])]).sum(),
        }
    }

    /// Expected utility of player `i` under a mixture of product distributions.
    pub fn expected_utility(&self, i: usize, z: &MixtureStrategy) -> Result<f64> {
        self.check_player(i)?;
        self.check_mixture(z)?;
        let term = self.utility_term(i);
        Ok(z.components().iter().map(|c| c.weight() * self.term_expectation(&term, c.marginals())).sum())
    }

    /// Expected value of cost `j` of player `i` under `z`.
    pub fn expected_cost(&self, i: usize, j: usize, z: &MixtureStrategy) -> Result<f64> {
        self.check_cost(i, j)?;
        self.check_mixture(z)?;
        let term = self.cost_term(i, j);
        Ok(z.components().iter().map(|c| c.weight() * self.term_expectation(&term, c.marginals())).sum())
    }

    /// `u_i` integrated against the (possibly unnormalized) product of `blocks`.
    pub fn product_utility<B: AsRef<[f64]>>(&self, i: usize, blocks: &[B]) -> Result<f64> {
        self.check_player(i)?;
        self.check_blocks(blocks)?;
        Ok(self.term_expectation(&self.utility_term(i), blocks))
    }

    pub fn product_cost<B: AsRef<[f64]>>(&self, i: usize, j: usize, blocks: &[B]) -> Result<f64> {
        self.check_cost(i, j)?;
        self.check_blocks(blocks)?;
        Ok(self.term_expectation(&self.cost_term(i, j), blocks))
    }

    /// Vector `g` with `g[b] = Σ_{a: a_i = b} u_i(a) Π_{k≠i} blocks[k][a_k]`,
    /// i.e. the gradient of `u_i` with respect to player `i`'s block.
    pub fn utility_conditional<B: AsRef<[f64]>>(&self, i: usize, blocks: &[B]) -> Result<Vec<f64>> {
        self.check_player(i)?;
        self.check_blocks(blocks)?;
        Ok(self.term_conditional(&self.utility_term(i), i, blocks))
    }

    /// Same as [`Self::utility_conditional`] for cost `j` of player `i`.
    pub fn cost_conditional<B: AsRef<[f64]>>(&self, i: usize, j: usize, blocks: &[B]) -> Result<Vec<f64>> {
        self.check_cost(i, j)?;
        self.check_blocks(blocks)?;
        Ok(self.term_conditional(&self.cost_term(i, j), i, blocks))
    }

    fn term_expectation<B: AsRef<[f64]>>(&self, term: &Term<'_>, blocks: &[B]) -> f64 {
        match term {
            Term::Dense(t) => contract(t, self.n_actions, blocks, &[])[0],
            Term::Pairs(pairs) => {
                let sums = block_sums(blocks);
                pairs
                    .iter()
                    .map(|&(p, q, m)| {
                        m.bilinear(blocks[p].as_ref(), blocks[q].as_ref()) * product_except(&sums, &[p, q])
                    })
                    .sum()
            }
        }
    }

    fn term_conditional<B: AsRef<[f64]>>(&self, term: &Term<'_>, i: usize, blocks: &[B]) -> Vec<f64> {
        let l = self.n_actions;
        match term {
            Term::Dense(t) => contract(t, l, blocks, &[i]),
            Term::Pairs(pairs) => {
                let sums = block_sums(blocks);
                let mut out = vec![0.0; l];
                for &(p, q, m) in pairs {
                    let scale = product_except(&sums, &[p, q, i]);
                    let contribution = if i == p {
                        m.mul_vec(blocks[q].as_ref())
                    } else if i == q {
                        m.tr_mul_vec(blocks[p].as_ref())
                    } else {
                        vec![m.bilinear(blocks[p].as_ref(), blocks[q].as_ref()); l]
                    };
                    for (o, c) in out.iter_mut().zip(contribution) {
                        *o += c * scale;
                    }
                }
                out
            }
        }
    }

    /// Materializes every utility and cost as a dense tensor.
    pub fn to_dense(&self) -> Result<FactoredGame> {
        let len =
            self.n_profiles().ok_or_else(|| Error::CapExceeded("game too large to materialize densely".into()))?;
        let profiles: Vec<Vec<usize>> = (0..len).map(|idx| self.profile_of(idx)).collect();
        let tabulate = |term: Term<'_>| -> Vec<f64> { profiles.iter().map(|a| self.term_value(&term, a)).collect() };
        let payoffs: Vec<Vec<f64>> = (0..self.n_players).map(|i| tabulate(self.utility_term(i))).collect();
        let costs = (0..self.n_players)
            .map(|i| {
                (0..self.costs[i].len()).map(|j| CostTerm::Dense { values: tabulate(self.cost_term(i, j)) }).collect()
            })
            .collect();
        // Edge-factored utilities need not lie in [0, 1]; skip that check.
        let game = FactoredGame {
            n_players: self.n_players,
            n_actions: self.n_actions,
            utilities: Utilities::Dense { payoffs },
            costs,
        };
        Ok(game)
    }
}

fn block_sums<B: AsRef<[f64]>>(blocks: &[B]) -> Vec<f64> {
    blocks.iter().map(|b| b.as_ref().iter().sum()).collect()
}

fn product_except(sums: &[f64], skip: &[usize]) -> f64 {
    sums.iter().enumerate().filter(|(k, _)| !skip.contains(k)).map(|(_, s)| s).product()
}

/// Contracts a dense tensor over `A^n` against `blocks`, keeping the players
/// listed in `keep` (ascending). The result is indexed by the kept players'
/// actions with the lowest kept player most significant; with `keep` empty
/// it has a single entry.
pub(crate) fn contract<B: AsRef<[f64]>>(tensor: &[f64], l: usize, blocks: &[B], keep: &[usize]) -> Vec<f64> {
    let mut owned: Option<Vec<f64>> = None;
    let mut kept = 1usize;
    for p in (0..blocks.len()).rev() {
        if keep.contains(&p) {
            kept *= l;
            continue;
        }
        let src: &[f64] = owned.as_deref().unwrap_or(tensor);
        let x = blocks[p].as_ref();
        let prefix = src.len() / (l * kept);
        let mut next = vec![0.0; prefix * kept];
        for t in 0..prefix {
            let out = &mut next[t * kept..(t + 1) * kept];
            for (a, &xa) in x.iter().enumerate() {
                if xa == 0.0 {
                    continue;
                }
                let base = (t * l + a) * kept;
                for (o, &v) in out.iter_mut().zip(&src[base..base + kept]) {
                    *o += xa * v;
                }
            }
        }
        owned = Some(next);
    }
    owned.unwrap_or_else(|| tensor.to_vec())
}
