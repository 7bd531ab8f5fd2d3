//! LP-certified verification of constrained Φ-equilibria.
//!
//! For a mixture `z` and player `i`, both `u_i(φ ∘_i z)` and every
//! `C_i^j(φ ∘_i z)` are linear in the `ℓ²` entries of `φ`:
//! `Σ_c w_c Σ_{a,b} x_{c,i}(a) φ(a,b) g_c(b)` where `g_c` is the conditional
//! payoff vector of component `c`. The safe best response is one LP over
//! those entries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{DeviationPolytope, FactoredGame, MixtureStrategy};
use crate::linalg::Matrix;
use crate::lp::{lp_solve, LinearProgram, LpOutcome, Relation};
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeDeviation {
    pub phi: Matrix,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    PromiseViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerReport {
    pub player: usize,
    pub utility: f64,
    /// `None` when the player has no safe deviation.
    pub best_value: Option<f64>,
    pub regret: Option<f64>,
    pub deviation: Option<Matrix>,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub eps: f64,
    pub nu: f64,
    pub tol: f64,
    pub safety_slack: f64,
    pub players: Vec<PlayerReport>,
    pub max_regret: f64,
    /// Largest expected cost of any player; `None` for games without costs.
    pub max_cost: Option<f64>,
    pub verdict: Verdict,
}

impl EquilibriumReport {
    pub fn ok(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tol: f64,
    /// Cost budget a deviation must respect; `0` gives exact safety.
    pub safety_slack: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tol: tol::LP, safety_slack: 0.0 }
    }
}

/// Objective vector over `φ`'s entries for the conditional vectors produced
/// by `conditional` on each component.
fn deviation_coefficients(
    z: &MixtureStrategy,
    i: usize,
    l: usize,
    conditional: impl Fn(&[Vec<f64>]) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut coeffs = vec![0.0; l * l];
    for c in z.components() {
        let g = conditional(c.marginals())?;
        let x = c.marginal(i);
        for a in 0..l {
            let wa = c.weight() * x[a];
            if wa == 0.0 {
                continue;
            }
            for b in 0..l {
                coeffs[a * l + b] += wa * g[b];
            }
        }
    }
    Ok(coeffs)
}

/// Best deviation of player `i` among those in `phi_set` that keep every cost
/// of `i` at most `safety_slack`.
pub fn safe_best_response(
    game: &FactoredGame,
    i: usize,
    z: &MixtureStrategy,
    phi_set: &DeviationPolytope,
    safety_slack: f64,
) -> Result<SafeDeviation> {
    let l = game.n_actions();
    if i >= game.n_players() {
        return Err(Error::IndexOutOfRange(format!("player {i} of {}", game.n_players())));
    }
    if z.n_players() != game.n_players() || z.n_actions() != l {
        return Err(Error::DimensionMismatch(format!(
            "strategy over {} players x {} actions for a game with {} x {l}",
            z.n_players(),
            z.n_actions(),
            game.n_players()
        )));
    }
    if phi_set.n_actions() != l {
        return Err(Error::DimensionMismatch(format!(
            "deviation polytope over {} actions for a game with {l}",
            phi_set.n_actions()
        )));
    }
    if !(safety_slack >= 0.0) {
        return Err(Error::InvalidParameter(format!("safety slack must be nonnegative, got {safety_slack}")));
    }
    let objective = deviation_coefficients(z, i, l, |blocks| game.utility_conditional(i, blocks))?;
    let mut lp = LinearProgram::maximize(objective);
    for j in 0..game.n_costs(i) {
        let row = deviation_coefficients(z, i, l, |blocks| game.cost_conditional(i, j, blocks))?;
        lp.constrain(row, Relation::Le, safety_slack);
    }
    for a in 0..l {
        let mut row = vec![0.0; l * l];
        row[a * l..(a + 1) * l].fill(1.0);
        lp.constrain(row, Relation::Eq, 1.0);
    }
    for r in phi_set.rows() {
        lp.constrain(r.coeffs.clone(), r.relation, r.rhs);
    }
    match lp_solve(&lp)? {
        LpOutcome::Optimal(sol) => {
            let phi = Matrix::from_fn(l, l, |a, b| sol.x[a * l + b].max(0.0));
            Ok(SafeDeviation { phi, value: sol.value })
        }
        LpOutcome::Infeasible => Err(Error::NoSafeDeviation { player: i }),
        LpOutcome::Unbounded => Err(Error::Numerical("deviation LP reported unbounded".into())),
    }
}

/// Checks `u_i(z) ≥ u_i(φ ∘_i z) − eps` for every safe `φ` and
/// `C_i^j(z) ≤ nu` for every cost, at tolerance `1e-9` with exact safety.
pub fn verify_constrained_equilibrium(
    game: &FactoredGame,
    z: &MixtureStrategy,
    phi_set: &DeviationPolytope,
    eps: f64,
    nu: f64,
) -> Result<EquilibriumReport> {
    verify_with_options(game, z, phi_set, eps, nu, VerifyOptions::default())
}

pub fn verify_with_options(
    game: &FactoredGame,
    z: &MixtureStrategy,
    phi_set: &DeviationPolytope,
    eps: f64,
    nu: f64,
    options: VerifyOptions,
) -> Result<EquilibriumReport> {
    let players = (0..game.n_players())
        .into_par_iter()
        .map(|i| {
            let utility = game.expected_utility(i, z)?;
            let costs = (0..game.n_costs(i)).map(|j| game.expected_cost(i, j, z)).collect::<Result<Vec<_>>>()?;
            let (best_value, deviation) = match safe_best_response(game, i, z, phi_set, options.safety_slack) {
                Ok(d) => (Some(d.value), Some(d.phi)),
                Err(Error::NoSafeDeviation { .. }) => (None, None),
                Err(e) => return Err(e),
            };
            Ok(PlayerReport {
                player: i,
                utility,
                best_value,
                regret: best_value.map(|v| v - utility),
                deviation,
                costs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_regret = players.iter().filter_map(|p| p.regret).fold(0.0, f64::max);
    let max_cost = players.iter().flat_map(|p| p.costs.iter().copied()).reduce(f64::max);
    let verdict = if players.iter().any(|p| p.best_value.is_none()) {
        Verdict::PromiseViolation
    } else if max_regret <= eps + options.tol && max_cost.map_or(true, |c| c <= nu + options.tol) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(EquilibriumReport {
        eps,
        nu,
        tol: options.tol,
        safety_slack: options.safety_slack,
        players,
        max_regret,
        max_cost,
        verdict,
    })
}

/// A coarse-correlated equilibrium of a two-player game without costs, from
/// the feasibility LP with one incentive row per pure deviation. The result
/// is a mixture of at most `k²` point masses and is re-verified before it is
/// returned.
pub fn cce_feasibility_lp(game: &FactoredGame) -> Result<MixtureStrategy> {
    if game.n_players() != 2 {
        return Err(Error::InvalidGame(format!("expected 2 players, got {}", game.n_players())));
    }
    if game.has_costs() {
        return Err(Error::InvalidGame("the CCE feasibility LP takes a game without costs".into()));
    }
    let k = game.n_actions();
    let dense = if game.is_dense() { game.clone() } else { game.to_dense()? };
    let u = |i: usize, a: usize, b: usize| dense.utility(i, &[a, b]);
    let mut lp = LinearProgram::maximize(vec![0.0; k * k]);
    for dev in 0..k {
        let mut row0 = vec![0.0; k * k];
        let mut row1 = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                row0[a * k + b] = u(0, a, b)? - u(0, dev, b)?;
                row1[a * k + b] = u(1, a, b)? - u(1, a, dev)?;
            }
        }
        lp.constrain(row0, Relation::Ge, 0.0).constrain(row1, Relation::Ge, 0.0);
    }
    lp.constrain(vec![1.0; k * k], Relation::Eq, 1.0);
    let sol = match lp_solve(&lp)? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::Numerical(format!("CCE feasibility LP returned {other:?}"))),
    };
    let total: f64 = sol.x.iter().map(|w| w.max(0.0)).sum();
    let mut components = Vec::new();
    for a in 0..k {
        for b in 0..k {
            let w = sol.x[a * k + b].max(0.0) / total;
            if w > tol::PRUNE_WEIGHT {
                let unit = |act: usize| (0..k).map(|x| if x == act { 1.0 } else { 0.0 }).collect::<Vec<_>>();
                components.push((w, vec![unit(a), unit(b)]));
            }
        }
    }
    let s: f64 = components.iter().map(|c| c.0).sum();
    for c in &mut components {
        c.0 /= s;
    }
    let z = MixtureStrategy::new(components)?;
    let report = verify_constrained_equilibrium(game, &z, &DeviationPolytope::cce(k), 0.0, f64::INFINITY)?;
    if !report.ok() {
        return Err(Error::Numerical(format!("CCE LP output has regret {:.3e}", report.max_regret)));
    }
    Ok(z)
}
