//! Polymatrix games: ε-Nash verification, random instances and two
//! desk-scale equilibrium oracles (grid search and support enumeration).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::ProductStrategy;
use crate::linalg::{self, Matrix};
use crate::tol;

/// Mixed strategy per node of a polymatrix game.
pub type StrategyProfile = ProductStrategy;

/// Grid search refuses to visit more than this many profiles by default.
pub const GRID_BUDGET: u64 = 1 << 24;

/// Support enumeration refuses more than this many support profiles by default.
pub const SUPPORT_BUDGET: u64 = 1 << 20;

pub const DEFAULT_GRID_RESOLUTION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyEdge {
    pub from: usize,
    pub to: usize,
    pub matrix: Matrix,
}

/// Graph with a payoff matrix `A^{i,j} ∈ [0,1]^{k×k}` on every directed edge.
/// Node `i`'s payoff is `Σ_j x_i^T A^{i,j} x_j` over its out-edges. The edge
/// set is closed under reversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyWire", into = "PolyWire")]
pub struct PolyMatrixGame {
    n: usize,
    k: usize,
    /// Sorted by `(from, to)`.
    edges: Vec<PolyEdge>,
    /// Indices into `edges` for each source node.
    out: Vec<Vec<usize>>,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct PolyWire {
    k: usize,
    edges: Vec<PolyEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
}

impl TryFrom<PolyWire> for PolyMatrixGame {
    type Error = Error;
    fn try_from(w: PolyWire) -> Result<Self> {
        let implied = w.edges.iter().map(|e| e.from.max(e.to) + 1).max().unwrap_or(0);
        let n = w.nodes.unwrap_or(implied);
        PolyMatrixGame::new(n, w.k, w.edges)
    }
}

impl From<PolyMatrixGame> for PolyWire {
    fn from(g: PolyMatrixGame) -> Self {
        let implied = g.edges.iter().map(|e| e.from.max(e.to) + 1).max().unwrap_or(0);
        PolyWire { k: g.k, nodes: (implied != g.n).then_some(g.n), edges: g.edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub ok: bool,
    pub eps: f64,
    pub regrets: Vec<f64>,
    pub max_regret: f64,
}

impl PolyMatrixGame {
    pub fn new(n: usize, k: usize, mut edges: Vec<PolyEdge>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidGame("a polymatrix game needs at least one node and one action".into()));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidGame(format!("edge ({}, {}) outside {n} nodes", e.from, e.to)));
            }
            if e.from == e.to {
                return Err(Error::InvalidGame(format!("self-loop at node {}", e.from)));
            }
            if e.matrix.rows() != k || e.matrix.cols() != k {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({}, {}) carries a {}x{} matrix, expected {k}x{k}",
                    e.from,
                    e.to,
                    e.matrix.rows(),
                    e.matrix.cols()
                )));
            }
            if !e.matrix.all_finite() || e.matrix.min_entry() < 0.0 || e.matrix.max_entry() > 1.0 {
                return Err(Error::InvalidGame(format!("edge ({}, {}) has entries outside [0,1]", e.from, e.to)));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        for w in edges.windows(2) {
            if (w[0].from, w[0].to) == (w[1].from, w[1].to) {
                return Err(Error::InvalidGame(format!("duplicate edge ({}, {})", w[0].from, w[0].to)));
            }
        }
        for e in &edges {
            if edges.binary_search_by_key(&(e.to, e.from), |f| (f.from, f.to)).is_err() {
                return Err(Error::InvalidGame(format!("edge ({}, {}) has no reverse", e.from, e.to)));
            }
        }
        let mut out = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            out[e.from].push(idx);
        }
        let degree = out.iter().map(Vec::len).max().unwrap_or(0);
        Ok(PolyMatrixGame { n, k, edges, out, degree })
    }

    /// The two-node game where node 0 wants to match and node 1 to mismatch.
    pub fn matching_pennies() -> Self {
        let matching = Matrix::identity(2);
        let mismatching = Matrix::from_fn(2, 2, |a, b| if a != b { 1.0 } else { 0.0 });
        PolyMatrixGame::new(
            2,
            2,
            vec![PolyEdge { from: 0, to: 1, matrix: matching }, PolyEdge { from: 1, to: 0, matrix: mismatching }],
        )
        .expect("matching pennies is well formed")
    }

    pub fn n_players(&self) -> usize {
        self.n
    }

    pub fn n_actions(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[PolyEdge] {
        &self.edges
    }

    /// Out-edges of node `i`.
    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = &PolyEdge> {
        self.out[i].iter().map(move |&e| &self.edges[e])
    }

    /// `A^{i,j}` if the edge exists.
    pub fn matrix(&self, i: usize, j: usize) -> Option<&Matrix> {
        self.edges.binary_search_by_key(&(i, j), |e| (e.from, e.to)).ok().map(|idx| &self.edges[idx].matrix)
    }

    /// Maximum number of neighbours of any node.
    pub fn degree(&self) -> usize {
        self.degree
    }

    fn check_profile(&self, x: &StrategyProfile) -> Result<()> {
        if x.n_players() != self.n || x.n_actions() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "profile over {} players x {} actions for a game with {} nodes x {} actions",
                x.n_players(),
                x.n_actions(),
                self.n,
                self.k
            )));
        }
        Ok(())
    }

    /// `Σ_j A^{i,j} x_j`: node `i`'s payoff for each of its pure actions.
    pub fn payoff_vector(&self, i: usize, x: &StrategyProfile) -> Result<Vec<f64>> {
        self.check_profile(x)?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange(format!("node {i} of {}", self.n)));
        }
        let mut v = vec![0.0; self.k];
        for e in self.out_edges(i) {
            for (acc, term) in v.iter_mut().zip(e.matrix.mul_vec(x.marginal(e.to))) {
                *acc += term;
            }
        }
        Ok(v)
    }

    pub fn expected_payoff(&self, i: usize, x: &StrategyProfile) -> Result<f64> {
        Ok(linalg::dot(x.marginal(i), &self.payoff_vector(i, x)?))
    }

    /// Payoff of node `i` at a pure profile.
    pub fn payoff(&self, i: usize, profile: &[usize]) -> f64 {
        self.out_edges(i).map(|e| e.matrix[(profile[i], profile[e.to])]).sum()
    }
}

/// Gain of node `i`'s best pure deviation over its current payoff.
pub fn player_regret(g: &PolyMatrixGame, x: &StrategyProfile, i: usize) -> Result<f64> {
    let v = g.payoff_vector(i, x)?;
    let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - linalg::dot(x.marginal(i), &v))
}

/// `ok` iff every node's regret is at most `eps + 1e-9`.
pub fn verify_eps_nash(g: &PolyMatrixGame, x: &StrategyProfile, eps: f64) -> Result<NashReport> {
    let regrets = (0..g.n_players()).map(|i| player_regret(g, x, i)).collect::<Result<Vec<_>>>()?;
    let max_regret = regrets.iter().copied().fold(0.0, f64::max);
    Ok(NashReport { ok: max_regret <= eps + tol::LP, eps, regrets, max_regret })
}

/// Random graph with maximum degree `max_degree` and i.i.d. uniform payoffs.
/// Candidate edges are visited in a seeded random order and kept while both
/// endpoints have spare degree, so nodes may end up isolated.
pub fn random_instance(n: usize, k: usize, max_degree: usize, seed: u64) -> Result<PolyMatrixGame> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if max_degree == 0 || max_degree >= n {
        return Err(Error::InvalidParameter(format!(
            "degree {max_degree} is not achievable with {n} nodes (need 1 <= degree < n)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut rng);
    let mut deg = vec![0usize; n];
    let mut chosen = Vec::new();
    for (i, j) in pairs {
        if deg[i] < max_degree && deg[j] < max_degree {
            deg[i] += 1;
            deg[j] += 1;
            chosen.push((i, j));
        }
    }
    chosen.sort_unstable();
    let mut edges = Vec::with_capacity(2 * chosen.len());
    for (i, j) in chosen {
        for (from, to) in [(i, j), (j, i)] {
            let matrix = Matrix::from_fn(k, k, |_, _| rng.gen::<f64>());
            edges.push(PolyEdge { from, to, matrix });
        }
    }
    PolyMatrixGame::new(n, k, edges)
}

/// All points of the simplex over `k` actions with coordinates in multiples
/// of `1/resolution`.
pub fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, res: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() == k - 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / res as f64).collect());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(k, left - c, res, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, resolution, resolution, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Grid profile with the smallest maximum regret, at the default budget.
///
/// Rounding an exact equilibrium to the grid moves each marginal by at most
/// `k/resolution` in ℓ1, and each neighbour's move shifts a node's payoff
/// vector by at most that much per edge. The returned profile therefore has
/// maximum regret at most `3·deg(G)·k/resolution`.
pub fn brute_force_nash(g: &PolyMatrixGame, resolution: usize) -> Result<StrategyProfile> {
    brute_force_nash_with_budget(g, resolution, GRID_BUDGET)
}

pub fn brute_force_nash_with_budget(g: &PolyMatrixGame, resolution: usize, budget: u64) -> Result<StrategyProfile> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    let n = g.n_players();
    let k = g.n_actions();
    let exponent = (n * (k - 1)) as u32;
    let declared = (resolution as u64 + 1).checked_pow(exponent);
    if declared.map_or(true, |c| c > budget) {
        return Err(Error::CapExceeded(format!(
            "({}+1)^{exponent} grid profiles exceed the budget of {budget}",
            resolution
        )));
    }
    let grid = simplex_grid(k, resolution);
    let per = grid.len() as u64;
    let total = per.pow(n as u32);
    let decode = |mut idx: u64| -> Vec<usize> {
        let mut digits = vec![0usize; n];
        for d in digits.iter_mut().rev() {
            *d = (idx % per) as usize;
            idx /= per;
        }
        digits
    };
    let (_, best) = (0..total)
        .into_par_iter()
        .map(|idx| {
            let digits = decode(idx);
            let regret = (0..n)
                .map(|i| {
                    let mut v = vec![0.0; k];
                    for e in g.out_edges(i) {
                        let xj = &grid[digits[e.to]];
                        for (a, acc) in v.iter_mut().enumerate() {
                            *acc += linalg::dot(e.matrix.row(a), xj);
                        }
                    }
                    let best = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    best - linalg::dot(&grid[digits[i]], &v)
                })
                .fold(0.0, f64::max);
            (regret, idx)
        })
        .reduce(|| (f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let digits = decode(best);
    ProductStrategy::new(digits.iter().map(|&d| grid[d].clone()).collect())
}

/// Exact Nash equilibrium by support enumeration, at the default budget.
/// Returns `None` if no support profile yields a nondegenerate equilibrium.
pub fn support_enumeration_nash(g: &PolyMatrixGame) -> Result<Option<StrategyProfile>> {
    support_enumeration_nash_with_budget(g, SUPPORT_BUDGET)
}

/// Visits support profiles in order of total support size. For each it
/// solves the square system "every supported action earns the node's value,
/// supported probabilities sum to one", then keeps the first solution that
/// is nonnegative and has regret at most `1e-9`.
pub fn support_enumeration_nash_with_budget(g: &PolyMatrixGame, budget: u64) -> Result<Option<StrategyProfile>> {
    let n = g.n_players();
    let k = g.n_actions();
    let per = (1u64 << k) - 1;
    let total = per
        .checked_pow(n as u32)
        .filter(|&t| t <= budget)
        .ok_or_else(|| Error::CapExceeded(format!("(2^{k}-1)^{n} support profiles exceed the budget of {budget}")))?;
    let mut supports: Vec<u64> = (1..=per).collect();
    supports.sort_by_key(|s| (s.count_ones(), *s));
    let mut order: Vec<Vec<u64>> = (0..total)
        .map(|mut idx| {
            let mut v = vec![0u64; n];
            for s in v.iter_mut().rev() {
                *s = supports[(idx % per) as usize];
                idx /= per;
            }
            v
        })
        .collect();
    order.sort_by_key(|v| v.iter().map(|s| s.count_ones()).sum::<u32>());
    for profile in order {
        if let Some(x) = solve_support(g, &profile)? {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

fn solve_support(g: &PolyMatrixGame, supports: &[u64]) -> Result<Option<StrategyProfile>> {
    let n = g.n_players();
    let k = g.n_actions();
    let members: Vec<Vec<usize>> = supports.iter().map(|&s| (0..k).filter(|&a| s & (1 << a) != 0).collect()).collect();
    // Variable layout: supported probabilities node by node, then one value per node.
    let mut offset = vec![0usize; n + 1];
    for i in 0..n {
        offset[i + 1] = offset[i] + members[i].len();
    }
    let nx = offset[n];
    let dim = nx + n;
    let mut a = Matrix::zeros(dim, dim);
    let mut b = vec![0.0; dim];
    let mut row = 0;
    for i in 0..n {
        for &act in &members[i] {
            for e in g.out_edges(i) {
                for (pos, &other) in members[e.to].iter().enumerate() {
                    a[(row, offset[e.to] + pos)] += e.matrix[(act, other)];
                }
            }
            a[(row, nx + i)] = -1.0;
            row += 1;
        }
    }
    for i in 0..n {
        for pos in 0..members[i].len() {
            a[(row, offset[i] + pos)] = 1.0;
        }
        b[row] = 1.0;
        row += 1;
    }
    let Some(sol) = linalg::solve(&a, &b) else {
        return Ok(None);
    };
    if sol[..nx].iter().any(|&p| p < -tol::ALGEBRAIC || !p.is_finite()) {
        return Ok(None);
    }
    let mut marginals = vec![vec![0.0; k]; n];
    for i in 0..n {
        for (pos, &act) in members[i].iter().enumerate() {
            marginals[i][act] = sol[offset[i] + pos].max(0.0);
        }
        let s: f64 = marginals[i].iter().sum();
        if s <= 0.0 {
            return Ok(None);
        }
        for p in &mut marginals[i] {
            *p /= s;
        }
    }
    let x = ProductStrategy::new(marginals)?;
    let report = verify_eps_nash(g, &x, 0.0)?;
    Ok(report.ok.then_some(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_uniform_has_zero_regret() {
        let g = PolyMatrixGame::matching_pennies();
        let x = ProductStrategy::uniform(2, 2);
        for i in 0..2 {
            assert!(player_regret(&g, &x, i).unwrap().abs() < 1e-15);
        }
        assert!(verify_eps_nash(&g, &x, 0.0).unwrap().ok);
    }

    #[test]
    fn pure_best_response_has_zero_regret() {
        let g = random_instance(3, 3, 2, 5).unwrap();
        let mut x = ProductStrategy::uniform(3, 3).into_marginals();
        let v = g.payoff_vector(1, &ProductStrategy::new(x.clone()).unwrap()).unwrap();
        let best = (0..3).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        x[1] = (0..3).map(|a| if a == best { 1.0 } else { 0.0 }).collect();
        let x = ProductStrategy::new(x).unwrap();
        assert!(player_regret(&g, &x, 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn structure_is_validated() {
        let m = Matrix::identity(2);
        let one_way = vec![PolyEdge { from: 0, to: 1, matrix: m.clone() }];
        assert!(PolyMatrixGame::new(2, 2, one_way).is_err());
        let self_loop = vec![PolyEdge { from: 0, to: 0, matrix: m.clone() }];
        assert!(PolyMatrixGame::new(1, 2, self_loop).is_err());
        let big = m.map(|v| 2.0 * v);
        let out_of_range = vec![PolyEdge { from: 0, to: 1, matrix: big }, PolyEdge { from: 1, to: 0, matrix: m }];
        assert!(PolyMatrixGame::new(2, 2, out_of_range).is_err());
    }

    #[test]
    fn random_instance_shape_and_determinism() {
        let g = random_instance(2, 2, 1, 0).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.degree(), 1);
        assert_eq!(random_instance(4, 2, 3, 7).unwrap(), random_instance(4, 2, 3, 7).unwrap());
        assert!(random_instance(3, 2, 3, 0).is_err());
        assert!(random_instance(3, 2, 0, 0).is_err());
        for seed in 0..20 {
            let g = random_instance(6, 3, 2, seed).unwrap();
            assert!(g.degree() <= 2);
        }
    }

    #[test]
    fn json_round_trip_keeps_isolated_nodes() {
        let g = PolyMatrixGame::new(3, 2, PolyMatrixGame::matching_pennies().edges().to_vec()).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"nodes\":3"));
        let back: PolyMatrixGame = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let mp = serde_json::to_string(&PolyMatrixGame::matching_pennies()).unwrap();
        assert!(!mp.contains("nodes"));
    }

    #[test]
    fn grid_points_cover_simplex() {
        let pts = simplex_grid(3, 4);
        assert_eq!(pts.len(), 15);
        assert!(pts.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn grid_oracle_on_matching_pennies() {
        let g = PolyMatrixGame::matching_pennies();
        let x = brute_force_nash(&g, 10).unwrap();
        for i in 0..2 {
            assert!((x.marginal(i)[0] - 0.5).abs() < 1e-12);
        }
        assert!(verify_eps_nash(&g, &x, 0.1).unwrap().ok);
        assert!(matches!(brute_force_nash_with_budget(&g, 10, 100), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn support_enumeration_finds_mixed_equilibrium() {
        let g = PolyMatrixGame::matching_pennies();
        let x = support_enumeration_nash(&g).unwrap().unwrap();
        assert!((x.marginal(0)[0] - 0.5).abs() < 1e-12 && (x.marginal(1)[1] - 0.5).abs() < 1e-12);
    }
}
