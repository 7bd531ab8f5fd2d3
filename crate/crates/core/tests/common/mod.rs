//! Independent reference computations for the integration tests: profile
//! enumeration, vertex enumeration and plain Gaussian elimination.
#![allow(dead_code)]

use phieq::game::CostTerm;
use phieq::lp::{LinearProgram, Relation, Sense};
use phieq::qvi::{unflatten, QviInstance};
use phieq::FactoredGame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// All `k^n` pure profiles in lexicographic order.
pub fn all_profiles(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn product_weight(blocks: &[Vec<f64>], profile: &[usize], skip: usize) -> f64 {
    profile.iter().enumerate().filter(|&(p, _)| p != skip).map(|(p, &a)| blocks[p][a]).product()
}

/// `Σ_{a_{-i}} Π_{p≠i} blocks_p(a_p) · f(a_i = a, a_{-i})` for every `a`.
pub fn brute_conditional(n: usize, k: usize, i: usize, blocks: &[Vec<f64>], f: impl Fn(&[usize]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for profile in all_profiles(n, k) {
        out[profile[i]] += product_weight(blocks, &profile, i) * f(&profile);
    }
    out
}

pub fn brute_utility_conditional(game: &FactoredGame, i: usize, blocks: &[Vec<f64>]) -> Vec<f64> {
    brute_conditional(game.n_players(), game.n_actions(), i, blocks, |a| game.utility(i, a).unwrap())
}

pub fn brute_cost_conditional(game: &FactoredGame, i: usize, j: usize, blocks: &[Vec<f64>]) -> Vec<f64> {
    brute_conditional(game.n_players(), game.n_actions(), i, blocks, |a| game.cost(i, j, a).unwrap())
}

/// Dense game with utilities in `[0,1]` and `m` dense costs per player in
/// `[-1,1]`. Every cost of player `i` is nonpositive whenever `i` plays its
/// last action, so that action is always safe.
pub fn random_dense_game(rng: &mut impl Rng, n: usize, k: usize, m: usize) -> FactoredGame {
    let profiles = all_profiles(n, k);
    let payoffs = (0..n).map(|_| profiles.iter().map(|_| rng.gen::<f64>()).collect()).collect();
    let costs = (0..n)
        .map(|i| {
            (0..m)
                .map(|_| CostTerm::Dense {
                    values: profiles
                        .iter()
                        .map(|a| {
                            let v = rng.gen_range(-1.0..1.0);
                            if a[i] == k - 1 {
                                -f64::abs(v)
                            } else {
                                v
                            }
                        })
                        .collect(),
                })
                .collect()
        })
        .collect();
    FactoredGame::dense(n, k, payoffs, costs).unwrap()
}

/// Gaussian elimination with partial pivoting; `None` when (numerically)
/// singular.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// `(coeffs, relation, rhs)` rows of an LP with its finite bounds appended.
pub fn all_rows(lp: &LinearProgram) -> Vec<(Vec<f64>, Relation, f64)> {
    let n = lp.n_vars();
    let mut rows: Vec<_> = lp.constraints.iter().map(|c| (c.coeffs.clone(), c.relation, c.rhs)).collect();
    for (v, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[v] = 1.0;
        if lo.is_finite() {
            rows.push((e.clone(), Relation::Ge, lo));
        }
        if hi.is_finite() {
            rows.push((e, Relation::Le, hi));
        }
    }
    rows
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Feasible vertices of `{x : rows}` in `n` dimensions.
pub fn vertices(n: usize, rows: &[(Vec<f64>, Relation, f64)], tol: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for subset in combinations(rows.len(), n) {
        let a = subset.iter().map(|&r| rows[r].0.clone()).collect();
        let b = subset.iter().map(|&r| rows[r].2).collect();
        let Some(x) = gauss_solve(a, b) else { continue };
        let feasible = rows.iter().all(|(c, rel, rhs)| {
            let lhs: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            match rel {
                Relation::Le => lhs <= rhs + tol,
                Relation::Ge => lhs >= rhs - tol,
                Relation::Eq => (lhs - rhs).abs() <= tol,
            }
        });
        if feasible {
            out.push(x);
        }
    }
    out
}

/// Optimal value of a pointed, bounded LP by enumerating its vertices;
/// `None` when no vertex is feasible.
pub fn vertex_lp(lp: &LinearProgram) -> Option<f64> {
    let verts = vertices(lp.n_vars(), &all_rows(lp), 1e-9);
    let values = verts.iter().map(|x| lp.objective.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
    match lp.sense {
        Sense::Maximize => values.reduce(f64::max),
        Sense::Minimize => values.reduce(f64::min),
    }
}

/// Random LP over `n ≤ 3` variables with box bounds, so the feasible set is
/// a polytope. Most instances are built around a feasible point; about one
/// in five gets an arbitrary right-hand side and may be empty.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.gen_range(1..=3);
    let objective = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut lp =
        if rng.gen_bool(0.5) { LinearProgram::maximize(objective) } else { LinearProgram::minimize(objective) };
    let mut anchor = Vec::with_capacity(n);
    for v in 0..n {
        let lo = rng.gen_range(-2.0..0.5);
        let hi = lo + rng.gen_range(0.5..3.0);
        lp.bound(v, lo, hi);
        anchor.push(rng.gen_range(lo..hi));
    }
    let arbitrary = rng.gen_bool(0.2);
    for _ in 0..rng.gen_range(1..=4) {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let at: f64 = coeffs.iter().zip(&anchor).map(|(a, b)| a * b).sum();
        let (relation, rhs) = match rng.gen_range(0..5) {
            0 => (Relation::Eq, at),
            1 | 2 => (Relation::Ge, at - rng.gen_range(0.0..1.0)),
            _ => (Relation::Le, at + rng.gen_range(0.0..1.0)),
        };
        let rhs = if arbitrary { rng.gen_range(-1.5..1.5) } else { rhs };
        lp.constrain(coeffs, relation, rhs);
    }
    lp
}

/// Gap `min_{z̃ ∈ Q(z)} F(z)^T(z̃ − z)` from scratch: `F` and the cost rows by
/// profile enumeration, each block minimized over the vertices of its
/// relaxed polytope.
pub fn qvi_gap_oracle(inst: &QviInstance, z: &[f64]) -> f64 {
    let game = inst.game();
    let l = inst.n_actions();
    let blocks = unflatten(z, l).unwrap();
    let relax = inst.nu_prime();
    let mut gap = 0.0;
    for i in 0..inst.n_players() {
        let f: Vec<f64> = brute_utility_conditional(game, i, &blocks).into_iter().map(|v| -v).collect();
        let mut rows = Vec::new();
        for j in 0..game.n_costs(i) {
            rows.push((brute_cost_conditional(game, i, j, &blocks), Relation::Le, relax));
        }
        rows.push((vec![1.0; l], Relation::Le, 1.0 + relax));
        rows.push((vec![1.0; l], Relation::Ge, 1.0 - relax));
        for k in 0..l {
            let mut e = vec![0.0; l];
            e[k] = 1.0;
            rows.push((e.clone(), Relation::Ge, 0.0));
            rows.push((e, Relation::Le, 1.0));
        }
        let best = vertices(l, &rows, 1e-11)
            .iter()
            .map(|y| f.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let current: f64 = f.iter().zip(&blocks[i]).map(|(a, b)| a * b).sum();
        gap += best - current;
    }
    gap
}
