//! Library results checked against brute-force references from `common`.

mod common;

use common::*;
use phieq::equilibrium::safe_best_response;
use phieq::game::{DeviationPolytope, MixtureStrategy};
use phieq::lp::{lp_solve, LpOutcome, Relation};
use phieq::polymatrix::{
    brute_force_nash, player_regret, random_instance, support_enumeration_nash, verify_eps_nash, PolyMatrixGame,
};
use phieq::qvi::{block_gaps, build_qvi, eval_f, project, qvi_gap, restore_feasibility, unflatten};
use phieq::reduction::reduce;
use phieq::FactoredGame;
use rand::Rng;

fn random_mixture(r: &mut impl Rng, n: usize, k: usize) -> MixtureStrategy {
    let parts = r.gen_range(1..=3);
    let weights = random_distribution(r, parts);
    MixtureStrategy::new(
        weights.into_iter().map(|w| (w, (0..n).map(|_| random_distribution(r, k)).collect())).collect(),
    )
    .unwrap()
}

fn enumerated_expectation(z: &MixtureStrategy, f: impl Fn(&[usize]) -> f64) -> f64 {
    all_profiles(z.n_players(), z.n_actions()).iter().map(|a| z.probability(a) * f(a)).sum()
}

fn reduced_game(seed: u64) -> FactoredGame {
    let mut r = rng(seed);
    let n = r.gen_range(2..=3);
    let k = r.gen_range(2..=3);
    reduce(&random_instance(n, k, n - 1, seed).unwrap(), 0.7).unwrap().game
}

#[test]
fn expected_utility_and_cost_match_enumeration() {
    let mut r = rng(1);
    for seed in 0..12 {
        let game = if seed % 2 == 0 {
            let (n, l) = (r.gen_range(1..=3), r.gen_range(2..=3));
            random_dense_game(&mut r, n, l, 2)
        } else {
            reduced_game(seed)
        };
        let z = random_mixture(&mut r, game.n_players(), game.n_actions());
        for i in 0..game.n_players() {
            let want = enumerated_expectation(&z, |a| game.utility(i, a).unwrap());
            assert!((game.expected_utility(i, &z).unwrap() - want).abs() < 1e-12);
            for j in 0..game.n_costs(i) {
                let want = enumerated_expectation(&z, |a| game.cost(i, j, a).unwrap());
                assert!((game.expected_cost(i, j, &z).unwrap() - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn conditional_vectors_match_enumeration() {
    let mut r = rng(2);
    for seed in 0..12 {
        let game = if seed % 2 == 0 { random_dense_game(&mut r, 3, 3, 1) } else { reduced_game(100 + seed) };
        // Raw blocks need not be distributions.
        let blocks: Vec<Vec<f64>> =
            (0..game.n_players()).map(|_| (0..game.n_actions()).map(|_| r.gen_range(0.0..1.0)).collect()).collect();
        for i in 0..game.n_players() {
            let got = game.utility_conditional(i, &blocks).unwrap();
            for (g, w) in got.iter().zip(brute_utility_conditional(&game, i, &blocks)) {
                assert!((g - w).abs() < 1e-12);
            }
            for j in 0..game.n_costs(i) {
                let got = game.cost_conditional(i, j, &blocks).unwrap();
                for (g, w) in got.iter().zip(brute_cost_conditional(&game, i, j, &blocks)) {
                    assert!((g - w).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn operator_is_negative_partial_gradient() {
    let mut r = rng(3);
    for _ in 0..10 {
        let (n, l) = (r.gen_range(1..=3), r.gen_range(2..=3));
        let game = random_dense_game(&mut r, n, l, 0);
        let inst = build_qvi(&game, 0.1, 0.5).unwrap();
        let z: Vec<f64> = (0..inst.dim()).map(|_| r.gen_range(0.0..1.0)).collect();
        let f = eval_f(&inst, &z).unwrap();
        let l = inst.n_actions();
        let h = 1e-6;
        for c in 0..inst.dim() {
            let i = c / l;
            let mut plus = unflatten(&z, l).unwrap();
            let mut minus = plus.clone();
            plus[i][c % l] += h;
            minus[i][c % l] -= h;
            let slope =
                (game.product_utility(i, &plus).unwrap() - game.product_utility(i, &minus).unwrap()) / (2.0 * h);
            assert!((f[c] + slope).abs() < 1e-8, "coordinate {c}: F = {}, slope = {slope}", f[c]);
        }
    }
}

#[test]
fn lp_values_match_vertex_enumeration() {
    let mut r = rng(4);
    for t in 0..300 {
        let lp = random_lp(&mut r);
        match (lp_solve(&lp).unwrap(), vertex_lp(&lp)) {
            (LpOutcome::Optimal(sol), Some(v)) => {
                assert!((sol.value - v).abs() < 1e-9, "lp {t}: {} vs {v}", sol.value);
                assert!(sol.certificate.primal_residual < 1e-9);
            }
            (LpOutcome::Infeasible, None) => {}
            (got, want) => panic!("lp {t}: {got:?} vs {want:?}"),
        }
    }
}

#[test]
fn lp_duals_match_finite_differences() {
    let mut r = rng(5);
    let mut compared = 0;
    for _ in 0..200 {
        let lp = random_lp(&mut r);
        let Some(sol) = lp_solve(&lp).unwrap().optimal() else { continue };
        let h = 1e-6;
        for c in 0..lp.constraints.len() {
            let mut up = lp.clone();
            up.constraints[c].rhs += h;
            let mut down = lp.clone();
            down.constraints[c].rhs -= h;
            let (Some(vu), Some(vd), Some(v0)) = (vertex_lp(&up), vertex_lp(&down), vertex_lp(&lp)) else { continue };
            let (right, left) = ((vu - v0) / h, (v0 - vd) / h);
            // Only nondegenerate rows have a unique dual.
            if (right - left).abs() > 1e-5 {
                continue;
            }
            assert!((sol.duals[c] - right).abs() < 1e-4, "dual {} vs slope {right}", sol.duals[c]);
            compared += 1;
        }
    }
    assert!(compared > 100);
}

#[test]
fn safe_best_response_matches_vertex_enumeration() {
    let mut r = rng(6);
    for t in 0..30 {
        let n = r.gen_range(1..=3);
        let l = r.gen_range(2..=3);
        let m = r.gen_range(0..=2);
        let game = random_dense_game(&mut r, n, l, m);
        let z = random_mixture(&mut r, n, l);
        let i = r.gen_range(0..n);
        let cce = t % 2 == 1;
        let phi_set = if cce { DeviationPolytope::cce(l) } else { DeviationPolytope::ce(l) };
        // Coefficient of φ(a, b): mass on recommendation a, payoff of playing b.
        let coeff = |f: &dyn Fn(&[usize]) -> f64| -> Vec<f64> {
            let mut out = vec![0.0; l * l];
            for a in all_profiles(n, l) {
                let p = z.probability(&a);
                for b in 0..l {
                    let mut dev = a.clone();
                    dev[i] = b;
                    out[a[i] * l + b] += p * f(&dev);
                }
            }
            out
        };
        let objective = coeff(&|a| game.utility(i, a).unwrap());
        let mut rows = Vec::new();
        for j in 0..game.n_costs(i) {
            rows.push((coeff(&|a| game.cost(i, j, a).unwrap()), Relation::Le, 0.0));
        }
        for a in 0..l {
            let mut row = vec![0.0; l * l];
            row[a * l..(a + 1) * l].fill(1.0);
            rows.push((row, Relation::Eq, 1.0));
        }
        for v in 0..l * l {
            let mut e = vec![0.0; l * l];
            e[v] = 1.0;
            rows.push((e, Relation::Ge, 0.0));
        }
        if cce {
            for a in 1..l {
                for b in 0..l {
                    let mut row = vec![0.0; l * l];
                    row[a * l + b] = 1.0;
                    row[b] = -1.0;
                    rows.push((row, Relation::Eq, 0.0));
                }
            }
        }
        let best = vertices(l * l, &rows, 1e-10)
            .iter()
            .map(|x| objective.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .reduce(f64::max);
        match (safe_best_response(&game, i, &z, &phi_set, 0.0), best) {
            (Ok(dev), Some(v)) => assert!((dev.value - v).abs() < 1e-9, "case {t}: {} vs {v}", dev.value),
            (Err(e), None) => assert!(e.is_promise_violation()),
            (got, want) => panic!("case {t}: {got:?} vs {want:?}"),
        }
    }
}

/// Nearest point by enumerating active sets and keeping the feasible KKT
/// point with nonnegative multipliers.
fn projection_oracle(v: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let dim = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for size in 0..=dim {
        for subset in subsets(rows.len(), size) {
            let gram: Vec<Vec<f64>> =
                subset.iter().map(|&a| subset.iter().map(|&b| dot(&rows[a].0, &rows[b].0)).collect()).collect();
            let rhs: Vec<f64> = subset.iter().map(|&a| dot(&rows[a].0, v) - rows[a].1).collect();
            let lambda = if size == 0 {
                Vec::new()
            } else if let Some(x) = gauss_solve(gram, rhs) {
                x
            } else {
                continue;
            };
            if lambda.iter().any(|&m| m < -1e-12) {
                continue;
            }
            let x: Vec<f64> = (0..dim)
                .map(|t| v[t] - subset.iter().zip(&lambda).map(|(&a, m)| m * rows[a].0[t]).sum::<f64>())
                .collect();
            if rows.iter().all(|(c, d)| dot(c, &x) <= d + 1e-10) {
                let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
                if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                    best = Some((dist, x));
                }
            }
        }
    }
    best.map(|b| b.1)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    (0..n)
        .flat_map(|first| {
            subsets(n, size - 1).into_iter().filter(move |s| s.first().map_or(true, |&f| f > first)).map(
                move |mut s| {
                    s.insert(0, first);
                    s
                },
            )
        })
        .collect()
}

#[test]
fn projection_matches_active_set_enumeration() {
    let mut r = rng(7);
    for t in 0..200 {
        let dim = r.gen_range(1..=3);
        let center: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        // Every row keeps `center` feasible, so the polytope is nonempty.
        let rows: Vec<(Vec<f64>, f64)> = (0..r.gen_range(1..=5))
            .map(|_| {
                let c: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
                let d = dot(&c, &center) + r.gen_range(0.0..0.5);
                (c, d)
            })
            .collect();
        let v: Vec<f64> = (0..dim).map(|_| r.gen_range(-3.0..3.0)).collect();
        let got = project(&v, &rows).unwrap();
        let want = projection_oracle(&v, &rows).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "case {t}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn qvi_gap_matches_oracle_on_reduced_and_dense_instances() {
    let mut r = rng(8);
    let mut checked = 0;
    while checked < 40 {
        let (game, eps, nu) = if checked % 2 == 0 {
            let g = random_instance(2, 2, 1, r.gen()).unwrap();
            let inst = reduce(&g, r.gen_range(0.3..1.0)).unwrap();
            (inst.game, inst.eps_prime, inst.nu)
        } else {
            let n = r.gen_range(1..=3);
            (random_dense_game(&mut r, n, 2, 2), 0.2, r.gen_range(0.1..0.9))
        };
        let qvi = build_qvi(&game, eps, nu).unwrap();
        let start: Vec<f64> = (0..qvi.n_players()).flat_map(|_| random_distribution(&mut r, qvi.n_actions())).collect();
        let Some(z) = restore_feasibility(&qvi, &start).unwrap() else { continue };
        let gap = qvi_gap(&qvi, &z).unwrap();
        let by_block: f64 = block_gaps(&qvi, &z).unwrap().iter().sum();
        let oracle = qvi_gap_oracle(&qvi, &z);
        assert!((gap - oracle).abs() < 1e-9, "{gap} vs oracle {oracle}");
        assert!((gap - by_block).abs() < 1e-9);
        assert!(gap <= 1e-12);
        checked += 1;
    }
}

#[test]
fn nash_solvers_agree_with_regret_enumeration() {
    for seed in 0..15 {
        let n = 2 + (seed as usize % 2);
        let g = random_instance(n, 2, n - 1, 900 + seed).unwrap();
        let exact = support_enumeration_nash(&g).unwrap().expect("polymatrix games have an equilibrium");
        assert!(verify_eps_nash(&g, &exact, 1e-9).unwrap().ok);
        let grid = brute_force_nash(&g, 20).unwrap();
        let bound = 3.0 * g.degree() as f64 * 2.0 / 20.0;
        assert!(verify_eps_nash(&g, &grid, bound).unwrap().ok);
        // Regret from pure-profile enumeration.
        for i in 0..n {
            let payoff_of = |a: usize| -> f64 {
                all_profiles(n, 2)
                    .iter()
                    .filter(|p| p[i] == a)
                    .map(|p| {
                        let w: f64 = (0..n).filter(|&q| q != i).map(|q| grid.marginal(q)[p[q]]).product();
                        w * g.payoff(i, p)
                    })
                    .sum()
            };
            let values: Vec<f64> = (0..2).map(payoff_of).collect();
            let current: f64 = values.iter().zip(grid.marginal(i)).map(|(v, x)| v * x).sum();
            let want = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - current;
            assert!((player_regret(&g, &grid, i).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn matching_pennies_equilibrium_is_uniform() {
    let g = PolyMatrixGame::matching_pennies();
    let x = support_enumeration_nash(&g).unwrap().unwrap();
    for i in 0..2 {
        assert!((x.marginal(i)[0] - 0.5).abs() < 1e-12);
    }
}
