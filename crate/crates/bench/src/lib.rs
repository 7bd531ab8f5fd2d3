//! Seeded fixtures shared by the benchmarks.

use phieq::polymatrix::{random_instance, PolyMatrixGame};
use phieq::qvi::{build_qvi, QviInstance};
use phieq::reduction::{reduce, ConstrainedInstance};
use phieq::{LinearProgram, ProductStrategy, Relation};

pub fn polymatrix(n: usize, k: usize, seed: u64) -> PolyMatrixGame {
    random_instance(n, k, n - 1, seed).expect("valid fixture")
}

pub fn reduced(n: usize, k: usize, seed: u64) -> ConstrainedInstance {
    reduce(&polymatrix(n, k, seed), 0.8).expect("valid fixture")
}

pub fn reduced_qvi(n: usize, k: usize, seed: u64) -> QviInstance {
    let inst = reduced(n, k, seed);
    build_qvi(&inst.game, inst.eps_prime, inst.nu).expect("valid fixture")
}

/// Product strategy with marginals tilted away from uniform, so no
/// deviation LP is degenerate at the start.
pub fn tilted(n: usize, k: usize) -> ProductStrategy {
    let marginals = (0..n)
        .map(|i| {
            let raw: Vec<f64> = (0..k).map(|a| 1.0 + ((i + 2 * a) % k) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    ProductStrategy::new(marginals).expect("valid fixture")
}

/// `max c·x` over a box cut by `m` dense rows, all feasible at the center.
pub fn dense_lp(n: usize, m: usize) -> LinearProgram {
    let coeff = |r: usize, c: usize| (((r * 7 + c * 13) % 11) as f64 - 5.0) / 5.0;
    let mut lp = LinearProgram::maximize((0..n).map(|c| coeff(n, c)).collect());
    for v in 0..n {
        lp.bound(v, 0.0, 1.0);
    }
    for r in 0..m {
        let row: Vec<f64> = (0..n).map(|c| coeff(r, c)).collect();
        let at_center: f64 = row.iter().sum::<f64>() * 0.5;
        lp.constrain(row, Relation::Le, at_center + 0.25);
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use phieq::LpOutcome;

    #[test]
    fn fixtures_are_well_formed() {
        assert!(matches!(phieq::lp_solve(&dense_lp(16, 24)).unwrap(), LpOutcome::Optimal(_)));
        let p = tilted(3, 4);
        for i in 0..3 {
            assert!((p.marginal(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(reduced_qvi(2, 2, 5).dim(), 8);
    }
}
