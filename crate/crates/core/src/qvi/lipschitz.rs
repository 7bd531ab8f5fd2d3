//! Empirical Lipschitz ratios of the QVI operator and correspondence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::{eval_correspondence, eval_f, QviInstance};
use crate::error::Result;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub samples: usize,
    /// Largest observed `‖F(z) − F(z')‖ / ‖z − z'‖`.
    pub empirical_g: f64,
    /// Largest observed `‖(A(z̃) − A(z̃'))z‖ / ‖z̃ − z̃'‖`.
    pub empirical_l: f64,
    pub declared_g: f64,
    pub declared_l: f64,
}

impl LipschitzReport {
    pub fn within_bounds(&self) -> bool {
        self.empirical_g <= self.declared_g && self.empirical_l <= self.declared_l
    }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen::<f64>()).collect()
}

/// Pair of points in `[0,1]^d`. Odd samples are close pairs, which probe
/// local slopes rather than averaged ones.
fn random_pair(rng: &mut ChaCha8Rng, d: usize, close: bool) -> (Vec<f64>, Vec<f64>) {
    let a = random_point(rng, d);
    let b = if close {
        let radius = 10f64.powf(-rng.gen_range(1.0..6.0));
        a.iter().map(|v| (v + radius * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0)).collect()
    } else {
        random_point(rng, d)
    };
    (a, b)
}

pub fn lipschitz_probe(inst: &QviInstance, n_samples: usize, seed: u64) -> Result<LipschitzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = inst.dim();
    let mut empirical_g: f64 = 0.0;
    let mut empirical_l: f64 = 0.0;
    for s in 0..n_samples {
        let (z, z2) = random_pair(&mut rng, d, s % 2 == 1);
        let dist = linalg::norm2(&linalg::sub(&z, &z2));
        if dist > 0.0 {
            let df = linalg::sub(&eval_f(inst, &z)?, &eval_f(inst, &z2)?);
            empirical_g = empirical_g.max(linalg::norm2(&df) / dist);
            let x = random_point(&mut rng, d);
            let (a1, _) = eval_correspondence(inst, &z)?;
            let (a2, _) = eval_correspondence(inst, &z2)?;
            let diff = linalg::sub(&a1.mul_vec(&x), &a2.mul_vec(&x));
            empirical_l = empirical_l.max(linalg::norm2(&diff) / dist);
        }
    }
    Ok(LipschitzReport {
        samples: n_samples,
        empirical_g,
        empirical_l,
        declared_g: inst.lipschitz_g(),
        declared_l: inst.lipschitz_l(),
    })
}

/// Matrix family `M(z̃) ∈ ℝ^{rows×cols}`, `z̃ ∈ ℝ^K`, with entries
/// `C·sin(w·z̃ + b)` and `‖w‖_∞ ≤ 1`, so every partial derivative is at most
/// `C` in magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SineFamily {
    pub c: f64,
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    weights: Vec<Vec<f64>>,
    phases: Vec<f64>,
}

impl SineFamily {
    pub fn random(c: f64, rows: usize, cols: usize, k: usize, rng: &mut impl Rng) -> Self {
        let weights = (0..rows * cols).map(|_| (0..k).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let phases = (0..rows * cols).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        SineFamily { c, rows, cols, k, weights, phases }
    }

    pub fn eval(&self, zt: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |r, c| {
            let e = r * self.cols + c;
            self.c * (linalg::dot(&self.weights[e], zt) + self.phases[e]).sin()
        })
    }

    /// `C·m·√(nK)` for an `m×n` family over `ℝ^K`.
    pub fn bound(&self) -> f64 {
        self.c * self.rows as f64 * ((self.cols * self.k) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvtReport {
    pub samples: usize,
    pub empirical: f64,
    pub bound: f64,
}

/// Largest `‖(M(z̃) − M(z̃'))z‖ / ‖z̃ − z̃'‖` over random `z ∈ [0,1]^cols`.
pub fn mvt_probe(family: &SineFamily, n_samples: usize, seed: u64) -> MvtReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut empirical: f64 = 0.0;
    for s in 0..n_samples {
        let (a, b) = random_pair(&mut rng, family.k, s % 2 == 1);
        let dist = linalg::norm2(&linalg::sub(&a, &b));
        if dist == 0.0 {
            continue;
        }
        let x = random_point(&mut rng, family.cols);
        let diff = linalg::sub(&family.eval(&a).mul_vec(&x), &family.eval(&b).mul_vec(&x));
        empirical = empirical.max(linalg::norm2(&diff) / dist);
    }
    MvtReport { samples: n_samples, empirical, bound: family.bound() }
}
