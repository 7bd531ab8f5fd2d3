//! Euclidean projection onto a small polytope `{x : c_k^T x ≤ d_k}` with the
//! Goldfarb–Idnani dual active-set method (identity Hessian).

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const ZERO: f64 = 1e-14;

/// `argmin ‖x − v‖²` subject to `rows`. Fails with `PromiseViolation` when the
/// polytope is empty.
pub fn project(v: &[f64], rows: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    let dim = v.len();
    let scale = 1.0 + rows.iter().map(|(c, d)| linalg::norm_inf(c).max(d.abs())).fold(0.0, f64::max);
    let feas_tol = 1e-12 * scale;
    let mut x = v.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let slack = |x: &[f64], k: usize| rows[k].1 - linalg::dot(&rows[k].0, x);
    let budget = 50 * (rows.len() + dim) + 100;
    let mut steps = 0;
    loop {
        let candidate = (0..rows.len())
            .filter(|k| !active.contains(k))
            .map(|k| (k, slack(&x, k)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, s)) = candidate else {
            return Ok(x);
        };
        if s >= -feas_tol {
            return Ok(x);
        }
        // Normal of the violated constraint in ">=" form.
        let np: Vec<f64> = rows[p].0.iter().map(|c| -c).collect();
        let mut up = 0.0;
        loop {
            steps += 1;
            if steps > budget {
                return Err(Error::Numerical("projection exceeded its step budget".into()));
            }
            let (dir, r) = if active.is_empty() {
                (np.clone(), Vec::new())
            } else {
                let q = active.len();
                let normal = |j: usize, t: usize| -rows[active[j]].0[t];
                let gram = Matrix::from_fn(q, q, |a, b| (0..dim).map(|t| normal(a, t) * normal(b, t)).sum());
                let rhs: Vec<f64> = (0..q).map(|a| (0..dim).map(|t| normal(a, t) * np[t]).sum()).collect();
                let r = linalg::solve(&gram, &rhs)
                    .ok_or_else(|| Error::Numerical("dependent active constraints in projection".into()))?;
                let dir: Vec<f64> =
                    (0..dim).map(|t| np[t] - (0..q).map(|a| normal(a, t) * r[a]).sum::<f64>()).collect();
                (dir, r)
            };
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > ZERO {
                    let ratio = mult[j] / rj;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let dd = linalg::dot(&dir, &dir);
            let t2 = if dd > ZERO * ZERO * (1.0 + linalg::dot(&np, &np)) {
                -slack(&x, p) / linalg::dot(&dir, &np)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::PromiseViolation("projection onto an empty polytope".into()));
            }
            for (m, rj) in mult.iter_mut().zip(&r) {
                *m -= t * rj;
            }
            up += t;
            if t2.is_finite() {
                for (xi, di) in x.iter_mut().zip(&dir) {
                    *xi += t * di;
                }
            }
            if t2 <= t1 {
                active.push(p);
                mult.push(up);
                break;
            }
            let j = drop.expect("partial step has a blocking constraint");
            active.remove(j);
            mult.remove(j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_rows(l: usize) -> Vec<(Vec<f64>, f64)> {
        let mut rows = vec![(vec![1.0; l], 1.0), (vec![-1.0; l], -1.0)];
        for k in 0..l {
            let mut e = vec![0.0; l];
            e[k] = -1.0;
            rows.push((e, 0.0));
        }
        rows
    }

    #[test]
    fn inside_point_is_fixed() {
        let x = project(&[0.2, 0.3, 0.5], &simplex_rows(3)).unwrap();
        assert_eq!(x, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn simplex_projection_matches_sorting_formula() {
        let v = [0.9, 0.6, -0.4];
        let x = project(&v, &simplex_rows(3)).unwrap();
        // Threshold tau = (0.9 + 0.6 - 1) / 2 = 0.25.
        let expected = [0.65, 0.35, 0.0];
        for (a, b) in x.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn empty_polytope_detected() {
        let rows = vec![(vec![1.0], 0.0), (vec![-1.0], -1.0)];
        assert!(matches!(project(&[0.5], &rows), Err(Error::PromiseViolation(_))));
    }
}
