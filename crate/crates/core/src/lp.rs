//! Two-phase revised simplex on dense data.
//!
//! Meant for small programs: every deviation LP, gap LP and CCE LP in this
//! crate has at most a few hundred columns. The basis is refactored from the
//! original data at every pivot, so rounding does not accumulate across
//! degenerate or badly scaled pivots. Pivoting follows Bland's
//! rule (lowest eligible index enters, ties in the ratio test leave by lowest
//! basic index), so runs are deterministic and cannot cycle. Every optimal
//! answer carries a certificate: primal residual, dual feasibility residual
//! and complementary slackness, each checked against `1e-9` scaled by the
//! largest input coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::tol;

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `optimize c^T x  s.t.  rows, lower <= x <= upper`. Bounds default to
/// `[0, +inf)`; either side may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    #[serde(with = "infinite_as_null")]
    pub bounds: Vec<(f64, f64)>,
}

/// JSON has no infinities; infinite bounds travel as `null`.
mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(bounds: &[(f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let finite = |v: f64| v.is_finite().then_some(v);
        let wire: Vec<(Option<f64>, Option<f64>)> = bounds.iter().map(|&(lo, hi)| (finite(lo), finite(hi))).collect();
        wire.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(f64, f64)>, D::Error> {
        let wire: Vec<(Option<f64>, Option<f64>)> = Vec::deserialize(d)?;
        Ok(wire.into_iter().map(|(lo, hi)| (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Sensitivity of the optimal value to each constraint's right-hand side.
    pub duals: Vec<f64>,
    pub certificate: Certificate,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { sense, objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram::new(Sense::Maximize, objective)
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        LinearProgram::new(Sense::Minimize, objective)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn bound(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite objective coefficient".into()));
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch(format!("constraint {r} has {} coefficients", c.coeffs.len())));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::InvalidParameter(format!("constraint {r} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!("bounds of variable {j}")));
            }
        }
        Ok(())
    }
}

/// `x_j = offset + Σ sign * y_col`.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    /// Rows over the structural columns plus slack columns, `rhs >= 0`.
    a: Matrix,
    b: Vec<f64>,
    /// Minimization costs over the same columns.
    c: Vec<f64>,
    /// For each original constraint: (standard row, sign applied to the row).
    row_of: Vec<(usize, f64)>,
    /// Standard rows needing an artificial variable.
    needs_artificial: Vec<bool>,
    /// Slack column of each standard row, if the row has one.
    slack_of: Vec<Option<usize>>,
    vars: Vec<VarMap>,
    scale: f64,
}

fn standard_form(lp: &LinearProgram) -> Option<StandardForm> {
    let mut vars = Vec::with_capacity(lp.n_vars());
    let mut ny = 0;
    // (coeffs over y, relation, rhs) before slack columns are appended.
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    let mut bound_rows = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            if hi.is_finite() {
                if hi < lo {
                    return None;
                }
                bound_rows.push((vec![(ny, 1.0)], Relation::Le, hi - lo));
            }
            vars.push(VarMap { offset: lo, cols: vec![(ny, 1.0)] });
            ny += 1;
        } else if hi.is_finite() {
            vars.push(VarMap { offset: hi, cols: vec![(ny, -1.0)] });
            ny += 1;
        } else {
            vars.push(VarMap { offset: 0.0, cols: vec![(ny, 1.0), (ny + 1, -1.0)] });
            ny += 2;
        }
    }
    for con in &lp.constraints {
        let mut coeffs = Vec::new();
        let mut rhs = con.rhs;
        for (j, &a) in con.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            rhs -= a * vars[j].offset;
            coeffs.extend(vars[j].cols.iter().map(|&(col, s)| (col, s * a)));
        }
        rows.push((coeffs, con.relation, rhs));
    }
    let n_original = rows.len();
    rows.extend(bound_rows);

    let mut signs = Vec::with_capacity(rows.len());
    for row in &mut rows {
        if row.2 < 0.0 {
            row.2 = -row.2;
            for e in &mut row.0 {
                e.1 = -e.1;
            }
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            signs.push(-1.0);
        } else {
            signs.push(1.0);
        }
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let ncols = ny + n_slack;
    let mut a = Matrix::zeros(rows.len(), ncols);
    let mut b = Vec::with_capacity(rows.len());
    let mut needs_artificial = Vec::with_capacity(rows.len());
    let mut slack_of = Vec::with_capacity(rows.len());
    let mut next_slack = ny;
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        for &(col, v) in coeffs {
            a[(i, col)] += v;
        }
        match rel {
            Relation::Le => {
                a[(i, next_slack)] = 1.0;
                slack_of.push(Some(next_slack));
                next_slack += 1;
                needs_artificial.push(false);
            }
            Relation::Ge => {
                a[(i, next_slack)] = -1.0;
                slack_of.push(Some(next_slack));
                next_slack += 1;
                needs_artificial.push(true);
            }
            Relation::Eq => {
                slack_of.push(None);
                needs_artificial.push(true);
            }
        }
        b.push(*rhs);
    }
    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; ncols];
    for (j, &cj) in lp.objective.iter().enumerate() {
        for &(col, s) in &vars[j].cols {
            c[col] += sense_sign * s * cj;
        }
    }
    let scale = 1.0 + a.max_abs().max(linalg::norm_inf(&b)).max(linalg::norm_inf(&c));
    Some(StandardForm {
        a,
        b,
        c,
        row_of: (0..n_original).map(|i| (i, signs[i])).collect(),
        needs_artificial,
        slack_of,
        vars,
        scale,
    })
}

/// Working problem of the revised simplex: standard-form rows (with
/// artificial columns appended) that survive redundancy removal.
struct Revised {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    /// Standard-form row of each working row.
    rows: Vec<usize>,
    basis: Vec<usize>,
    /// Columns that may never enter (artificials in phase 2).
    blocked: Vec<bool>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

const DUAL_TOL: f64 = 1e-10;

impl Revised {
    fn width(&self) -> usize {
        self.blocked.len()
    }

    fn basis_matrix(&self, transpose: bool) -> nalgebra::DMatrix<f64> {
        let m = self.a.len();
        if transpose {
            nalgebra::DMatrix::from_fn(m, m, |r, c| self.a[c][self.basis[r]])
        } else {
            nalgebra::DMatrix::from_fn(m, m, |r, c| self.a[r][self.basis[c]])
        }
    }

    fn solve(&self, transpose: bool, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.basis_matrix(transpose).lu();
        let x = lu
            .solve(&nalgebra::DVector::from_column_slice(rhs))
            .ok_or_else(|| Error::Numerical("singular basis".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite basis solve".into()));
        }
        Ok(x.iter().copied().collect())
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.a.iter().map(|row| row[j]).collect()
    }

    /// Basic values `B^{-1} b`.
    fn primal(&self) -> Result<Vec<f64>> {
        self.solve(false, &self.b)
    }

    /// Simplex multipliers `B^{-T} c_B`.
    fn duals(&self, c: &[f64]) -> Result<Vec<f64>> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| c[j]).collect();
        self.solve(true, &cb)
    }

    fn run(&mut self, c: &[f64], max_pivots: usize) -> Result<Phase> {
        let width = self.width();
        loop {
            if self.pivots > max_pivots {
                return Err(Error::Numerical(format!("simplex exceeded {max_pivots} pivots")));
            }
            let xb = self.primal()?;
            let y = self.duals(c)?;
            let mut in_basis = vec![false; width];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let entering = (0..width).find(|&j| {
                !self.blocked[j]
                    && !in_basis[j]
                    && c[j] - self.a.iter().zip(&y).map(|(row, yi)| row[j] * yi).sum::<f64>() < -DUAL_TOL
            });
            let Some(col) = entering else {
                return Ok(Phase::Optimal);
            };
            let w = self.solve(false, &self.column(col))?;
            let mut leave: Option<(usize, f64)> = None;
            for (i, &wi) in w.iter().enumerate() {
                if wi > PIVOT_EPS {
                    let ratio = xb[i].max(0.0) / wi;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                None => return Ok(Phase::Unbounded),
                Some((row, _)) => {
                    self.basis[row] = col;
                    self.pivots += 1;
                }
            }
        }
    }

    /// Replaces basic artificials by structural columns; rows where that is
    /// impossible are linear combinations of the others and are dropped.
    fn drive_out_artificials(&mut self, first_artificial: usize) -> Result<()> {
        let mut r = 0;
        while r < self.basis.len() {
            if self.basis[r] < first_artificial {
                r += 1;
                continue;
            }
            let mut unit = vec![0.0; self.a.len()];
            unit[r] = 1.0;
            let u = self.solve(true, &unit)?;
            let best = (0..first_artificial)
                .filter(|j| !self.basis.contains(j))
                .map(|j| (j, self.a.iter().zip(&u).map(|(row, ui)| row[j] * ui).sum::<f64>().abs()))
                .filter(|&(_, v)| v > 1e-9)
                .max_by(|x, y| x.1.total_cmp(&y.1));
            match best {
                Some((j, _)) => {
                    self.basis[r] = j;
                    self.pivots += 1;
                    r += 1;
                }
                None => {
                    self.a.remove(r);
                    self.b.remove(r);
                    self.rows.remove(r);
                    self.basis.remove(r);
                }
            }
        }
        Ok(())
    }
}

/// Solves `lp` to optimality or reports infeasibility/unboundedness.
/// Returns `Err(Numerical)` when the pivot budget runs out or the final
/// KKT certificate fails.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let Some(sf) = standard_form(lp) else {
        return Ok(LpOutcome::Infeasible);
    };
    let m = sf.a.rows();
    let ncols = sf.a.cols();
    let n_art = sf.needs_artificial.iter().filter(|&&x| x).count();
    let width = ncols + n_art;

    let mut a = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = ncols;
    for i in 0..m {
        let mut row = vec![0.0; width];
        row[..ncols].copy_from_slice(sf.a.row(i));
        if sf.needs_artificial[i] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(sf.slack_of[i].expect("<= rows carry a slack"));
        }
        a.push(row);
    }
    let mut rev = Revised { a, b: sf.b.clone(), rows: (0..m).collect(), basis, blocked: vec![false; width], pivots: 0 };
    let max_pivots = 50 * (m + width) + 1000;
    let feas_tol = tol::LP * sf.scale;

    if n_art > 0 {
        let mut c1 = vec![0.0; width];
        c1[ncols..].fill(1.0);
        rev.run(&c1, max_pivots)?;
        let xb = rev.primal()?;
        let infeasibility: f64 = rev.basis.iter().zip(&xb).filter(|(&j, _)| j >= ncols).map(|(_, v)| v.max(0.0)).sum();
        if infeasibility > feas_tol {
            return Ok(LpOutcome::Infeasible);
        }
        rev.drive_out_artificials(ncols)?;
        rev.blocked[ncols..].fill(true);
    }

    let mut c2 = sf.c.clone();
    c2.resize(width, 0.0);
    if !rev.basis.is_empty() {
        if let Phase::Unbounded = rev.run(&c2, max_pivots)? {
            return Ok(LpOutcome::Unbounded);
        }
    } else if (0..ncols).any(|j| c2[j] < -DUAL_TOL) {
        // No rows left: every column with negative cost is a free ray.
        return Ok(LpOutcome::Unbounded);
    }

    let mut y = vec![0.0; ncols];
    let mut row_duals = vec![0.0; m];
    if !rev.basis.is_empty() {
        for (&j, v) in rev.basis.iter().zip(rev.primal()?) {
            y[j] = v.max(0.0);
        }
        for (&r, v) in rev.rows.iter().zip(rev.duals(&c2)?) {
            row_duals[r] = v;
        }
    }

    let x: Vec<f64> =
        sf.vars.iter().map(|v| v.offset + v.cols.iter().map(|&(col, s)| s * y[col]).sum::<f64>()).collect();
    let value = linalg::dot(&lp.objective, &x);
    let certificate = certify(&sf, &y, &row_duals)?;
    let sense_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let duals = sf.row_of.iter().map(|&(row, sign)| sense_sign * sign * row_duals[row]).collect();
    Ok(LpOutcome::Optimal(LpSolution { x, value, duals, certificate, pivots: rev.pivots }))
}

fn certify(sf: &StandardForm, y: &[f64], row_duals: &[f64]) -> Result<Certificate> {
    let m = sf.a.rows();
    let ncols = sf.a.cols();
    let mut primal: f64 = 0.0;
    for i in 0..m {
        let lhs = linalg::dot(sf.a.row(i), y);
        primal = primal.max((lhs - sf.b[i]).abs());
    }
    primal = y.iter().fold(primal, |p, &v| p.max(-v));
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for j in 0..ncols {
        let reduced = sf.c[j] - (0..m).map(|i| row_duals[i] * sf.a[(i, j)]).sum::<f64>();
        dual = dual.max(-reduced);
        comp = comp.max((reduced * y[j]).abs());
    }
    let certificate = Certificate { primal_residual: primal, dual_residual: dual.max(0.0), complementarity: comp };
    let limit = tol::LP * sf.scale;
    if primal > limit || dual > limit || comp > limit {
        return Err(Error::Numerical(format!(
            "optimality certificate failed: primal {primal:.2e}, dual {dual:.2e}, complementarity {comp:.2e}"
        )));
    }
    Ok(certificate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> LpSolution {
        lp_solve(lp).unwrap().optimal().expect("optimal")
    }

    #[test]
    fn single_variable_upper_bound() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 1.0);
        let s = optimal(&lp);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_constraints_infeasible() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 0.0).constrain(vec![1.0], Relation::Ge, 1.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Infeasible);
        let mut crossed = LinearProgram::maximize(vec![1.0]);
        crossed.bound(0, 2.0, 1.0);
        assert_eq!(lp_solve(&crossed).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0).constrain(vec![0.0, 2.0], Relation::Le, 12.0).constrain(
            vec![3.0, 2.0],
            Relation::Le,
            18.0,
        );
        let s = optimal(&lp);
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        // Shadow prices of the textbook example.
        assert!((s.duals[0]).abs() < 1e-9);
        assert!((s.duals[1] - 1.5).abs() < 1e-9);
        assert!((s.duals[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equalities_free_variables_and_redundant_rows() {
        // min x + y with x - y = 1 (twice), x free, y in [-inf, 3]
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Eq, 1.0).constrain(vec![2.0, -2.0], Relation::Eq, 2.0).constrain(
            vec![1.0, 0.0],
            Relation::Ge,
            -5.0,
        );
        lp.bound(0, f64::NEG_INFINITY, f64::INFINITY).bound(1, f64::NEG_INFINITY, 3.0);
        let s = optimal(&lp);
        assert!((s.x[0] + 5.0).abs() < 1e-9 && (s.x[1] + 6.0).abs() < 1e-9);
        assert!((s.value + 11.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = optimal(&lp);
        assert!((s.value + 0.05).abs() < 1e-9);
    }

    #[test]
    fn json_keeps_infinite_bounds() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.bound(1, f64::NEG_INFINITY, 2.0);
        let back: LinearProgram = serde_json::from_str(&serde_json::to_string(&lp).unwrap()).unwrap();
        assert_eq!(back, lp);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0, 2.0], Relation::Le, 1.0);
        assert!(matches!(lp_solve(&lp), Err(Error::DimensionMismatch(_))));
    }
}
