use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::lp::Relation;
use crate::tol;

use super::MixtureStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationKind {
    Ce,
    Cce,
    Custom,
}

/// A linear constraint over the `ℓ²` entries of a deviation matrix, read
/// row-major (`coeffs[a * ℓ + b]` multiplies `φ(a, b)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Polytope of right-stochastic `ℓ×ℓ` matrices. Row-stochasticity and
/// nonnegativity are implicit; `rows` holds the additional constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationPolytope {
    kind: DeviationKind,
    actions: usize,
    #[serde(default)]
    rows: Vec<DeviationRow>,
}

impl DeviationPolytope {
    /// All row-stochastic matrices.
    pub fn ce(n_actions: usize) -> Self {
        DeviationPolytope { kind: DeviationKind::Ce, actions: n_actions, rows: Vec::new() }
    }

    /// Row-stochastic matrices with all rows equal.
    pub fn cce(n_actions: usize) -> Self {
        let l = n_actions;
        let mut rows = Vec::new();
        for a in 1..l {
            for b in 0..l {
                let mut coeffs = vec![0.0; l * l];
                coeffs[a * l + b] = 1.0;
                coeffs[b] = -1.0;
                rows.push(DeviationRow { coeffs, relation: Relation::Eq, rhs: 0.0 });
            }
        }
        DeviationPolytope { kind: DeviationKind::Cce, actions: l, rows }
    }

    pub fn custom(n_actions: usize, rows: Vec<DeviationRow>) -> Result<Self> {
        let polytope = DeviationPolytope { kind: DeviationKind::Custom, actions: n_actions, rows };
        polytope.validate()?;
        Ok(polytope)
    }

    /// Checks a deserialized polytope; canned kinds are rebuilt from their tag.
    pub fn validate(&self) -> Result<()> {
        let len = self.actions * self.actions;
        if self.actions == 0 {
            return Err(Error::InvalidParameter("deviation polytope over zero actions".into()));
        }
        if self.rows.iter().any(|r| r.coeffs.len() != len || !r.rhs.is_finite()) {
            return Err(Error::DimensionMismatch(format!("deviation rows must have {len} coefficients")));
        }
        Ok(())
    }

    /// Canonical form: CE/CCE tags regenerate their constraint rows.
    pub fn normalized(self) -> Result<Self> {
        self.validate()?;
        Ok(match self.kind {
            DeviationKind::Ce => DeviationPolytope::ce(self.actions),
            DeviationKind::Cce => DeviationPolytope::cce(self.actions),
            DeviationKind::Custom => self,
        })
    }

    pub fn kind(&self) -> DeviationKind {
        self.kind
    }

    pub fn n_actions(&self) -> usize {
        self.actions
    }

    pub fn rows(&self) -> &[DeviationRow] {
        &self.rows
    }

    pub fn contains(&self, phi: &Matrix, tol: f64) -> bool {
        if phi.rows() != self.actions || phi.cols() != self.actions || check_stochastic(phi, tol).is_err() {
            return false;
        }
        self.rows.iter().all(|r| {
            let lhs = dot(&r.coeffs, phi.as_slice());
            match r.relation {
                Relation::Le => lhs <= r.rhs + tol,
                Relation::Ge => lhs >= r.rhs - tol,
                Relation::Eq => (lhs - r.rhs).abs() <= tol,
            }
        })
    }
}

/// Fails unless `phi` is square with nonnegative rows summing to one.
pub fn check_stochastic(phi: &Matrix, tol: f64) -> Result<()> {
    if !phi.is_square() {
        return Err(Error::NonStochastic(format!("{}x{} matrix", phi.rows(), phi.cols())));
    }
    for r in 0..phi.rows() {
        let row = phi.row(r);
        if row.iter().any(|v| !v.is_finite() || *v < -tol) {
            return Err(Error::NonStochastic(format!("row {r} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::NonStochastic(format!("row {r} sums to {s}")));
        }
    }
    Ok(())
}

/// `φ ∘_i z`: player `i` draws its recommendation from `z` and then plays
/// `φ(rec, ·)`. On a mixture of products this maps each component's `x_i` to
/// `φ^T x_i`. `phi` is clipped to the simplex row-wise before use, so the
/// result is a valid mixture whenever `phi` passes the `1e-10` check.
pub fn apply_deviation(phi: &Matrix, i: usize, z: &MixtureStrategy) -> Result<MixtureStrategy> {
    check_stochastic(phi, tol::STOCHASTIC)?;
    if i >= z.n_players() {
        return Err(Error::IndexOutOfRange(format!("player {i} of {}", z.n_players())));
    }
    if phi.rows() != z.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} deviation for {} actions",
            phi.rows(),
            phi.cols(),
            z.n_actions()
        )));
    }
    let clean = Matrix::from_fn(phi.rows(), phi.cols(), |r, c| {
        let row = phi.row(r);
        let s: f64 = row.iter().map(|v| v.max(0.0)).sum();
        row[c].max(0.0) / s
    });
    z.map_marginal(i, |x| clean.tr_mul_vec(x))
}

/// Constant-row matrix whose rows all equal `φ^T p`. Applied to a product
/// strategy whose player marginal is `p`, it induces the same distribution
/// as `φ`.
pub fn constant_row_replica(phi: &Matrix, marginal: &[f64]) -> Matrix {
    Matrix::constant_rows(phi.rows(), &phi.tr_mul_vec(marginal))
}
