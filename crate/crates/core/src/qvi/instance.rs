use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{FactoredGame, ProductStrategy};
use crate::linalg::{self, Matrix};
use crate::lp::{lp_solve, LinearProgram, LpOutcome, Relation};
use crate::tol;

/// Tolerance for `z ∈ Q_{ν'}(z)` and for the renormalization band.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// QVI built from a game with coupled costs. Variables are the flattened
/// blocks `z = [z^1 | … | z^n]`, each `z^i ∈ [0,1]^ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QviInstance {
    game: FactoredGame,
    eps: f64,
    nu: f64,
    nu_prime: f64,
    eps_prime: f64,
    /// Rows of every `D_i`; players with fewer costs are padded with zeros.
    m: usize,
    costs_dropped: bool,
    lipschitz_g: f64,
    lipschitz_l: f64,
}

/// One block's feasible set `{y ∈ [0,1]^ℓ : c_r^T y ≤ d_r}`, box included.
pub type BlockRows = Vec<(Vec<f64>, f64)>;

/// `ν' = min(ε/2, ν²/(2n))` and `ε' = (ε/2)(1 − nν')`.
pub fn qvi_parameters(n_players: usize, eps: f64, nu: f64) -> (f64, f64) {
    let n = n_players as f64;
    let nu_prime = (eps / 2.0).min(nu * nu / (2.0 * n));
    (nu_prime, (eps / 2.0) * (1.0 - n * nu_prime))
}

pub fn build_qvi(game: &FactoredGame, eps: f64, nu: f64) -> Result<QviInstance> {
    if !(eps > 0.0 && eps.is_finite()) || !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("need eps > 0 and nu > 0, got eps={eps}, nu={nu}")));
    }
    let n = game.n_players();
    let l = game.n_actions();
    let costs_dropped = nu >= 1.0;
    let game = if costs_dropped { game.without_costs() } else { game.clone() };
    let m = game.max_costs();
    let (nu_prime, eps_prime) = qvi_parameters(n, eps, nu);
    let (nf, lf) = (n as f64, l as f64);
    let lipschitz_g = nf * lf.powi(n as i32 + 1) * game.utility_bound().max(1.0);
    let lipschitz_l = 2.0 * lf.powi(n as i32 + 2) * nf * nf * (m as f64).sqrt();
    Ok(QviInstance { game, eps, nu, nu_prime, eps_prime, m, costs_dropped, lipschitz_g, lipschitz_l })
}

impl QviInstance {
    pub fn game(&self) -> &FactoredGame {
        &self.game
    }

    pub fn dim(&self) -> usize {
        self.game.n_players() * self.game.n_actions()
    }

    pub fn n_players(&self) -> usize {
        self.game.n_players()
    }

    pub fn n_actions(&self) -> usize {
        self.game.n_actions()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn nu_prime(&self) -> f64 {
        self.nu_prime
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    pub fn costs_dropped(&self) -> bool {
        self.costs_dropped
    }

    /// Declared Lipschitz constant of `F`: `nℓ^{n+1}`, times the utility
    /// bound when payoffs exceed one in magnitude.
    pub fn lipschitz_g(&self) -> f64 {
        self.lipschitz_g
    }

    /// Declared Lipschitz constant of `z̃ ↦ A(z̃)z`: `2ℓ^{n+2}n²√m`.
    pub fn lipschitz_l(&self) -> f64 {
        self.lipschitz_l
    }

    pub(crate) fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for dimension {}", z.len(), self.dim())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite QVI point".into()));
        }
        Ok(())
    }

    /// `D_i(z̃)`: row `j` is `c_i^j(h(z̃))`.
    pub fn d_block(&self, zt: &[f64], i: usize) -> Result<Matrix> {
        self.check_point(zt)?;
        let blocks = unflatten(zt, self.n_actions())?;
        self.d_block_of(&blocks, i)
    }

    fn d_block_of(&self, blocks: &[Vec<f64>], i: usize) -> Result<Matrix> {
        let l = self.n_actions();
        let mut d = Matrix::zeros(self.m, l);
        for j in 0..self.game.n_costs(i) {
            let c = self.game.cost_conditional(i, j, blocks)?;
            for (b, v) in c.into_iter().enumerate() {
                d[(j, b)] = v;
            }
        }
        Ok(d)
    }

    /// Constraint rows of block `i` of `Q_{ν'}(z̃)`.
    pub fn block_rows(&self, zt: &[f64], i: usize) -> Result<BlockRows> {
        self.check_point(zt)?;
        let blocks = unflatten(zt, self.n_actions())?;
        self.block_rows_of(&blocks, i)
    }

    pub(crate) fn block_rows_of(&self, blocks: &[Vec<f64>], i: usize) -> Result<BlockRows> {
        let l = self.n_actions();
        let relax = self.nu_prime;
        let mut rows: BlockRows = Vec::with_capacity(self.m + 2 + 2 * l);
        let d = self.d_block_of(blocks, i)?;
        for j in 0..self.game.n_costs(i) {
            rows.push((d.row(j).to_vec(), relax));
        }
        rows.push((vec![1.0; l], 1.0 + relax));
        rows.push((vec![-1.0; l], -1.0 + relax));
        for k in 0..l {
            let mut lo = vec![0.0; l];
            lo[k] = -1.0;
            rows.push((lo, 0.0));
            let mut hi = vec![0.0; l];
            hi[k] = 1.0;
            rows.push((hi, 1.0));
        }
        Ok(rows)
    }

    /// Largest violation of `z ∈ Q_{ν'}(z)`, box included.
    pub fn self_violation(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        let l = self.n_actions();
        let blocks = unflatten(z, l)?;
        let mut worst: f64 = 0.0;
        for i in 0..self.n_players() {
            for (c, d) in self.block_rows_of(&blocks, i)? {
                worst = worst.max(linalg::dot(&c, &blocks[i]) - d);
            }
        }
        Ok(worst)
    }
}

/// Concatenates the marginals of `p`.
pub fn flatten(p: &ProductStrategy) -> Vec<f64> {
    p.marginals().iter().flatten().copied().collect()
}

/// Splits `z` into blocks of length `n_actions`. Blocks need not sum to one.
pub fn unflatten(z: &[f64], n_actions: usize) -> Result<Vec<Vec<f64>>> {
    if n_actions == 0 || z.len() % n_actions != 0 {
        return Err(Error::DimensionMismatch(format!("length {} is not a multiple of {n_actions}", z.len())));
    }
    Ok(z.chunks(n_actions).map(<[f64]>::to_vec).collect())
}

/// `F(z)`: block `i` is `−∇_{p_i} u_i` evaluated at the raw blocks of `z`.
pub fn eval_f(inst: &QviInstance, z: &[f64]) -> Result<Vec<f64>> {
    inst.check_point(z)?;
    let blocks = unflatten(z, inst.n_actions())?;
    let mut out = Vec::with_capacity(z.len());
    for i in 0..inst.n_players() {
        out.extend(inst.game.utility_conditional(i, &blocks)?.into_iter().map(|v| -v));
    }
    Ok(out)
}

/// `(A(z̃), b)`: block diagonal with blocks `[D_i(z̃); 1^T; −1^T]` and
/// `b_i = [0_m; 1; −1]`. The relaxation `ν'` is not included in `b`.
pub fn eval_correspondence(inst: &QviInstance, zt: &[f64]) -> Result<(Matrix, Vec<f64>)> {
    inst.check_point(zt)?;
    let n = inst.n_players();
    let l = inst.n_actions();
    let m = inst.m;
    let blocks = unflatten(zt, l)?;
    let mut a = Matrix::zeros(n * (m + 2), n * l);
    let mut b = vec![0.0; n * (m + 2)];
    for i in 0..n {
        let d = inst.d_block_of(&blocks, i)?;
        let r0 = i * (m + 2);
        for j in 0..m {
            for k in 0..l {
                a[(r0 + j, i * l + k)] = d[(j, k)];
            }
        }
        for k in 0..l {
            a[(r0 + m, i * l + k)] = 1.0;
            a[(r0 + m + 1, i * l + k)] = -1.0;
        }
        b[r0 + m] = 1.0;
        b[r0 + m + 1] = -1.0;
    }
    Ok((a, b))
}

fn require_self_feasible(inst: &QviInstance, z: &[f64]) -> Result<()> {
    let violation = inst.self_violation(z)?;
    if violation > FEASIBILITY_TOL {
        return Err(Error::InvalidStrategy(format!("z violates its own correspondence by {violation:.3e}")));
    }
    Ok(())
}

/// `min_{z̃ ∈ Q_{ν'}(z)} F(z)^T (z̃ − z)`, solved as a single LP. A solution
/// is certified when this is at least `−ε'`.
pub fn qvi_gap(inst: &QviInstance, z: &[f64]) -> Result<f64> {
    require_self_feasible(inst, z)?;
    let f = eval_f(inst, z)?;
    let (a, b) = eval_correspondence(inst, z)?;
    let mut lp = LinearProgram::minimize(f.clone());
    let l = inst.n_actions();
    let m = inst.m;
    for r in 0..a.rows() {
        // Padded zero rows of players with fewer costs carry no information.
        let (player, local) = (r / (m + 2), r % (m + 2));
        if local < m && local >= inst.game.n_costs(player) {
            continue;
        }
        lp.constrain(a.row(r).to_vec(), Relation::Le, b[r] + inst.nu_prime);
    }
    for v in 0..inst.n_players() * l {
        lp.bound(v, 0.0, 1.0);
    }
    match lp_solve(&lp)? {
        LpOutcome::Optimal(sol) => Ok(sol.value - linalg::dot(&f, z)),
        LpOutcome::Infeasible => Err(Error::PromiseViolation("the correspondence is empty at z".into())),
        LpOutcome::Unbounded => Err(Error::Numerical("gap LP reported unbounded over a box".into())),
    }
}

/// Per-block gap terms, solved as one small LP per player. They sum to
/// [`qvi_gap`].
pub fn block_gaps(inst: &QviInstance, z: &[f64]) -> Result<Vec<f64>> {
    inst.check_point(z)?;
    let l = inst.n_actions();
    let f = eval_f(inst, z)?;
    let blocks = unflatten(z, l)?;
    (0..inst.n_players())
        .map(|i| {
            let fi = &f[i * l..(i + 1) * l];
            let mut lp = LinearProgram::minimize(fi.to_vec());
            for (c, d) in inst.block_rows_of(&blocks, i)? {
                lp.constrain(c, Relation::Le, d);
            }
            match lp_solve(&lp)? {
                LpOutcome::Optimal(sol) => Ok(sol.value - linalg::dot(fi, &blocks[i])),
                LpOutcome::Infeasible => {
                    Err(Error::PromiseViolation(format!("block {i} of the correspondence is empty")))
                }
                LpOutcome::Unbounded => Err(Error::Numerical("block gap LP reported unbounded".into())),
            }
        })
        .collect()
}

/// `p_i = z^i / ‖z^i‖₁`, accepted only when every block norm lies in
/// `[1 − ν', 1 + ν']` (up to `1e-9`).
pub fn renormalize(z: &[f64], n_actions: usize, nu_prime: f64) -> Result<ProductStrategy> {
    let blocks = unflatten(z, n_actions)?;
    let mut marginals = Vec::with_capacity(blocks.len());
    for (i, block) in blocks.into_iter().enumerate() {
        if block.iter().any(|v| *v < -FEASIBILITY_TOL || !v.is_finite()) {
            return Err(Error::NormOutOfBand(format!("block {i} has a negative entry")));
        }
        let norm: f64 = block.iter().map(|v| v.max(0.0)).sum();
        if (norm - 1.0).abs() > nu_prime + FEASIBILITY_TOL {
            return Err(Error::NormOutOfBand(format!(
                "block {i} has norm {norm:.12}, outside [1 - {nu_prime}, 1 + {nu_prime}]"
            )));
        }
        marginals.push(block.into_iter().map(|v| v.max(0.0) / norm).collect());
    }
    let p = ProductStrategy::new(marginals)?;
    debug_assert!(p.marginals().iter().all(|m| linalg::is_distribution(m, tol::ALGEBRAIC)));
    Ok(p)
}
