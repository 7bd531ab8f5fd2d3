//! Desk-scale QVI solver.
//!
//! Extragradient iteration `y = Π_{Q(z)}(z − ηF(z))`, `z ← Π_{Q(z)}(z − ηF(y))`
//! with a self-adjusting step: starting from the initial `η`, it is halved
//! while `η‖F(z) − F(y)‖ > 0.9‖z − y‖` and grown by 20% after steps with
//! `η‖F(z) − F(y)‖ ≤ ‖z − y‖/2`. Iterates are
//! periodically pushed back into their own correspondence and checked with
//! the gap LP. An anchored variant freezes the correspondence between checks
//! and so solves a sequence of ordinary VIs, and a compass search climbs the
//! certified gap directly where gradient dynamics cycle. The uniform start
//! runs first; the other methods and seeded restarts then run in parallel,
//! and small instances fall back to a grid over product strategies. Only gap-certified
//! points are returned.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instance::{block_gaps, eval_f, qvi_gap, unflatten, QviInstance, FEASIBILITY_TOL};
use super::projection::project;
use crate::error::{Error, Result};
use crate::linalg;
use crate::polymatrix::simplex_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Initial step; defaults to `1/(2G)`.
    pub step: Option<f64>,
    pub max_iter: usize,
    /// Random starts tried after the uniform start.
    pub restarts: usize,
    pub seed: u64,
    pub check_every: usize,
    /// Anchored runs keep the correspondence fixed for this many steps.
    pub anchor_every: usize,
    /// Gap evaluations allowed to each pattern search.
    pub pattern_evals: usize,
    pub max_dim: usize,
    /// Grid fallback runs only up to this dimension.
    pub grid_max_dim: usize,
    pub grid_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: None,
            max_iter: 20_000,
            restarts: 4,
            seed: 0,
            check_every: 25,
            anchor_every: 50,
            pattern_evals: 10_000,
            max_dim: 64,
            grid_max_dim: 12,
            grid_budget: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Projects onto `Q(z)` at the current iterate.
    Extragradient,
    /// Solves the VI over a frozen `Q(w)`, then moves `w` to the restored
    /// iterate.
    Anchored,
    /// Compass search that maximizes the certified gap directly.
    PatternSearch,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub method: SolveMethod,
    pub start: usize,
    pub iteration: usize,
    pub step: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QviSolution {
    pub z: Vec<f64>,
    /// Certified `min_{z̃ ∈ Q(z)} F(z)^T(z̃ − z)`.
    pub gap: f64,
    pub target: f64,
    pub method: SolveMethod,
    /// 0 is the uniform start, `1..` the seeded restarts.
    pub start: usize,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

enum Attempt {
    Solved(Vec<f64>, usize),
    Failed(f64),
}

pub fn solve_qvi(inst: &QviInstance, config: &SolverConfig) -> Result<QviSolution> {
    if inst.dim() > config.max_dim {
        return Err(Error::CapExceeded(format!("dimension {} exceeds the solver cap {}", inst.dim(), config.max_dim)));
    }
    if config.check_every == 0 {
        return Err(Error::InvalidParameter("check_every must be positive".into()));
    }
    let step = config.step.unwrap_or(1.0 / (2.0 * inst.lipschitz_g()));
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let target = -inst.eps_prime();
    let mut trace = Vec::new();
    let mut best_gap = f64::NEG_INFINITY;

    let starts: Vec<Vec<f64>> = (0..=config.restarts).map(|s| start_point(inst, config.seed, s)).collect();
    let first = run_start(inst, config, step, SolveMethod::Extragradient, 0, &starts[0])?;
    trace.extend(first.1);
    match first.0 {
        Attempt::Solved(z, iterations) => return finish(inst, z, SolveMethod::Extragradient, 0, iterations, trace),
        Attempt::Failed(g) => best_gap = best_gap.max(g),
    }
    let mut jobs = vec![(SolveMethod::PatternSearch, 0), (SolveMethod::Anchored, 0)];
    for s in 1..starts.len() {
        jobs.push((SolveMethod::Extragradient, s));
        jobs.push((SolveMethod::Anchored, s));
        jobs.push((SolveMethod::PatternSearch, s));
    }
    // The first job in list order that solves wins, so the result does not
    // depend on scheduling; later jobs are abandoned once it is known.
    let failures = Mutex::new(Vec::new());
    let solved = jobs.par_iter().enumerate().find_map_first(|(idx, &(method, s))| {
        let run = match method {
            SolveMethod::PatternSearch => pattern_search(inst, config, s, &starts[s]),
            _ => run_start(inst, config, step, method, s, &starts[s]),
        };
        match run {
            Ok((Attempt::Solved(z, iterations), points)) => Some(Ok((method, s, z, iterations, points))),
            Ok((Attempt::Failed(g), points)) => {
                failures.lock().expect("failure log poisoned").push((idx, g, points));
                None
            }
            Err(e) => Some(Err(e)),
        }
    });
    if let Some(found) = solved {
        let (method, s, z, iterations, points) = found?;
        trace.extend(points);
        return finish(inst, z, method, s, iterations, trace);
    }
    let mut failures = failures.into_inner().expect("failure log poisoned");
    failures.sort_by_key(|f| f.0);
    for (_, g, points) in failures {
        best_gap = best_gap.max(g);
        trace.extend(points);
    }
    if inst.dim() <= config.grid_max_dim {
        match grid_search(inst, config.grid_budget)? {
            (Some(z), g) if g >= target => return finish(inst, z, SolveMethod::Grid, 0, 0, trace),
            (_, g) => best_gap = best_gap.max(g),
        }
    }
    Err(Error::NonConvergence {
        best_gap,
        detail: format!(
            "no run reached gap >= {target:.6} within {} iterations ({} restarts, plain, anchored and pattern search{})",
            config.max_iter,
            config.restarts,
            if inst.dim() <= config.grid_max_dim { ", grid searched" } else { "" }
        ),
    })
}

fn finish(
    inst: &QviInstance,
    z: Vec<f64>,
    method: SolveMethod,
    start: usize,
    iterations: usize,
    trace: Vec<TracePoint>,
) -> Result<QviSolution> {
    let gap = qvi_gap(inst, &z)?;
    let target = -inst.eps_prime();
    if gap < target {
        return Err(Error::Numerical(format!("gap {gap:.3e} fell below {target:.3e} on re-certification")));
    }
    Ok(QviSolution { z, gap, target, method, start, iterations, trace })
}

/// Uniform blocks for start 0, seeded random simplex points otherwise.
fn start_point(inst: &QviInstance, seed: u64, start: usize) -> Vec<f64> {
    let l = inst.n_actions();
    if start == 0 {
        return vec![1.0 / l as f64; inst.dim()];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(start as u64));
    let mut z = Vec::with_capacity(inst.dim());
    for _ in 0..inst.n_players() {
        let raw: Vec<f64> = (0..l).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        z.extend(raw.into_iter().map(|v| v / s));
    }
    z
}

/// `Π_{Q(anchor)}(v)`, block by block.
fn project_onto(inst: &QviInstance, anchor: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let l = inst.n_actions();
    let blocks = unflatten(anchor, l)?;
    let mut out = Vec::with_capacity(v.len());
    for i in 0..inst.n_players() {
        let rows = inst.block_rows_of(&blocks, i)?;
        out.extend(project(&v[i * l..(i + 1) * l], &rows)?);
    }
    Ok(out)
}

/// Repeats `w ← Π_{Q(w)}(w)` until `w ∈ Q(w)`.
pub fn restore_feasibility(inst: &QviInstance, z: &[f64]) -> Result<Option<Vec<f64>>> {
    let mut w = z.to_vec();
    for _ in 0..200 {
        if inst.self_violation(&w)? <= 0.1 * FEASIBILITY_TOL {
            return Ok(Some(w));
        }
        w = project_onto(inst, &w, &w)?;
    }
    Ok(None)
}

fn certify(inst: &QviInstance, z: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
    let Some(w) = restore_feasibility(inst, z)? else {
        return Ok(None);
    };
    let gap: f64 = block_gaps(inst, &w)?.iter().sum();
    Ok(Some((w, gap)))
}

fn run_start(
    inst: &QviInstance,
    config: &SolverConfig,
    initial_step: f64,
    method: SolveMethod,
    start: usize,
    z0: &[f64],
) -> Result<(Attempt, Vec<TracePoint>)> {
    let target = -inst.eps_prime();
    let anchored = method == SolveMethod::Anchored;
    let check_every = if anchored { config.anchor_every.max(1) } else { config.check_every };
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut z = project_onto(inst, z0, z0)?;
    let mut anchor = z.clone();
    let mut step = initial_step;
    let max_step = 1e3 * initial_step.max(1.0);
    for it in 0..=config.max_iter {
        if it % check_every == 0 || it == config.max_iter {
            if let Some((w, gap)) = certify(inst, &z)? {
                trace.push(TracePoint { method, start, iteration: it, step, gap });
                best = best.max(gap);
                if gap >= target && qvi_gap(inst, &w)? >= target {
                    return Ok((Attempt::Solved(w, it), trace));
                }
                if anchored {
                    z = w.clone();
                    anchor = w;
                }
            }
        }
        if it == config.max_iter {
            break;
        }
        if !anchored {
            anchor.clone_from(&z);
        }
        let fz = eval_f(inst, &z)?;
        let mut tries = 0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&fz).map(|(a, f)| a - step * f).collect();
            let y = project_onto(inst, &anchor, &trial)?;
            let fy = eval_f(inst, &y)?;
            let moved = linalg::norm2(&linalg::sub(&z, &y));
            let change = linalg::norm2(&linalg::sub(&fz, &fy));
            if step * change <= 0.9 * moved || moved == 0.0 || tries > 30 {
                let corrected: Vec<f64> = z.iter().zip(&fy).map(|(a, f)| a - step * f).collect();
                z = project_onto(inst, &anchor, &corrected)?;
                if step * change <= 0.5 * moved {
                    step = (step * 1.2).min(max_step);
                }
                break;
            }
            step *= 0.5;
            tries += 1;
        }
    }
    Ok((Attempt::Failed(best), trace))
}

/// Compass search on `z ↦ gap(restore(z))`: tries `±h` along every
/// coordinate, keeps improvements and halves `h` after a sweep without one.
fn pattern_search(
    inst: &QviInstance,
    config: &SolverConfig,
    start: usize,
    z0: &[f64],
) -> Result<(Attempt, Vec<TracePoint>)> {
    let method = SolveMethod::PatternSearch;
    let target = -inst.eps_prime();
    let mut trace = Vec::new();
    let Some((mut z, mut best)) = certify(inst, z0)? else {
        return Ok((Attempt::Failed(f64::NEG_INFINITY), trace));
    };
    let mut h = 0.1;
    let mut evals = 0;
    let mut sweeps = 0;
    while h > 1e-9 && evals < config.pattern_evals {
        trace.push(TracePoint { method, start, iteration: sweeps, step: h, gap: best });
        if best >= target && qvi_gap(inst, &z)? >= target {
            return Ok((Attempt::Solved(z, sweeps), trace));
        }
        let mut improved = false;
        for c in 0..z.len() {
            for dir in [1.0, -1.0] {
                let mut y = z.clone();
                y[c] = (y[c] + dir * h).clamp(0.0, 1.0);
                evals += 1;
                if let Some((w, gap)) = certify(inst, &y)? {
                    if gap > best + 1e-12 {
                        z = w;
                        best = gap;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
        sweeps += 1;
    }
    if best >= target && qvi_gap(inst, &z)? >= target {
        return Ok((Attempt::Solved(z, sweeps), trace));
    }
    Ok((Attempt::Failed(best), trace))
}

/// Product strategies on simplex grids of doubling resolution (up to
/// `budget` points), each pushed into its own correspondence and scored by
/// its gap. Returns the first point in grid order that meets the target, or
/// the best point seen.
fn grid_search(inst: &QviInstance, budget: usize) -> Result<(Option<Vec<f64>>, f64)> {
    let n = inst.n_players();
    let l = inst.n_actions();
    let target = -inst.eps_prime();
    let count = |res: usize| simplex_grid(l, res).len().checked_pow(n as u32).filter(|&c| c <= budget);
    let mut best: (Option<Vec<f64>>, f64) = (None, f64::NEG_INFINITY);
    let mut resolution = 1;
    while count(resolution).is_some() {
        let grid = simplex_grid(l, resolution);
        let per = grid.len();
        let total = per.pow(n as u32);
        let scored = (0..total)
            .into_par_iter()
            .map(|mut idx| -> Result<Option<(Vec<f64>, f64)>> {
                let mut z = vec![0.0; n * l];
                for i in (0..n).rev() {
                    z[i * l..(i + 1) * l].copy_from_slice(&grid[idx % per]);
                    idx /= per;
                }
                certify(inst, &z)
            })
            .collect::<Result<Vec<_>>>()?;
        for (w, gap) in scored.into_iter().flatten() {
            if gap > best.1 {
                best = (Some(w), gap);
            }
            if gap >= target {
                return Ok(best);
            }
        }
        resolution *= 2;
    }
    Ok(best)
}
