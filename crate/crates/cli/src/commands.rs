use phieq::equilibrium::{verify_with_options, EquilibriumReport, Verdict, VerifyOptions};
use phieq::polymatrix::{random_instance, verify_eps_nash, NashReport, PolyMatrixGame};
use phieq::qvi::{build_qvi, lipschitz_probe, renormalize, solve_qvi, QviInstance, QviSolution, SolverConfig};
use phieq::reduction::{extract_nash, reduce};
use phieq::{DeviationKind, DeviationPolytope, ProductStrategy};
use serde::Serialize;

use crate::args::{
    Deviations, GenerateArgs, ProbeArgs, ReduceArgs, RoundtripArgs, SolveQviArgs, SolverArgs, VerifyArgs,
};
use crate::error::{CliError, Result, EXIT_FAILURE, EXIT_FALSE, EXIT_PROMISE, EXIT_TRUE};
use crate::io::{read_game, read_json, read_strategy, to_json, write_csv, write_json, GameFile};
use crate::manifest::RunManifest;
use crate::table::{num, opt, Table};

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => EXIT_TRUE,
        Verdict::Fail => EXIT_FALSE,
        Verdict::PromiseViolation => EXIT_PROMISE,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::PromiseViolation => "promise_violation",
    }
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn solver_config(s: &SolverArgs) -> SolverConfig {
    SolverConfig { step: s.step, max_iter: s.max_iter, restarts: s.restarts, seed: s.seed, ..SolverConfig::default() }
}

/// `(eps, nu)` for the QVI commands: explicit flags first, then the values
/// stored in a reduced instance. A game without costs needs no `nu`.
fn qvi_budgets(file: &GameFile, eps: Option<f64>, nu: Option<f64>) -> Result<(f64, f64)> {
    let inst = file.instance();
    let eps =
        eps.or(inst.map(|i| i.eps_prime)).ok_or_else(|| CliError::Usage("--eps is required for a bare game".into()))?;
    let nu = match nu.or(inst.map(|i| i.nu)) {
        Some(nu) => nu,
        None if !file.game().has_costs() => 1.0,
        None => return Err(CliError::Usage("--nu is required for a game with costs".into())),
    };
    Ok((eps, nu))
}

fn record_qvi(manifest: &mut RunManifest, qvi: &QviInstance) {
    manifest.param("qvi_nu_prime", qvi.nu_prime());
    manifest.param("qvi_eps_prime", qvi.eps_prime());
    manifest.param("lipschitz_g", qvi.lipschitz_g());
    manifest.param("lipschitz_l", qvi.lipschitz_l());
}

fn print_players(report: &EquilibriumReport) {
    let mut t = Table::new(["player", "utility", "best_safe", "regret", "max_cost"]);
    for p in &report.players {
        let cost = p.costs.iter().copied().reduce(f64::max);
        t.row(vec![p.player.to_string(), num(p.utility), opt(p.best_value), opt(p.regret), opt(cost)]);
    }
    print!("{t}");
}

pub fn generate(args: &GenerateArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.seed = Some(args.seed);
    let g = random_instance(args.n, args.k, args.deg, args.seed)?;
    match &args.out {
        Some(path) => {
            write_json(path, &g)?;
            manifest.output(path);
            let t = Table::fields(vec![
                ("nodes", g.n_players().to_string()),
                ("actions", g.n_actions().to_string()),
                ("edges", g.edges().len().to_string()),
                ("degree", g.degree().to_string()),
                ("seed", args.seed.to_string()),
            ]);
            print!("{t}");
        }
        None => print!("{}", to_json(&g)),
    }
    Ok(EXIT_TRUE)
}

pub fn reduce_cmd(args: &ReduceArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.input(&args.input);
    let g: PolyMatrixGame = read_json(&args.input)?;
    let inst = reduce(&g, args.eps)?;
    manifest.param("eps", args.eps);
    manifest.param("eps_prime", inst.eps_prime);
    manifest.param("nu", inst.nu);
    if let Some(path) = &args.out {
        write_json(path, &inst)?;
        manifest.output(path);
    }
    let t = Table::fields(vec![
        ("source nodes", g.n_players().to_string()),
        ("players", inst.game.n_players().to_string()),
        ("actions", inst.game.n_actions().to_string()),
        ("costs per left player", (2 * g.n_actions()).to_string()),
        ("eps", num(args.eps)),
        ("eps_prime", num(inst.eps_prime)),
        ("nu", num(inst.nu)),
    ]);
    print!("{t}");
    Ok(EXIT_TRUE)
}

#[derive(Serialize)]
struct PlayerRow {
    player: usize,
    utility: f64,
    best_safe: Option<f64>,
    regret: Option<f64>,
    max_cost: Option<f64>,
}

pub fn verify(args: &VerifyArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.input(&args.game);
    manifest.input(&args.strategy);
    let file = read_game(&args.game)?;
    let z = read_strategy(&args.strategy)?;
    let game = file.game();
    let inst = file.instance();
    let eps = args
        .eps
        .or(inst.map(|i| i.eps_prime))
        .ok_or_else(|| CliError::Usage("--eps is required for a bare game".into()))?;
    let nu = args.nu.or(inst.map(|i| i.nu)).unwrap_or(0.0);
    let l = game.n_actions();
    let phi = match (args.deviations, inst) {
        (Some(Deviations::Ce), _) => DeviationPolytope::ce(l),
        (Some(Deviations::Cce), _) | (None, None) => DeviationPolytope::cce(l),
        (None, Some(i)) => i.deviations.clone(),
    };
    manifest.param("eps", eps);
    manifest.param("nu", nu);
    manifest.tolerance("tol", args.tol);
    manifest.tolerance("safety_slack", args.safety_slack);
    let options = VerifyOptions { tol: args.tol, safety_slack: args.safety_slack };
    let report = verify_with_options(game, &z, &phi, eps, nu, options)?;
    manifest.verdict("equilibrium", verdict_name(report.verdict));
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        manifest.output(path);
    }
    if let Some(path) = &args.csv {
        write_csv(
            path,
            report.players.iter().map(|p| PlayerRow {
                player: p.player,
                utility: p.utility,
                best_safe: p.best_value,
                regret: p.regret,
                max_cost: p.costs.iter().copied().reduce(f64::max),
            }),
        )?;
        manifest.output(path);
    }
    print_players(&report);
    println!();
    let kind = match phi.kind() {
        DeviationKind::Ce => "ce",
        DeviationKind::Cce => "cce",
        DeviationKind::Custom => "custom",
    };
    let t = Table::fields(vec![
        ("deviations", kind.into()),
        ("eps", num(eps)),
        ("nu", num(nu)),
        ("tol", num(args.tol)),
        ("max regret", num(report.max_regret)),
        ("max cost", opt(report.max_cost)),
        ("verdict", verdict_name(report.verdict).into()),
    ]);
    print!("{t}");
    Ok(verdict_code(report.verdict))
}

#[derive(Serialize)]
struct SolveReport {
    eps: f64,
    nu: f64,
    nu_prime: f64,
    eps_prime: f64,
    costs_dropped: bool,
    solution: QviSolution,
    strategy: ProductStrategy,
    equilibrium: EquilibriumReport,
}

fn write_trace(path: &std::path::Path, sol: &QviSolution, manifest: &mut RunManifest) -> Result<()> {
    write_csv(path, &sol.trace)?;
    manifest.output(path);
    Ok(())
}

pub fn solve_qvi_cmd(args: &SolveQviArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.input(&args.input);
    manifest.seed = Some(args.solver.seed);
    let file = read_game(&args.input)?;
    let (eps, nu) = qvi_budgets(&file, args.eps, args.nu)?;
    manifest.param("eps", eps);
    manifest.param("nu", nu);
    manifest.tolerance("tol", args.tol);
    let qvi = build_qvi(file.game(), eps, nu)?;
    record_qvi(manifest, &qvi);
    let sol = solve_qvi(&qvi, &solver_config(&args.solver))?;
    manifest.verdict("solver", "converged");
    if let Some(path) = &args.csv {
        write_trace(path, &sol, manifest)?;
    }
    let p = renormalize(&sol.z, qvi.n_actions(), qvi.nu_prime())?;
    let phi = DeviationPolytope::ce(qvi.n_actions());
    let options = VerifyOptions { tol: args.tol, safety_slack: 0.0 };
    let equilibrium = verify_with_options(file.game(), &p.to_mixture(), &phi, eps, nu, options)?;
    manifest.verdict("equilibrium", verdict_name(equilibrium.verdict));
    let table = Table::fields(vec![
        ("dimension", qvi.dim().to_string()),
        ("nu_prime", num(qvi.nu_prime())),
        ("eps_prime", num(qvi.eps_prime())),
        ("method", format!("{:?}", sol.method)),
        ("iterations", sol.iterations.to_string()),
        ("gap", num(sol.gap)),
        ("target", num(sol.target)),
        ("max regret (ce)", num(equilibrium.max_regret)),
        ("max cost", opt(equilibrium.max_cost)),
        ("verdict", verdict_name(equilibrium.verdict).into()),
    ]);
    let code = verdict_code(equilibrium.verdict);
    let report = SolveReport {
        eps,
        nu,
        nu_prime: qvi.nu_prime(),
        eps_prime: qvi.eps_prime(),
        costs_dropped: qvi.costs_dropped(),
        solution: sol,
        strategy: p,
        equilibrium,
    };
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        manifest.output(path);
    }
    print!("{table}");
    Ok(code)
}

#[derive(Serialize)]
struct Stage {
    name: &'static str,
    verdict: String,
    detail: String,
}

/// Every intermediate certificate of the pipeline. Later stages are absent
/// when an earlier one fails.
#[derive(Serialize, Default)]
struct RoundtripReport {
    eps: f64,
    tol: f64,
    eps_prime: f64,
    nu: f64,
    qvi_nu_prime: f64,
    qvi_eps_prime: f64,
    solution: Option<QviSolution>,
    strategy: Option<ProductStrategy>,
    equilibrium: Option<EquilibriumReport>,
    nash_profile: Option<ProductStrategy>,
    nash: Option<NashReport>,
    stages: Vec<Stage>,
}

impl RoundtripReport {
    fn stage(&mut self, manifest: &mut RunManifest, name: &'static str, verdict: &str, detail: String) {
        manifest.verdict(name, verdict);
        self.stages.push(Stage { name, verdict: verdict.into(), detail });
    }
}

pub fn roundtrip(args: &RoundtripArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.input(&args.input);
    manifest.seed = Some(args.solver.seed);
    manifest.param("eps", args.eps);
    manifest.tolerance("tol", args.tol);
    let g: PolyMatrixGame = read_json(&args.input)?;
    let inst = reduce(&g, args.eps)?;
    let qvi = build_qvi(&inst.game, inst.eps_prime, inst.nu)?;
    manifest.param("eps_prime", inst.eps_prime);
    manifest.param("nu", inst.nu);
    record_qvi(manifest, &qvi);
    let mut report = RoundtripReport {
        eps: args.eps,
        tol: args.tol,
        eps_prime: inst.eps_prime,
        nu: inst.nu,
        qvi_nu_prime: qvi.nu_prime(),
        qvi_eps_prime: qvi.eps_prime(),
        ..Default::default()
    };
    let detail = format!("{} players, eps'={}, nu={}", inst.game.n_players(), num(inst.eps_prime), num(inst.nu));
    report.stage(manifest, "reduce", "pass", detail);
    let code = run_pipeline(args, &g, &inst, &qvi, &mut report, manifest)?;
    if let (Some(path), Some(sol)) = (&args.csv, &report.solution) {
        write_trace(path, sol, manifest)?;
    }
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        manifest.output(path);
    }
    let mut t = Table::new(["stage", "verdict", "detail"]);
    for s in &report.stages {
        t.row(vec![s.name.into(), s.verdict.clone(), s.detail.clone()]);
    }
    print!("{t}");
    Ok(code)
}

fn run_pipeline(
    args: &RoundtripArgs,
    g: &PolyMatrixGame,
    inst: &phieq::reduction::ConstrainedInstance,
    qvi: &QviInstance,
    report: &mut RoundtripReport,
    manifest: &mut RunManifest,
) -> Result<u8> {
    let sol = match solve_qvi(qvi, &solver_config(&args.solver)) {
        Ok(sol) => sol,
        Err(e @ phieq::Error::NonConvergence { .. }) => {
            report.stage(manifest, "solve_qvi", "failure", e.to_string());
            return Ok(EXIT_FAILURE);
        }
        Err(e) => return Err(e.into()),
    };
    let detail = format!("{:?} after {} iterations, gap {}", sol.method, sol.iterations, num(sol.gap));
    report.stage(manifest, "solve_qvi", "pass", detail);
    let z = sol.z.clone();
    report.solution = Some(sol);

    let p = match renormalize(&z, qvi.n_actions(), qvi.nu_prime()) {
        Ok(p) => p,
        Err(e) => {
            report.stage(manifest, "renormalize", "failure", e.to_string());
            return Ok(EXIT_FAILURE);
        }
    };
    report.stage(manifest, "renormalize", "pass", format!("band nu'={}", num(qvi.nu_prime())));
    let mixture = p.to_mixture();
    report.strategy = Some(p);

    let options = VerifyOptions { tol: args.tol, safety_slack: 0.0 };
    let eq = verify_with_options(&inst.game, &mixture, &inst.deviations, inst.eps_prime, inst.nu, options)?;
    let detail = format!("max regret {}, max cost {}", num(eq.max_regret), opt(eq.max_cost));
    report.stage(manifest, "verify_equilibrium", verdict_name(eq.verdict), detail);
    let verdict = eq.verdict;
    report.equilibrium = Some(eq);
    if verdict != Verdict::Pass {
        return Ok(verdict_code(verdict));
    }

    let h = extract_nash(inst, &mixture)?;
    let nash = verify_eps_nash(g, &h, args.eps + args.tol)?;
    let detail = format!("max regret {} vs eps {}", num(nash.max_regret), num(args.eps));
    report.stage(manifest, "verify_eps_nash", pass_fail(nash.ok), detail);
    let code = if nash.ok { EXIT_TRUE } else { EXIT_FALSE };
    report.nash_profile = Some(h);
    report.nash = Some(nash);
    Ok(code)
}

pub fn probe_lipschitz(args: &ProbeArgs, manifest: &mut RunManifest) -> Result<u8> {
    manifest.input(&args.input);
    manifest.seed = Some(args.seed);
    let file = read_game(&args.input)?;
    let (eps, nu) = qvi_budgets(&file, args.eps, args.nu)?;
    manifest.param("eps", eps);
    manifest.param("nu", nu);
    manifest.param("samples", args.samples as f64);
    let qvi = build_qvi(file.game(), eps, nu)?;
    record_qvi(manifest, &qvi);
    let report = lipschitz_probe(&qvi, args.samples, args.seed)?;
    let ok = report.within_bounds();
    manifest.verdict("lipschitz", pass_fail(ok));
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        manifest.output(path);
    }
    let mut t = Table::new(["constant", "empirical", "declared", "verdict"]);
    t.row(vec![
        "G".into(),
        num(report.empirical_g),
        num(report.declared_g),
        pass_fail(report.empirical_g <= report.declared_g).into(),
    ]);
    t.row(vec![
        "L".into(),
        num(report.empirical_l),
        num(report.declared_l),
        pass_fail(report.empirical_l <= report.declared_l).into(),
    ]);
    print!("{t}");
    Ok(if ok { EXIT_TRUE } else { EXIT_FALSE })
}
