//! Subcommand bodies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lorenzlab_core::estimators::{
    asymptotic_lambda, heuristic_lambda, EstimateWithCI, Method, Regime,
};
use lorenzlab_core::excursions::{estimate_lambda_excursion, simulate_excursions, stop_time_stats};
use lorenzlab_core::fokker_planck::{solve_all, Grid2D, GridInterp};
use lorenzlab_core::lyapunov::{select_constants, verify_drift_full, verify_drift_v0, DriftReport, Lattice};
use lorenzlab_core::params::{derive_constants, validate_params};
use lorenzlab_core::sde::{default_burn_in, simulate, SimConfig, SimSummary, System};
use lorenzlab_core::theory_checks::{check_exp_growth, ExpGrowthConfig, Perturbation};
use lorenzlab_core::threshold::{find_threshold, HeuristicOracle, PdeOracle, ThresholdConfig, ThresholdResult};
use lorenzlab_core::transforms::State;
use lorenzlab_core::{DerivedConsts, Params};
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{crossing_sweep, stop_time_check, tracking_sweep};
use crate::cli::*;
use crate::error::{CliError, CliResult};
use crate::output::{
    sidecar_path, write_excursions_csv, write_excursions_jsonl, write_grid_csv, write_json, AlphaUnits, CsvWriter,
    Provenance,
};
use crate::parallel::{lambda_growth, lambda_mc, mc_oracle, pool};

pub const SEED_ENV: &str = "LORENZLAB_SEED";

/// `--seed`, else `LORENZLAB_SEED`, else 0.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Model with the noise amplitude, if any, resolved to both unit systems.
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub params: Params,
    pub consts: DerivedConsts,
    pub units: AlphaUnits,
}

impl Resolved {
    pub fn new(m: &ModelArgs, require_alpha: bool) -> CliResult<Self> {
        let Some(value) = m.alpha.or((!require_alpha).then_some(0.0)) else {
            return Err(CliError::Usage("--alpha-hat is required".into()));
        };
        // alpha scales linearly with alpha_hat, so the factor comes from a unit-noise model
        let base = Params::new(m.sigma, m.beta, m.rho, 1.0);
        validate_params(&base).into_result()?;
        let unit = derive_constants(&base)?;
        let alpha_hat = match m.alpha_units {
            AlphaUnits::Hat => value,
            AlphaUnits::Transformed => unit.alpha_hat_from(value),
        };
        let params = base.with_alpha_hat(alpha_hat);
        validate_params(&params).into_result()?;
        Ok(Self {
            params,
            consts: derive_constants(&params)?,
            units: m.alpha_units,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.consts.alpha
    }

    pub fn alpha_hat(&self) -> f64 {
        self.params.alpha_hat
    }

    /// A value given in the selected units, as rescaled `alpha`.
    pub fn to_alpha(&self, v: f64) -> f64 {
        match self.units {
            AlphaUnits::Hat => self.consts.alpha_from_hat(v),
            AlphaUnits::Transformed => v,
        }
    }

    pub fn provenance(&self, command: &str, seed: u64) -> Provenance {
        Provenance::new(command, self.params, self.consts, seed, self.units)
    }
}

/// Simulation settings from flags, with command-specific defaults.
pub fn sim_config(
    s: &SimArgs,
    system: System,
    seed: u64,
    c: &DerivedConsts,
    t_final: f64,
    t_burn: f64,
) -> CliResult<SimConfig> {
    let mut cfg = SimConfig::new(system, s.t_final.unwrap_or(t_final), seed, c);
    cfg.t_burn = s.t_burn.unwrap_or(t_burn);
    cfg.dt0 = s.dt0;
    cfg.adaptive = !s.no_adaptive;
    cfg.scheme = s.scheme.into();
    cfg.thin = s.thin;
    cfg.validate()?;
    Ok(cfg)
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn report_done(what: &str, path: Option<&Path>) {
    if let Some(p) = path {
        if p.as_os_str() != "-" {
            eprintln!("{what} -> {}", p.display());
        }
    }
}

pub fn simulate_cmd(a: &SimulateArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, false)?;
    let seed = resolve_seed(a.run.seed)?;
    let system: System = a.system.into();
    let cfg = sim_config(&a.sim, system, seed, &r.consts, 100.0, 0.0)?;
    let init = initial_state(system, a.init.as_deref(), &r.consts)?;
    let started = Instant::now();
    let mut rows = CsvSink::new(a.run.output.as_deref())?;
    let summary = simulate(&cfg, &init, &r.consts, r.alpha(), &mut rows)?;
    rows.finish()?;
    report_done("samples", a.run.output.as_deref());

    #[derive(Serialize)]
    struct Body<'a> {
        alpha: f64,
        alpha_hat: f64,
        config: &'a SimConfig,
        init: State,
        summary: SimSummary,
        wall_time_s: f64,
    }
    let summary_path = a.summary.clone().or_else(|| file_sidecar(a.run.output.as_deref()));
    if let Some(p) = summary_path.as_deref() {
        let body = Body {
            alpha: r.alpha(),
            alpha_hat: r.alpha_hat(),
            config: &cfg,
            init,
            summary,
            wall_time_s: elapsed(started),
        };
        write_json(Some(p), &r.provenance("simulate", seed), body)?;
        report_done("summary", Some(p));
    }
    Ok(())
}

fn file_sidecar(p: Option<&Path>) -> Option<PathBuf> {
    p.filter(|p| p.as_os_str() != "-").map(sidecar_path)
}

fn initial_state(system: System, init: Option<&[f64]>, c: &DerivedConsts) -> CliResult<State> {
    let bad = |n: usize| CliError::Usage(format!("--init needs {n} comma-separated values"));
    Ok(match system {
        System::OriginalFull => match init {
            None => State::original(1.0, 1.0, 1.0),
            Some(&[x, y, z]) => State::original(x, y, z),
            Some(_) => return Err(bad(3)),
        },
        System::TransformedFull => match init {
            None => State::transformed(1.0, 0.0, c.z_star),
            Some(&[x, y, z]) => State::transformed(x, y, z),
            Some(_) => return Err(bad(3)),
        },
        System::ThetaZ => match init {
            None => State::polar(0.0, 0.0, c.z_star),
            Some(&[th, z]) => State::polar(0.0, th, z),
            Some(_) => return Err(bad(2)),
        },
        System::PolarLinear => match init {
            None => State::polar(0.0, 0.0, c.z_star),
            Some(&[rr, th, z]) => State::polar(rr, th, z),
            Some(_) => return Err(bad(3)),
        },
    })
}

/// Sample sink writing `t,c1,c2,c3` rows; the first IO error is kept and reported at the end.
struct CsvSink {
    w: CsvWriter,
    err: Option<CliError>,
}

impl CsvSink {
    fn new(path: Option<&Path>) -> CliResult<Self> {
        Ok(Self {
            w: CsvWriter::create(path, &["t", "c1", "c2", "c3"])?,
            err: None,
        })
    }

    fn finish(self) -> CliResult<()> {
        match self.err {
            Some(e) => Err(e),
            None => self.w.finish(),
        }
    }
}

impl lorenzlab_core::sde::SampleSink for CsvSink {
    fn push(&mut self, t: f64, c: [f64; 3]) {
        if self.err.is_none() {
            if let Err(e) = self.w.row(&[t, c[0], c[1], c[2]]) {
                self.err = Some(e);
            }
        }
    }
}

/// One `lambda` evaluation with any method.
pub fn estimate(
    method: LambdaMethod,
    alpha: f64,
    c: &DerivedConsts,
    cfg: &SimConfig,
    replicas: u64,
    grid: &GridArgs,
    quad_tol: f64,
) -> CliResult<EstimateWithCI> {
    let started = Instant::now();
    let mut e = match method {
        LambdaMethod::Mc => lambda_mc(alpha, cfg, c, replicas)?,
        LambdaMethod::Growth => lambda_growth(alpha, cfg, c, replicas)?,
        LambdaMethod::Pde => {
            let g = Grid2D::around(c, alpha, grid.n_theta, grid.n_z)?;
            EstimateWithCI::exact(solve_all(&g, c, alpha, false)?.lambda, Method::Pde)
        }
        LambdaMethod::Heuristic => EstimateWithCI::exact(heuristic_lambda(alpha, c, quad_tol), Method::Heuristic),
        LambdaMethod::AsymptoticSmall => {
            EstimateWithCI::exact(asymptotic_lambda(alpha, c, Regime::Small), Method::AsymptoticSmall)
        }
        LambdaMethod::AsymptoticLarge => {
            EstimateWithCI::exact(asymptotic_lambda(alpha, c, Regime::Large), Method::AsymptoticLarge)
        }
        LambdaMethod::Excursion => {
            let d = simulate_excursions(cfg, c, alpha)?;
            let mut e = estimate_lambda_excursion(&d.excursions)?;
            e.seed = cfg.seed;
            e
        }
    };
    e.wall_time_s = elapsed(started);
    Ok(e)
}

#[derive(Debug, Serialize)]
struct LambdaBody {
    lambda: f64,
    ci: f64,
    method: Method,
    alpha: f64,
    alpha_hat: f64,
    n_samples: u64,
    replicas: Option<u64>,
    config: Option<SimConfig>,
    grid: Option<(usize, usize)>,
    wall_time_s: f64,
}

fn uses_sim(m: LambdaMethod) -> bool {
    matches!(m, LambdaMethod::Mc | LambdaMethod::Growth | LambdaMethod::Excursion)
}

pub fn lambda_cmd(a: &LambdaArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, true)?;
    let seed = resolve_seed(a.run.seed)?;
    let cfg = sim_config(&a.sim, System::ThetaZ, seed, &r.consts, 1e4, default_burn_in(&r.consts))?;
    let e = pool(a.run.threads)?.install(|| estimate(a.method, r.alpha(), &r.consts, &cfg, a.replicas, &a.grid, a.quad_tol))?;
    let sim = uses_sim(a.method);
    let body = LambdaBody {
        lambda: e.value,
        ci: e.half_width,
        method: e.method,
        alpha: r.alpha(),
        alpha_hat: r.alpha_hat(),
        n_samples: e.n_samples,
        replicas: (sim && a.method != LambdaMethod::Excursion).then_some(a.replicas),
        config: sim.then_some(cfg),
        grid: (a.method == LambdaMethod::Pde).then_some((a.grid.n_theta, a.grid.n_z)),
        wall_time_s: e.wall_time_s,
    };
    write_json(a.run.output.as_deref(), &r.provenance("lambda", seed), body)?;
    report_done("lambda", a.run.output.as_deref());
    Ok(())
}

pub fn threshold_cmd(a: &ThresholdArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, false)?;
    let seed = resolve_seed(a.run.seed)?;
    let &[lo, hi] = a.bracket.as_slice() else {
        return Err(CliError::Usage("--bracket takes lo,hi".into()));
    };
    let c = r.consts;
    // the search runs in rescaled units; lo/hi/tol arrive in the selected ones
    let mut tc = ThresholdConfig::new(r.to_alpha(lo), r.to_alpha(hi), r.to_alpha(a.tol));
    tc.budget = a.budget;
    tc.max_level = a.max_level;
    tc.scan_points = a.scan_points;
    let cfg = sim_config(&a.sim, System::ThetaZ, seed, &c, 1e4, default_burn_in(&c))?;
    let started = Instant::now();
    let res: ThresholdResult = match a.method {
        ThresholdMethod::Heuristic => find_threshold(&mut HeuristicOracle { c, quad_tol: a.quad_tol }, &tc, &c)?,
        ThresholdMethod::Pde => find_threshold(
            &mut PdeOracle {
                c,
                n_theta: a.grid.n_theta,
                n_z: a.grid.n_z,
            },
            &tc,
            &c,
        )?,
        ThresholdMethod::Mc => {
            let p = pool(a.run.threads)?;
            p.install(|| find_threshold(&mut mc_oracle(&c, &cfg, a.replicas), &tc, &c))?
        }
    };

    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        result: &'a ThresholdResult,
        search: ThresholdConfig,
        config: Option<SimConfig>,
        replicas: Option<u64>,
        wall_time_s: f64,
    }
    let mc = a.method == ThresholdMethod::Mc;
    let body = Body {
        result: &res,
        search: tc,
        config: mc.then_some(cfg),
        replicas: mc.then_some(a.replicas),
        wall_time_s: elapsed(started),
    };
    write_json(a.run.output.as_deref(), &r.provenance("threshold", seed), body)?;
    if !res.converged {
        eprintln!(
            "threshold: undecided midpoint at alpha_hat = {}; bracket [{}, {}]",
            res.alpha_star_hat, res.bracket_hat.0, res.bracket_hat.1
        );
    }
    Ok(())
}

pub fn poisson_cmd(a: &PoissonArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, true)?;
    let seed = resolve_seed(a.run.seed)?;
    let started = Instant::now();
    let grid = Grid2D::around(&r.consts, r.alpha(), a.grid.n_theta, a.grid.n_z)?;
    let sol = solve_all(&grid, &r.consts, r.alpha(), true)?;
    let g = sol.g.as_ref().expect("poisson requested");
    write_grid_csv(a.run.output.as_deref(), &grid, &g.values)?;
    report_done("g", a.run.output.as_deref());
    if let Some(p) = a.measure.as_deref() {
        write_grid_csv(Some(p), &grid, &sol.mu.weights)?;
        report_done("mu", Some(p));
    }

    #[derive(Serialize)]
    struct Body {
        alpha: f64,
        alpha_hat: f64,
        grid: Grid2D,
        h_theta: f64,
        h_z: f64,
        lambda: f64,
        /// L1 distance of the z-marginal from the exact Gaussian.
        z_marginal_l1: f64,
        layout: &'static str,
        wall_time_s: f64,
    }
    let meta = a.meta.clone().or_else(|| file_sidecar(a.run.output.as_deref()));
    let body = Body {
        alpha: r.alpha(),
        alpha_hat: r.alpha_hat(),
        grid,
        h_theta: grid.h_theta(),
        h_z: grid.h_z(),
        lambda: sol.lambda,
        z_marginal_l1: sol.mu.z_marginal_l1_to_normal(&grid, r.consts.z_star, r.consts.ou_std(r.alpha())),
        layout: "row-major, theta fastest",
        wall_time_s: elapsed(started),
    };
    match meta {
        Some(p) => {
            write_json(Some(&p), &r.provenance("poisson", seed), body)?;
            report_done("meta", Some(&p));
        }
        // the CSV already went to stdout
        None => eprintln!("lambda = {}", body.lambda),
    }
    Ok(())
}

/// Everything the Lyapunov pipeline produces at one noise level.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovRun {
    pub lambda: f64,
    pub grid: Grid2D,
    pub near_axis: DriftReport,
    pub full: Option<DriftReport>,
}

/// Poisson solve, constant selection, then the near-axis and (optionally) full drift checks.
pub fn lyapunov_pipeline(
    c: &DerivedConsts,
    alpha: f64,
    n_theta: usize,
    n_z: usize,
    lattice: (usize, usize),
    full: bool,
) -> lorenzlab_core::Result<LyapunovRun> {
    let grid = Grid2D::around(c, alpha, n_theta, n_z)?;
    let sol = solve_all(&grid, c, alpha, true)?;
    let g = sol.g.expect("poisson requested");
    let k = select_constants(sol.lambda, alpha, c, &g, &grid)?;
    let interp = GridInterp::new(&grid, &g.values);
    let lat = Lattice::shrunk(&grid, vec![-1.0, 0.0, 1.0], lattice.0, lattice.1);
    let near_axis = verify_drift_v0(&k, &interp, &lat, c, alpha)?;
    let full = if full {
        Some(verify_drift_full(&near_axis.constants, &interp, &lat, c, alpha)?)
    } else {
        None
    };
    Ok(LyapunovRun {
        lambda: sol.lambda,
        grid,
        near_axis,
        full,
    })
}

pub fn verify_cmd(a: &VerifyArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, true)?;
    let seed = resolve_seed(a.run.seed)?;
    let started = Instant::now();
    let run = lyapunov_pipeline(
        &r.consts,
        r.alpha(),
        a.grid.n_theta,
        a.grid.n_z,
        (a.lattice_theta, a.lattice_z),
        !a.no_full,
    )?;

    #[derive(Serialize)]
    struct Body<'a> {
        alpha: f64,
        alpha_hat: f64,
        #[serde(flatten)]
        run: &'a LyapunovRun,
        wall_time_s: f64,
    }
    let body = Body {
        alpha: r.alpha(),
        alpha_hat: r.alpha_hat(),
        run: &run,
        wall_time_s: elapsed(started),
    };
    write_json(a.run.output.as_deref(), &r.provenance("verify-lyapunov", seed), body)?;
    eprintln!(
        "near-axis: d = {} ({}); full: {}",
        run.near_axis.constants.d.unwrap_or(0.0),
        if run.near_axis.pass { "pass" } else { "fail" },
        match &run.full {
            Some(f) => format!("c = {}, K = {} ({})", f.constants.c.unwrap_or(0.0), f.constants.k_offset.unwrap_or(0.0), if f.pass { "pass" } else { "fail" }),
            None => "skipped".into(),
        }
    );
    Ok(())
}

pub fn excursions_cmd(a: &ExcursionArgs) -> CliResult<()> {
    let r = Resolved::new(&a.model, true)?;
    let seed = resolve_seed(a.run.seed)?;
    let cfg = sim_config(&a.sim, System::ThetaZ, seed, &r.consts, 1e3, default_burn_in(&r.consts))?;
    let started = Instant::now();
    let d = simulate_excursions(&cfg, &r.consts, r.alpha())?;
    write_excursions_csv(a.run.output.as_deref(), &d.excursions)?;
    report_done("excursions", a.run.output.as_deref());
    if let Some(p) = a.jsonl.as_deref() {
        write_excursions_jsonl(p, &d.excursions)?;
        report_done("jsonl", Some(p));
    }

    #[derive(Serialize)]
    struct Body {
        alpha: f64,
        alpha_hat: f64,
        config: SimConfig,
        excursions: usize,
        t_start: f64,
        t_end: f64,
        t_complete: f64,
        lambda: Option<EstimateWithCI>,
        lambda_error: Option<String>,
        stop_times: lorenzlab_core::excursions::StopTimeReport,
        wall_time_s: f64,
    }
    let est = estimate_lambda_excursion(&d.excursions);
    let body = Body {
        alpha: r.alpha(),
        alpha_hat: r.alpha_hat(),
        config: cfg,
        excursions: d.excursions.len(),
        t_start: d.t_start,
        t_end: d.t_end,
        t_complete: d.t_complete(),
        lambda_error: est.as_ref().err().map(|e| e.to_string()),
        lambda: est.ok(),
        stop_times: stop_time_stats(&d.excursions, r.alpha()),
        wall_time_s: elapsed(started),
    };
    if let Some(p) = a.summary.clone().or_else(|| file_sidecar(a.run.output.as_deref())) {
        write_json(Some(&p), &r.provenance("excursions", seed), body)?;
        report_done("summary", Some(&p));
    }
    Ok(())
}

pub fn check_cmd(a: &CheckArgs) -> CliResult<()> {
    let unit = ModelArgs {
        sigma: 10.0,
        beta: 8.0 / 3.0,
        rho: 0.5,
        alpha: None,
        alpha_units: AlphaUnits::Hat,
    };
    match &a.kind {
        CheckKind::ExpGrowth(x) => {
            let seed = resolve_seed(x.run.seed)?;
            let mut cfg = ExpGrowthConfig::new(x.a, x.b, x.eps, x.k);
            cfg.trials = x.trials;
            cfg.n_max = x.n_max;
            cfg.seed = seed;
            if x.unperturbed {
                cfg.perturbation = Perturbation::None;
            }
            let rep = check_exp_growth(&cfg)?;
            let r = Resolved::new(&unit, false)?;
            write_json(x.run.output.as_deref(), &r.provenance("check exp-growth", seed), Checked { config: cfg, report: rep })
        }
        CheckKind::Tracking(x) => {
            let seed = resolve_seed(x.run.seed)?;
            let rep = tracking_sweep(&x.a0, x.t_scale)?;
            let r = Resolved::new(&unit, false)?;
            write_json(x.run.output.as_deref(), &r.provenance("check tracking", seed), Checked { config: x.t_scale, report: rep })
        }
        CheckKind::Crossing(x) => {
            let seed = resolve_seed(x.run.seed)?;
            let rep = crossing_sweep(x.instances, seed)?;
            let r = Resolved::new(&unit, false)?;
            write_json(x.run.output.as_deref(), &r.provenance("check crossing", seed), Checked { config: x.instances, report: rep })
        }
        CheckKind::StopTime(x) => {
            let r = Resolved::new(&x.model, true)?;
            let seed = resolve_seed(x.run.seed)?;
            let cfg = sim_config(&x.sim, System::ThetaZ, seed, &r.consts, 1e3, default_burn_in(&r.consts))?;
            let rep = stop_time_check(&cfg, &r.consts, r.alpha())?;
            write_json(x.run.output.as_deref(), &r.provenance("check stop-time", seed), Checked { config: cfg, report: rep })
        }
    }
}

#[derive(Serialize)]
struct Checked<C: Serialize, R: Serialize> {
    config: C,
    report: R,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    alpha: f64,
    alpha_hat: f64,
    lambda: f64,
    ci: f64,
    n_samples: u64,
}

pub fn sweep_cmd(a: &SweepArgs) -> CliResult<()> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let r = Resolved::new(&a.model, false)?;
    let seed = resolve_seed(a.run.seed)?;
    let c = r.consts;
    let cfg = sim_config(&a.sim, System::ThetaZ, seed, &c, 1e4, default_burn_in(&c))?;
    let alphas: Vec<f64> = (0..a.points)
        .map(|k| r.to_alpha(a.from + (a.to - a.from) * k as f64 / (a.points - 1) as f64))
        .collect();
    let started = Instant::now();
    let eval = |&alpha: &f64| estimate(a.method, alpha, &c, &cfg, a.replicas, &a.grid, a.quad_tol);
    let p = pool(a.run.threads)?;
    // sampled methods parallelise over replicas, the rest over points
    let ests: Vec<EstimateWithCI> = p.install(|| {
        if uses_sim(a.method) {
            alphas.iter().map(eval).collect::<CliResult<_>>()
        } else {
            alphas.par_iter().map(eval).collect::<CliResult<_>>()
        }
    })?;
    let rows: Vec<SweepRow> = alphas
        .iter()
        .zip(&ests)
        .map(|(&alpha, e)| SweepRow {
            alpha,
            alpha_hat: c.alpha_hat_from(alpha),
            lambda: e.value,
            ci: e.half_width,
            n_samples: e.n_samples,
        })
        .collect();
    if let Some(p) = a.csv.as_deref() {
        let mut w = CsvWriter::create(Some(p), &["alpha_hat", "alpha", "lambda", "ci"])?;
        for row in &rows {
            w.row(&[row.alpha_hat, row.alpha, row.lambda, row.ci])?;
        }
        w.finish()?;
        report_done("rows", Some(p));
    }

    #[derive(Serialize)]
    struct Body {
        method: Method,
        config: Option<SimConfig>,
        rows: Vec<SweepRow>,
        wall_time_s: f64,
    }
    let body = Body {
        method: ests[0].method,
        config: uses_sim(a.method).then_some(cfg),
        rows,
        wall_time_s: elapsed(started),
    };
    write_json(a.run.output.as_deref(), &r.provenance("sweep", seed), body)
}
