use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use mhessian::bifurcation::{check_uniqueness_bifurcation, solve_bifurcation};
use mhessian::bounds::{bounds_report, BoundsReport};
use mhessian::dirichlet::solve_sigma_m;
use mhessian::eigen::{continuity_path, inverse_iteration, uniqueness_probe, verify_eigenpair, EigenResult};
use mhessian::functionals::{energy_e, rayleigh};
use mhessian::geometry::build_grid;
use mhessian::hessian::{cone_slack, hessian_field, sigma_k, spectrum};
use mhessian::radial::{paraboloid_witness, radial_eigen_shoot, radial_label, RadialLabel, RadialProfile};
use mhessian::{Domain, DomainKind, Error, Grid, ScalarField};

use crate::config::{EigenMethodChoice, Mode, RunConfig, WeightSpec};
use crate::report::{Provenance, RunReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Environment override of the thread count, used only when the config has none.
pub const THREADS_ENV: &str = "MHESSIAN_THREADS";

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_SOLVER, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResolutionTooCoarse { .. }
            | Error::UnsupportedDimension(_)
            | Error::InvalidParameter(_)
            | Error::KOutOfRange { .. }
            | Error::NegativeRhs { .. }
            | Error::NonPositiveWeight { .. }
            | Error::PreconditionViolated { .. }
            | Error::SlopeBoundViolated { .. } => EXIT_VALIDATION,
            _ => EXIT_SOLVER,
        };
        Self { code, message: e.to_string() }
    }
}

pub struct Outcome {
    pub code: i32,
    pub report: Option<RunReport>,
    pub message: Option<String>,
}

/// Loads, validates and runs a config file, writing every requested artifact.
pub fn run_file(path: &Path, env_threads: Option<&str>) -> Outcome {
    match RunConfig::from_path(path) {
        Ok(cfg) => run_config(&cfg, env_threads),
        Err(message) => Outcome {
            code: EXIT_VALIDATION,
            report: None,
            message: Some(message),
        },
    }
}

pub fn resolve_threads(cfg: &RunConfig, env_threads: Option<&str>) -> Result<usize, Failure> {
    if let Some(t) = cfg.threads {
        return Ok(t);
    }
    match env_threads {
        Some(s) => match s.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(Failure::validation(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run_config(cfg: &RunConfig, env_threads: Option<&str>) -> Outcome {
    let fail = |f: Failure, report: Option<RunReport>| Outcome {
        code: f.code,
        report,
        message: Some(f.message),
    };
    if let Err(e) = cfg.validate() {
        return fail(Failure::validation(e), None);
    }
    let threads = match resolve_threads(cfg, env_threads) {
        Ok(t) => t,
        Err(f) => return fail(f, None),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(Failure::io(format!("cli::run: thread pool: {e}")), None),
    };
    let start = Instant::now();
    let (mut report, result) = pool.install(|| execute(cfg, threads));
    let Some(report_ref) = report.as_mut() else {
        return fail(result.err().unwrap_or_else(|| Failure::io("cli::run: no report")), None);
    };
    report_ref.wall_time_s = start.elapsed().as_secs_f64();
    let mut code = match &result {
        Ok(verified) if *verified => EXIT_OK,
        Ok(_) => EXIT_VERIFY,
        Err(f) => f.code,
    };
    let mut message = result.err().map(|f| {
        report_ref.messages.push(f.message.clone());
        f.message
    });
    if let Some(path) = &cfg.output.report {
        if let Err(e) = report_ref.write(path) {
            code = code.max(EXIT_SOLVER);
            message.get_or_insert(e);
        }
    }
    Outcome { code, report, message }
}

fn weight(grid: &Arc<Grid>, w: &WeightSpec) -> ScalarField {
    ScalarField::sample(grid, |x| w.eval(x))
}

/// Runs the configured mode. `Ok(false)` means verify mode rejected the input.
fn execute(cfg: &RunConfig, threads: usize) -> (Option<RunReport>, Result<bool, Failure>) {
    let d = &cfg.domain;
    let domain = match Domain::new(d.kind, &d.params, d.n, d.center.as_deref()) {
        Ok(dom) => dom,
        Err(e) => return (None, Err(e.into())),
    };
    let grid = match build_grid(&domain, d.h) {
        Ok(g) => Arc::new(g),
        Err(e) => return (None, Err(e.into())),
    };
    let provenance = Provenance {
        dims: grid.dims().to_vec(),
        interior_nodes: grid.interior_count(),
        h: grid.h(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads,
        determinism: cfg.determinism,
    };
    let mut report = RunReport::new(cfg, provenance, domain.is_heuristic());
    let result = dispatch(cfg, &domain, &grid, &mut report);
    (Some(report), result)
}

fn dispatch(cfg: &RunConfig, domain: &Domain, grid: &Arc<Grid>, report: &mut RunReport) -> Result<bool, Failure> {
    let p = &cfg.problem;
    let m = p.m;
    let field = match p.mode {
        Mode::Dirichlet => Some(run_dirichlet(cfg, grid, report)?),
        Mode::Eigen => Some(run_eigen(cfg, domain, grid, report)?),
        Mode::Bounds => Some(run_bounds(cfg, domain, grid, report)?.u1),
        Mode::Bifurcate => Some(run_bifurcate(cfg, grid, report)?),
        Mode::Radial => None,
        Mode::Verify => {
            let (ok, u) = run_verify(cfg, domain, grid, report)?;
            report.flag("verify_pass", ok);
            write_field(cfg, &u, m)?;
            return Ok(ok);
        }
    };
    if p.mode == Mode::Radial {
        let profile = add_radial(cfg, domain, report)?;
        write_radial(cfg, &profile)?;
    }
    if let Some(u) = field {
        write_field(cfg, &u, m)?;
    }
    Ok(true)
}

fn run_dirichlet(cfg: &RunConfig, grid: &Arc<Grid>, report: &mut RunReport) -> Result<ScalarField, Failure> {
    let m = cfg.problem.m;
    let rhs = cfg.problem.rhs.as_ref().expect("validated");
    let h = weight(grid, rhs);
    let sol = solve_sigma_m(grid, m, &h, &cfg.solver, None)?;
    report.scalar("residual", sol.residual);
    report.scalar("newton_iterations", sol.newton_iterations as f64);
    report.scalar("u_min", sol.u.interior_min());
    match energy_e(&sol.u, m) {
        Ok(e) => report.scalar("energy", e),
        Err(e) => report.messages.push(e.to_string()),
    }
    Ok(sol.u)
}

/// Solves for the first eigenpair with the configured method(s); inverse
/// iteration wins when both run.
fn solve_eigen(cfg: &RunConfig, grid: &Arc<Grid>, f: &ScalarField, report: &mut RunReport) -> Result<EigenResult, Failure> {
    let m = cfg.problem.m;
    let path = match cfg.problem.method {
        EigenMethodChoice::InverseIteration => None,
        _ => Some(continuity_path(grid, m, f, &cfg.solver, &cfg.path_policy)?),
    };
    if let Some(pr) = &path {
        report.scalar("lambda1_path", pr.lambda1);
        report.scalar("path_error_bar", pr.lambda_error);
        report.scalar("path_steps", pr.path.len() as f64);
        if let Some(b) = pr.blowup_ratio {
            report.scalar("blowup_ratio", b);
        }
    }
    let primary = match (cfg.problem.method, path) {
        (EigenMethodChoice::ContinuityPath, Some(pr)) => pr,
        (_, path) => {
            let inv = inverse_iteration(grid, m, f, &cfg.solver, None)?;
            report.scalar("lambda1_inverse", inv.lambda1);
            if let Some(pr) = path {
                report.scalar("method_rel_gap", (pr.lambda1 - inv.lambda1).abs() / inv.lambda1);
            }
            inv
        }
    };
    report.label("method", format!("{:?}", primary.method));
    report.scalar("lambda1", primary.lambda1);
    report.scalar("residual", primary.residual);
    report.scalar("iterations", primary.iterations as f64);
    report.scalar("newton_iterations", primary.newton_iterations as f64);
    Ok(primary)
}

fn add_diagnostics(u: &ScalarField, f: &ScalarField, m: usize, lambda: f64, report: &mut RunReport) {
    let diag = verify_eigenpair(u, f, m, lambda);
    report.scalar("equation_residual", diag.equation_residual);
    report.scalar("normalization_defect", diag.normalization_defect);
    report.scalar("boundary_defect", diag.boundary_defect);
    report.scalar("min_cone_slack", diag.min_cone_slack);
    if let Some(r) = diag.rayleigh_defect {
        report.scalar("rayleigh_defect", r);
    }
}

fn add_bounds(b: &BoundsReport, report: &mut RunReport) {
    report.scalar("lower_alexandrov", b.lower_alexandrov);
    report.flag("bound_alexandrov", b.flags.alexandrov);
    if let (Some(v), Some(ok)) = (b.lower_diam, b.flags.diam) {
        report.scalar("lower_diam", v);
        report.flag("bound_diam", ok);
    }
    if let (Some(v), Some(ok)) = (b.upper_laplacian, b.flags.laplacian) {
        report.scalar("upper_laplacian", v);
        report.flag("bound_laplacian", ok);
    }
    if let (Some(v), Some(ok)) = (b.upper_inscribed_ball, b.flags.inscribed_ball) {
        report.scalar("upper_inscribed_ball", v);
        report.flag("bound_inscribed_ball", ok);
    }
    report.label("inscribed_ball_label", label_name(b.inscribed_ball_label));
    report.flag("bounds_pass", b.pass);
}

fn label_name(l: RadialLabel) -> &'static str {
    match l {
        RadialLabel::Eigenvalue => "eigenvalue",
        RadialLabel::RayleighWitness => "rayleigh_witness",
    }
}

fn run_eigen(cfg: &RunConfig, domain: &Domain, grid: &Arc<Grid>, report: &mut RunReport) -> Result<ScalarField, Failure> {
    let p = &cfg.problem;
    let m = p.m;
    let f = weight(grid, &p.f);
    let eig = solve_eigen(cfg, grid, &f, report)?;
    add_diagnostics(&eig.u1, &f, m, eig.lambda1, report);
    match rayleigh(&eig.u1, &f, m) {
        Ok(r) => report.scalar("rayleigh", r),
        Err(e) => report.messages.push(e.to_string()),
    }
    if p.uniqueness_starts >= 2 {
        let u = uniqueness_probe(grid, m, &f, &cfg.solver, p.uniqueness_starts, p.seed)?;
        report.scalar("uniqueness_lambda_spread", u.lambda_spread);
        report.scalar("uniqueness_function_spread", u.function_spread);
    }
    let mu1 = (m == 1 && p.f.is_one()).then(|| domain.n() as f64 * eig.lambda1);
    let b = bounds_report(domain, &f, m, eig.lambda1, p.f.is_one(), mu1)?;
    add_bounds(&b, report);
    if domain.kind() == DomainKind::Ball && p.f.is_one() {
        let profile = add_radial(cfg, domain, report)?;
        report.scalar("radial_rel_gap", (eig.lambda1 - profile.lambda) / profile.lambda);
        write_radial(cfg, &profile)?;
    }
    Ok(eig.u1)
}

fn mu1_for(cfg: &RunConfig, grid: &Arc<Grid>, lambda1: f64) -> Result<f64, Failure> {
    let n = grid.n() as f64;
    if cfg.problem.m == 1 && cfg.problem.f.is_one() {
        return Ok(n * lambda1);
    }
    let ones = ScalarField::sample(grid, |_| 1.0);
    Ok(n * inverse_iteration(grid, 1, &ones, &cfg.solver, None)?.lambda1)
}

fn run_bounds(cfg: &RunConfig, domain: &Domain, grid: &Arc<Grid>, report: &mut RunReport) -> Result<EigenResult, Failure> {
    let p = &cfg.problem;
    let f = weight(grid, &p.f);
    let eig = solve_eigen(cfg, grid, &f, report)?;
    let mu1 = mu1_for(cfg, grid, eig.lambda1)?;
    report.scalar("mu1", mu1);
    let b = bounds_report(domain, &f, p.m, eig.lambda1, p.f.is_one(), Some(mu1))?;
    add_bounds(&b, report);
    Ok(eig)
}

fn run_bifurcate(cfg: &RunConfig, grid: &Arc<Grid>, report: &mut RunReport) -> Result<ScalarField, Failure> {
    let p = &cfg.problem;
    let m = p.m;
    let psi = p.psi.as_ref().expect("validated");
    let gamma0 = p.gamma0.expect("validated");
    let lambda1 = match p.lambda1 {
        Some(l) => l,
        None => {
            let ones = ScalarField::sample(grid, |_| 1.0);
            inverse_iteration(grid, m, &ones, &cfg.solver, None)?.lambda1
        }
    };
    report.scalar("lambda1", lambda1);
    report.scalar("gamma0", gamma0);
    let res = solve_bifurcation(grid, m, psi, gamma0, lambda1, &cfg.solver, &cfg.continuation)?;
    report.scalar("residual", res.residual);
    report.scalar("newton_iterations", res.newton_iterations as f64);
    report.scalar("continuation_steps", res.schedule.len() as f64);
    report.scalar("gamma", res.gamma);
    report.scalar("subsolution_scale", res.subsolution_scale);
    report.scalar("min_slope", res.min_slope);
    report.scalar("u_min", res.u.interior_min());
    if let Some(g) = res.fixed_point_gap {
        report.scalar("fixed_point_gap", g);
    }
    if p.uniqueness_starts >= 2 {
        let s = check_uniqueness_bifurcation(grid, m, psi, gamma0, lambda1, &cfg.solver, p.uniqueness_starts, p.seed)?;
        report.scalar("uniqueness_spread", s.spread);
    }
    Ok(res.u)
}

fn add_radial(cfg: &RunConfig, domain: &Domain, report: &mut RunReport) -> Result<RadialProfile, Failure> {
    let (n, m) = (domain.n(), cfg.problem.m);
    let radius = domain.params()[0];
    let (lambda, profile) = radial_eigen_shoot(n, m, radius, cfg.problem.radial_tol)?;
    report.scalar("radial_lambda", lambda);
    report.scalar("paraboloid_witness", paraboloid_witness(n, m, radius));
    report.label("radial_label", label_name(radial_label(n, m)));
    Ok(profile)
}

/// Recomputes the eigenpair and checks the claimed `lambda1` against it and
/// against every geometric bound.
fn run_verify(cfg: &RunConfig, domain: &Domain, grid: &Arc<Grid>, report: &mut RunReport) -> Result<(bool, ScalarField), Failure> {
    let p = &cfg.problem;
    let claimed = p.lambda1.expect("validated");
    let f = weight(grid, &p.f);
    let eig = solve_eigen(cfg, grid, &f, report)?;
    report.scalar("lambda1_claimed", claimed);
    let gap = (claimed - eig.lambda1).abs() / eig.lambda1;
    report.scalar("lambda1_rel_gap", gap);
    add_diagnostics(&eig.u1, &f, p.m, claimed, report);
    let mu1 = mu1_for(cfg, grid, eig.lambda1)?;
    report.scalar("mu1", mu1);
    let b = bounds_report(domain, &f, p.m, claimed, p.f.is_one(), Some(mu1))?;
    add_bounds(&b, report);
    let within = gap <= p.verify_tol;
    report.flag("lambda1_within_tol", within);
    if !within {
        report.messages.push(format!(
            "cli::verify: claimed lambda1 {claimed} differs from computed {} by {gap:e} (tolerance {})",
            eig.lambda1, p.verify_tol
        ));
    }
    if !b.pass {
        report.messages.push("cli::verify: claimed lambda1 violates a geometric bound".into());
    }
    Ok((within && b.pass, eig.u1))
}

fn csv_err(e: impl std::fmt::Display) -> Failure {
    Failure::io(format!("cli::run: csv output: {e}"))
}

fn write_field(cfg: &RunConfig, u: &ScalarField, m: usize) -> Result<(), Failure> {
    let Some(path) = &cfg.output.field_csv else {
        return Ok(());
    };
    let grid = u.grid();
    let dim = grid.dim();
    let hess = hessian_field(u);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let names = ["x1", "y1", "x2", "y2"];
    let mut header: Vec<&str> = names[..dim].to_vec();
    header.extend(["u", "sigma_m", "cone_slack"]);
    w.write_record(&header).map_err(csv_err)?;
    let values = u.values();
    for node in 0..grid.node_count() {
        let x = grid.coords(node);
        let mut row: Vec<String> = x[..dim].iter().map(|v| v.to_string()).collect();
        row.push(values[node].to_string());
        match grid.interior_index(node) {
            Some(i) => {
                let s = spectrum(&hess[i]);
                row.push(sigma_k(&s, m).map_err(Failure::from)?.to_string());
                row.push(cone_slack(&s, m).to_string());
            }
            None => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

fn write_radial(cfg: &RunConfig, profile: &RadialProfile) -> Result<(), Failure> {
    let Some(path) = &cfg.output.radial_csv else {
        return Ok(());
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "v", "dv"]).map_err(csv_err)?;
    for ((t, v), dv) in profile.t.iter().zip(&profile.v).zip(&profile.dv) {
        w.write_record([t.to_string(), v.to_string(), dv.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
