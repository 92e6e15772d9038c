//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use mhessian::bifurcation::{check_uniqueness_bifurcation, solve_bifurcation, ContinuationOptions, PsiFamily};
use mhessian::bounds::{lower_bound_alexandrov, lower_bound_diam, upper_bound_laplacian};
use mhessian::dirichlet::{fixed_point_decreasing, solve_sigma_m};
use mhessian::eigen::{continuity_path, inverse_iteration, solve_path_point, EigenResult, LambdaPolicy};
use mhessian::functionals::{blocki_check, rayleigh};
use mhessian::geometry::build_grid;
use mhessian::hessian::{cone_slack, in_gamma_m, maclaurin_gap, sigma_k, HessianSpectrum};
use mhessian::radial::radial_eigen_shoot;
use mhessian::{Domain, Error, Grid, ScalarField, SolverConfig};
use mhessian_cli::RunReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// `j_{0,1}^2 / 4`.
const DISC: f64 = 1.445_796_490_736_696;
/// `j_{1,1}^2 / 8`.
const BALL2: f64 = 1.835_246_330_265_1;

const TOL_DISC: f64 = 0.01;
const MAX_DISC_SECONDS: f64 = 60.0;
const TOL_METHODS: f64 = 0.005;
const TOL_RAYLEIGH: f64 = 0.02;
const TOL_RAYLEIGH_RANDOM: f64 = 0.005;
const RAYLEIGH_FIELDS: usize = 10;
const TOL_SCALING_GRID: f64 = 0.02;
const TOL_SCALING_RADIAL: f64 = 1e-9;
const TOL_MONOTONE_RATIO: f64 = 0.02;
const TOL_BOUND_UPPER: f64 = 0.02;
const MIN_BLOWUP: f64 = 5.0;
const TOL_FIXEDPOINT_STEP: f64 = 1e-9;
const TOL_FIXEDPOINT_LIMIT: f64 = 1e-5;
const TOL_BIF_SPREAD: f64 = 1e-6;
const BIF_STARTS: usize = 3;
const TOL_BALL2_M1: f64 = 0.03;
const TOL_BALL2_M2: f64 = 0.05;
const BLOCKI_PAIRS: usize = 20;
const MAX_PROPERTY_SECONDS: f64 = 600.0;

const H_DISC: f64 = 1.0 / 64.0;
const H_BALL2: f64 = 1.0 / 12.0;

struct Gate {
    results: Vec<bool>,
}

impl Gate {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        println!("[{}] {id:>2}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push(pass);
    }
}

fn ball_grid(radius: f64, n: usize, h: f64) -> (Domain, Arc<Grid>) {
    let d = Domain::ball(radius, n).unwrap();
    let g = Arc::new(build_grid(&d, h).unwrap());
    (d, g)
}

fn ones(g: &Arc<Grid>) -> ScalarField {
    ScalarField::sample(g, |_| 1.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// An eigen run entering the bounds sandwich: domain, weight, `m`, `lambda1`, `mu1`.
struct SuiteRun {
    name: &'static str,
    domain: Domain,
    f: ScalarField,
    lambda1: f64,
    mu1: f64,
}

/// Admissible `m = 1` fields: solutions of `sigma_1(v) = h` for random positive `h`.
fn random_admissible(g: &Arc<Grid>, rng: &mut ChaCha8Rng, cfg: &SolverConfig) -> ScalarField {
    let a = rng.gen_range(0.2..1.0);
    let (b, c) = (rng.gen_range(-0.5..0.5) * a, rng.gen_range(-0.5..0.5) * a);
    let q = rng.gen_range(0.0..2.0);
    let k = rng.gen_range(0.5..3.0);
    let rhs = ScalarField::sample(g, |x| a + b * x[0] + c * x[1] + q * (k * x[0]).cos().powi(2));
    solve_sigma_m(g, 1, &rhs, cfg, None).unwrap().u
}

fn main() -> ExitCode {
    let cfg = SolverConfig::default();
    let mut gate = Gate { results: Vec::new() };
    let mut suite: Vec<SuiteRun> = Vec::new();

    // 1. Disc eigenvalue, timed on one thread.
    let (disc_dom, disc) = ball_grid(1.0, 1, H_DISC);
    let f1 = ones(&disc);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t0 = Instant::now();
    let inv: EigenResult = pool.install(|| inverse_iteration(&disc, 1, &f1, &cfg, None)).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let l_disc = inv.lambda1;
    gate.line(
        1,
        "disc eigenvalue",
        rel(l_disc, DISC) <= TOL_DISC && secs <= MAX_DISC_SECONDS,
        format!("lambda1 = {l_disc:.8}, oracle {DISC:.8}, rel err {:.2e} (tol {TOL_DISC}), {secs:.2} s single-threaded (max {MAX_DISC_SECONDS})", rel(l_disc, DISC)),
    );
    suite.push(SuiteRun { name: "disc", domain: disc_dom.clone(), f: f1.clone(), lambda1: l_disc, mu1: l_disc });

    // 2 and 7. Continuity path on the disc.
    let path = continuity_path(&disc, 1, &f1, &cfg, &LambdaPolicy::default()).unwrap();
    let gap = rel(path.lambda1, l_disc);
    gate.line(
        2,
        "method agreement",
        gap <= TOL_METHODS,
        format!("path {:.8} (error bar {:.1e}) vs inverse {l_disc:.8}, rel gap {gap:.2e} (tol {TOL_METHODS})", path.lambda1, path.lambda_error),
    );

    // 3. Rayleigh attainment and minimality.
    let r1 = rayleigh(&inv.u1, &f1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let quotients: Vec<f64> = (0..RAYLEIGH_FIELDS)
        .map(|_| rayleigh(&random_admissible(&disc, &mut rng, &cfg), &f1, 1).unwrap())
        .collect();
    let qmin = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    gate.line(
        3,
        "Rayleigh attainment",
        rel(r1, l_disc) <= TOL_RAYLEIGH && qmin >= l_disc * (1.0 - TOL_RAYLEIGH_RANDOM),
        format!(
            "R(u1) = {r1:.8} vs lambda1 {l_disc:.8} (rel {:.2e}, tol {TOL_RAYLEIGH}); min over {RAYLEIGH_FIELDS} random fields {qmin:.6} >= {:.6}",
            rel(r1, l_disc),
            l_disc * (1.0 - TOL_RAYLEIGH_RANDOM)
        ),
    );

    // 4 and 5. Scaling and monotonicity in the radius.
    let (r_unit, _) = radial_eigen_shoot(1, 1, 1.0, 1e-12).unwrap();
    let mut grid_ok = true;
    let mut radial_ok = true;
    let mut detail = Vec::new();
    let mut l_08 = f64::NAN;
    for radius in [0.5, 0.8] {
        let (dom, g) = ball_grid(radius, 1, H_DISC);
        let f = ones(&g);
        let l = inverse_iteration(&g, 1, &f, &cfg, None).unwrap().lambda1;
        let (lr, _) = radial_eigen_shoot(1, 1, radius, 1e-12).unwrap();
        let eg = rel(l, l_disc / (radius * radius));
        let er = rel(lr, r_unit / (radius * radius));
        grid_ok &= eg <= TOL_SCALING_GRID;
        radial_ok &= er <= TOL_SCALING_RADIAL;
        detail.push(format!("R = {radius}: grid rel {eg:.2e}, radial rel {er:.2e}"));
        if radius == 0.8 {
            l_08 = l;
        }
        suite.push(SuiteRun { name: if radius == 0.5 { "B_0.5" } else { "B_0.8" }, domain: dom, f, lambda1: l, mu1: l });
    }
    gate.line(
        4,
        "scaling law",
        grid_ok && radial_ok,
        format!("{} (tol {TOL_SCALING_GRID} grid, {TOL_SCALING_RADIAL:e} radial)", detail.join("; ")),
    );
    let ratio = l_08 / l_disc;
    gate.line(
        5,
        "domain monotonicity",
        l_disc < l_08 && rel(ratio, 1.5625) <= TOL_MONOTONE_RATIO,
        format!("lambda1(B_1) = {l_disc:.6} < lambda1(B_0.8) = {l_08:.6}, ratio {ratio:.6} vs 1.5625 (tol {TOL_MONOTONE_RATIO})"),
    );

    // 7.
    let blow = path.blowup_ratio.unwrap_or(0.0);
    let terminal = path.path.last().map_or(f64::NAN, |p| p.1);
    // 8. Fixed-point monotonicity.
    let lh = 0.5 * l_disc;
    let fp = fixed_point_decreasing(&disc, 1, |_, s| 1.0 - lh * s, &cfg).unwrap();
    let at_half = solve_path_point(&disc, 1, &f1, lh, &cfg).unwrap();
    let limit_gap = fp.u.sup_distance(&at_half);

    // 9. Bifurcation gate.
    let psi = PsiFamily::Affine { a: 1.0, b: lh };
    let opts = ContinuationOptions::default();
    let ok = solve_bifurcation(&disc, 1, &psi, lh, l_disc, &cfg, &opts);
    let refused = solve_bifurcation(&disc, 1, &psi, 1.1 * l_disc, l_disc, &cfg, &opts);
    let spread = check_uniqueness_bifurcation(&disc, 1, &psi, lh, l_disc, &cfg, BIF_STARTS, 9);

    // 10. Ball in C^2.
    let (b2_dom, b2) = ball_grid(1.0, 2, H_BALL2);
    let f2 = ones(&b2);
    let l2_m1 = inverse_iteration(&b2, 1, &f2, &cfg, None).unwrap().lambda1;
    let l2_m2 = inverse_iteration(&b2, 2, &f2, &cfg, None).unwrap().lambda1;
    let (rad_m2, _) = radial_eigen_shoot(2, 2, 1.0, 1e-12).unwrap();
    let mu1_b2 = 2.0 * l2_m1;
    suite.push(SuiteRun { name: "C^2 ball m=1", domain: b2_dom.clone(), f: f2.clone(), lambda1: l2_m1, mu1: mu1_b2 });
    suite.push(SuiteRun { name: "C^2 ball m=2", domain: b2_dom, f: f2, lambda1: l2_m2, mu1: mu1_b2 });

    // 6. Bounds over every eigen run above.
    let mut bounds_ok = true;
    let mut bdetail = Vec::new();
    for run in &suite {
        let lo = lower_bound_alexandrov(&run.domain, &run.f);
        let ld = lower_bound_diam(&run.domain);
        let up = upper_bound_laplacian(&run.domain, &run.f, run.mu1).unwrap();
        let ok = lo <= run.lambda1 && ld < run.lambda1 && run.lambda1 <= up * (1.0 + TOL_BOUND_UPPER);
        bounds_ok &= ok;
        bdetail.push(format!("{}: {lo:.4} , {ld:.4} < {:.4} <= {:.4}", run.name, run.lambda1, up * (1.0 + TOL_BOUND_UPPER)));
    }
    gate.line(6, "bounds sandwich", bounds_ok, bdetail.join("; "));
    gate.line(
        7,
        "blow-up signature",
        blow >= MIN_BLOWUP,
        format!("sup|u| ratio terminus / 0.9 lambda = {blow:.2} (min {MIN_BLOWUP}), terminal sup|u| = {terminal:.3e}"),
    );
    gate.line(
        8,
        "fixed-point monotonicity",
        fp.max_decrease <= TOL_FIXEDPOINT_STEP && limit_gap <= TOL_FIXEDPOINT_LIMIT,
        format!(
            "{} steps, max u_(j-1) - u_j = {:.2e} (tol {TOL_FIXEDPOINT_STEP:e}), limit vs path at 0.5 lambda1 {limit_gap:.2e} (tol {TOL_FIXEDPOINT_LIMIT:e})",
            fp.increments.len(),
            fp.max_decrease
        ),
    );
    let refused_ok = matches!(refused, Err(Error::PreconditionViolated { .. }));
    let spread_v = spread.as_ref().map_or(f64::INFINITY, |s| s.spread);
    let ok_detail = match &ok {
        Ok(r) => format!("gamma0 = 0.5 lambda1 solved (residual {:.1e})", r.residual),
        Err(e) => format!("gamma0 = 0.5 lambda1 failed: {e}"),
    };
    gate.line(
        9,
        "bifurcation gate",
        ok.is_ok() && refused_ok && spread_v <= TOL_BIF_SPREAD,
        format!(
            "{ok_detail}; gamma0 = 1.1 lambda1 {}; spread over {BIF_STARTS} schedules {spread_v:.2e} (tol {TOL_BIF_SPREAD:e})",
            if refused_ok { "refused with precondition error" } else { "NOT refused" }
        ),
    );
    let e1 = rel(l2_m1, BALL2);
    let e2 = rel(l2_m2, rad_m2);
    gate.line(
        10,
        "C^2 ball coverage",
        e1 <= TOL_BALL2_M1 && e2 <= TOL_BALL2_M2,
        format!(
            "m=1 {l2_m1:.6} vs {BALL2:.6} (rel {e1:.2e}, tol {TOL_BALL2_M1}); m=2 {l2_m2:.6} vs radial {rad_m2:.6}, gap {:+.3}% (tol {TOL_BALL2_M2})",
            100.0 * (l2_m2 - rad_m2) / rad_m2
        ),
    );

    // 11. Property sampling, timed as a whole.
    let t0 = Instant::now();
    let (cone_ok, cone_detail) = cone_properties();
    let (blocki_ok, blocki_detail) = blocki_pairs(&cfg);
    let (cmp_ok, cmp_detail) = comparison_principle(&cfg);
    let (det_ok, det_detail) = cli_determinism();
    let psecs = t0.elapsed().as_secs_f64();
    gate.line(
        11,
        "property suites",
        cone_ok && blocki_ok && cmp_ok && det_ok && psecs <= MAX_PROPERTY_SECONDS,
        format!("{cone_detail}; {blocki_detail}; {cmp_detail}; {det_detail}; {psecs:.1} s (max {MAX_PROPERTY_SECONDS})"),
    );

    let passed = gate.results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", gate.results.len());
    if passed == gate.results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Cone convexity, Maclaurin and concavity of `sigma_m^{1/m}` on random spectra.
fn cone_properties() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut samples = 0;
    let mut ok = true;
    while samples < 5000 {
        let n = rng.gen_range(1..=2usize);
        let m = rng.gen_range(1..=n);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let (sa, sb) = (HessianSpectrum::from_values(&a), HessianSpectrum::from_values(&b));
        if !(in_gamma_m(&sa, m, 0.0) && in_gamma_m(&sb, m, 0.0)) {
            continue;
        }
        samples += 1;
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let sm = HessianSpectrum::from_values(&mid);
        let g = |s: &HessianSpectrum| sigma_k(s, m).unwrap().powf(1.0 / m as f64);
        ok &= cone_slack(&sm, m) > 0.0;
        ok &= maclaurin_gap(&sa, m).unwrap() >= -1e-12;
        ok &= g(&sm) >= 0.5 * (g(&sa) + g(&sb)) - 1e-12;
    }
    (ok, format!("cone/Maclaurin/concavity on {samples} spectra {}", if ok { "ok" } else { "VIOLATED" }))
}

fn blocki_pairs(cfg: &SolverConfig) -> (bool, String) {
    let (_, g) = ball_grid(1.0, 1, 1.0 / 32.0);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..BLOCKI_PAIRS {
        let w = random_admissible(&g, &mut rng, cfg);
        let v = random_admissible(&g, &mut rng, cfg);
        let c = blocki_check(&w, &v, 1).unwrap();
        ok &= c.pass;
        worst = worst.max(c.lhs / c.rhs);
    }
    (ok, format!("Blocki on {BLOCKI_PAIRS} pairs, max lhs/rhs {worst:.3}"))
}

/// `h1 <= h2` must give `u2 <= u1`.
fn comparison_principle(cfg: &SolverConfig) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (n, m, h) in [(1, 1, 1.0 / 32.0), (2, 1, 0.25), (2, 2, 0.25)] {
        let (_, g) = ball_grid(1.0, n, h);
        for _ in 0..3 {
            let a = rng.gen_range(0.5..1.5);
            let bump = rng.gen_range(0.0..1.0);
            let c = rng.gen_range(-0.4..0.4);
            let h1 = ScalarField::sample(&g, |x| a + c * x[0]);
            let h2 = ScalarField::sample(&g, |x| a + c * x[0] + bump * (1.0 - x[1] * x[1]).max(0.0));
            let u1 = solve_sigma_m(&g, m, &h1, cfg, None).unwrap().u;
            let u2 = solve_sigma_m(&g, m, &h2, cfg, None).unwrap().u;
            let d = u2
                .interior_values()
                .iter()
                .zip(u1.interior_values())
                .map(|(x, y)| x - y)
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(d);
            ok &= d <= 1e-10;
        }
    }
    (ok, format!("comparison principle on 9 pairs, max(u2 - u1) = {worst:.1e}"))
}

/// Same config at 1 and 4 threads through the binary: scalars must match bitwise.
fn cli_determinism() -> (bool, String) {
    let dir = tempfile::TempDir::new().unwrap();
    let reports: Vec<RunReport> = ["1", "4"]
        .iter()
        .map(|t| {
            let report = dir.path().join(format!("r{t}.json"));
            let config = json!({
                "domain": {"kind": "ball", "params": [1.0], "n": 2, "h": 0.2},
                "problem": {"mode": "eigen", "m": 2, "method": "both"},
                "output": {"report": report}
            });
            let path = dir.path().join(format!("c{t}.json"));
            std::fs::write(&path, config.to_string()).unwrap();
            let status = Command::new(env!("CARGO_BIN_EXE_mhessian"))
                .arg("run")
                .arg(&path)
                .env("MHESSIAN_THREADS", t)
                .output()
                .unwrap()
                .status;
            assert!(status.success());
            RunReport::read(&report).unwrap()
        })
        .collect();
    let same = reports[0].scalars.len() == reports[1].scalars.len()
        && reports[0]
            .scalars
            .iter()
            .all(|(k, v)| reports[1].scalars.get(k).is_some_and(|w| w.to_bits() == v.to_bits()));
    (same, format!("exact-mode scalars at 1 and 4 threads {}", if same { "bitwise equal" } else { "DIFFER" }))
}
