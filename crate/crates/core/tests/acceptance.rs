//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance -- 4 7` runs a subset. Runtime
//! budgets are part of each criterion. Criteria 8 and 9 reuse the g table of
//! criterion 7, cached under the cargo target directory.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maglab::bulk::{self, BulkTable, GInterpolant};
use maglab::cli::{self, AveragingParams, BulkParams, EigParams, FieldSpec, GlParams, GlRow};
use maglab::field::potential_from_field;
use maglab::gl::{self, build_reference_potential_on, GLProblem};
use maglab::grid::Grid;
use maglab::random::FourierField;
use maglab::spectral::{self, radial_cutoff, EIG_TOL};
use maglab::{Domain, Result};

type Verdict = Result<(bool, String)>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "averaging inequality", budget: minutes(1), run: averaging_inequality },
        Criterion { id: 2, name: "constant-field exactness", budget: Duration::from_secs(5), run: constant_field },
        Criterion { id: 3, name: "linear-field closed form", budget: Duration::from_secs(5), run: linear_field },
        Criterion { id: 4, name: "non-magnetic eigenvalues", budget: Duration::from_secs(30), run: nonmagnetic_eigenvalues },
        Criterion { id: 5, name: "diamagnetic lower bound", budget: minutes(1), run: diamagnetic_bound },
        Criterion { id: 6, name: "eigenvalue trend", budget: minutes(10), run: eigenvalue_trend },
        Criterion { id: 7, name: "bulk anchors", budget: minutes(20), run: bulk_anchors },
        Criterion { id: 8, name: "GL structural suite", budget: minutes(15), run: gl_structure },
        Criterion { id: 9, name: "GL energy at desk scale", budget: minutes(30), run: gl_desk_scale },
        Criterion { id: 10, name: "reference potential", budget: minutes(1), run: reference_potential },
    ]
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria().into_iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let verdict = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (ok, detail) = match verdict {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} [{}] {:.1} s (budget {} s): {}",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn summarize(checks: &[cli::Check]) -> (bool, String) {
    let ok = checks.iter().all(|c| c.passed);
    (ok, checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "))
}

fn averaging_inequality() -> Verdict {
    let p = AveragingParams {
        field: FieldSpec::Random { seed: 0, lower: None },
        fields: 100,
        ells: vec![0.25, 0.125, 0.0625],
        samples: 128,
        center: [0.0, 0.0],
    };
    let (rows, checks) = cli::run_averaging(&p)?;
    let (ok, detail) = summarize(&checks[..1]);
    Ok((ok && rows.len() == 300, detail))
}

fn constant_field() -> Verdict {
    let mut all = Vec::new();
    for (c, center) in [(1.0, [0.0, 0.0]), (-2.75, [0.3, -1.1]), (1e3, [5.0, 2.0])] {
        let p = AveragingParams { field: FieldSpec::Constant(c), fields: 1, ells: vec![1.0, 0.25, 0.0625], samples: 64, center };
        let (rows, _) = cli::run_averaging(&p)?;
        all.extend(rows);
    }
    let max = all.iter().map(|r| r.lhs).fold(0.0, f64::max);
    Ok((max <= 1e-20, format!("max ∫|A_new − A_av|² = {max:.3e} over {} cells", all.len())))
}

fn linear_field() -> Verdict {
    let p = AveragingParams { field: FieldSpec::Linear, fields: 1, ells: vec![1.0, 0.5, 0.125], samples: 256, center: [0.0, 0.0] };
    let (rows, _) = cli::run_averaging(&p)?;
    let devs: Vec<f64> = rows.iter().map(|r| r.lhs / r.ell.powi(6) / (7.0 / 3240.0) - 1.0).collect();
    let worst = devs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    Ok((worst <= 0.01, format!("relative deviations from 7ℓ⁶/3240: {}", sci(&devs))))
}

fn nonmagnetic_eigenvalues() -> Verdict {
    let zero = |_: [f64; 2]| [0.0, 0.0];
    let h = 1.0 / 128.0;
    let square = Domain::unit_square(h)?;
    let disk = Domain::disk([0.0, 0.0], 1.0, h)?;
    let ls = spectral::lowest_eigenvalue(&spectral::assemble(&square, 0.0, &zero)?, EIG_TOL)?.lambda;
    let ld = spectral::lowest_eigenvalue(&spectral::assemble(&disk, 0.0, &zero)?, EIG_TOL)?.lambda;
    let j01_sq = 2.404_825_557_695_773_f64.powi(2);
    let es = ls / (2.0 * std::f64::consts::PI.powi(2)) - 1.0;
    let ed = ld / j01_sq - 1.0;
    Ok((es.abs() <= 0.005 && ed.abs() <= 0.005, format!("square λ = {ls:.5} (rel. err {es:.2e}), disk λ = {ld:.5} (rel. err {ed:.2e})")))
}

/// `(∫|(∇ − iσA)u|² − σ∫B|u|²) / (h²σ²‖u‖²)` for a random bump and a random field `B ≥ 1`.
fn diamagnetic_defect(seed: u64, sigma: f64, h: f64) -> Result<f64> {
    let domain = Domain::unit_square(h)?;
    let grid = Grid::for_domain(&domain);
    let field = FourierField::with_seed(seed).with_lower_bound(1.0, &grid.bbox());
    let b = field.sample(grid);
    let a = potential_from_field(&b, grid)?;
    let op = spectral::assemble_on(&domain, grid, sigma, &a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let center = [rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65)];
    let radius = rng.gen_range(0.15..0.3);
    let modes: Vec<([f64; 2], Complex64)> = (0..4)
        .map(|_| {
            let k = [rng.gen_range(-10..=10) as f64, rng.gen_range(-10..=10) as f64];
            (k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    let u: Vec<Complex64> = grid
        .points()
        .map(|p| {
            let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            let s: Complex64 = modes.iter().map(|(k, c)| c * Complex64::from_polar(1.0, k[0] * p[0] + k[1] * p[1])).sum();
            s * radial_cutoff(d / radius)
        })
        .collect();
    let u = op.restrict(&u);
    let b_nodes: Vec<f64> = op.nodes.iter().map(|&k| b.values[k]).collect();
    let (form, bound) = spectral::diamagnetic_lower(&op, &u, &b_nodes);
    let norm2: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h;
    Ok((form - bound) / (h * h * sigma * sigma * norm2))
}

fn diamagnetic_bound() -> Verdict {
    let (sigma, h) = (100.0, 1.0 / 64.0);
    // C is fitted once on calibration seeds disjoint from the 50 test seeds.
    let calibration = (1000..1010).map(|s| diamagnetic_defect(s, sigma, h)).collect::<Result<Vec<_>>>()?;
    let c_fit = 2.0 * calibration.iter().map(|d| (-d).max(0.0)).fold(0.0, f64::max);
    let tests = (0..50).map(|s| diamagnetic_defect(s, sigma, h)).collect::<Result<Vec<_>>>()?;
    let violations = tests.iter().filter(|&&d| d < -c_fit).count();
    let min = tests.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((violations == 0, format!("C = {c_fit:.3e}; {violations} of 50 violations; min normalized margin {min:.3e}")))
}

fn eigenvalue_trend() -> Verdict {
    let h = 1.0 / 64.0;
    let p = EigParams { domain: Domain::disk([0.0, 0.0], 3.0, h)?, field: FieldSpec::Constant(1.0), sigmas: vec![100.0, 200.0, 400.0], rho: 3.0 / 8.0, tol: EIG_TOL };
    let (rows, _) = cli::run_eig(&p)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 10.0 * EIG_TOL));
    let in_range = ratios.iter().all(|&r| (0.98..=1.5).contains(&r));
    let upper = rows.iter().all(|r| r.upper.is_some_and(|u| u >= r.lambda));
    let uppers: Vec<f64> = rows.iter().map(|r| r.upper.unwrap_or(f64::NAN) / r.sigma).collect();
    Ok((monotone && in_range && upper, format!("λ/σ = {ratios:.5?}; upper/σ = {uppers:.3?}; nonincreasing {monotone}, in [0.98, 1.5] {in_range}, upper ≥ λ {upper}")))
}

fn cache_path() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_g_table.json")
}

static TABLE: OnceLock<BulkTable> = OnceLock::new();

fn bulk_params() -> BulkParams {
    BulkParams { bs: bulk::default_b_grid(), r_list: bulk::DEFAULT_R_LIST.to_vec(), tol: bulk::DEFAULT_TOL }
}

fn bulk_anchors() -> Verdict {
    let (table, checks) = cli::run_bulk(&bulk_params())?;
    table.write_summary(&cache_path())?;
    let _ = TABLE.set(table);
    Ok(summarize(&checks))
}

/// The g table of criterion 7: from this run, else from the cache, else recomputed.
fn g_table() -> Result<GInterpolant> {
    if let Some(t) = TABLE.get() {
        return bulk::g_interpolant(&t.estimates);
    }
    let estimates = match bulk::read_summary(&cache_path()) {
        Ok(e) => e,
        Err(_) => {
            let table = BulkTable::compute(&bulk_params().bs, &bulk::DEFAULT_R_LIST, bulk::DEFAULT_TOL)?;
            table.write_summary(&cache_path())?;
            table.estimates
        }
    };
    bulk::g_interpolant(&estimates)
}

fn gl_structure() -> Verdict {
    let g = g_table()?;
    let mut notes = Vec::new();
    let mut ok = true;

    let domain = Domain::unit_square(1.0 / 64.0)?;
    let unit = |_: [f64; 2]| 1.0;
    let problem = GLProblem::new(8.0, 4.0, &unit, &domain)?;
    let normal = gl::gl_energy(&problem.normal_state(), &problem);
    ok &= normal == 0.0;
    notes.push(format!("𝒢(0, F) = {normal:e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi: Vec<Complex64> = (0..problem.grid().len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let state = problem.state_from(psi.clone());
    let e = gl::gl_energy(&state, &problem);
    let rotated: Vec<f64> = [Complex64::i(), -Complex64::new(1.0, 0.0), -Complex64::i()]
        .iter()
        .map(|w| gl::gl_energy(&problem.state_from(psi.iter().map(|z| z * w).collect()), &problem))
        .collect();
    let exact = rotated.iter().all(|&r| r == e);
    let theta = Complex64::from_polar(1.0, 0.731);
    let generic = gl::gl_energy(&problem.state_from(psi.iter().map(|z| z * theta).collect()), &problem);
    let rel = ((generic - e) / e).abs();
    ok &= exact && rel <= 1e-12;
    notes.push(format!("phase invariance exact under i, −1, −i: {exact}; generic phase rel. change {rel:.1e}"));

    let tol = gl::GL_TOL;
    let ell = 8f64.powf(-0.75);
    let random = FourierField::with_seed(3).with_lower_bound(1.0, &domain.outer.bbox());
    let mut rows = Vec::new();
    let (r, _) = gl::thm13_report(&unit, 8.0, 0.5, ell, &domain, &g, tol)?;
    rows.push(GlRow { seed: None, record: r, tol, version: maglab::ARTIFACT_VERSION.into() });
    let (r, _) = gl::thm13_report(&random, 8.0, 0.5, ell, &domain, &g, tol)?;
    rows.push(GlRow { seed: Some(3), record: r, tol, version: maglab::ARTIFACT_VERSION.into() });
    let checks = cli::gl_checks(&rows, false, domain.area());
    // The trend check needs a κ sweep; only the structural checks apply here.
    for c in checks.iter().filter(|c| c.name != "normalized gap trend") {
        ok &= c.passed;
        notes.push(c.to_string());
    }

    let mut worst = f64::INFINITY;
    let mut nontrivial = 0;
    for seed in 0..20 {
        let f = FourierField::with_seed(seed).with_lower_bound(0.5, &domain.outer.bbox());
        let j = gl::jensen_check(&f, 0.5, 0.125, &g, &domain)?;
        ok &= j.holds(1e-12 * j.area);
        worst = worst.min(j.lhs - j.rhs);
        nontrivial += usize::from(j.rhs < 0.0);
    }
    notes.push(format!("Jensen on 20 fields ({nontrivial} with ∫g(bB) < 0): min lhs − rhs = {worst:.3e}"));
    Ok((ok, notes.join("; ")))
}

fn gl_desk_scale() -> Verdict {
    let g = g_table()?;
    let h = 1.0 / 128.0;
    let square = Domain::unit_square(h)?;
    let sweep = GlParams { domain: square.clone(), field: FieldSpec::Constant(1.0), kappas: vec![8.0, 16.0, 32.0], b: 0.5, ell_exponent: -0.75, g_table: cache_path(), tol: gl::GL_TOL };
    let (rows, checks) = cli::run_gl(&sweep, &g)?;
    let (ok1, d1) = summarize(&checks);
    let strong = GlParams { kappas: vec![8.0], b: 2.0, ..sweep };
    let (rows2, checks2) = cli::run_gl(&strong, &g)?;
    let (ok2, d2) = summarize(&checks2);
    let e2: Vec<f64> = rows2.iter().map(|r| r.record.e_min).collect();
    Ok((ok1 && ok2 && rows.len() == 3, format!("b = ½: {d1}; b = 2: {d2}; E_min {}", sci(&e2))))
}

fn reference_potential() -> Verdict {
    let a0 = |p: [f64; 2]| [-0.5 * p[1], 0.5 * p[0]];
    // φ = (1 − |x|²)(1 + x₁)/4 solves −Δφ = 1 + 2x₁ with φ = 0 on the circle.
    let cubic = |p: [f64; 2]| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        [-0.5 * y * (1.0 + x), 0.5 * x * (1.0 + x) - 0.25 * (1.0 - r2)]
    };
    let hs = [1.0 / 64.0, 1.0 / 128.0];
    let mut errs = Vec::new();
    let mut errs_cubic = Vec::new();
    for h in hs {
        let disk = Domain::disk([0.0, 0.0], 1.0, h)?;
        let f = build_reference_potential_on(&|_: [f64; 2]| 1.0, &disk, Grid::for_domain(&disk))?;
        errs.push(f.interior_l2_error(a0));
        let f = build_reference_potential_on(&|p: [f64; 2]| 1.0 + 2.0 * p[0], &disk, Grid::for_domain(&disk))?;
        errs_cubic.push(f.interior_l2_error(cubic));
    }
    let c: Vec<f64> = errs.iter().zip(hs).map(|(e, h)| e / (h * h)).collect();
    let order = (errs_cubic[0] / errs_cubic[1]).log2();
    let bounded = c.iter().all(|&c| c <= 1.0);
    Ok((
        bounded && order >= 1.8,
        format!("B ≡ 1: ‖F − A₀‖ = {}, ‖F − A₀‖/h² = {}; B = 1 + 2x₁: errors {}, observed order {order:.2}", sci(&errs), sci(&c), sci(&errs_cubic)),
    ))
}
