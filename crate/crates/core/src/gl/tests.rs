use approx::assert_relative_eq;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bulk::{g_interpolant, GEstimate, GInterpolant};
use crate::geometry::Point;

fn unit_field(_: Point) -> f64 {
    1.0
}

fn random_state(p: &GLProblem, seed: u64) -> GLState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = (0..p.grid().len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut s = p.state_from(psi);
    for v in s.east.iter_mut().chain(s.north.iter_mut()) {
        *v += rng.gen_range(-0.3..0.3);
    }
    s
}

fn toy_table() -> GInterpolant {
    let est: Vec<GEstimate> = [(0.25, -0.3), (0.5, -0.12), (0.75, -0.03)]
        .iter()
        .map(|&(b, g)| GEstimate { b, g_est: g, bracket_lo: g, bracket_hi: g, c_emp: 0.0 })
        .collect();
    g_interpolant(&est).unwrap()
}

#[test]
fn normal_state_has_zero_energy() {
    let d = Domain::disk([0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
    let p = GLProblem::new(5.0, 3.0, &unit_field, &d).unwrap();
    assert_eq!(gl_energy(&p.normal_state(), &p), 0.0);
    let r = euler_lagrange_residual(&p.normal_state(), &p);
    assert_eq!((r.psi, r.potential, r.boundary), (0.0, 0.0, 0.0));
}

#[test]
fn constant_state_at_zero_field() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    let kappa = 3.0;
    let p = GLProblem::new(kappa, 1.0, &|_: Point| 0.0, &d).unwrap();
    let e = p.energy(&p.constant_state(Complex64::new(1.0, 0.0)));
    assert_relative_eq!(e, -0.5 * kappa * kappa, max_relative = 1e-14);
}

#[test]
fn global_phase_invariance() {
    let d = Domain::disk([0.1, 0.0], 0.9, 1.0 / 20.0).unwrap();
    let p = GLProblem::new(4.0, 2.0, &|x: Point| 1.0 + 0.3 * x[0], &d).unwrap();
    let s = random_state(&p, 3);
    let e = p.energy(&s);
    for rot in [Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, -1.0)] {
        let mut t = s.clone();
        t.psi.iter_mut().for_each(|z| *z = Complex64::new(rot.re * z.re - rot.im * z.im, rot.re * z.im + rot.im * z.re));
        assert_eq!(p.energy(&t), e);
    }
    let mut t = s.clone();
    t.psi.iter_mut().for_each(|z| *z *= Complex64::from_polar(1.0, 0.7));
    assert_relative_eq!(p.energy(&t), e, max_relative = 1e-13);
}

#[test]
fn gradient_matches_finite_differences() {
    let d = Domain::disk([0.0, 0.0], 1.0, 0.25).unwrap();
    let p = GLProblem::new(2.0, 1.5, &|x: Point| 1.0 + 0.2 * x[1], &d).unwrap();
    let s = random_state(&p, 9);
    let x = p.pack(&s);
    let mut g = vec![0.0; x.len()];
    p.evaluate(&x, Some(&mut g));
    let e = |x: &[f64]| p.total(&p.evaluate(x, None));
    let eps = 1e-6;
    let mut checked = 0;
    for k in (0..x.len()).step_by(7) {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += eps;
        xm[k] -= eps;
        let fd = (e(&xp) - e(&xm)) / (2.0 * eps);
        assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "slot {k}: fd {fd} vs {}", g[k]);
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn gauge_transform_keeps_energy() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    let p = GLProblem::new(3.0, 2.0, &unit_field, &d).unwrap();
    let s = random_state(&p, 1);
    let chi: Vec<f64> = p.grid().points().map(|x| (3.0 * x[0]).sin() * x[1]).collect();
    let mut t = s.clone();
    t.gauge_transform(&chi);
    assert_relative_eq!(p.energy(&t), p.energy(&s), max_relative = 1e-12);
}

#[test]
fn projection_is_divergence_free_and_energy_neutral() {
    let d = Domain::disk([0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
    let p = GLProblem::new(3.0, 2.0, &unit_field, &d).unwrap();
    let mut s = random_state(&p, 5);
    let e = p.energy(&s);
    let div = p.project(&mut s).unwrap();
    assert!(div < 1e-7, "{div}");
    assert_relative_eq!(p.energy(&s), e, max_relative = 1e-10);
}

#[test]
fn random_state_is_not_critical() {
    let d = Domain::unit_square(0.1).unwrap();
    let p = GLProblem::new(3.0, 2.0, &unit_field, &d).unwrap();
    let r = p.residuals(&random_state(&p, 2));
    assert!(r.psi > 0.0 && r.potential > 0.0 && r.boundary > 0.0);
}

#[test]
fn superconducting_minimizer() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    let tol = 1e-6;
    let (p, run) = minimize_gl(4.0, 2.0, &unit_field, &d, tol).unwrap();
    assert!(run.energy < 0.0);
    assert!(run.residuals.max() <= 10.0 * tol, "{:?}", run.residuals);
    assert!(run.state.sup_norm() <= 1.0 + 1e-6);
    assert!(run.state.divergence < 1e-7);
    assert!(p.bounds(&run).hold(tol));
    let l4 = l4_identity_check(&run.state, &p, 0.0);
    assert!(l4.identity_defect <= 10.0 * tol * 16.0, "{l4:?}");
}

#[test]
fn normal_regime_minimizer() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    let (p, run) = minimize_gl(3.0, 9.0, &unit_field, &d, 1e-6).unwrap();
    assert!(run.energy.abs() < 1e-6 * 9.0 * p.area(), "{}", run.energy);
    assert!(run.state.sup_norm() < 1e-3);
}

#[test]
fn gauge_equivalent_start_reaches_same_energy() {
    let d = Domain::unit_square(1.0 / 12.0).unwrap();
    let tol = 1e-7;
    let p = GLProblem::new(4.0, 2.0, &unit_field, &d).unwrap();
    let s = p.constant_state(Complex64::new(0.8, 0.1));
    let a = p.minimize(s.clone(), tol).unwrap();
    let mut t = s;
    let chi: Vec<f64> = p.grid().points().map(|x| 0.3 * x[0] * x[0] - 0.2 * x[1]).collect();
    t.gauge_transform(&chi);
    let b = p.minimize(t, tol).unwrap();
    assert!((a.energy - b.energy).abs() <= 10.0 * tol * a.energy.abs(), "{} vs {}", a.energy, b.energy);
}

#[test]
fn effective_energy_cases() {
    let g = toy_table();
    let d = Domain::unit_square(0.05).unwrap();
    let e = effective_energy(&unit_field, 1.5, 0.125, &g, &d).unwrap();
    assert_eq!(e.total, 0.0);
    let e = effective_energy(&unit_field, 0.0, 0.125, &g, &d).unwrap();
    let n = e.centers.len() as f64;
    assert_relative_eq!(e.total, -0.5 * n / 64.0, max_relative = 1e-14);
    let e = effective_energy(&unit_field, 0.5, 0.125, &g, &d).unwrap();
    assert_relative_eq!(e.total, n / 64.0 * g.eval(0.5), max_relative = 1e-14);
    assert!(matches!(effective_energy(&unit_field, 0.5, 2.0, &g, &d), Err(Error::EmptyRegion(_))));
}

#[test]
fn jensen_equality_for_constant_field() {
    let g = toy_table();
    let d = Domain::unit_square(0.05).unwrap();
    let j = jensen_check(&unit_field, 0.4, 0.2, &g, &d).unwrap();
    assert!((j.lhs - j.rhs).abs() < 1e-15);
    assert!(j.holds(0.0));
    let j = jensen_check(&|x: Point| 1.0 + x[0] * x[1], 2.0, 0.2, &g, &d).unwrap();
    assert_eq!((j.lhs, j.rhs), (0.0, 0.0));
}

#[test]
fn jensen_for_varying_field() {
    let g = toy_table();
    let d = Domain::unit_square(0.05).unwrap();
    let j = jensen_check(&|x: Point| 0.6 + 0.8 * x[0], 0.5, 0.25, &g, &d).unwrap();
    assert!(j.lhs >= j.rhs - 1e-14 && j.lhs > j.rhs, "{j:?}");
}

#[test]
fn trial_state_vanishes_above_critical_field() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    let p = GLProblem::new(4.0, 6.0, &unit_field, &d).unwrap();
    let t = trial_state(&unit_field, 0.25, &p).unwrap();
    assert!(t.psi.iter().all(|z| z.norm() == 0.0));
    assert!(t.cells.iter().all(|c| c.m0 == 0.0 && c.b_hat >= 1.0));
}

#[test]
fn one_cell_trial_state() {
    let d = Domain::square(-0.5, 0.5, -0.5, 0.5, 1.0 / 32.0).unwrap();
    let p = GLProblem::new(8.0, 4.0, &unit_field, &d).unwrap();
    let t = trial_state(&unit_field, 1.0, &p).unwrap();
    assert_eq!(t.cells.len(), 1);
    assert!(t.cells[0].m0 < 0.0);
    let sup = t.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(sup > 0.1 && sup <= 1.0 + 1e-9, "{sup}");
    let e_trial = p.energy(&p.state_from(t.psi));
    let run = p.minimize(p.constant_state(Complex64::new(1.0, 0.0)), 1e-6).unwrap();
    assert!(run.energy <= e_trial && e_trial < 0.0, "{} {}", run.energy, e_trial);
}

#[test]
fn cutoff_profile() {
    let ell = 0.1;
    assert_eq!(boundary_cutoff(0.05, ell), 0.0);
    assert_eq!(boundary_cutoff(0.25, ell), 1.0);
    let slope = (0..1000).map(|k| {
        let x = k as f64 * 3e-4;
        (boundary_cutoff(x + 1e-6, ell) - boundary_cutoff(x, ell)) / 1e-6
    });
    assert!(slope.fold(0.0, f64::max) <= CUTOFF_C0 / ell);
}

#[test]
fn eigen_upper_dominates_lowest_eigenvalue() {
    let d = Domain::disk([0.0, 0.0], 1.0, 1.0 / 32.0).unwrap();
    let (e, run) = eigen_upper_via_gl(&unit_field, 60.0, 0.5, &d, 1.0, 1e-6, true).unwrap();
    let lambda = e.lambda.unwrap();
    assert!(e.quotient >= lambda * (1.0 - 1e-9), "{} < {lambda}", e.quotient);
    assert!(e.quotient.is_finite() && run.energy < 0.0);
}

#[test]
fn eigen_upper_refuses_normal_state() {
    let d = Domain::unit_square(1.0 / 16.0).unwrap();
    // b = 0.9 / 0.1 = 9: far above the critical field.
    let r = eigen_upper_via_gl(&unit_field, 20.0, 0.1, &d, 0.1, 1e-6, false);
    assert!(matches!(r, Err(Error::DegenerateOrderParameter)), "{r:?}");
}

#[test]
fn snapshot_round_trip() {
    let d = Domain::unit_square(0.1).unwrap();
    let p = GLProblem::new(3.0, 2.0, &unit_field, &d).unwrap();
    let s = random_state(&p, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.mcf");
    s.write_snapshot(&path).unwrap();
    let (g, layers) = crate::io::read_mcf1(&path).unwrap();
    assert_eq!(g, s.grid);
    assert_eq!(layers.len(), 4);
    assert_eq!(layers[0][7], s.psi[7].re);
}
