use num_complex::Complex64;
use proptest::prelude::*;

use maglab::bulk::{self, Boundary, ReducedGLProblem};
use maglab::cli::ExperimentConfig;
use maglab::field::{averaging_gap, canonical_potential, potential_at};
use maglab::lattice::build_lattice;
use maglab::random::FourierField;
use maglab::spectral;
use maglab::{Cell, Domain};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // For B = c + d·x the ray formula integrates to (c + 2 d·x/3) A₀(x).
    #[test]
    fn potential_of_affine_field(c in -2.0..2.0f64, d1 in -2.0..2.0f64, d2 in -2.0..2.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let b = move |p: [f64; 2]| c + d1 * p[0] + d2 * p[1];
        let a = potential_at(&b, [0.0, 0.0], [x, y]).unwrap();
        let f = c + 2.0 * (d1 * x + d2 * y) / 3.0;
        let a0 = canonical_potential([x, y]);
        prop_assert!((a[0] - f * a0[0]).abs() < 1e-9);
        prop_assert!((a[1] - f * a0[1]).abs() < 1e-9);
    }

    #[test]
    fn constant_field_has_no_averaging_gap(c in -3.0..3.0f64, cx in -1.0..1.0f64, cy in -1.0..1.0f64, ell in 0.05..1.0f64) {
        let gap = averaging_gap(&move |_: [f64; 2]| c, &Cell::square([cx, cy], ell), 16).unwrap();
        prop_assert!(gap.lhs <= 1e-20, "lhs {}", gap.lhs);
        prop_assert!(gap.rhs.abs() <= 1e-20);
    }

    #[test]
    fn averaging_inequality_on_random_fields(seed in 0u64..10_000, k in 2u32..5) {
        let ell = 0.5f64.powi(k as i32);
        let b = FourierField::new(seed, 8, 0.1);
        let gap = averaging_gap(&b, &Cell::square([0.0, 0.0], ell), 32).unwrap();
        let h = ell / 32.0;
        prop_assert!(gap.lhs <= gap.rhs * (1.0 + 10.0 * h), "{} > {}", gap.lhs, gap.rhs);
    }

    #[test]
    fn reduced_energy_is_phase_invariant(b in 0.1..1.5f64, theta in 0.0..std::f64::consts::TAU, natural in any::<bool>()) {
        let boundary = if natural { Boundary::Natural } else { Boundary::Dirichlet };
        let p = ReducedGLProblem::new(b, 2.0, boundary, 0.25).unwrap();
        let phase = Complex64::from_polar(1.0, theta);
        for u in p.seeds() {
            let e = bulk::reduced_energy(&u, &p);
            let v: Vec<Complex64> = u.iter().map(|z| z * phase).collect();
            prop_assert!((bulk::reduced_energy(&v, &p) - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn landau_floor_sits_below_one(h in 0.01..0.2f64) {
        let e = bulk::landau_floor(h);
        prop_assert!(e <= 1.0);
        prop_assert!((e - (1.0 - h * h / 8.0)).abs() <= h.powi(4));
    }

    #[test]
    fn lattice_cells_lie_in_the_domain(ell in 0.05..0.5f64) {
        let d = Domain::unit_square(1.0 / 64.0).unwrap();
        let lat = build_lattice(&d, ell).unwrap();
        prop_assert!(lat.covered_area() <= 1.0 + 1e-12);
        prop_assert!((lat.covered_area() - lat.len() as f64 * ell * ell).abs() < 1e-9);
        for cell in lat.cells() {
            let bb = cell.bbox();
            prop_assert!(bb.x_min >= -1e-12 && bb.x_max <= 1.0 + 1e-12 && bb.y_min >= -1e-12 && bb.y_max <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn magnetic_operator_is_hermitian(sigma in 0.5..50.0f64, c in 0.5..2.0f64) {
        let d = Domain::disk([0.0, 0.0], 1.0, 1.0 / 16.0).unwrap();
        let a = move |p: [f64; 2]| {
            let a0 = canonical_potential(p);
            [c * a0[0], c * a0[1]]
        };
        let op = spectral::assemble(&d, sigma, &a).unwrap();
        prop_assert!(op.hermitian_defect() < 1e-12);
    }

    #[test]
    fn config_numbers_round_trip(x in -1e6..1e6f64, n in 0u64..1_000_000) {
        let mut cfg = ExperimentConfig::default();
        cfg.set("h", &format!("{x:e}"));
        cfg.set("seed", &n.to_string());
        prop_assert_eq!(cfg.f64("h", 0.0).unwrap(), x);
        prop_assert_eq!(cfg.u64("seed", 0).unwrap(), n);
    }
}
