use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;

use ising_boson::boson::{Engine, FieldOperator, Insertion};
use ising_boson::geometry::{CircularDomain, Scene, SceneFile, Tolerances};
use ising_boson::ising::{ising_correlation_squared, transported_correlation_squared, IsingField, IsingInsertion, MobiusMap, PARITY_DIAGNOSTIC};
use ising_boson::verify::{half_plane_cos_cos, pfaffian_det_residual, run_suites, SUITES};
use ising_boson::{Error, ALPHA};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenes").join(name)
}

#[test]
fn bundled_scene_files_parse_and_evaluate() {
    for name in ["half_plane_spins.toml", "half_plane_cos.toml", "disk_spin_energy.toml", "annulus_spins.toml", "parity_violating.toml"] {
        let text = std::fs::read_to_string(scene_path(name)).unwrap();
        let file = SceneFile::parse(&text).unwrap();
        let engine = Engine::new(&file.scene).unwrap();
        assert!(!file.insertions.is_empty(), "{name}");
        if let Some(fields) = file.insertions.iter().map(|i| IsingField::from_name(&i.field).map(|f| IsingInsertion::new(i.z, f))).collect::<Option<Vec<_>>>() {
            let r = ising_correlation_squared(&engine, &fields).unwrap();
            assert!(r.value.re.is_finite(), "{name}");
            if name == "parity_violating.toml" {
                assert_eq!(r.diagnostic.as_deref(), Some(PARITY_DIAGNOSTIC));
            }
        }
    }
}

#[test]
fn half_plane_cosine_pair_matches_closed_form() {
    let hp = Engine::new(&Scene::half_plane(Tolerances::default())).unwrap();
    let g = c(SQRT_2 / 2.0, 0.0);
    let v = hp.correlate(&[Insertion::new(c(0.0, 1.0), FieldOperator::Cos(g)), Insertion::new(c(0.0, 2.0), FieldOperator::Cos(g))]).unwrap();
    assert!((v.value.re - half_plane_cos_cos(c(0.0, 1.0), c(0.0, 2.0))).abs() < 1e-12);
    assert!((v.value.re - 0.686590).abs() < 5e-6);
}

#[test]
fn verification_table_is_green() {
    let rows = run_suites(None);
    let names: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.suite).collect();
    assert_eq!(names.len(), SUITES.len());
    for r in &rows {
        assert!(r.passed(), "{}/{}: {} >= {}", r.suite, r.name, r.residual, r.tolerance);
    }
}

#[test]
fn errors_carry_codes() {
    let disk = Engine::new(&Scene::wired(CircularDomain::unit_disk()).unwrap()).unwrap();
    let e = ising_correlation_squared(&disk, &[IsingInsertion::new(c(1.5, 0.0), IsingField::Epsilon)]).unwrap_err();
    assert!(matches!(e, Error::OutsideDomain { .. }));
    assert!(e.is_validation());
    let e = ising_correlation_squared(&disk, &[IsingInsertion::new(c(0.1, 0.0), IsingField::Sigma), IsingInsertion::new(c(0.1, 0.0), IsingField::Sigma)]).unwrap_err();
    assert!(matches!(e, Error::CoincidentPoints { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spin_pair_is_positive_and_symmetric(r1 in 0.0..0.85f64, t1 in 0.0..(2.0 * PI), r2 in 0.0..0.85f64, t2 in 0.0..(2.0 * PI)) {
        let (z, w) = (Complex64::from_polar(r1, t1), Complex64::from_polar(r2, t2));
        prop_assume!((z - w).norm() > 1e-2);
        let e = Engine::new(&Scene::wired(CircularDomain::unit_disk()).unwrap()).unwrap();
        let a = ising_correlation_squared(&e, &[IsingInsertion::new(z, IsingField::Sigma), IsingInsertion::new(w, IsingField::Sigma)]).unwrap().value;
        let b = ising_correlation_squared(&e, &[IsingInsertion::new(w, IsingField::Sigma), IsingInsertion::new(z, IsingField::Sigma)]).unwrap().value;
        prop_assert!(a.re > 0.0);
        prop_assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn scaling_covariance_on_annulus(scale in 0.2..5.0f64, t in 0.0..(2.0 * PI)) {
        let scene = Scene::wired(CircularDomain::annulus(0.3)).unwrap();
        let fields = [
            IsingInsertion::new(Complex64::from_polar(0.6, t), IsingField::Sigma),
            IsingInsertion::new(Complex64::from_polar(0.7, t + 2.0), IsingField::Sigma),
            IsingInsertion::new(Complex64::from_polar(0.5, t + 4.0), IsingField::Epsilon),
        ];
        let direct = ising_correlation_squared(&Engine::new(&scene).unwrap(), &fields).unwrap().value;
        let moved = transported_correlation_squared(&scene, &MobiusMap::scaling(scale).unwrap(), &fields).unwrap().value;
        prop_assert!((direct - moved).norm() < 1e-8 * direct.norm());
    }

    #[test]
    fn pin_shift_by_alpha_is_invisible(x in -0.5..0.5f64, y in -0.5..0.5f64, k in -3i32..=3) {
        let scene = Scene::wired(CircularDomain::annulus(0.25)).unwrap();
        let z = c(x, y);
        prop_assume!(scene.check_bulk_points(&[z, c(0.0, 0.7)]).is_ok() && scene.model.boundary_distance(z) > 0.05 && (z - c(0.0, 0.7)).norm() > 0.05);
        let e = Engine::new(&scene).unwrap();
        let fields = [IsingInsertion::new(z, IsingField::Sigma), IsingInsertion::new(c(0.0, 0.7), IsingField::Sigma)];
        let a = ising_correlation_squared(&e, &fields).unwrap().value;
        let b = ising_correlation_squared(&e.with_pin_shift(k as f64 * ALPHA), &fields).unwrap().value;
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn pfaffian_squares_to_determinant(entries in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36)) {
        let a = DMatrix::from_fn(6, 6, |i, j| c(entries[6 * i + j].0, entries[6 * i + j].1));
        let skew = &a - a.transpose();
        prop_assert!(pfaffian_det_residual(&skew).unwrap() < 1e-10);
    }
}
