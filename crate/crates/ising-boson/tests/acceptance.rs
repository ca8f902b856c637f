//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that the per-criterion lines are always
//! printed; the process exits non-zero if any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;

use ising_boson::boson::{Engine, FieldOperator, Insertion};
use ising_boson::geometry::{BoundaryArc, BoundaryData, Circle, CircularDomain, Condition, Scene, Tolerances};
use ising_boson::ising::{
    fermion_pair_ratio, ising_correlation_squared, parity_ok, transported_correlation_squared, IsingField, IsingInsertion, MobiusMap, PARITY_DIAGNOSTIC,
};
use ising_boson::theta::Characteristic;
use ising_boson::verify::{
    annulus_tau_residual, half_plane_cos_cos, hejhal_fay_torus_residual, ope_dphi_dbarphi_slope, ope_dphi_exp_slope, ope_exponential_slope,
    ope_scenes, ope_trig_coefficients, pairing_identity_residual, random_tau, theta_doubling_residual, theta_quasi_periodicity_residual,
    torus_moduli, torus_sample_pairs, TorusSpec, EVEN_CHARACTERISTICS,
};
use ising_boson::{Result, ALPHA};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ins(z: Complex64, f: IsingField) -> IsingInsertion {
    IsingInsertion::new(z, f)
}

/// Outcome of one criterion: pass flag and a one-line summary.
struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn worst(worst: f64, tol: f64, what: &str) -> Outcome {
        Outcome { passed: worst.is_finite() && worst < tol, detail: format!("{what}: worst {worst:.3e} (tol {tol:.0e})") }
    }
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken evaluation cannot pass.
    values.into_iter().fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn wired_disk() -> Scene {
    Scene::wired(CircularDomain::unit_disk()).unwrap()
}

fn disk_with_free_arc() -> Scene {
    let arcs = vec![BoundaryArc::new(0, 0.4, 2.2, Condition::Free), BoundaryArc::new(0, 2.2, 0.4 + 2.0 * PI, Condition::Wired)];
    Scene::circular(CircularDomain::unit_disk(), BoundaryData::new(arcs), Tolerances::default()).unwrap()
}

fn annulus_with_free_arc(r: f64) -> Scene {
    let arcs = vec![
        BoundaryArc::new(0, 1.0, 2.5, Condition::Free),
        BoundaryArc::new(0, 2.5, 1.0 + 2.0 * PI, Condition::Wired),
        BoundaryArc::full(1, Condition::Wired),
    ];
    Scene::circular(CircularDomain::annulus(r), BoundaryData::new(arcs), Tolerances::default()).unwrap()
}

fn two_holes() -> Scene {
    let d = CircularDomain::new(Circle::new(c(0.0, 0.0), 1.0), vec![Circle::new(c(0.45, 0.0), 0.2), Circle::new(c(-0.4, -0.1), 0.22)]);
    let arcs = vec![
        BoundaryArc::new(0, 0.3, 1.9, Condition::Free),
        BoundaryArc::new(0, 1.9, 0.3 + 2.0 * PI, Condition::Wired),
        BoundaryArc::full(1, Condition::Wired),
        BoundaryArc::full(2, Condition::Wired),
    ];
    Scene::circular(d, BoundaryData::new(arcs), Tolerances::default()).unwrap()
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Result<Outcome> {
    let mut worst = Vec::new();
    for nu in torus_moduli() {
        let t = TorusSpec::new(nu)?;
        let pairs = torus_sample_pairs(&t, 20, 101);
        for h in EVEN_CHARACTERISTICS {
            worst.push(hejhal_fay_torus_residual(&t, h, &pairs)?);
        }
    }
    Ok(Outcome::worst(max(worst), 1e-8, "genus-one Hejhal-Fay, 3 moduli x 3 even characteristics x 20 pairs"))
}

fn criterion_2() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairing = Vec::new();
    for n in [4, 4, 4, 6, 6] {
        let pts: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        pairing.push(pairing_identity_residual(&pts)?);
    }
    let big = Engine::new(&Scene::wired(CircularDomain::new(Circle::new(c(0.0, 0.0), 1e5), vec![]))?)?;
    let mut ratio = Vec::new();
    for (z, w) in [(c(0.3, 0.1), c(-0.2, 0.4)), (c(1.5, -2.0), c(0.7, 0.9)), (c(-3.0, 0.2), c(2.0, -1.0))] {
        let r = fermion_pair_ratio(&big, z, w, &[])?;
        ratio.push(rel(r, (2.0 / (z - w)).powi(2)));
    }
    let (p, r) = (max(pairing), max(ratio));
    Ok(Outcome {
        passed: p < 1e-10 && r < 1e-8,
        detail: format!("Pf^2 = Hf on 3 four-point and 2 six-point sets: {p:.3e} (tol 1e-10); fermion ratio vs (2/(z-w))^2 in R=1e5 disk: {r:.3e} (tol 1e-8)"),
    })
}

fn criterion_3() -> Result<Outcome> {
    let mut slopes = Vec::new();
    let mut coeffs = Vec::new();
    for (_, engine, z2, others) in ope_scenes()? {
        slopes.push((ope_exponential_slope(&engine, c(0.3, 0.4), c(-0.7, 0.2), z2, &others)? - 2.0).abs());
        slopes.push((ope_dphi_exp_slope(&engine, c(0.6, -0.3), z2, &others)? - 1.0).abs());
        slopes.push((ope_dphi_dbarphi_slope(&engine, z2, &others)? - 1.0).abs());
        coeffs.extend(ope_trig_coefficients(&engine, z2, &others)?.iter().map(|k| k.residual()));
    }
    let (s, k) = (max(slopes), max(coeffs));
    Ok(Outcome {
        passed: s < 0.1 && k < 1e-4,
        detail: format!("disk and annulus: slope deviation {s:.3e} (tol 1e-1), sin/cos coefficient error {k:.3e} (tol 1e-4)"),
    })
}

/// A random bosonic scene: one or two derivative fields and up to two
/// exponential-type fields, at least two insertions in total.
fn random_mixed_scene(rng: &mut ChaCha8Rng, domains: &[Engine]) -> (usize, Vec<Insertion>) {
    let which = rng.gen_range(0..domains.len());
    let scene = domains[which].scene();
    let derivatives = rng.gen_range(1..=2);
    let n = rng.gen_range(derivatives.max(2)..=derivatives + 2);
    let mut pts: Vec<Complex64> = Vec::new();
    while pts.len() < n {
        let z = match which {
            0 => c(rng.gen_range(-1.5..1.5), rng.gen_range(0.4..2.0)),
            _ => Complex64::from_polar(rng.gen_range(0.0..0.8f64).sqrt(), rng.gen_range(0.0..2.0 * PI)),
        };
        let clear = scene.check_bulk_points(&[z]).is_ok() && scene.model.boundary_distance(z) > 0.15 && pts.iter().all(|p| (p - z).norm() > 0.3);
        if clear {
            pts.push(z);
        }
    }
    let gamma = |rng: &mut ChaCha8Rng| c(rng.gen_range(0.2..0.9), rng.gen_range(-0.3..0.3));
    let mut out = Vec::new();
    for (k, z) in pts.into_iter().enumerate() {
        let op = if k < derivatives {
            [FieldOperator::DPhi, FieldOperator::DBarPhi, FieldOperator::GradSquared][rng.gen_range(0..3)]
        } else {
            match rng.gen_range(0..3) {
                0 => FieldOperator::NormalExp(gamma(rng)),
                1 => FieldOperator::Cos(gamma(rng)),
                _ => FieldOperator::Sin(gamma(rng)),
            }
        };
        out.push(Insertion::new(z, op));
    }
    (which, out)
}

fn criterion_4() -> Result<Outcome> {
    let domains = vec![
        Engine::new(&Scene::half_plane(Tolerances::default()))?,
        Engine::new(&wired_disk())?,
        Engine::new(&disk_with_free_arc())?,
        Engine::new(&Scene::wired(CircularDomain::annulus(0.3))?)?,
        Engine::new(&annulus_with_free_arc(0.25))?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = Vec::new();
    let mut skipped = 0;
    while worst.len() < 50 {
        let (d, fields) = random_mixed_scene(&mut rng, &domains);
        let a = domains[d].correlate(&fields)?.value;
        let b = domains[d].correlate_fd_oracle(&fields)?.value;
        // Relative error is meaningless at an exact zero of the correlation
        // (e.g. a ∂Φ one-point function on a symmetric domain).
        if a.norm() < 1e-12 && b.norm() < 1e-6 {
            skipped += 1;
            continue;
        }
        worst.push(rel(a, b));
    }
    Ok(Outcome::worst(max(worst), 1e-5, &format!("50 random mixed scenes, closed form vs finite differences ({skipped} exact zeros redrawn)")))
}

fn criterion_5() -> Result<Outcome> {
    let worst = max([0.3, 0.5, 0.7].into_iter().map(annulus_tau_residual).collect::<Result<Vec<_>>>()?);
    Ok(Outcome::worst(worst, 1e-8, "annulus period matrix vs -pi^2/log(1/r), r = 0.3, 0.5, 0.7 (relative)"))
}

fn criterion_6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = Vec::new();
    for trial in 0..12 {
        let d = 1 + trial % 4;
        let tau = random_tau(d, &mut rng);
        let ch = Characteristic::new((0..d).map(|_| rng.gen_range(0..2)).collect(), (0..d).map(|_| rng.gen_range(0..2)).collect());
        let z: Vec<Complex64> = (0..d).map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0))).collect();
        worst.push(theta_quasi_periodicity_residual(&tau, &ch, &z)?);
        worst.push(theta_doubling_residual(&tau, &ch, &z)?);
    }
    Ok(Outcome::worst(max(worst), 1e-10, "theta quasi-periodicity and truncation doubling, 12 random (tau, H, z), d <= 4"))
}

fn criterion_7() -> Result<Outcome> {
    let hp = Engine::new(&Scene::half_plane(Tolerances::default()))?;
    let g = c(SQRT_2 / 2.0, 0.0);
    let mut worst = Vec::new();
    for (z, w) in [(c(0.0, 1.0), c(0.0, 2.0)), (c(-0.7, 0.4), c(1.1, 1.3)), (c(2.0, 0.05), c(2.3, 0.3))] {
        let cc = hp.correlate(&[Insertion::new(z, FieldOperator::Cos(g)), Insertion::new(w, FieldOperator::Cos(g))])?.value;
        let formula = half_plane_cos_cos(z, w);
        worst.push((cc - formula).norm());
        let ss = ising_correlation_squared(&hp, &[ins(z, IsingField::Sigma), ins(w, IsingField::Sigma)])?.value;
        worst.push((ss - 2.0 * formula).norm());
    }
    for y in [0.1, 0.5, 1.0, 4.0] {
        let e = ising_correlation_squared(&hp, &[ins(c(0.3, y), IsingField::Epsilon)])?.value;
        worst.push((e - 1.0 / (4.0 * y * y)).norm() * y * y);
    }
    let cc = hp.correlate(&[Insertion::new(c(0.0, 1.0), FieldOperator::Cos(g)), Insertion::new(c(0.0, 2.0), FieldOperator::Cos(g))])?.value;
    let quoted = (cc.re - 0.686590).abs();
    let w = max(worst);
    Ok(Outcome {
        passed: w < 1e-10 && quoted < 5e-6,
        detail: format!("half-plane cos-cos / spin-pair formula and energy one-point: {w:.3e} (tol 1e-10); value at (i, 2i) = {:.6} vs quoted 0.686590", cc.re),
    })
}

fn criterion_8() -> Result<Outcome> {
    let fields = [ins(c(0.25, 0.3), IsingField::Sigma), ins(c(-0.2, -0.35), IsingField::Sigma), ins(c(0.5, -0.45), IsingField::Epsilon)];
    let disk = wired_disk();
    let ann = Scene::wired(CircularDomain::annulus(0.15))?;
    let ann_fields = [ins(c(0.55, 0.3), IsingField::Sigma), ins(c(-0.3, -0.5), IsingField::Sigma), ins(c(0.1, 0.7), IsingField::Epsilon)];
    let free = disk_with_free_arc();
    let cases: Vec<(&Scene, &[IsingInsertion], MobiusMap)> = vec![
        (&disk, &fields, MobiusMap::scaling(0.37)?),
        (&disk, &fields, MobiusMap::scaling(4.2)?),
        (&free, &fields, MobiusMap::affine(c(1.3, -0.8), c(0.4, 2.0))?),
        (&disk, &fields, MobiusMap::disk_to_half_plane()),
        (&free, &fields, MobiusMap::new(c(2.0, 1.0), c(0.5, 0.0), c(1.0, 0.0), c(-2.5, 1.0))?),
        (&ann, &ann_fields, MobiusMap::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(-0.05, 0.03))?),
    ];
    let mut cov = Vec::new();
    for (scene, f, map) in cases {
        let direct = ising_correlation_squared(&Engine::new(scene)?, f)?.value;
        let t = transported_correlation_squared(scene, &map, f)?.value;
        cov.push(rel(direct, t));
    }
    // Short-distance exponent of ⟨σσ⟩² at the centre of a wired disk.
    let e = Engine::new(&disk)?;
    let r: Vec<f64> = (0..5).map(|k| 1e-5 * 10f64.powf(-0.25 * k as f64)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &d in &r {
        let v = ising_correlation_squared(&e, &[ins(c(-d / 2.0, 0.0), IsingField::Sigma), ins(c(d / 2.0, 0.0), IsingField::Sigma)])?.value.re;
        xs.push(d.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let c8 = max(cov);
    Ok(Outcome {
        passed: c8 < 1e-8 && (slope + 0.5).abs() < 1e-3,
        detail: format!("scaling/affine/Mobius covariance: {c8:.3e} (tol 1e-8); fitted spin-pair exponent {slope:.6} (target -0.5 +/- 1e-3)"),
    })
}

fn criterion_9() -> Result<Outcome> {
    let mut worst = Vec::new();
    let cases: Vec<(Scene, Vec<IsingInsertion>)> = vec![
        (disk_with_free_arc(), vec![ins(c(0.1, -0.2), IsingField::Sigma), ins(Complex64::from_polar(1.0, 4.0), IsingField::BoundarySigma)]),
        (disk_with_free_arc(), vec![ins(c(0.3, 0.2), IsingField::Sigma), ins(c(-0.4, 0.1), IsingField::Sigma), ins(c(0.0, -0.5), IsingField::Epsilon)]),
        (annulus_with_free_arc(0.3), vec![ins(c(0.6, 0.1), IsingField::Mu), ins(c(-0.5, 0.4), IsingField::Mu)]),
        (annulus_with_free_arc(0.3), vec![ins(c(0.6, 0.1), IsingField::Psi), ins(c(-0.5, 0.4), IsingField::PsiStar)]),
        (two_holes(), vec![ins(c(0.1, 0.6), IsingField::Sigma), ins(c(0.0, -0.6), IsingField::Sigma), ins(c(-0.75, 0.3), IsingField::Epsilon)]),
        (two_holes(), vec![ins(c(0.1, 0.6), IsingField::Psi), ins(c(0.0, -0.6), IsingField::Psi)]),
    ];
    for (scene, fields) in &cases {
        let e = Engine::new(scene)?;
        let base = ising_correlation_squared(&e, fields)?.value;
        for k in [1.0, -1.0, 2.0, 5.0] {
            let shifted = ising_correlation_squared(&e.with_pin_shift(k * ALPHA), fields)?.value;
            worst.push((shifted - base).norm());
        }
    }
    let e = Engine::new(&two_holes())?;
    let others = [ins(c(0.1, 0.6), IsingField::Sigma), ins(c(0.0, -0.6), IsingField::Sigma)];
    let base = fermion_pair_ratio(&e, c(-0.1, 0.2), c(0.75, 0.4), &others)?;
    for k in [1.0, -3.0] {
        worst.push((fermion_pair_ratio(&e.with_pin_shift(k * ALPHA), c(-0.1, 0.2), c(0.75, 0.4), &others)? - base).norm());
    }
    Ok(Outcome::worst(max(worst), 1e-12, "pin shifts by multiples of alpha, 6 scenes and a fermion ratio (absolute change)"))
}

fn criterion_10() -> Result<Outcome> {
    let kinds = [IsingField::Sigma, IsingField::Mu, IsingField::Epsilon, IsingField::Psi, IsingField::PsiStar, IsingField::BoundarySigma];
    let bulk = [c(0.3, 0.2), c(-0.4, 0.1), c(0.0, -0.5), c(0.2, 0.55)];
    let edge = [Complex64::from_polar(1.0, 3.5), Complex64::from_polar(1.0, 5.0), Complex64::from_polar(1.0, 4.2), Complex64::from_polar(1.0, 5.8)];
    let engines = [Engine::new(&disk_with_free_arc())?, Engine::new(&wired_disk())?];
    let (mut violating, mut bad) = (0, 0);
    // Every field list of length 1..=3 over the six kinds.
    for len in 1..=3u32 {
        for code in 0..6usize.pow(len) {
            let mut fields = Vec::new();
            let mut rest = code;
            for k in 0..len as usize {
                let f = kinds[rest % 6];
                rest /= 6;
                let z = if f == IsingField::BoundarySigma { edge[k] } else { bulk[k] };
                fields.push(ins(z, f));
            }
            if parity_ok(&fields) {
                continue;
            }
            for e in &engines {
                violating += 1;
                let r = ising_correlation_squared(e, &fields)?;
                if r.value != c(0.0, 0.0) || r.diagnostic.as_deref() != Some(PARITY_DIAGNOSTIC) {
                    bad += 1;
                }
            }
        }
    }
    Ok(Outcome {
        passed: bad == 0 && violating > 0,
        detail: format!("{violating} parity-violating field lists: {bad} not exactly zero with diagnostic"),
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("genus-one Hejhal-Fay identity", criterion_1),
        ("Pfaffian/Hafnian pairing and fermion ratio", criterion_2),
        ("OPE leading behaviour", criterion_3),
        ("derivative fields vs finite differences", criterion_4),
        ("annulus period", criterion_5),
        ("theta function consistency", criterion_6),
        ("half-plane closed forms", criterion_7),
        ("conformal covariance and scaling exponent", criterion_8),
        ("pin independence", criterion_9),
        ("parity selection rule", criterion_10),
    ];
    let outcomes: Vec<Result<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failures = 0;
    for (k, ((name, _), outcome)) in criteria.iter().zip(outcomes).enumerate() {
        let (passed, detail) = match outcome {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {}: {e}", e.code())),
        };
        failures += usize::from(!passed);
        println!("criterion {:>2}: {} - {name}: {detail}", k + 1, if passed { "PASS" } else { "FAIL" });
    }
    if failures == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 10 criteria failed");
        ExitCode::FAILURE
    }
}
