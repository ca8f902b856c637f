//! Riemann theta functions with half-integer characteristics.
//!
//! For a symmetric `d × d` matrix `τ` with negative definite real part and
//! characteristic `H = [M; N]` (`μ = M/2`, `ν = N/2`, entries in `{0, 1}`),
//!
//! `θ_τ(z; H) = Σ_{m ∈ ℤ^d} exp((m+ν)ᵀ τ (m+ν) + (m+ν)·(2z + 2πiμ))`.
//!
//! Re-indexing by `s = 2m + N` gives the weighted-lattice form
//! `Σ_{s ≡ N (mod 2)} exp(¼ sᵀτs + s·z + (πi/2) s·M)`, which is also the shape
//! of the instanton sums; both are enumerated by [`ShellEnumerator`], which
//! visits the lattice shell by shell (`‖m‖∞ = r`) and stops once a rigorous
//! bound on the discarded mass falls below the tolerance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on the truncation radius per axis.
pub const DEFAULT_RADIUS_CAP: usize = 64;

/// Default cap on the total number of lattice points visited.
pub const DEFAULT_MAX_POINTS: usize = 50_000_000;

/// Threshold below which `|θ(0; H)|` counts as vanishing in ratios.
pub const VANISHING_THRESHOLD: f64 = 1e-13;

/// Half-integer characteristic `[M; N]` with `μ = M/2`, `ν = N/2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Characteristic {
    pub m: Vec<u8>,
    pub n: Vec<u8>,
}

impl Characteristic {
    pub fn new(m: Vec<u8>, n: Vec<u8>) -> Self {
        assert_eq!(m.len(), n.len(), "characteristic halves must have equal length");
        Characteristic { m: m.into_iter().map(|v| v % 2).collect(), n: n.into_iter().map(|v| v % 2).collect() }
    }

    /// The zero characteristic in dimension `d`.
    pub fn zero(d: usize) -> Self {
        Characteristic { m: vec![0; d], n: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Odd characteristics (`M·N` odd) give theta functions odd in `z`.
    pub fn is_odd(&self) -> bool {
        self.m.iter().zip(&self.n).map(|(a, b)| (a * b) as u32).sum::<u32>() % 2 == 1
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    fn add_part(sum: &mut f64, comp: &mut f64, x: f64) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    }

    pub(crate) fn add(&mut self, x: Complex64) {
        Self::add_part(&mut self.sum.re, &mut self.comp.re, x.re);
        Self::add_part(&mut self.sum.im, &mut self.comp.im, x.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Shell-by-shell enumeration of `{s ∈ ℤ^d : s ≡ N (mod 2)}` for sums whose
/// terms are bounded by `(1 + |s|)^degree · exp(λ|s|² + b|s|)`, `λ < 0`.
#[derive(Debug, Clone)]
pub(crate) struct ShellEnumerator {
    pub parity: Vec<u8>,
    /// Upper bound on the real quadratic coefficient (largest eigenvalue).
    pub lambda: f64,
    /// Upper bound on the Euclidean norm of the real linear coefficient.
    pub linear: f64,
    /// Polynomial degree of multipliers.
    pub degree: u32,
    pub radius_cap: usize,
    pub max_points: usize,
}

/// Outcome of an enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Last completed shell radius (in `m = (s - N)/2` coordinates).
    pub radius: usize,
    /// Rigorous bound on the discarded mass.
    pub tail_bound: f64,
}

impl ShellEnumerator {
    fn dim(&self) -> usize {
        self.parity.len()
    }

    /// Bound on the total mass of shell `r`.
    fn shell_bound(&self, r: usize) -> f64 {
        let d = self.dim() as f64;
        let rf = r as f64;
        let count = 2.0 * d * (2.0 * rf + 1.0).powf(d - 1.0);
        let lo = (2.0 * rf - 1.0).max(0.0);
        let hi = d.sqrt() * (2.0 * rf + 1.0);
        let vertex = self.linear / (-2.0 * self.lambda);
        let x = lo.max(vertex);
        let expo = self.lambda * x * x + self.linear * x;
        count * (1.0 + hi).powi(self.degree as i32) * expo.exp()
    }

    /// Bound on the mass of all shells beyond `r`.
    pub(crate) fn tail_bound(&self, r: usize) -> f64 {
        let mut total = 0.0;
        let mut k = r + 1;
        loop {
            let b = self.shell_bound(k);
            total += b;
            let vertex = self.linear / (-2.0 * self.lambda);
            if (2.0 * k as f64 - 1.0) > vertex && (b <= 1e-40 * total || b == 0.0) {
                break;
            }
            k += 1;
            if k > r + 100_000 {
                return f64::INFINITY;
            }
        }
        total
    }

    /// Visit every lattice point of shell `r` (`‖m‖∞ = r`). Each point is
    /// produced once, keyed by the first axis `i` with `|m_i| = r`.
    fn visit_shell(&self, r: usize, visit: &mut impl FnMut(&[i64])) {
        let d = self.dim();
        let r = r as i64;
        let mut m = vec![0i64; d];
        let mut s = vec![0i64; d];
        if r == 0 {
            for i in 0..d {
                s[i] = self.parity[i] as i64;
            }
            visit(&s);
            return;
        }
        for first in 0..d {
            for edge in [-r, r] {
                m[first] = edge;
                self.fill(0, first, r, &mut m, &mut s, visit);
            }
        }
    }

    fn fill(&self, axis: usize, first: usize, r: i64, m: &mut [i64], s: &mut [i64], visit: &mut impl FnMut(&[i64])) {
        let d = self.dim();
        if axis == d {
            for i in 0..d {
                s[i] = 2 * m[i] + self.parity[i] as i64;
            }
            visit(s);
            return;
        }
        if axis == first {
            return self.fill(axis + 1, first, r, m, s, visit);
        }
        let bound = if axis < first { r - 1 } else { r };
        for v in -bound..=bound {
            m[axis] = v;
            self.fill(axis + 1, first, r, m, s, visit);
        }
    }

    /// Enumerate shells until the tail bound is below `tol · reference()`,
    /// where `reference` reports the magnitude the tolerance is relative to.
    pub(crate) fn run(
        &self,
        tol: f64,
        fixed_radius: Option<usize>,
        mut visit: impl FnMut(&[i64]),
        reference: impl Fn() -> f64,
    ) -> Result<Truncation> {
        if self.dim() == 0 {
            visit(&[]);
            return Ok(Truncation { radius: 0, tail_bound: 0.0 });
        }
        let mut points: usize = 0;
        let mut r = 0usize;
        loop {
            if r > self.radius_cap {
                return Err(Error::TruncationRadiusExceeded { required: r, cap: self.radius_cap });
            }
            let d = self.dim() as u32;
            let shell_points = if r == 0 { 1 } else { (2 * r + 1).saturating_pow(d) - (2 * r - 1).saturating_pow(d) };
            points = points.saturating_add(shell_points);
            if points > self.max_points {
                return Err(Error::TruncationRadiusExceeded { required: r, cap: self.radius_cap });
            }
            self.visit_shell(r, &mut visit);
            match fixed_radius {
                Some(fr) if r >= fr => return Ok(Truncation { radius: r, tail_bound: self.tail_bound(r) }),
                Some(_) => {}
                None => {
                    let tail = self.tail_bound(r);
                    if tail <= tol * reference() {
                        return Ok(Truncation { radius: r, tail_bound: tail });
                    }
                }
            }
            r += 1;
        }
    }
}

/// Check symmetry and negative definiteness of `Re τ`; returns `λ_max(Re τ)`.
pub fn check_tau(tau: &DMatrix<Complex64>) -> Result<f64> {
    let d = tau.nrows();
    if tau.ncols() != d {
        return Err(Error::Unsupported(format!("tau must be square, got {}x{}", d, tau.ncols())));
    }
    if d == 0 {
        return Ok(-1.0);
    }
    let asym = (tau - tau.transpose()).map(|v| v.norm()).max();
    if asym > 1e-12 * tau.map(|v| v.norm()).max().max(1.0) {
        return Err(Error::Unsupported(format!("tau is not symmetric (asymmetry {asym:e})")));
    }
    let re = tau.map(|v| v.re);
    let lmax = SymmetricEigen::new(0.5 * (&re + re.transpose())).eigenvalues.max();
    if lmax >= 0.0 {
        return Err(Error::NotNegativeDefinite { max_eigenvalue: lmax });
    }
    Ok(lmax)
}

/// Truncation controls for theta evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptions {
    /// Relative tolerance on the discarded lattice mass.
    pub tol: f64,
    pub radius_cap: usize,
    pub max_points: usize,
    /// Enumerate exactly this many shells instead of adaptively.
    pub fixed_radius: Option<usize>,
}

impl ThetaOptions {
    pub fn with_tol(tol: f64) -> Self {
        ThetaOptions { tol, radius_cap: DEFAULT_RADIUS_CAP, max_points: DEFAULT_MAX_POINTS, fixed_radius: None }
    }
}

/// Theta value with truncation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaValue {
    pub value: Complex64,
    pub truncation: Truncation,
}

fn quad_form(tau: &DMatrix<Complex64>, x: &[f64]) -> Complex64 {
    let d = x.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += tau[(i, j)] * (x[i] * x[j]);
        }
    }
    acc
}

fn lattice_enumerator(tau: &DMatrix<Complex64>, z: &[Complex64], ch: &Characteristic, degree: u32, opts: &ThetaOptions) -> Result<ShellEnumerator> {
    let lmax = check_tau(tau)?;
    if z.len() != tau.nrows() || ch.dim() != tau.nrows() {
        return Err(Error::Unsupported("dimension mismatch between tau, z and characteristic".into()));
    }
    let lin = z.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
    Ok(ShellEnumerator {
        parity: ch.n.clone(),
        lambda: 0.25 * lmax,
        linear: lin,
        degree,
        radius_cap: opts.radius_cap,
        max_points: opts.max_points,
    })
}

/// `θ_τ(z; H)` in the `(m + ν)` formulation.
pub fn theta_with(tau: &DMatrix<Complex64>, z: &[Complex64], ch: &Characteristic, opts: &ThetaOptions) -> Result<ThetaValue> {
    let en = lattice_enumerator(tau, z, ch, 0, opts)?;
    let d = z.len();
    let mut acc = CompensatedSum::default();
    let mut biggest: f64 = 0.0;
    let cell = std::cell::Cell::new(0.0f64);
    let mut x = vec![0.0; d];
    let truncation = en.run(
        opts.tol,
        opts.fixed_radius,
        |s| {
            // m + ν = s/2.
            for i in 0..d {
                x[i] = 0.5 * s[i] as f64;
            }
            let mut e = quad_form(tau, &x);
            for i in 0..d {
                e += x[i] * (2.0 * z[i] + Complex64::new(0.0, PI * ch.m[i] as f64));
            }
            let t = e.exp();
            biggest = biggest.max(t.norm());
            acc.add(t);
            cell.set(acc.value().norm().max(1e-3 * biggest));
        },
        || cell.get(),
    )?;
    Ok(ThetaValue { value: acc.value(), truncation })
}

/// `θ_τ(z; H)` with relative tolerance `tol`.
pub fn theta(tau: &DMatrix<Complex64>, z: &[Complex64], ch: &Characteristic, tol: f64) -> Result<Complex64> {
    Ok(theta_with(tau, z, ch, &ThetaOptions::with_tol(tol))?.value)
}

/// `θ_τ(z; H)` in the weighted-lattice formulation over `s = 2m + N`.
pub fn theta_lattice(tau: &DMatrix<Complex64>, z: &[Complex64], ch: &Characteristic, tol: f64) -> Result<Complex64> {
    let opts = ThetaOptions::with_tol(tol);
    let en = lattice_enumerator(tau, z, ch, 0, &opts)?;
    let d = z.len();
    let mut acc = CompensatedSum::default();
    let cell = std::cell::Cell::new(0.0f64);
    let mut sf = vec![0.0; d];
    en.run(
        tol,
        None,
        |s| {
            for i in 0..d {
                sf[i] = s[i] as f64;
            }
            let mut e = 0.25 * quad_form(tau, &sf);
            for i in 0..d {
                e += sf[i] * z[i] + Complex64::new(0.0, 0.5 * PI * (s[i] * ch.m[i] as i64) as f64);
            }
            acc.add(e.exp());
            cell.set(acc.value().norm());
        },
        || cell.get(),
    )?;
    Ok(acc.value())
}

/// `∂_{z_p} ∂_{z_q} θ_τ(0; H) / θ_τ(0; H)`
/// `= Σ_s s_p s_q exp(¼sᵀτs + (πi/2)s·M) / Σ_s exp(¼sᵀτs + (πi/2)s·M)`.
pub fn theta_second_ratio(tau: &DMatrix<Complex64>, ch: &Characteristic, p: usize, q: usize, tol: f64) -> Result<Complex64> {
    let d = tau.nrows();
    if p >= d || q >= d {
        return Err(Error::Unsupported(format!("derivative index out of range for dimension {d}")));
    }
    let opts = ThetaOptions::with_tol(tol);
    let zero = vec![Complex64::new(0.0, 0.0); d];
    let en = lattice_enumerator(tau, &zero, ch, 2, &opts)?;
    let mut num = CompensatedSum::default();
    let mut den = CompensatedSum::default();
    let mut biggest: f64 = 0.0;
    let cell = std::cell::Cell::new(0.0f64);
    let mut sf = vec![0.0; d];
    en.run(
        tol,
        None,
        |s| {
            for i in 0..d {
                sf[i] = s[i] as f64;
            }
            let mut e = 0.25 * quad_form(tau, &sf);
            for i in 0..d {
                e += Complex64::new(0.0, 0.5 * PI * (s[i] * ch.m[i] as i64) as f64);
            }
            let t = e.exp();
            biggest = biggest.max(t.norm());
            num.add(t * (sf[p] * sf[q]));
            den.add(t);
            cell.set(den.value().norm().max(1e-3 * biggest));
        },
        || cell.get(),
    )?;
    let den = den.value();
    if den.norm() < VANISHING_THRESHOLD * biggest.max(f64::MIN_POSITIVE) {
        return Err(Error::VanishingThetaConstant { magnitude: den.norm() });
    }
    Ok(num.value() / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cz(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tau2() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[cz(-3.0, 0.4), cz(0.7, -0.2), cz(0.7, -0.2), cz(-2.5, 1.1)])
    }

    #[test]
    fn one_dimensional_value() {
        let tau = DMatrix::from_element(1, 1, cz(-PI, 0.0));
        let v = theta(&tau, &[cz(0.0, 0.0)], &Characteristic::zero(1), 1e-15).unwrap();
        // Σ e^{-π m²} = 1.0864348112133080...
        assert!((v - cz(1.086_434_811_213_308, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn second_ratio_one_dimensional() {
        let tau = DMatrix::from_element(1, 1, cz(-PI, 0.0));
        let ch = Characteristic::new(vec![0], vec![1]);
        let v = theta_second_ratio(&tau, &ch, 0, 0, 1e-15).unwrap();
        let (mut n, mut d) = (0.0, 0.0);
        for s in (-41..=41).step_by(2) {
            let w = (-PI * (s * s) as f64 / 4.0).exp();
            n += (s * s) as f64 * w;
            d += w;
        }
        assert!((v.re - n / d).abs() < 1e-14 && v.im.abs() < 1e-15);
    }

    #[test]
    fn second_ratio_matches_finite_difference() {
        let tau = tau2();
        let ch = Characteristic::new(vec![1, 0], vec![0, 1]);
        let th = |z: [Complex64; 2]| theta(&tau, &z, &ch, 1e-15).unwrap();
        let h = 1e-3;
        let e = |i: usize, v: f64| {
            let mut z = [cz(0.0, 0.0); 2];
            z[i] = cz(v, 0.0);
            z
        };
        let t0 = th([cz(0.0, 0.0); 2]);
        let d00 = (th(e(0, h)) - 2.0 * t0 + th(e(0, -h))) / (h * h) / t0;
        let zpp = [cz(h, 0.0), cz(h, 0.0)];
        let zpm = [cz(h, 0.0), cz(-h, 0.0)];
        let zmp = [cz(-h, 0.0), cz(h, 0.0)];
        let zmm = [cz(-h, 0.0), cz(-h, 0.0)];
        let d01 = (th(zpp) - th(zpm) - th(zmp) + th(zmm)) / (4.0 * h * h) / t0;
        let r00 = theta_second_ratio(&tau, &ch, 0, 0, 1e-15).unwrap();
        let r01 = theta_second_ratio(&tau, &ch, 0, 1, 1e-15).unwrap();
        let r10 = theta_second_ratio(&tau, &ch, 1, 0, 1e-15).unwrap();
        assert!((r00 - d00).norm() < 1e-6 * r00.norm());
        assert!((r01 - d01).norm() < 1e-6 * r01.norm().max(1.0));
        assert_eq!(r01, r10);
    }

    #[test]
    fn vanishing_constant_detected() {
        // Odd characteristic: θ(0; H) = 0 identically.
        let tau = DMatrix::from_element(1, 1, cz(-2.0, 0.3));
        let ch = Characteristic::new(vec![1], vec![1]);
        assert!(ch.is_odd());
        assert!(matches!(theta_second_ratio(&tau, &ch, 0, 0, 1e-14), Err(Error::VanishingThetaConstant { .. })));
    }

    #[test]
    fn not_negative_definite_rejected() {
        let tau = DMatrix::from_row_slice(2, 2, &[cz(-1.0, 0.0), cz(2.0, 0.0), cz(2.0, 0.0), cz(-1.0, 0.0)]);
        let z = [cz(0.0, 0.0); 2];
        assert!(matches!(theta(&tau, &z, &Characteristic::zero(2), 1e-12), Err(Error::NotNegativeDefinite { .. })));
    }

    #[test]
    fn radius_cap_enforced() {
        let tau = DMatrix::from_element(1, 1, cz(-1e-6, 0.0));
        let opts = ThetaOptions { radius_cap: 8, ..ThetaOptions::with_tol(1e-14) };
        assert!(matches!(
            theta_with(&tau, &[cz(0.0, 0.0)], &Characteristic::zero(1), &opts),
            Err(Error::TruncationRadiusExceeded { .. })
        ));
    }

    #[test]
    fn quasi_periodicity_two_dimensional() {
        let tau = tau2();
        let ch = Characteristic::zero(2);
        let z = [cz(0.13, -0.4), cz(-0.2, 0.25)];
        let t = theta(&tau, &z, &ch, 1e-15).unwrap();
        for j in 0..2 {
            let mut zs = z;
            zs[j] += cz(0.0, PI);
            assert!((theta(&tau, &zs, &ch, 1e-15).unwrap() - t).norm() < 1e-12 * t.norm());
            let mut zt = z;
            for i in 0..2 {
                zt[i] += tau[(i, j)];
            }
            let lhs = theta(&tau, &zt, &ch, 1e-15).unwrap();
            let rhs = (-2.0 * z[j] - tau[(j, j)]).exp() * t;
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn shell_enumeration_visits_each_point_once() {
        let en = ShellEnumerator { parity: vec![1, 0, 1], lambda: -1.0, linear: 0.0, degree: 0, radius_cap: 10, max_points: 1 << 30 };
        let mut seen = std::collections::HashSet::new();
        for r in 0..4 {
            en.visit_shell(r, &mut |s: &[i64]| {
                assert!(seen.insert(s.to_vec()));
            });
        }
        assert_eq!(seen.len(), 7usize.pow(3));
        assert!(seen.iter().all(|s| s[0] % 2 != 0 && s[1] % 2 == 0 && s[2] % 2 != 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn formulations_agree_and_parity(a in -4.0f64..-1.0, b in -0.5f64..0.5, c in -4.0f64..-1.0, im in -1.0f64..1.0,
                                         x in -0.5f64..0.5, y in -0.5f64..0.5, m0 in 0u8..2, m1 in 0u8..2, n0 in 0u8..2, n1 in 0u8..2) {
            let tau = DMatrix::from_row_slice(2, 2, &[cz(a, im), cz(b, 0.1), cz(b, 0.1), cz(c, -im)]);
            let ch = Characteristic::new(vec![m0, m1], vec![n0, n1]);
            let z = [cz(x, y), cz(y, -x)];
            let t1 = theta(&tau, &z, &ch, 1e-15).unwrap();
            let t2 = theta_lattice(&tau, &z, &ch, 1e-15).unwrap();
            // The two formulations differ only by re-indexing.
            prop_assert!((t1 - t2).norm() < 1e-12 * t1.norm().max(1.0));
            // θ(-z; H) = (-1)^{M·N} θ(z; H).
            let zm = [-z[0], -z[1]];
            let sign = if ch.is_odd() { -1.0 } else { 1.0 };
            let tm = theta(&tau, &zm, &ch, 1e-15).unwrap();
            prop_assert!((tm - sign * t1).norm() < 1e-12 * t1.norm().max(1.0));
        }
    }
}
